"""Canonical single-style pretty-printer for muPVS ASTs.

Output re-parses to a structurally equal tree: parentheses are inserted
exactly where operator precedence requires, binders are parenthesized in
operand position, and declarations render one per line.
"""

from __future__ import annotations

from fractions import Fraction

from . import syntax as S

# Precedence of each construct; a child is parenthesized when its own
# precedence is below what its slot requires. Binders and LET extend to
# the end of the expression, so they only stand bare in delimited slots.
_INFIX_PREC = {"IFF": 1, "IMPLIES": 2, "OR": 3, "AND": 4,
               "=": 6, "/=": 6, "<": 6, "<=": 6, ">": 6, ">=": 6,
               "+": 7, "-": 7, "*": 8, "/": 8}
_RIGHT_ASSOC = {"IMPLIES"}


def _prec(expr: S.Expr) -> int:
    if isinstance(expr, (S.Binder, S.LetExpr)):
        return 0
    if isinstance(expr, S.InfixOp):
        return _INFIX_PREC[expr.op]
    if isinstance(expr, S.PrefixOp):
        return 5 if expr.op == "NOT" else 9
    return 10


def print_params(params: tuple[S.Param, ...]) -> str:
    """Render a parameter list, grouping runs of the same type: x, y: int."""
    groups: list[tuple[list[str], S.TypeExpr]] = []
    for p in params:
        if groups and groups[-1][1] == p.type:
            groups[-1][0].append(p.name)
        else:
            groups.append(([p.name], p.type))
    return ", ".join(f"{', '.join(names)}: {print_type(ty)}" for names, ty in groups)


def pretty_print(node: S.Node) -> str:
    """Render any AST node in the canonical style."""
    if isinstance(node, S.SourceFile):
        return "\n\n".join(pretty_print(t) for t in node.theories) + "\n"
    if isinstance(node, S.Theory):
        lines = [f"{node.name}: THEORY", "BEGIN"]
        for imp in node.importings:
            lines.append(f"  IMPORTING {imp.name}")
        for decl in node.decls:
            lines.append(f"  {pretty_print(decl)}")
        lines.append(f"END {node.name}")
        return "\n".join(lines)
    if isinstance(node, S.Importing):
        return f"IMPORTING {node.name}"
    if isinstance(node, S.TypeDecl):
        if node.definition is None:
            return f"{node.name}: TYPE"
        return f"{node.name}: TYPE = {print_type(node.definition)}"
    if isinstance(node, S.ConstDecl):
        head = f"{node.name}: {print_type(node.type)}"
        return head if node.body is None else f"{head} = {print_expr(node.body)}"
    if isinstance(node, S.FunDef):
        rec = "RECURSIVE " if node.recursive else ""
        return (
            f"{node.name}({print_params(node.params)}): {rec}{print_type(node.return_type)}"
            f" = {print_expr(node.body)}"
        )
    if isinstance(node, S.FormulaDecl):
        return f"{node.name}: {node.kind.value} {print_expr(node.body)}"
    if isinstance(node, S.Param):
        return f"{node.name}: {print_type(node.type)}"
    if isinstance(node, (S.BaseType, S.NamedType, S.FunctionType, S.RecordType, S.SubtypeType)):
        return print_type(node)
    if isinstance(node, S.FieldDecl):
        return f"{node.name}: {print_type(node.type)}"
    if isinstance(node, S.FieldInit):
        return f"{node.name} := {print_expr(node.value)}"
    return print_expr(node)  # type: ignore[arg-type]


def print_type(ty: S.TypeExpr) -> str:
    if isinstance(ty, (S.BaseType, S.NamedType)):
        return ty.name
    if isinstance(ty, S.FunctionType):
        params = ", ".join(print_type(p) for p in ty.params)
        return f"[{params} -> {print_type(ty.result)}]"
    if isinstance(ty, S.RecordType):
        fields = ", ".join(f"{f.name}: {print_type(f.type)}" for f in ty.fields)
        return f"[# {fields} #]"
    if isinstance(ty, S.SubtypeType):
        return f"{{{ty.var}: {print_type(ty.base)} | {print_expr(ty.predicate)}}}"
    raise TypeError(f"not a type node: {ty!r}")


def format_number(value: int | Fraction) -> str:
    """Decimal text when the value has one, else numerator/denominator."""
    if isinstance(value, int) or value.denominator == 1:
        return str(int(value))
    if value < 0:
        return f"-{format_number(-value)}"
    num, den = value.numerator, value.denominator
    # Finite decimal iff the denominator is of the form 2^a * 5^b.
    twos = fives = 0
    d = den
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{num}/{den}"  # only reachable for synthesized literals
    digits = max(twos, fives)
    scaled = str(num * 10**digits // den).rjust(digits + 1, "0")
    return f"{scaled[:-digits]}.{scaled[-digits:]}"


def print_expr(expr: S.Expr, min_prec: int = 0) -> str:
    text = _expr_text(expr)
    if _prec(expr) < min_prec:
        return f"({text})"
    return text


def _expr_text(expr: S.Expr) -> str:
    if isinstance(expr, S.NumberLit):
        v = expr.value
        return f"-{format_number(-v)}" if v < 0 else format_number(v)
    if isinstance(expr, S.StringLit):
        return f'"{expr.value}"'
    if isinstance(expr, S.BoolLit):
        return "TRUE" if expr.value else "FALSE"
    if isinstance(expr, S.NameRef):
        return expr.name
    if isinstance(expr, S.InfixOp):
        prec = _INFIX_PREC[expr.op]
        if expr.op in _RIGHT_ASSOC:
            left = print_expr(expr.left, prec + 1)
            right = print_expr(expr.right, prec)
        elif prec == 6:  # comparisons are non-associative
            left = print_expr(expr.left, prec + 1)
            right = print_expr(expr.right, prec + 1)
        else:
            left = print_expr(expr.left, prec)
            right = print_expr(expr.right, prec + 1)
        return f"{left} {expr.op} {right}"
    if isinstance(expr, S.PrefixOp):
        if expr.op == "NOT":
            return f"NOT {print_expr(expr.operand, 5)}"
        return f"-{print_expr(expr.operand, 9)}"
    if isinstance(expr, S.Apply):
        args = ", ".join(print_expr(a) for a in expr.args)
        return f"{print_expr(expr.fn, 10)}({args})"
    if isinstance(expr, S.FieldAccess):
        return f"{print_expr(expr.expr, 10)}`{expr.field}"
    if isinstance(expr, S.IfExpr):
        return (
            f"IF {print_expr(expr.cond)} THEN {print_expr(expr.then)}"
            f" ELSE {print_expr(expr.els)} ENDIF"
        )
    if isinstance(expr, S.Binder):
        return f"{expr.kind.value} ({print_params(expr.params)}): {print_expr(expr.body)}"
    if isinstance(expr, S.LetExpr):
        ty = f": {print_type(expr.type)}" if expr.type is not None else ""
        return f"LET {expr.var}{ty} = {print_expr(expr.value)} IN {print_expr(expr.body)}"
    if isinstance(expr, S.RecordLit):
        fields = ", ".join(f"{f.name} := {print_expr(f.value)}" for f in expr.fields)
        return f"(# {fields} #)"
    raise TypeError(f"not an expression node: {expr!r}")
