"""Name resolution, type inference, and proof-obligation (TCC) generation.

The checker is total: problems become diagnostics, never exceptions. Two
TCC kinds exist. A division whose divisor is not a nonzero numeric
literal yields a nonzero-divisor obligation. Ascribing an expression to
a subtype (including the built-in narrowing int -> nat, whose predicate
is `e >= 0`) yields a subtype obligation with the predicate instantiated
at the expression. Obligations are closed by universally quantifying all
context variables in scope at the offending expression, in binding
order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

from . import syntax as S
from . import typesys as T
from .positions import Diagnostic, Range, Severity
from .typesys import (
    BOOL,
    ERROR,
    INT,
    NAT,
    REAL,
    STRING,
    FunctionValue,
    RecordValue,
    SubtypeValue,
    TypeValue,
    format_type,
)

_BASE_VALUES = {"bool": BOOL, "int": INT, "nat": NAT, "real": REAL, "string": STRING}

# Binding kinds that denote values (usable in expressions).
VALUE_KINDS = frozenset({"const", "function", "param", "var", "let", "skolem"})

_BOOL_OPS = frozenset({"AND", "OR", "IMPLIES", "IFF"})
_ORDER_OPS = frozenset({"<", "<=", ">", ">="})
_ARITH_OPS = frozenset({"+", "-", "*", "/"})


@dataclass(frozen=True)
class Binding:
    """One name introduction: a declaration, parameter, or local variable."""

    name: str
    kind: str  # type | const | function | formula | param | var | let | skolem
    uri: str
    theory: str | None
    def_range: Range
    type: TypeValue | None

    def describe(self) -> str:
        where = self.theory if self.theory else "local"
        return f"{self.kind} ({where})"


@dataclass
class Tcc:
    """A proof obligation attached to a declaration."""

    id: str
    kind: str  # "nonzero-divisor" | "subtype"
    obligation: S.Expr
    origin: Range
    status: str = "unproved"


@dataclass
class TypecheckResult:
    theory: str
    uri: str
    typed_decls: dict[str, TypeValue] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    tccs: list[Tcc] = field(default_factory=list)
    # Every resolved name occurrence (uses and binding sites), visit order.
    occurrences: list[tuple[Range, Binding]] = field(default_factory=list)
    # Theory-level bindings in source order, for importers and the index.
    exports: list[Binding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(d.severity is Severity.ERROR for d in self.diagnostics)


class CheckError(Exception):
    """Raised by the strict entry points (infer_type) on the first error."""

    def __init__(self, message: str, rng: Range):
        super().__init__(message)
        self.message = message
        self.range = rng


class Scope:
    """A chain of name tables, innermost last in the chain walk."""

    __slots__ = ("parent", "table")

    def __init__(self, parent: "Scope | None" = None):
        self.parent = parent
        self.table: dict[str, list[Binding]] = {}

    def child(self) -> "Scope":
        return Scope(self)

    def bind(self, binding: Binding) -> None:
        self.table.setdefault(binding.name, []).append(binding)

    def candidates(self, name: str) -> list[Binding]:
        """All bindings for name, innermost scope first."""
        out: list[Binding] = []
        scope: Scope | None = self
        while scope is not None:
            out.extend(reversed(scope.table.get(name, ())))
            scope = scope.parent
        return out

    def values(self, name: str) -> list[Binding]:
        return [b for b in self.candidates(name) if b.kind in VALUE_KINDS]

    def types(self, name: str) -> list[Binding]:
        return [b for b in self.candidates(name) if b.kind == "type"]

    def bound_here(self, name: str) -> bool:
        return bool(self.candidates(name))


def build_scope(layers: Iterable[Iterable[Binding]]) -> Scope:
    """Chain scopes from outermost layer to innermost."""
    scope = Scope()
    first = True
    for layer in layers:
        if not first:
            scope = scope.child()
        first = False
        for b in layer:
            if b.kind not in ("formula", "tcc"):
                scope.bind(b)
    return scope


def type_to_syntax(tv: TypeValue) -> S.TypeExpr:
    """Rebuild a source-level type expression from a TypeValue."""
    if isinstance(tv, T.BaseValue):
        if tv.name in _BASE_VALUES:
            return S.BaseType(tv.name)
        return S.NamedType(tv.name)
    if isinstance(tv, FunctionValue):
        return S.FunctionType(tuple(type_to_syntax(p) for p in tv.params),
                              type_to_syntax(tv.result))
    if isinstance(tv, RecordValue):
        return S.RecordType(tuple(S.FieldDecl(n, type_to_syntax(t)) for n, t in tv.fields))
    if isinstance(tv, SubtypeValue):
        return S.SubtypeType(tv.var, type_to_syntax(tv.base), tv.predicate)
    raise TypeError(f"not a TypeValue: {tv!r}")


def _ascribable(actual: TypeValue, expected: TypeValue) -> bool:
    """Could actual be accepted where expected is wanted, given a TCC?"""
    if T.is_subtype_of(actual, expected):
        return True
    if isinstance(expected, SubtypeValue):
        return _ascribable(actual, expected.base)
    if expected == NAT:
        return T.strip_subtype(actual) == INT
    return False


class _Checker:
    def __init__(self, uri: str, theory_name: str | None):
        self.uri = uri
        self.theory_name = theory_name
        self.diagnostics: list[Diagnostic] = []
        self.tccs: list[Tcc] = []
        self.occurrences: list[tuple[Range, Binding]] = []
        self._tcc_seq: dict[str, int] = {}
        self._var_stack: list[S.Param] = []
        self._current_decl: str | None = None

    # -- reporting ---------------------------------------------------------

    def error(self, message: str, rng: Range) -> None:
        self.diagnostics.append(Diagnostic(rng, Severity.ERROR, message, "typechecker"))

    def occur(self, rng: Range, binding: Binding) -> None:
        self.occurrences.append((rng, binding))

    def add_tcc(self, kind: str, core: S.Expr, origin: Range) -> None:
        decl = self._current_decl or "expr"
        n = self._tcc_seq.get(decl, 0) + 1
        self._tcc_seq[decl] = n
        if self._var_stack:
            obligation: S.Expr = S.Binder(S.BinderKind.FORALL, tuple(self._var_stack), core)
        else:
            obligation = core
        self.tccs.append(Tcc(f"{decl}_TCC{n}", kind, obligation, origin))

    # -- types -------------------------------------------------------------

    def eval_type(self, ty: S.TypeExpr, scope: Scope) -> TypeValue:
        if isinstance(ty, S.BaseType):
            return _BASE_VALUES[ty.name]
        if isinstance(ty, S.NamedType):
            found = scope.types(ty.name)
            if not found:
                self.error(f"undeclared type '{ty.name}'", ty.range)
                return ERROR
            self.occur(ty.range, found[0])
            assert found[0].type is not None
            return found[0].type
        if isinstance(ty, S.FunctionType):
            params = tuple(self.eval_type(p, scope) for p in ty.params)
            return FunctionValue(params, self.eval_type(ty.result, scope))
        if isinstance(ty, S.RecordType):
            seen: set[str] = set()
            fields = []
            for f in ty.fields:
                if f.name in seen:
                    self.error(f"duplicate record field '{f.name}'", f.range)
                    continue
                seen.add(f.name)
                fields.append((f.name, self.eval_type(f.type, scope)))
            return RecordValue(tuple(fields))
        if isinstance(ty, S.SubtypeType):
            base = self.eval_type(ty.base, scope)
            inner = scope.child()
            var = Binding(ty.var, "var", self.uri, self.theory_name, ty.range, base)
            inner.bind(var)
            pt = self.infer(ty.predicate, inner)
            if not T.is_subtype_of(pt, BOOL):
                self.error(
                    f"subtype predicate must be bool, found {format_type(pt)}",
                    ty.predicate.range,
                )
            return SubtypeValue(ty.var, base, ty.predicate)
        raise TypeError(f"not a type node: {ty!r}")

    # -- ascription --------------------------------------------------------

    def ascribe(self, node: S.Expr, actual: TypeValue, expected: TypeValue) -> None:
        """Accept actual where expected is wanted, or diagnose; may emit TCCs."""
        if actual == ERROR or expected == ERROR:
            return
        if T.is_subtype_of(actual, expected):
            return
        if isinstance(expected, SubtypeValue) and _ascribable(actual, expected):
            self.ascribe(node, actual, expected.base)
            instantiated = S.substitute(expected.predicate, {expected.var: node})
            self.add_tcc("subtype", instantiated, node.range)
            return
        if expected == NAT and _ascribable(actual, NAT):
            core = S.InfixOp(">=", node, S.NumberLit(0), node.range)
            self.add_tcc("subtype", core, node.range)
            return
        self.error(
            f"expected {format_type(expected)}, found {format_type(actual)}", node.range
        )

    # -- expressions -------------------------------------------------------

    def infer(self, expr: S.Expr, scope: Scope) -> TypeValue:
        if isinstance(expr, S.NumberLit):
            return REAL if isinstance(expr.value, Fraction) else NAT
        if isinstance(expr, S.StringLit):
            return STRING
        if isinstance(expr, S.BoolLit):
            return BOOL
        if isinstance(expr, S.NameRef):
            found = scope.values(expr.name)
            if not found:
                self.error(f"undeclared name '{expr.name}'", expr.range)
                return ERROR
            self.occur(expr.range, found[0])
            assert found[0].type is not None
            return found[0].type
        if isinstance(expr, S.Apply):
            return self._infer_apply(expr, scope)
        if isinstance(expr, S.InfixOp):
            return self._infer_infix(expr, scope)
        if isinstance(expr, S.PrefixOp):
            return self._infer_prefix(expr, scope)
        if isinstance(expr, S.IfExpr):
            ct = self.infer(expr.cond, scope)
            if not T.is_subtype_of(ct, BOOL):
                self.error(f"IF condition must be bool, found {format_type(ct)}",
                           expr.cond.range)
            tt = self.infer(expr.then, scope)
            et = self.infer(expr.els, scope)
            joined = T.join(tt, et)
            if joined is None:
                self.error(
                    f"IF branches have incompatible types: {format_type(tt)} vs "
                    f"{format_type(et)}",
                    expr.range,
                )
                return ERROR
            return joined
        if isinstance(expr, S.Binder):
            inner = scope.child()
            depth = len(self._var_stack)
            for p in expr.params:
                ptv = self.eval_type(p.type, scope)
                b = Binding(p.name, "var", self.uri, self.theory_name, p.name_range, ptv)
                inner.bind(b)
                self.occur(p.name_range, b)
                self._var_stack.append(p)
            bt = self.infer(expr.body, inner)
            del self._var_stack[depth:]
            if not T.is_subtype_of(bt, BOOL):
                self.error(f"quantified body must be bool, found {format_type(bt)}",
                           expr.body.range)
            return BOOL
        if isinstance(expr, S.LetExpr):
            vt = self.infer(expr.value, scope)
            if expr.type is not None:
                declared = self.eval_type(expr.type, scope)
                self.ascribe(expr.value, vt, declared)
                bound = declared
                param_type = expr.type
            else:
                bound = vt
                param_type = type_to_syntax(vt)
            inner = scope.child()
            b = Binding(expr.var, "let", self.uri, self.theory_name, expr.var_range, bound)
            inner.bind(b)
            self.occur(expr.var_range, b)
            self._var_stack.append(S.Param(expr.var, param_type))
            bt = self.infer(expr.body, inner)
            self._var_stack.pop()
            return bt
        if isinstance(expr, S.RecordLit):
            seen: set[str] = set()
            fields = []
            for init in expr.fields:
                if init.name in seen:
                    self.error(f"duplicate record field '{init.name}'", init.range)
                    continue
                seen.add(init.name)
                fields.append((init.name, self.infer(init.value, scope)))
            return RecordValue(tuple(fields))
        if isinstance(expr, S.FieldAccess):
            et = self.infer(expr.expr, scope)
            if et == ERROR:
                return ERROR
            stripped = T.strip_subtype(et)
            if isinstance(stripped, RecordValue):
                ft = stripped.field(expr.field)
                if ft is not None:
                    return ft
            self.error(f"no field '{expr.field}' on {format_type(et)}", expr.field_range)
            return ERROR
        raise TypeError(f"not an expression node: {expr!r}")

    def _infer_apply(self, expr: S.Apply, scope: Scope) -> TypeValue:
        args = list(expr.args)
        if isinstance(expr.fn, S.NameRef):
            cands = scope.values(expr.fn.name)
            if not cands:
                self.error(f"undeclared name '{expr.fn.name}'", expr.fn.range)
                for a in args:
                    self.infer(a, scope)
                return ERROR
            arg_ts = [self.infer(a, scope) for a in args]
            matches = [
                c
                for c in cands
                if isinstance(c.type, FunctionValue)
                and len(c.type.params) == len(args)
                and all(_ascribable(at, pt) for at, pt in zip(arg_ts, c.type.params))
            ]
            if matches:
                pick = matches[0]
                self.occur(expr.fn.range, pick)
                assert isinstance(pick.type, FunctionValue)
                for a, at, pt in zip(args, arg_ts, pick.type.params):
                    self.ascribe(a, at, pt)
                return pick.type.result
            # No match: report against the best candidate for a usable message.
            c = cands[0]
            self.occur(expr.fn.range, c)
            if not isinstance(c.type, FunctionValue):
                if c.type != ERROR:
                    self.error(f"'{expr.fn.name}' is not a function", expr.fn.range)
                return ERROR
            if len(c.type.params) != len(args):
                self.error(
                    f"'{expr.fn.name}' expects {len(c.type.params)} argument(s), "
                    f"got {len(args)}",
                    expr.range,
                )
                return c.type.result
            for a, at, pt in zip(args, arg_ts, c.type.params):
                self.ascribe(a, at, pt)
            return c.type.result
        ft = self.infer(expr.fn, scope)
        arg_ts = [self.infer(a, scope) for a in args]
        if ft == ERROR:
            return ERROR
        if not isinstance(ft, FunctionValue):
            self.error(f"expression of type {format_type(ft)} is not a function",
                       expr.fn.range)
            return ERROR
        if len(ft.params) != len(args):
            self.error(
                f"function expects {len(ft.params)} argument(s), got {len(args)}",
                expr.range,
            )
            return ft.result
        for a, at, pt in zip(args, arg_ts, ft.params):
            self.ascribe(a, at, pt)
        return ft.result

    def _infer_infix(self, expr: S.InfixOp, scope: Scope) -> TypeValue:
        lt = self.infer(expr.left, scope)
        rt = self.infer(expr.right, scope)
        op = expr.op
        if op in _BOOL_OPS:
            for side, st in ((expr.left, lt), (expr.right, rt)):
                if st != ERROR and not T.is_subtype_of(st, BOOL):
                    self.error(f"'{op}' needs bool operands, found {format_type(st)}",
                               side.range)
            return BOOL
        if op in _ORDER_OPS:
            for side, st in ((expr.left, lt), (expr.right, rt)):
                if st != ERROR and not T.is_numeric(st):
                    self.error(f"'{op}' needs numeric operands, found {format_type(st)}",
                               side.range)
            return BOOL
        if op in ("=", "/="):
            if lt != ERROR and rt != ERROR and T.join(lt, rt) is None:
                self.error(
                    f"cannot compare {format_type(lt)} with {format_type(rt)}",
                    expr.range,
                )
            return BOOL
        if op in _ARITH_OPS:
            bad = False
            for side, st in ((expr.left, lt), (expr.right, rt)):
                if st != ERROR and not T.is_numeric(st):
                    self.error(f"'{op}' needs numeric operands, found {format_type(st)}",
                               side.range)
                    bad = True
            if bad or lt == ERROR or rt == ERROR:
                return ERROR
            if op == "/":
                divisor = expr.right
                if not (isinstance(divisor, S.NumberLit) and divisor.value != 0):
                    core = S.InfixOp("/=", divisor, S.NumberLit(0), divisor.range)
                    self.add_tcc("nonzero-divisor", core, expr.range)
            # Arithmetic never stays nat: subtraction leaves it outright and
            # the rest follow for uniformity; nat is re-entered via a TCC.
            joined = T.numeric_join(lt, rt)
            return INT if joined == NAT else joined
        raise AssertionError(f"unknown infix operator {op!r}")

    def _infer_prefix(self, expr: S.PrefixOp, scope: Scope) -> TypeValue:
        ot = self.infer(expr.operand, scope)
        if expr.op == "NOT":
            if ot != ERROR and not T.is_subtype_of(ot, BOOL):
                self.error(f"'NOT' needs a bool operand, found {format_type(ot)}",
                           expr.operand.range)
            return BOOL
        if ot == ERROR:
            return ERROR
        if not T.is_numeric(ot):
            self.error(f"unary '-' needs a numeric operand, found {format_type(ot)}",
                       expr.operand.range)
            return ERROR
        return REAL if T.strip_subtype(ot) == REAL else INT

    # -- declarations ------------------------------------------------------

    def check_decl(self, decl: S.Decl, scope: Scope) -> tuple[Binding, TypeValue]:
        self._current_decl = decl.name
        self._var_stack = []
        if isinstance(decl, S.TypeDecl):
            if decl.definition is not None:
                tv = self.eval_type(decl.definition, scope)
            else:
                tv = T.BaseValue(decl.name)
            binding = Binding(decl.name, "type", self.uri, self.theory_name,
                              decl.name_range, tv)
        elif isinstance(decl, S.ConstDecl):
            tv = self.eval_type(decl.type, scope)
            binding = Binding(decl.name, "const", self.uri, self.theory_name,
                              decl.name_range, tv)
            if decl.body is not None:
                bt = self.infer(decl.body, scope)
                self.ascribe(decl.body, bt, tv)
        elif isinstance(decl, S.FunDef):
            ptvs = tuple(self.eval_type(p.type, scope) for p in decl.params)
            rtv = self.eval_type(decl.return_type, scope)
            tv = FunctionValue(ptvs, rtv)
            binding = Binding(decl.name, "function", self.uri, self.theory_name,
                              decl.name_range, tv)
            inner = scope.child()
            inner.bind(binding)  # recursion sees the function itself
            for p, ptv in zip(decl.params, ptvs):
                pb = Binding(p.name, "param", self.uri, self.theory_name,
                             p.name_range, ptv)
                inner.bind(pb)
                self.occur(p.name_range, pb)
                self._var_stack.append(p)
            bt = self.infer(decl.body, inner)
            self.ascribe(decl.body, bt, rtv)
            self._var_stack = []
        elif isinstance(decl, S.FormulaDecl):
            tv = BOOL
            binding = Binding(decl.name, "formula", self.uri, self.theory_name,
                              decl.name_range, BOOL)
            bt = self.infer(decl.body, scope)
            if bt != ERROR and not T.is_subtype_of(bt, BOOL):
                self.error(f"formula body must be bool, found {format_type(bt)}",
                           decl.body.range)
        else:
            raise TypeError(f"not a declaration node: {decl!r}")
        self.occur(decl.name_range, binding)
        self._current_decl = None
        return binding, tv


ImportsResolver = Callable[[str], "TypecheckResult | None"]


def _no_imports(_name: str) -> TypecheckResult | None:
    return None


def typecheck(
    theory: S.Theory,
    imports: ImportsResolver = _no_imports,
    uri: str = "file:///untitled.pvs",
    use_prelude: bool = True,
) -> TypecheckResult:
    """Typecheck one theory against resolved imports. Total and deterministic."""
    layers: list[list[Binding]] = []
    checker = _Checker(uri, theory.name)
    if use_prelude:
        from .prelude import prelude_result

        layers.append(prelude_result().exports)
    import_layer: list[Binding] = []
    for imp in theory.importings:
        resolved = imports(imp.name)
        if resolved is None:
            checker.error(f"cannot resolve IMPORTING '{imp.name}'", imp.range)
        else:
            import_layer.extend(resolved.exports)
    layers.append(import_layer)
    scope = build_scope(layers).child()

    result = TypecheckResult(theory.name, uri)
    for decl in theory.decls:
        if scope.table.get(decl.name):
            checker.error(f"'{decl.name}' is already declared in this theory",
                          decl.name_range)
        binding, tv = checker.check_decl(decl, scope)
        if binding.kind not in ("formula",):
            scope.bind(binding)
        result.typed_decls[decl.name] = tv
        result.exports.append(binding)
    result.diagnostics = checker.diagnostics
    result.tccs = checker.tccs
    result.occurrences = checker.occurrences
    return result


def typecheck_file(
    source: S.SourceFile,
    imports: ImportsResolver = _no_imports,
    uri: str = "file:///untitled.pvs",
    use_prelude: bool = True,
) -> list[TypecheckResult]:
    """Typecheck every theory in a file; earlier theories are importable."""
    local: dict[str, TypecheckResult] = {}

    def resolver(name: str) -> TypecheckResult | None:
        if name in local:
            return local[name]
        return imports(name)

    out = []
    for theory in source.theories:
        res = typecheck(theory, resolver, uri, use_prelude)
        local[theory.name] = res
        out.append(res)
    return out


def check_expression(
    expr: S.Expr, scope: Scope, uri: str = "expr:/input"
) -> tuple[TypeValue, list[Diagnostic], list[Tcc]]:
    """Check a standalone expression against a scope (REPL input, inst terms)."""
    checker = _Checker(uri, None)
    tv = checker.infer(expr, scope)
    return tv, checker.diagnostics, checker.tccs


def infer_type(expr: S.Expr, scope: Scope) -> TypeValue:
    """Type of expr under scope; raises CheckError on the first problem."""
    tv, diags, _tccs = check_expression(expr, scope)
    for d in diags:
        if d.severity is Severity.ERROR:
            raise CheckError(d.message, d.range)
    return tv


def eval_type_expr(ty: S.TypeExpr, scope: Scope) -> TypeValue:
    """Elaborate a type expression; raises CheckError on the first problem."""
    checker = _Checker("expr:/input", None)
    tv = checker.eval_type(ty, scope)
    for d in checker.diagnostics:
        if d.severity is Severity.ERROR:
            raise CheckError(d.message, d.range)
    return tv


def generate_tccs(decl: S.Decl, scope: Scope, uri: str = "expr:/input",
                  theory: str | None = None) -> list[Tcc]:
    """Proof obligations of one declaration, in source order."""
    checker = _Checker(uri, theory)
    checker.check_decl(decl, scope)
    return checker.tccs


def resolve_symbol(name, uri, position, index, typechecked):
    """Resolve one occurrence to declaration entries.

    With a typechecked enclosing theory the binding recorded for the
    occurrence wins (exactly one entry). Otherwise every indexed
    declaration sharing the name is a candidate. Empty means not found.
    """
    if typechecked:
        binding = index.binding_at(uri, position)
        if binding is not None and binding.name == name:
            entry = index.entry_for(binding)
            return [entry] if entry is not None else []
    return index.find(name)
