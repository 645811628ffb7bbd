import random
import string

import pytest
from hypothesis import given, strategies as st

from mupvs import syntax as S
from mupvs.parser import parse_expression, parse_theory_file
from mupvs.positions import Severity


def parse_one(text: str) -> S.Theory:
    result = parse_theory_file("file:///t.pvs", text)
    assert result.ast.theories, f"no theory parsed from {text!r}"
    return result.ast.theories[0]


def test_minimal_theory():
    result = parse_theory_file("file:///t.pvs", "sum: THEORY BEGIN END sum")
    assert result.diagnostics == []
    (theory,) = result.ast.theories
    assert theory.name == "sum"
    assert theory.decls == ()


def test_fundef_with_if_body():
    text = "t: THEORY BEGIN abs1(x: int): int = IF x > 0 THEN x ELSE -x ENDIF END t"
    theory = parse_one(text)
    (decl,) = theory.decls
    assert isinstance(decl, S.FunDef)
    assert decl.name == "abs1"
    assert isinstance(decl.body, S.IfExpr)
    assert not decl.recursive


def test_error_recovery_diagnostic_covers_end_token():
    text = "sum: THEORY BEGIN x : END sum"
    result = parse_theory_file("file:///t.pvs", text)
    (theory,) = result.ast.theories
    assert theory.name == "sum"
    assert theory.decls == ()
    assert len(result.diagnostics) == 1
    diag = result.diagnostics[0]
    # Range covers the END token: columns 22-25 on line 0.
    assert diag.range.start.character == text.index("END")
    assert diag.range.end.character == text.index("END") + 3
    assert diag.severity is Severity.ERROR


def test_recovery_keeps_wellformed_prefix():
    text = """broken: THEORY
BEGIN
  a: int = 1
  b: = oops ??
  c: int = 2
END broken
"""
    result = parse_theory_file("file:///t.pvs", text)
    (theory,) = result.ast.theories
    names = [d.name for d in theory.decls]
    assert names == ["a", "c"]
    assert any(d.severity is Severity.ERROR for d in result.diagnostics)


def test_theory_name_mismatch_diagnostic():
    result = parse_theory_file("file:///t.pvs", "a: THEORY BEGIN END b")
    assert any("mismatch" in d.message for d in result.diagnostics)
    assert result.ast.theories[0].name == "a"


def test_importing_list():
    theory = parse_one("t: THEORY BEGIN IMPORTING a, b END t")
    assert [i.name for i in theory.importings] == ["a", "b"]


def test_param_groups_flatten():
    theory = parse_one("t: THEORY BEGIN f(x, y: int, z: bool): int = x END t")
    (decl,) = theory.decls
    assert [(p.name, p.type.name) for p in decl.params] == [
        ("x", "int"), ("y", "int"), ("z", "bool"),
    ]


def test_recursive_flag_from_keyword_and_self_reference():
    explicit = parse_one("t: THEORY BEGIN f(x: int): RECURSIVE int = x END t").decls[0]
    assert explicit.recursive
    inferred = parse_one(
        "t: THEORY BEGIN fact(n: nat): nat = IF n = 0 THEN 1 ELSE n * fact(n - 1) ENDIF END t"
    ).decls[0]
    assert inferred.recursive
    plain = parse_one("t: THEORY BEGIN g(x: int): int = x + 1 END t").decls[0]
    assert not plain.recursive


def test_formula_kinds():
    theory = parse_one(
        "t: THEORY BEGIN a: THEOREM TRUE b: LEMMA TRUE c: CONJECTURE TRUE END t"
    )
    assert [d.kind for d in theory.decls] == [
        S.FormulaKind.THEOREM, S.FormulaKind.LEMMA, S.FormulaKind.CONJECTURE,
    ]


def test_record_type_and_literal_and_access():
    theory = parse_one(
        "t: THEORY BEGIN r: [# x: int, y: int #] = (# x := 1, y := 2 #) v: int = r`x END t"
    )
    rec, acc = theory.decls
    assert isinstance(rec.type, S.RecordType)
    assert [f.name for f in rec.type.fields] == ["x", "y"]
    assert isinstance(rec.body, S.RecordLit)
    assert isinstance(acc.body, S.FieldAccess)
    assert acc.body.field == "x"


def test_subtype_and_function_types():
    theory = parse_one(
        "t: THEORY BEGIN nz: TYPE = {d: int | d /= 0} app: [int, int -> int] END t"
    )
    sub, fn = theory.decls
    assert isinstance(sub.definition, S.SubtypeType)
    assert sub.definition.var == "d"
    assert isinstance(fn.type, S.FunctionType)
    assert len(fn.type.params) == 2


def test_operator_precedence():
    expr, diags = parse_expression("1 + 2 * 3")
    assert diags == []
    assert expr == S.InfixOp("+", S.NumberLit(1), S.InfixOp("*", S.NumberLit(2), S.NumberLit(3)))


def test_implies_right_associative():
    expr, _ = parse_expression("a IMPLIES b IMPLIES c")
    assert expr.op == "IMPLIES"
    assert isinstance(expr.right, S.InfixOp) and expr.right.op == "IMPLIES"


def test_not_binds_looser_than_comparison():
    expr, _ = parse_expression("NOT x = 1")
    assert isinstance(expr, S.PrefixOp) and expr.op == "NOT"
    assert isinstance(expr.operand, S.InfixOp) and expr.operand.op == "="


def test_binder_body_extends_right():
    expr, _ = parse_expression("FORALL (x: int): x = x")
    assert isinstance(expr, S.Binder)
    assert expr.kind is S.BinderKind.FORALL
    assert isinstance(expr.body, S.InfixOp)


def test_let_expression():
    expr, _ = parse_expression("LET v = 1 + 1 IN v * v")
    assert isinstance(expr, S.LetExpr)
    assert expr.var == "v"


def test_range_nesting_invariant():
    text = """geo: THEORY
BEGIN
  sq(x: int): int = x * x
  big: THEOREM FORALL (x: int): sq(x) >= 0
END geo
"""
    result = parse_theory_file("file:///t.pvs", text)
    assert result.diagnostics == []

    def check(node):
        for child in S.child_nodes(node):
            assert node.range.encloses(child.range), (node, child)
            check(child)

    check(result.ast)


def test_parse_totality_on_junk():
    rng = random.Random(7)
    for _ in range(200):
        n = rng.randrange(0, 80)
        data = bytes(rng.randrange(0, 256) for _ in range(n))
        text = data.decode("utf-8", errors="replace")
        result = parse_theory_file("file:///junk.pvs", text)
        assert result.ast is not None


@given(st.text(alphabet=string.printable, max_size=300))
def test_parse_totality_property(text):
    result = parse_theory_file("file:///fuzz.pvs", text)
    assert result.ast is not None


def test_theory_header_without_begin_is_diagnosed_not_raised():
    # A well-formed header whose body never starts used to escape recovery.
    for text in (
        "abc : THEORY\n FORALL abc",
        "t: THEORY",
        "a: THEORY b: THEORY\nBEGIN\n  c: int = 1\nEND b\n",
    ):
        result = parse_theory_file("file:///header.pvs", text)
        assert result.ast is not None
        assert any("BEGIN" in d.message for d in result.diagnostics)


def test_parse_expression_trailing_junk():
    expr, diags = parse_expression("1 + 2 extra")
    assert expr is None
    assert diags
