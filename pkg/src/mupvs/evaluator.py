"""Ground-term evaluator for executable muPVS fragments.

Call-by-value with lazy IF branches and short-circuit boolean operators.
Numbers are exact: integers are unbounded, division produces rationals.
Every reduction step burns one unit of fuel so runaway recursion
surfaces as a fuel-exhausted error instead of a hang, and a cooperative
cancellation token is polled periodically for interactive use.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from . import syntax as S
from .parser import parse_expression
from .printer import format_number
from .typecheck import CheckError, Scope, infer_type

DEFAULT_FUEL = 1_000_000

# How many fuel ticks pass between cancellation checks.
_CANCEL_STRIDE = 256


class Value:
    """Base class for runtime values."""

    __slots__ = ()


@dataclass(frozen=True)
class VBool(Value):
    value: bool


@dataclass(frozen=True)
class VInt(Value):
    value: int


@dataclass(frozen=True)
class VRat(Value):
    """A non-integer rational; integral results normalize to VInt."""

    value: Fraction


@dataclass(frozen=True)
class VString(Value):
    value: str


@dataclass(frozen=True)
class VRecord(Value):
    fields: tuple[tuple[str, "Value"], ...]  # sorted by field name

    def field(self, name: str) -> "Value":
        for fname, fval in self.fields:
            if fname == name:
                return fval
        raise EvalError(f"record has no field '{name}'", "runtime")


@dataclass(frozen=True, eq=False, repr=False)
class VClosure(Value):
    params: tuple[str, ...]
    body: S.Expr
    env: "Env"
    name: str = "<anonymous>"

    def __repr__(self) -> str:
        return f"VClosure({self.name}/{len(self.params)})"


class EvalError(Exception):
    """Evaluation failure with a stable kind for wire/CLI mapping.

    Kinds: parse-error, type-error, division-by-zero, fuel-exhausted,
    non-executable, runtime.
    """

    def __init__(self, message: str, kind: str):
        super().__init__(message)
        self.message = message
        self.kind = kind


class EvalCancelled(Exception):
    """Evaluation stopped by its cancellation token."""


class CancellationToken:
    def __init__(self) -> None:
        self._event = threading.Event()

    def cancel(self) -> None:
        self._event.set()

    @property
    def is_cancelled(self) -> bool:
        return self._event.is_set()


class Env:
    """Name environment; one flat table per layer, chained by parent."""

    __slots__ = ("parent", "table")

    def __init__(self, parent: "Env | None" = None):
        self.parent = parent
        self.table: dict[str, object] = {}

    def define(self, name: str, value: object) -> None:
        self.table[name] = value

    def lookup(self, name: str) -> object | None:
        env: Env | None = self
        while env is not None:
            if name in env.table:
                return env.table[name]
            env = env.parent
        return None


class _Thunk:
    """Lazily evaluated theory-level constant, memoized per build_env call."""

    __slots__ = ("body", "env", "value")

    def __init__(self, body: S.Expr, env: Env):
        self.body = body
        self.env = env
        self.value: Value | None = None


def build_env(theories: Iterable[S.Theory]) -> Env:
    """Executable bindings of the given theories, later theories shadowing."""
    env = Env()
    for theory in theories:
        for decl in theory.decls:
            if isinstance(decl, S.FunDef):
                params = tuple(p.name for p in decl.params)
                env.define(decl.name, VClosure(params, decl.body, env, decl.name))
            elif isinstance(decl, S.ConstDecl) and decl.body is not None:
                env.define(decl.name, _Thunk(decl.body, env))
    return env


class _Machine:
    """Explicit-stack evaluator.

    Recursion depth in the evaluated program must not consume host
    stack (fuel is the only depth limit), so instead of recursing the
    machine keeps a work stack of instructions and a value stack.
    """

    def __init__(self, fuel: int, token: CancellationToken | None):
        self.fuel = fuel
        self.token = token

    def tick(self) -> None:
        self.fuel -= 1
        if self.fuel < 0:
            raise EvalError(
                "fuel exhausted (likely nonterminating evaluation)", "fuel-exhausted"
            )
        if (
            self.token is not None
            and self.fuel % _CANCEL_STRIDE == 0
            and self.token.is_cancelled
        ):
            raise EvalCancelled()

    def eval(self, expr: S.Expr, env: Env) -> Value:
        work: list[tuple] = [("eval", expr, env)]
        values: list[Value] = []
        while work:
            instr = work.pop()
            tag = instr[0]
            if tag == "eval":
                self.tick()
                self._step(instr[1], instr[2], work, values)
            elif tag == "call":
                n = instr[1]
                args = values[len(values) - n:]
                del values[len(values) - n:]
                fn = values.pop()
                if not isinstance(fn, VClosure):
                    raise EvalError("applied expression is not a function", "runtime")
                if len(args) != len(fn.params):
                    raise EvalError(
                        f"'{fn.name}' expects {len(fn.params)} argument(s), "
                        f"got {len(args)}",
                        "runtime",
                    )
                frame = Env(fn.env)
                for name, val in zip(fn.params, args):
                    frame.define(name, val)
                work.append(("eval", fn.body, frame))
            elif tag == "infix":
                right = values.pop()
                left = values.pop()
                values.append(_strict_infix(instr[1], left, right))
            elif tag == "bool-op":
                _, op, right_expr, op_env = instr
                left = _as_bool(values.pop())
                if op == "AND" and not left:
                    values.append(VBool(False))
                elif op == "OR" and left:
                    values.append(VBool(True))
                elif op == "IMPLIES" and not left:
                    values.append(VBool(True))
                else:
                    work.append(("bool-finish", op, left))
                    work.append(("eval", right_expr, op_env))
            elif tag == "bool-finish":
                _, op, left = instr
                right = _as_bool(values.pop())
                values.append(VBool(left == right if op == "IFF" else right))
            elif tag == "branch":
                _, then, els, if_env = instr
                taken = then if _as_bool(values.pop()) else els
                work.append(("eval", taken, if_env))
            elif tag == "bind":
                _, var, body, let_env = instr
                frame = Env(let_env)
                frame.define(var, values.pop())
                work.append(("eval", body, frame))
            elif tag == "prefix":
                v = values.pop()
                if instr[1] == "NOT":
                    values.append(VBool(not _as_bool(v)))
                else:
                    values.append(_number_value(-_as_number(v)))
            elif tag == "record":
                names = instr[1]
                n = len(names)
                vals = values[len(values) - n:]
                del values[len(values) - n:]
                values.append(VRecord(tuple(sorted(zip(names, vals)))))
            elif tag == "field":
                rec = values.pop()
                if not isinstance(rec, VRecord):
                    raise EvalError("field access on a non-record value", "runtime")
                values.append(rec.field(instr[1]))
            else:  # "memo": leave the value for the consumer, cache it
                instr[1].value = values[-1]
        assert len(values) == 1
        return values[0]

    def _step(self, expr: S.Expr, env: Env, work: list, values: list) -> None:
        if isinstance(expr, S.NumberLit):
            values.append(_number_value(expr.value))
        elif isinstance(expr, S.StringLit):
            values.append(VString(expr.value))
        elif isinstance(expr, S.BoolLit):
            values.append(VBool(expr.value))
        elif isinstance(expr, S.NameRef):
            slot = env.lookup(expr.name)
            if slot is None:
                raise EvalError(
                    f"'{expr.name}' has no executable definition", "non-executable"
                )
            if isinstance(slot, _Thunk):
                if slot.value is None:
                    work.append(("memo", slot))
                    work.append(("eval", slot.body, slot.env))
                else:
                    values.append(slot.value)
            else:
                assert isinstance(slot, Value)
                values.append(slot)
        elif isinstance(expr, S.Apply):
            work.append(("call", len(expr.args)))
            for a in reversed(expr.args):
                work.append(("eval", a, env))
            work.append(("eval", expr.fn, env))
        elif isinstance(expr, S.InfixOp):
            if expr.op in ("AND", "OR", "IMPLIES", "IFF"):
                work.append(("bool-op", expr.op, expr.right, env))
            else:
                work.append(("infix", expr.op))
                work.append(("eval", expr.right, env))
            work.append(("eval", expr.left, env))
        elif isinstance(expr, S.PrefixOp):
            work.append(("prefix", expr.op))
            work.append(("eval", expr.operand, env))
        elif isinstance(expr, S.IfExpr):
            work.append(("branch", expr.then, expr.els, env))
            work.append(("eval", expr.cond, env))
        elif isinstance(expr, S.LetExpr):
            work.append(("bind", expr.var, expr.body, env))
            work.append(("eval", expr.value, env))
        elif isinstance(expr, S.RecordLit):
            work.append(("record", tuple(f.name for f in expr.fields)))
            for f in reversed(expr.fields):
                work.append(("eval", f.value, env))
        elif isinstance(expr, S.FieldAccess):
            work.append(("field", expr.field))
            work.append(("eval", expr.expr, env))
        elif isinstance(expr, S.Binder):
            raise EvalError(
                f"{expr.kind.value} is not executable (quantifiers have no "
                "evaluation rule)",
                "non-executable",
            )
        else:
            raise EvalError(f"cannot evaluate {type(expr).__name__}", "non-executable")


def _strict_infix(op: str, left: Value, right: Value) -> Value:
    if op in ("=", "/="):
        eq = _values_equal(left, right)
        return VBool(eq if op == "=" else not eq)
    a, b = _as_number(left), _as_number(right)
    if op == "+":
        return _number_value(a + b)
    if op == "-":
        return _number_value(a - b)
    if op == "*":
        return _number_value(a * b)
    if op == "/":
        if b == 0:
            raise EvalError("division by zero", "division-by-zero")
        return _number_value(Fraction(a) / Fraction(b))
    if op == "<":
        return VBool(a < b)
    if op == "<=":
        return VBool(a <= b)
    if op == ">":
        return VBool(a > b)
    if op == ">=":
        return VBool(a >= b)
    raise EvalError(f"unknown operator '{op}'", "runtime")


def _number_value(n: int | Fraction) -> Value:
    if isinstance(n, Fraction):
        if n.denominator == 1:
            return VInt(n.numerator)
        return VRat(n)
    return VInt(n)


def _as_number(v: Value) -> int | Fraction:
    if isinstance(v, VInt):
        return v.value
    if isinstance(v, VRat):
        return v.value
    raise EvalError("expected a numeric value", "runtime")


def _as_bool(v: Value) -> bool:
    if isinstance(v, VBool):
        return v.value
    raise EvalError("expected a boolean value", "runtime")


def _values_equal(a: Value, b: Value) -> bool:
    if isinstance(a, (VInt, VRat)) and isinstance(b, (VInt, VRat)):
        return _as_number(a) == _as_number(b)
    if isinstance(a, VClosure) or isinstance(b, VClosure):
        raise EvalError("functions cannot be compared", "non-executable")
    return a == b


def evaluate_expr(
    expr: S.Expr,
    env: Env,
    fuel: int = DEFAULT_FUEL,
    token: CancellationToken | None = None,
) -> Value:
    """Evaluate a typechecked expression AST."""
    return _Machine(fuel, token).eval(expr, env)


def evaluate(
    text: str,
    scope: Scope,
    env: Env,
    fuel: int = DEFAULT_FUEL,
    token: CancellationToken | None = None,
) -> Value:
    """Parse, typecheck against scope, then evaluate. Raises EvalError."""
    expr, diags = parse_expression(text)
    if expr is None or diags:
        message = diags[0].message if diags else "empty input"
        raise EvalError(f"parse error: {message}", "parse-error")
    try:
        infer_type(expr, scope)
    except CheckError as err:
        raise EvalError(f"type error: {err.message}", "type-error") from err
    return evaluate_expr(expr, env, fuel, token)


def try_eval_bool(expr: S.Expr, env: Env, fuel: int = 10_000) -> bool | None:
    """Ground boolean evaluation shared with the prover's assert command.

    None means "not decidable here": unbound names (skolem constants),
    non-executable constructs, runtime errors, or fuel running out.
    """
    try:
        v = evaluate_expr(expr, env, fuel)
    except (EvalError, EvalCancelled):
        return None
    return v.value if isinstance(v, VBool) else None


def format_value(v: Value) -> str:
    """Render a value the way source syntax would write it."""
    if isinstance(v, VBool):
        return "TRUE" if v.value else "FALSE"
    if isinstance(v, VInt):
        return str(v.value)
    if isinstance(v, VRat):
        return format_number(v.value)
    if isinstance(v, VString):
        return f'"{v.value}"'
    if isinstance(v, VRecord):
        inside = ", ".join(f"{n} := {format_value(val)}" for n, val in v.fields)
        return f"(# {inside} #)"
    if isinstance(v, VClosure):
        return f"<function {v.name}/{len(v.params)}>"
    raise TypeError(f"not a Value: {v!r}")
