"""Structural type values and the numeric subtype tower.

TypeValue is the alias-free form a type expression elaborates to: named
types are resolved away, so two types compare equal exactly when they
are interchangeable. The numeric tower nat <= int <= real is built in;
widening along it is implicit, narrowing needs a proof obligation.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import syntax as S


class TypeValue:
    """Base class for elaborated types."""

    __slots__ = ()


@dataclass(frozen=True)
class BaseValue(TypeValue):
    """A builtin base type, or an uninterpreted user type (opaque name)."""

    name: str


@dataclass(frozen=True)
class FunctionValue(TypeValue):
    params: tuple[TypeValue, ...]
    result: TypeValue


@dataclass(frozen=True)
class RecordValue(TypeValue):
    fields: tuple[tuple[str, TypeValue], ...]

    def field(self, name: str) -> TypeValue | None:
        for fname, ftype in self.fields:
            if fname == name:
                return ftype
        return None


@dataclass(frozen=True)
class SubtypeValue(TypeValue):
    var: str
    base: TypeValue
    predicate: S.Expr


BOOL = BaseValue("bool")
INT = BaseValue("int")
NAT = BaseValue("nat")
REAL = BaseValue("real")
STRING = BaseValue("string")

# Sentinel produced after an error diagnostic; compatible with everything
# so one mistake does not cascade.
ERROR = BaseValue("<error>")

_NUMERIC_RANK = {"nat": 0, "int": 1, "real": 2}


def strip_subtype(t: TypeValue) -> TypeValue:
    while isinstance(t, SubtypeValue):
        t = t.base
    return t


def is_numeric(t: TypeValue) -> bool:
    t = strip_subtype(t)
    return isinstance(t, BaseValue) and t.name in _NUMERIC_RANK


def numeric_join(a: TypeValue, b: TypeValue) -> BaseValue:
    """Least base type in the tower containing both numeric operands."""
    ra = _NUMERIC_RANK[strip_subtype(a).name]
    rb = _NUMERIC_RANK[strip_subtype(b).name]
    return BaseValue(("nat", "int", "real")[max(ra, rb)])


def is_subtype_of(a: TypeValue, b: TypeValue) -> bool:
    """True when a value of a may be used where b is expected, no TCC needed."""
    if a == b or a == ERROR or b == ERROR:
        return True
    if isinstance(a, SubtypeValue):
        return is_subtype_of(a.base, b) or a == b
    if isinstance(a, BaseValue) and isinstance(b, BaseValue):
        if a.name in _NUMERIC_RANK and b.name in _NUMERIC_RANK:
            return _NUMERIC_RANK[a.name] <= _NUMERIC_RANK[b.name]
        return a.name == b.name
    if isinstance(a, FunctionValue) and isinstance(b, FunctionValue):
        return (
            len(a.params) == len(b.params)
            and all(is_subtype_of(bp, ap) for ap, bp in zip(a.params, b.params))
            and is_subtype_of(a.result, b.result)
        )
    if isinstance(a, RecordValue) and isinstance(b, RecordValue):
        if {n for n, _ in a.fields} != {n for n, _ in b.fields}:
            return False
        return all(is_subtype_of(ft, b.field(n)) for n, ft in a.fields)
    return False


def join(a: TypeValue, b: TypeValue) -> TypeValue | None:
    """Common supertype of the two (IF branches), or None if incompatible."""
    if a == ERROR:
        return b
    if b == ERROR:
        return a
    if is_subtype_of(a, b):
        return b
    if is_subtype_of(b, a):
        return a
    if is_numeric(a) and is_numeric(b):
        return numeric_join(a, b)
    return None


def format_type(t: TypeValue) -> str:
    """Render a TypeValue in source syntax (hover text, messages)."""
    if isinstance(t, BaseValue):
        return t.name
    if isinstance(t, FunctionValue):
        inside = ", ".join(format_type(p) for p in t.params)
        return f"[{inside} -> {format_type(t.result)}]"
    if isinstance(t, RecordValue):
        inside = ", ".join(f"{n}: {format_type(ft)}" for n, ft in t.fields)
        return f"[# {inside} #]"
    if isinstance(t, SubtypeValue):
        from .printer import print_expr

        return f"{{{t.var}: {format_type(t.base)} | {print_expr(t.predicate)}}}"
    raise TypeError(f"not a TypeValue: {t!r}")
