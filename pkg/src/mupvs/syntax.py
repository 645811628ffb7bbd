"""AST node definitions for muPVS, plus core tree utilities.

Nodes are immutable dataclasses with tuple-valued children. ``range`` is
excluded from equality and hashing, so ``==`` is structural equality
modulo source locations (the round-trip contract, and what lets the
prover key atom tables by expression).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Iterator, Union

from .positions import Range, SourcePos

DUMMY_RANGE = Range(SourcePos(0, 0), SourcePos(0, 0))


# --- types ----------------------------------------------------------------

BASE_TYPE_NAMES = ("bool", "int", "nat", "real", "string")


@dataclass(frozen=True)
class BaseType:
    name: str  # one of BASE_TYPE_NAMES
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class NamedType:
    name: str
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class FunctionType:
    params: tuple["TypeExpr", ...]
    result: "TypeExpr"
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type: "TypeExpr"
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class RecordType:
    fields: tuple[FieldDecl, ...]
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class SubtypeType:
    var: str
    base: "TypeExpr"
    predicate: "Expr"
    range: Range = field(compare=False, default=DUMMY_RANGE)


TypeExpr = Union[BaseType, NamedType, FunctionType, RecordType, SubtypeType]


# --- expressions ----------------------------------------------------------


@dataclass(frozen=True)
class NumberLit:
    value: Union[int, Fraction]
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class StringLit:
    value: str
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class BoolLit:
    value: bool
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class NameRef:
    name: str
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class Apply:
    fn: "Expr"
    args: tuple["Expr", ...]
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class InfixOp:
    op: str
    left: "Expr"
    right: "Expr"
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class PrefixOp:
    op: str  # "-" or "NOT"
    operand: "Expr"
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class IfExpr:
    cond: "Expr"
    then: "Expr"
    els: "Expr"
    range: Range = field(compare=False, default=DUMMY_RANGE)


class BinderKind(enum.Enum):
    FORALL = "FORALL"
    EXISTS = "EXISTS"


@dataclass(frozen=True)
class Param:
    name: str
    type: TypeExpr
    range: Range = field(compare=False, default=DUMMY_RANGE)
    name_range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class Binder:
    kind: BinderKind
    params: tuple[Param, ...]
    body: "Expr"
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class LetExpr:
    var: str
    type: Union[TypeExpr, None]
    value: "Expr"
    body: "Expr"
    range: Range = field(compare=False, default=DUMMY_RANGE)
    var_range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class FieldInit:
    name: str
    value: "Expr"
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class RecordLit:
    fields: tuple[FieldInit, ...]
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class FieldAccess:
    expr: "Expr"
    field: str
    range: Range = field(compare=False, default=DUMMY_RANGE)
    field_range: Range = field(compare=False, default=DUMMY_RANGE)


Expr = Union[
    NumberLit, StringLit, BoolLit, NameRef, Apply, InfixOp, PrefixOp,
    IfExpr, Binder, LetExpr, RecordLit, FieldAccess,
]


# --- declarations ---------------------------------------------------------


@dataclass(frozen=True)
class TypeDecl:
    name: str
    definition: Union[TypeExpr, None]
    range: Range = field(compare=False, default=DUMMY_RANGE)
    name_range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class ConstDecl:
    name: str
    type: TypeExpr
    body: Union[Expr, None]
    range: Range = field(compare=False, default=DUMMY_RANGE)
    name_range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class FunDef:
    name: str
    params: tuple[Param, ...]
    return_type: TypeExpr
    body: Expr
    recursive: bool = False
    range: Range = field(compare=False, default=DUMMY_RANGE)
    name_range: Range = field(compare=False, default=DUMMY_RANGE)


class FormulaKind(enum.Enum):
    THEOREM = "THEOREM"
    LEMMA = "LEMMA"
    CONJECTURE = "CONJECTURE"


@dataclass(frozen=True)
class FormulaDecl:
    name: str
    kind: FormulaKind
    body: Expr
    range: Range = field(compare=False, default=DUMMY_RANGE)
    name_range: Range = field(compare=False, default=DUMMY_RANGE)


Decl = Union[TypeDecl, ConstDecl, FunDef, FormulaDecl]


@dataclass(frozen=True)
class Importing:
    name: str
    range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class Theory:
    name: str
    importings: tuple[Importing, ...]
    decls: tuple[Decl, ...]
    range: Range = field(compare=False, default=DUMMY_RANGE)
    name_range: Range = field(compare=False, default=DUMMY_RANGE)


@dataclass(frozen=True)
class SourceFile:
    theories: tuple[Theory, ...]
    range: Range = field(compare=False, default=DUMMY_RANGE)


Node = Union[SourceFile, Theory, Importing, Decl, Param, TypeExpr, Expr, FieldDecl, FieldInit]


# --- tree utilities -------------------------------------------------------


def child_nodes(node: Node) -> Iterator[Node]:
    """Yield the direct child nodes of ``node`` in source order."""
    for f in fields(node):
        if f.name in ("range", "name_range", "var_range", "field_range"):
            continue
        value = getattr(node, f.name)
        if isinstance(value, tuple):
            for item in value:
                if _is_node(item):
                    yield item
        elif _is_node(value):
            yield value


def _is_node(value: object) -> bool:
    return hasattr(value, "range") and hasattr(value, "__dataclass_fields__")


def walk(node: Node) -> Iterator[Node]:
    yield node
    for child in child_nodes(node):
        yield from walk(child)


def free_names(expr: Expr, bound: frozenset[str] = frozenset()) -> set[str]:
    """Names referenced in ``expr`` that are not bound by an enclosing binder."""
    if isinstance(expr, NameRef):
        return set() if expr.name in bound else {expr.name}
    if isinstance(expr, Binder):
        inner = bound | {p.name for p in expr.params}
        out = free_names(expr.body, inner)
        for p in expr.params:
            out |= _type_free_names(p.type, bound)
        return out
    if isinstance(expr, LetExpr):
        out = free_names(expr.value, bound)
        out |= free_names(expr.body, bound | {expr.var})
        return out
    out: set[str] = set()
    for child in child_nodes(expr):
        if isinstance(child, FieldInit):
            out |= free_names(child.value, bound)
        elif _is_expr(child):
            out |= free_names(child, bound)  # type: ignore[arg-type]
    return out


def _type_free_names(ty: TypeExpr, bound: frozenset[str]) -> set[str]:
    if isinstance(ty, SubtypeType):
        return free_names(ty.predicate, bound | {ty.var})
    out: set[str] = set()
    for child in child_nodes(ty):
        if isinstance(child, FieldDecl):
            out |= _type_free_names(child.type, bound)
        elif isinstance(child, (BaseType, NamedType, FunctionType, RecordType, SubtypeType)):
            out |= _type_free_names(child, bound)
    return out


_EXPR_TYPES = (
    NumberLit, StringLit, BoolLit, NameRef, Apply, InfixOp, PrefixOp,
    IfExpr, Binder, LetExpr, RecordLit, FieldAccess,
)


def _is_expr(value: object) -> bool:
    return isinstance(value, _EXPR_TYPES)


def substitute(expr: Expr, mapping: dict[str, Expr]) -> Expr:
    """Capture-avoiding substitution of free names in ``expr``.

    Binders whose variables collide with the mapping shadow it; binders
    that would capture a free name of a replacement are not renamed
    (callers use fresh names that cannot collide).
    """
    if not mapping:
        return expr
    if isinstance(expr, NameRef):
        return mapping.get(expr.name, expr)
    if isinstance(expr, Binder):
        inner = {k: v for k, v in mapping.items() if k not in {p.name for p in expr.params}}
        new_body = substitute(expr.body, inner)
        new_params = tuple(
            replace(p, type=substitute_in_type(p.type, inner)) for p in expr.params
        )
        return replace(expr, params=new_params, body=new_body)
    if isinstance(expr, LetExpr):
        new_value = substitute(expr.value, mapping)
        inner = {k: v for k, v in mapping.items() if k != expr.var}
        return replace(expr, value=new_value, body=substitute(expr.body, inner))
    if isinstance(expr, Apply):
        return replace(
            expr,
            fn=substitute(expr.fn, mapping),
            args=tuple(substitute(a, mapping) for a in expr.args),
        )
    if isinstance(expr, InfixOp):
        return replace(expr, left=substitute(expr.left, mapping), right=substitute(expr.right, mapping))
    if isinstance(expr, PrefixOp):
        return replace(expr, operand=substitute(expr.operand, mapping))
    if isinstance(expr, IfExpr):
        return replace(
            expr,
            cond=substitute(expr.cond, mapping),
            then=substitute(expr.then, mapping),
            els=substitute(expr.els, mapping),
        )
    if isinstance(expr, RecordLit):
        return replace(
            expr,
            fields=tuple(replace(fi, value=substitute(fi.value, mapping)) for fi in expr.fields),
        )
    if isinstance(expr, FieldAccess):
        return replace(expr, expr=substitute(expr.expr, mapping))
    return expr


def substitute_in_type(ty: TypeExpr, mapping: dict[str, Expr]) -> TypeExpr:
    if not mapping:
        return ty
    if isinstance(ty, SubtypeType):
        inner = {k: v for k, v in mapping.items() if k != ty.var}
        return replace(
            ty, base=substitute_in_type(ty.base, mapping), predicate=substitute(ty.predicate, inner)
        )
    if isinstance(ty, FunctionType):
        return replace(
            ty,
            params=tuple(substitute_in_type(p, mapping) for p in ty.params),
            result=substitute_in_type(ty.result, mapping),
        )
    if isinstance(ty, RecordType):
        return replace(
            ty,
            fields=tuple(replace(fd, type=substitute_in_type(fd.type, mapping)) for fd in ty.fields),
        )
    return ty


def all_identifiers(node: Node) -> set[str]:
    """Every identifier mentioned anywhere in the tree (for fresh-name checks)."""
    names: set[str] = set()
    for n in walk(node):
        for attr in ("name", "var", "field"):
            v = getattr(n, attr, None)
            if isinstance(v, str):
                names.add(v)
    return names
