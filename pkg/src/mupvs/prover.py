"""Sequent prover: goals, proof commands, proof trees, and script replay.

A goal is a sequent: antecedent formulas numbered -1, -2, ... and consequent
formulas numbered 1, 2, ...; the goal claims that the antecedents together
entail at least one consequent.  Commands refine the active goal into zero or
more child goals, and a proof is complete when every leaf of the tree is
closed.  The command history is replayable, which gives us undo (replay all
but the last command) and persistent proof scripts for free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence, Union

from . import syntax as S
from .evaluator import Env, build_env, try_eval_bool
from .parser import parse_expression
from .positions import Severity
from .printer import print_expr
from .typecheck import (
    Binding,
    CheckError,
    Scope,
    Tcc,
    TypecheckResult,
    _ascribable,
    build_scope,
    check_expression,
    eval_type_expr,
)
from .typesys import TypeValue, format_type

_LOGICAL_OPS = frozenset({"AND", "OR", "IMPLIES", "IFF"})
_COMPARISONS = frozenset({"=", "/=", "<", "<=", ">", ">="})
_REFLEXIVE_TRUE = frozenset({"=", "<=", ">="})
# Beyond this many distinct atoms the tautology check declines to decide.
_ATOM_LIMIT = 20


class ProverError(Exception):
    """A prover command that cannot be carried out."""

    def __init__(
        self,
        message: str,
        kind: str = "prover-error",
        step: int | None = None,
        sequent: "Sequent | None" = None,
    ):
        super().__init__(message)
        self.message = message
        self.kind = kind
        self.step = step
        self.sequent = sequent


# --------------------------------------------------------------------------
# Sequents


@dataclass(frozen=True)
class Sequent:
    """One goal: numbered antecedents entail at least one numbered consequent."""

    antecedents: tuple[S.Expr, ...] = ()
    consequents: tuple[S.Expr, ...] = ()

    def formula(self, fnum: int) -> S.Expr:
        if fnum < 0 and -fnum <= len(self.antecedents):
            return self.antecedents[-fnum - 1]
        if fnum > 0 and fnum <= len(self.consequents):
            return self.consequents[fnum - 1]
        raise ProverError(f"no formula numbered {fnum} in the current goal", "bad-fnum")

    def replace(self, fnum: int, formula: S.Expr) -> "Sequent":
        self.formula(fnum)  # bounds check
        if fnum < 0:
            ante = list(self.antecedents)
            ante[-fnum - 1] = formula
            return Sequent(tuple(ante), self.consequents)
        cons = list(self.consequents)
        cons[fnum - 1] = formula
        return Sequent(self.antecedents, tuple(cons))

    def fnums(self) -> list[int]:
        negs = [-(i + 1) for i in range(len(self.antecedents))]
        poss = [i + 1 for i in range(len(self.consequents))]
        return negs + poss

    def render(self) -> str:
        lines = [f"[{-(i + 1)}] {print_expr(f)}" for i, f in enumerate(self.antecedents)]
        lines.append("|-------")
        lines.extend(f"[{i + 1}] {print_expr(f)}" for i, f in enumerate(self.consequents))
        return "\n".join(lines)


def sequent_to_wire(sequent: Sequent) -> dict:
    return {
        "antecedents": [print_expr(f) for f in sequent.antecedents],
        "consequents": [print_expr(f) for f in sequent.consequents],
    }


# --------------------------------------------------------------------------
# Proof trees


@dataclass
class ProofNode:
    id: int
    sequent: Sequent
    command: str | None = None
    closed_by: str | None = None
    children: list["ProofNode"] = field(default_factory=list)

    @property
    def state(self) -> str:
        if self.closed_by is not None:
            return "closed"
        if self.children and all(c.state == "closed" for c in self.children):
            return "closed"
        return "open"

    def walk(self) -> Iterator["ProofNode"]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class ProofTree:
    theory: str
    formula: str
    initial: Sequent
    root: ProofNode
    active_leaf_id: int | None
    history: list[str] = field(default_factory=list)
    skolem_counter: int = 0
    skolem_types: dict[str, TypeValue] = field(default_factory=dict)
    abandoned: bool = False
    next_id: int = 1

    def node(self, node_id: int) -> ProofNode | None:
        for n in self.root.walk():
            if n.id == node_id:
                return n
        return None

    def open_leaves(self) -> list[ProofNode]:
        return [n for n in self.root.walk() if not n.children and n.state == "open"]

    def active(self) -> ProofNode | None:
        if self.active_leaf_id is None:
            return None
        return self.node(self.active_leaf_id)

    @property
    def is_proved(self) -> bool:
        return self.root.state == "closed"


def node_to_wire(node: ProofNode) -> dict:
    return {
        "id": node.id,
        "sequent": sequent_to_wire(node.sequent),
        "command": node.command,
        "state": node.state,
        "children": [node_to_wire(c) for c in node.children],
    }


def tree_to_wire(tree: ProofTree) -> dict:
    return {
        "theory": tree.theory,
        "formula": tree.formula,
        "root": node_to_wire(tree.root),
        "activeLeafId": tree.active_leaf_id,
        "history": list(tree.history),
        "proved": tree.is_proved,
        "abandoned": tree.abandoned,
    }


# --------------------------------------------------------------------------
# Proof context: everything a proof needs from the typechecked workspace


@dataclass
class ProofContext:
    theory_name: str
    scope: Scope
    env: Env
    definitions: dict[str, Union[S.FunDef, S.ConstDecl]]
    formulas: dict[str, S.Expr]
    ok: bool
    known_names: frozenset[str]


def make_context(
    theories: Sequence[S.Theory], results: Sequence[TypecheckResult]
) -> ProofContext:
    """Assemble a proof context for the last theory in the chain.

    `theories` and `results` run outermost-first (prelude, imports, then the
    theory whose formulas are being proved) and must be aligned.
    """
    target = theories[-1]
    target_result = results[-1]
    definitions: dict[str, Union[S.FunDef, S.ConstDecl]] = {}
    names: set[str] = set()
    for theory in theories:
        names |= S.all_identifiers(theory)
        for decl in theory.decls:
            if isinstance(decl, S.FunDef):
                definitions[decl.name] = decl
            elif isinstance(decl, S.ConstDecl) and decl.body is not None:
                definitions[decl.name] = decl
    formulas: dict[str, S.Expr] = {}
    for decl in target.decls:
        if isinstance(decl, S.FormulaDecl):
            formulas[decl.name] = decl.body
    for tcc in target_result.tccs:
        formulas[tcc.id] = tcc.obligation
    return ProofContext(
        theory_name=target.name,
        scope=build_scope([r.exports for r in results]),
        env=build_env(theories),
        definitions=definitions,
        formulas=formulas,
        ok=all(r.ok for r in results),
        known_names=frozenset(names),
    )


def context_from_source(source_text: str, theory: str | None = None) -> ProofContext:
    """Parse and typecheck source text, then build a context for one theory.

    Intended for tests and batch tools; raises ProverError when the text does
    not parse or the requested theory is missing.
    """
    from .parser import parse_theory_file
    from .prelude import prelude_result, prelude_theory
    from .typecheck import typecheck_file

    parsed = parse_theory_file("mem:/prover-input.pvs", source_text)
    if any(d.severity is Severity.ERROR for d in parsed.diagnostics):
        first = parsed.diagnostics[0]
        raise ProverError(f"source does not parse: {first.message}", "parse-error")
    results = typecheck_file(parsed.ast)
    chain = list(parsed.ast.theories)
    if theory is not None:
        idx = next((i for i, t in enumerate(chain) if t.name == theory), None)
        if idx is None:
            raise ProverError(f"no theory named '{theory}' in source", "formula-not-found")
        chain, results = chain[: idx + 1], results[: idx + 1]
    return make_context(
        [prelude_theory(), *chain], [prelude_result(), *results]
    )


# --------------------------------------------------------------------------
# Commands


@dataclass(frozen=True)
class Command:
    name: str
    fnum: int | None = None
    argument: str | None = None

    @property
    def text(self) -> str:
        parts = [self.name]
        if self.fnum is not None:
            parts.append(str(self.fnum))
        if self.argument is not None:
            parts.append(self.argument)
        return " ".join(parts)


_NO_ARG_COMMANDS = frozenset(
    {"flatten", "split", "skolem", "assert", "prop", "grind", "postpone", "undo", "quit"}
)


def parse_command(text: str) -> Command:
    """Parse one prover command line; surrounding parentheses are tolerated."""
    stripped = text.strip()
    if stripped.startswith("(") and stripped.endswith(")"):
        stripped = stripped[1:-1].strip()
    if not stripped:
        raise ProverError("empty prover command", "unknown-command")
    head, _, rest = stripped.partition(" ")
    rest = rest.strip()
    if head in _NO_ARG_COMMANDS:
        if rest:
            raise ProverError(f"'{head}' takes no arguments", "unknown-command")
        return Command(head)
    if head == "expand":
        if not rest or " " in rest:
            raise ProverError("usage: expand <name>", "unknown-command")
        return Command("expand", argument=rest)
    if head == "inst":
        fnum_text, _, term = rest.partition(" ")
        term = term.strip()
        try:
            fnum = int(fnum_text)
        except ValueError:
            raise ProverError("usage: inst <fnum> <term>", "bad-fnum") from None
        if not term:
            raise ProverError("usage: inst <fnum> <term>", "unknown-command")
        return Command("inst", fnum=fnum, argument=term)
    raise ProverError(f"unknown prover command '{head}'", "unknown-command")


@dataclass(frozen=True)
class ProverResult:
    outcome: str  # "branched" | "closed" | "no-change" | "error"
    message: str | None = None
    children: tuple[int, ...] = ()
    new_active_leaf: int | None = None
    error_kind: str | None = None

    def to_wire(self) -> dict:
        return {
            "outcome": self.outcome,
            "message": self.message,
            "children": list(self.children),
            "newActiveLeaf": self.new_active_leaf,
            "errorKind": self.error_kind,
        }


# --------------------------------------------------------------------------
# Starting and steering a proof


def start_proof(
    formula: Union[str, S.FormulaDecl, Tcc], ctx: ProofContext
) -> ProofTree:
    if not ctx.ok:
        raise ProverError(
            f"theory '{ctx.theory_name}' has typecheck errors; prove after a clean check",
            "not-typechecked",
        )
    name, body = _resolve_formula(formula, ctx)
    initial = Sequent((), (body,))
    root = ProofNode(0, initial)
    return ProofTree(ctx.theory_name, name, initial, root, active_leaf_id=0)


def _resolve_formula(
    formula: Union[str, S.FormulaDecl, Tcc], ctx: ProofContext
) -> tuple[str, S.Expr]:
    if isinstance(formula, S.FormulaDecl):
        return formula.name, formula.body
    if isinstance(formula, Tcc):
        return formula.id, formula.obligation
    body = ctx.formulas.get(formula)
    if body is None:
        raise ProverError(
            f"no formula named '{formula}' in theory '{ctx.theory_name}'",
            "formula-not-found",
        )
    return formula, body


def apply_command(
    tree: ProofTree, command: Union[str, Command], ctx: ProofContext
) -> ProverResult:
    """Run one command against the tree's active goal.

    Mutates the tree in place; failures come back as an "error" result
    rather than an exception so interactive callers can keep going.
    """
    try:
        cmd = command if isinstance(command, Command) else parse_command(command)
        return _apply(tree, cmd, ctx, record=True)
    except (ProverError, CheckError) as err:
        kind = err.kind if isinstance(err, ProverError) else "ill-typed-term"
        return ProverResult(
            "error",
            message=str(err),
            new_active_leaf=tree.active_leaf_id,
            error_kind=kind,
        )


def _apply(tree: ProofTree, cmd: Command, ctx: ProofContext, record: bool) -> ProverResult:
    if tree.abandoned:
        raise ProverError("the proof was abandoned with quit", "abandoned")

    if cmd.name == "quit":
        tree.abandoned = True
        return ProverResult(
            "no-change", message="proof abandoned; tree preserved", new_active_leaf=None
        )

    if cmd.name == "undo":
        if not tree.history:
            raise ProverError("nothing to undo: already at the root goal", "undo-at-root")
        undone = tree.history.pop()
        _replay_into(tree, ctx)
        return ProverResult(
            "no-change",
            message=f"undid '{undone}'",
            new_active_leaf=tree.active_leaf_id,
        )

    active = tree.active()
    if active is None:
        raise ProverError("no open goals: the proof is already complete", "no-open-goals")

    if cmd.name == "postpone":
        leaves = tree.open_leaves()
        if len(leaves) <= 1:
            return ProverResult(
                "no-change",
                message="only one open goal",
                new_active_leaf=tree.active_leaf_id,
            )
        idx = next(i for i, leaf in enumerate(leaves) if leaf.id == active.id)
        target = leaves[(idx + 1) % len(leaves)]
        tree.active_leaf_id = target.id
        if record:
            tree.history.append(cmd.text)
        return ProverResult(
            "no-change",
            message=f"postponed; goal {target.id} is now active",
            new_active_leaf=target.id,
        )

    if cmd.name == "flatten":
        flat = _flatten(active.sequent)
        if flat is None:
            return _no_change(tree, "nothing to flatten")
        return _conclude(tree, active, cmd, [flat], record)

    if cmd.name == "split":
        parts = _split(active.sequent)
        if parts is None:
            return _no_change(tree, "nothing to split")
        return _conclude(tree, active, cmd, parts, record)

    if cmd.name == "skolem":
        skolemized = _skolemize(active.sequent, tree, ctx)
        if skolemized is None:
            return _no_change(tree, "no quantifier to skolemize")
        return _conclude(tree, active, cmd, [skolemized], record)

    if cmd.name == "inst":
        assert cmd.fnum is not None and cmd.argument is not None
        instantiated = _instantiate(active.sequent, cmd.fnum, cmd.argument, tree, ctx)
        return _conclude(tree, active, cmd, [instantiated], record)

    if cmd.name == "expand":
        assert cmd.argument is not None
        expanded = _expand_in_sequent(active.sequent, cmd.argument, ctx)
        if expanded is None:
            return _no_change(tree, f"no occurrences of '{cmd.argument}' to expand")
        return _conclude(tree, active, cmd, [expanded], record)

    if cmd.name == "assert":
        status, simplified = _assert_rule(active.sequent, ctx)
        if status == "closed":
            return _conclude(tree, active, cmd, [], record)
        if status == "changed":
            assert simplified is not None
            return _conclude(tree, active, cmd, [simplified], record)
        return _no_change(tree, "assert made no progress")

    if cmd.name == "prop":
        remaining = _prop_open(active.sequent, ctx)
        if remaining == [active.sequent]:
            return _no_change(tree, "prop made no progress")
        return _conclude(tree, active, cmd, remaining, record)

    if cmd.name == "grind":
        remaining = _grind_open(active.sequent, tree, ctx)
        if remaining == [active.sequent]:
            return _no_change(tree, "grind made no progress")
        return _conclude(tree, active, cmd, remaining, record)

    raise ProverError(f"unknown prover command '{cmd.name}'", "unknown-command")


def _no_change(tree: ProofTree, message: str) -> ProverResult:
    return ProverResult("no-change", message=message, new_active_leaf=tree.active_leaf_id)


def _conclude(
    tree: ProofTree,
    node: ProofNode,
    cmd: Command,
    child_sequents: list[Sequent],
    record: bool,
) -> ProverResult:
    node.command = cmd.text
    if not child_sequents:
        node.closed_by = cmd.text
    else:
        for seq in child_sequents:
            node.children.append(ProofNode(tree.next_id, seq))
            tree.next_id += 1
    if record:
        tree.history.append(cmd.text)
    opens = tree.open_leaves()
    tree.active_leaf_id = opens[0].id if opens else None
    if not child_sequents:
        return ProverResult("closed", new_active_leaf=tree.active_leaf_id)
    return ProverResult(
        "branched",
        children=tuple(c.id for c in node.children),
        new_active_leaf=tree.active_leaf_id,
    )


def _replay_into(tree: ProofTree, ctx: ProofContext) -> None:
    """Rebuild the tree from its initial goal by replaying the history."""
    fresh = ProofTree(
        tree.theory, tree.formula, tree.initial, ProofNode(0, tree.initial), 0
    )
    for text in tree.history:
        result = _apply(fresh, parse_command(text), ctx, record=False)
        if result.outcome == "error":  # cannot happen for a history we built
            raise ProverError(f"replay failed on '{text}': {result.message}", "replay")
    tree.root = fresh.root
    tree.active_leaf_id = fresh.active_leaf_id
    tree.skolem_counter = fresh.skolem_counter
    tree.skolem_types = fresh.skolem_types
    tree.next_id = fresh.next_id


# --------------------------------------------------------------------------
# Structural rules


def _flatten(sequent: Sequent) -> Sequent | None:
    """Apply all non-branching propositional rules to a fixpoint."""
    ante = list(sequent.antecedents)
    cons = list(sequent.consequents)
    changed = False
    while True:
        step = False
        for i, f in enumerate(ante):
            if isinstance(f, S.InfixOp) and f.op == "AND":
                ante[i : i + 1] = [f.left, f.right]
                step = True
                break
            if isinstance(f, S.PrefixOp) and f.op == "NOT":
                del ante[i]
                cons.append(f.operand)
                step = True
                break
        if step:
            changed = True
            continue
        for i, f in enumerate(cons):
            if isinstance(f, S.InfixOp) and f.op == "IMPLIES":
                ante.append(f.left)
                cons[i] = f.right
                step = True
                break
            if isinstance(f, S.InfixOp) and f.op == "OR":
                cons[i : i + 1] = [f.left, f.right]
                step = True
                break
            if isinstance(f, S.PrefixOp) and f.op == "NOT":
                del cons[i]
                ante.append(f.operand)
                step = True
                break
        if step:
            changed = True
            continue
        break
    if not changed:
        return None
    return Sequent(tuple(ante), tuple(cons))


def _split(sequent: Sequent) -> list[Sequent] | None:
    """Branch on the first splittable formula, scanning by |fnum|."""
    ante, cons = sequent.antecedents, sequent.consequents
    for k in range(1, max(len(ante), len(cons)) + 1):
        if k <= len(ante):
            f = ante[k - 1]
            if isinstance(f, S.InfixOp) and f.op == "OR":
                return [sequent.replace(-k, f.left), sequent.replace(-k, f.right)]
        if k <= len(cons):
            f = cons[k - 1]
            if isinstance(f, S.InfixOp) and f.op == "AND":
                return [sequent.replace(k, f.left), sequent.replace(k, f.right)]
            if isinstance(f, S.IfExpr):
                then_goal = Sequent(ante + (f.cond,), cons).replace(k, f.then)
                else_goal = Sequent(
                    ante + (S.PrefixOp("NOT", f.cond, f.cond.range),), cons
                ).replace(k, f.els)
                return [then_goal, else_goal]
    return None


def _skolemize(sequent: Sequent, tree: ProofTree, ctx: ProofContext) -> Sequent | None:
    """Replace the first FORALL consequent (or EXISTS antecedent) with fresh constants."""
    target: tuple[int, S.Binder] | None = None
    for i, f in enumerate(sequent.consequents):
        if isinstance(f, S.Binder) and f.kind is S.BinderKind.FORALL:
            target = (i + 1, f)
            break
    if target is None:
        for i, f in enumerate(sequent.antecedents):
            if isinstance(f, S.Binder) and f.kind is S.BinderKind.EXISTS:
                target = (-(i + 1), f)
                break
    if target is None:
        return None
    fnum, binder = target
    used = set(ctx.known_names) | set(tree.skolem_types)
    for f in sequent.antecedents + sequent.consequents:
        used |= S.all_identifiers(f)
    mapping: dict[str, S.Expr] = {}
    for param in binder.params:
        tree.skolem_counter += 1
        name = f"{param.name}!{tree.skolem_counter}"
        while name in used:
            tree.skolem_counter += 1
            name = f"{param.name}!{tree.skolem_counter}"
        used.add(name)
        tree.skolem_types[name] = eval_type_expr(param.type, ctx.scope)
        mapping[param.name] = S.NameRef(name, param.range)
    return sequent.replace(fnum, S.substitute(binder.body, mapping))


def _prover_scope(tree: ProofTree, ctx: ProofContext) -> Scope:
    scope = ctx.scope.child()
    for name, tv in tree.skolem_types.items():
        scope.bind(
            Binding(name, "skolem", "proof:/goal", ctx.theory_name, S.DUMMY_RANGE, tv)
        )
    return scope


def _instantiate(
    sequent: Sequent, fnum: int, term_text: str, tree: ProofTree, ctx: ProofContext
) -> Sequent:
    f = sequent.formula(fnum)
    want = S.BinderKind.FORALL if fnum < 0 else S.BinderKind.EXISTS
    if not (isinstance(f, S.Binder) and f.kind is want):
        side = "a FORALL antecedent" if fnum < 0 else "an EXISTS consequent"
        raise ProverError(f"formula {fnum} is not {side}", "bad-fnum")
    term, diags = parse_expression(term_text)
    if term is None or diags:
        detail = diags[0].message if diags else "empty term"
        raise ProverError(f"cannot parse instantiation term: {detail}", "ill-typed-term")
    scope = _prover_scope(tree, ctx)
    actual, check_diags, _tccs = check_expression(term, scope)
    errors = [d for d in check_diags if d.severity is Severity.ERROR]
    if errors:
        raise ProverError(
            f"ill-typed instantiation term: {errors[0].message}", "ill-typed-term"
        )
    expected = eval_type_expr(f.params[0].type, scope)
    if not _ascribable(actual, expected):
        raise ProverError(
            f"instantiation term has type {format_type(actual)}, "
            f"but '{f.params[0].name}' expects {format_type(expected)}",
            "ill-typed-term",
        )
    rest = f.params[1:]
    inner: S.Expr = S.Binder(f.kind, rest, f.body, f.range) if rest else f.body
    return sequent.replace(fnum, S.substitute(inner, {f.params[0].name: term}))


# --------------------------------------------------------------------------
# Definition expansion


def _expand_in_sequent(sequent: Sequent, name: str, ctx: ProofContext) -> Sequent | None:
    decl = ctx.definitions.get(name)
    if decl is None:
        raise ProverError(f"no definition named '{name}' to expand", "unknown-definition")
    if isinstance(decl, S.FunDef):
        params = tuple(p.name for p in decl.params)
        body = decl.body
    else:
        params = None
        body = decl.body
        assert body is not None
    # Names the inserted body will still reference after substitution; if an
    # enclosing binder in the goal captures one, that occurrence is skipped.
    body_free = S.free_names(body) - set(params or ())
    changed = [False]

    def rewrite(expr: S.Expr, bound: frozenset[str]) -> S.Expr:
        out = _rebuild(expr, bound, rewrite)
        if params is None:
            if isinstance(out, S.NameRef) and out.name == name and name not in bound:
                if not (body_free & bound):
                    changed[0] = True
                    return body
            return out
        if (
            isinstance(out, S.Apply)
            and isinstance(out.fn, S.NameRef)
            and out.fn.name == name
            and name not in bound
            and len(out.args) == len(params)
            and not (body_free & bound)
        ):
            changed[0] = True
            return S.substitute(body, dict(zip(params, out.args)))
        return out

    new_ante = tuple(rewrite(f, frozenset()) for f in sequent.antecedents)
    new_cons = tuple(rewrite(f, frozenset()) for f in sequent.consequents)
    if not changed[0]:
        return None
    return Sequent(new_ante, new_cons)


def _rebuild(expr: S.Expr, bound: frozenset[str], rec) -> S.Expr:
    """Rebuild one node with rewritten children, tracking bound names."""
    if isinstance(expr, S.InfixOp):
        return S.InfixOp(expr.op, rec(expr.left, bound), rec(expr.right, bound), expr.range)
    if isinstance(expr, S.PrefixOp):
        return S.PrefixOp(expr.op, rec(expr.operand, bound), expr.range)
    if isinstance(expr, S.Apply):
        return S.Apply(
            rec(expr.fn, bound), tuple(rec(a, bound) for a in expr.args), expr.range
        )
    if isinstance(expr, S.IfExpr):
        return S.IfExpr(
            rec(expr.cond, bound), rec(expr.then, bound), rec(expr.els, bound), expr.range
        )
    if isinstance(expr, S.Binder):
        inner = bound | {p.name for p in expr.params}
        return S.Binder(expr.kind, expr.params, rec(expr.body, inner), expr.range)
    if isinstance(expr, S.LetExpr):
        return S.LetExpr(
            expr.var,
            expr.type,
            rec(expr.value, bound),
            rec(expr.body, bound | {expr.var}),
            expr.range,
            expr.var_range,
        )
    if isinstance(expr, S.RecordLit):
        return S.RecordLit(
            tuple(
                S.FieldInit(fi.name, rec(fi.value, bound), fi.range)
                for fi in expr.fields
            ),
            expr.range,
        )
    if isinstance(expr, S.FieldAccess):
        return S.FieldAccess(
            rec(expr.expr, bound), expr.field, expr.range, expr.field_range
        )
    return expr


# --------------------------------------------------------------------------
# assert: ground simplification plus propositional closure


def _assert_rule(
    sequent: Sequent, ctx: ProofContext
) -> tuple[str, Sequent | None]:
    simplified = Sequent(
        tuple(_simplify(f, ctx) for f in sequent.antecedents),
        tuple(_simplify(f, ctx) for f in sequent.consequents),
    )
    if _tautology(simplified, ctx):
        return "closed", None
    if simplified != sequent:
        return "changed", simplified
    return "none", None


def _simplify(expr: S.Expr, ctx: ProofContext) -> S.Expr:
    if isinstance(expr, S.InfixOp):
        left = _simplify(expr.left, ctx)
        right = _simplify(expr.right, ctx)
        node = S.InfixOp(expr.op, left, right, expr.range)
        if expr.op in _COMPARISONS:
            if left == right:
                return S.BoolLit(expr.op in _REFLEXIVE_TRUE, expr.range)
            verdict = try_eval_bool(node, ctx.env)
            if verdict is not None:
                return S.BoolLit(verdict, expr.range)
        return node
    if isinstance(expr, S.PrefixOp):
        operand = _simplify(expr.operand, ctx)
        if expr.op == "NOT" and isinstance(operand, S.BoolLit):
            return S.BoolLit(not operand.value, expr.range)
        return S.PrefixOp(expr.op, operand, expr.range)
    if isinstance(expr, S.IfExpr):
        cond = _simplify(expr.cond, ctx)
        then = _simplify(expr.then, ctx)
        els = _simplify(expr.els, ctx)
        if isinstance(cond, S.BoolLit):
            return then if cond.value else els
        return S.IfExpr(cond, then, els, expr.range)
    if isinstance(expr, S.Binder):
        return S.Binder(expr.kind, expr.params, _simplify(expr.body, ctx), expr.range)
    if isinstance(expr, (S.Apply, S.LetExpr, S.RecordLit, S.FieldAccess)):
        return _rebuild(expr, frozenset(), lambda e, _b: _simplify(e, ctx))
    return expr


def _tautology(sequent: Sequent, ctx: ProofContext) -> bool:
    """Is the sequent propositionally valid over its atomic formulas?

    Truth tables are evaluated column-wise: each atom gets a 2^n-bit integer
    whose bit r is the atom's value in assignment r, and connectives become
    bitwise operations on whole columns.
    """
    atoms: dict[S.Expr, int] = {}
    order: list[S.Expr] = []

    def collect(e: S.Expr) -> None:
        if isinstance(e, S.BoolLit):
            return
        if isinstance(e, S.InfixOp) and e.op in _LOGICAL_OPS:
            collect(e.left)
            collect(e.right)
        elif isinstance(e, S.PrefixOp) and e.op == "NOT":
            collect(e.operand)
        elif isinstance(e, S.IfExpr):
            collect(e.cond)
            collect(e.then)
            collect(e.els)
        elif e not in atoms:
            atoms[e] = len(order)
            order.append(e)

    for f in sequent.antecedents + sequent.consequents:
        collect(f)
    n = len(order)
    if n > _ATOM_LIMIT:
        return False
    rows = 1 << n
    full = (1 << rows) - 1
    columns: list[int] = []
    for i, atom in enumerate(order):
        verdict = try_eval_bool(atom, ctx.env)
        if verdict is True:
            columns.append(full)
        elif verdict is False:
            columns.append(0)
        else:
            columns.append(_column(i, rows))

    def mask(e: S.Expr) -> int:
        if isinstance(e, S.BoolLit):
            return full if e.value else 0
        if isinstance(e, S.InfixOp) and e.op in _LOGICAL_OPS:
            a, b = mask(e.left), mask(e.right)
            if e.op == "AND":
                return a & b
            if e.op == "OR":
                return a | b
            if e.op == "IMPLIES":
                return (full ^ a) | b
            return full ^ (a ^ b)  # IFF
        if isinstance(e, S.PrefixOp) and e.op == "NOT":
            return full ^ mask(e.operand)
        if isinstance(e, S.IfExpr):
            c = mask(e.cond)
            return (c & mask(e.then)) | ((full ^ c) & mask(e.els))
        return columns[atoms[e]]

    failing = full
    for f in sequent.antecedents:
        failing &= mask(f)
    for f in sequent.consequents:
        failing &= full ^ mask(f)
    return failing == 0


def _column(i: int, rows: int) -> int:
    """Truth-table column for atom i: bit r is (r >> i) & 1, as one integer.

    Built by doubling the periodic block rather than by big-integer division,
    which degrades quadratically once masks reach hundreds of kilobits.
    """
    run = 1 << i
    block = ((1 << run) - 1) << run
    width = run << 1
    while width < rows:
        block |= block << width
        width <<= 1
    return block


# --------------------------------------------------------------------------
# Macros: prop and grind


def _prop_open(sequent: Sequent, ctx: ProofContext) -> list[Sequent]:
    """Saturate with assert/flatten/split; return the goals left open."""
    pending = [sequent]
    stuck: list[Sequent] = []
    while pending:
        s = pending.pop(0)
        status, simplified = _assert_rule(s, ctx)
        if status == "closed":
            continue
        if status == "changed":
            assert simplified is not None
            pending.insert(0, simplified)
            continue
        flat = _flatten(s)
        if flat is not None:
            pending.insert(0, flat)
            continue
        parts = _split(s)
        if parts is not None:
            pending[0:0] = parts
            continue
        stuck.append(s)
    return stuck


def _grind_open(sequent: Sequent, tree: ProofTree, ctx: ProofContext) -> list[Sequent]:
    """Expand non-recursive definitions, skolemize, then run prop."""
    s = sequent
    changed = True
    while changed:
        changed = False
        mentioned: set[str] = set()
        for f in s.antecedents + s.consequents:
            mentioned |= S.all_identifiers(f)
        for name in sorted(mentioned):
            decl = ctx.definitions.get(name)
            if decl is None or (isinstance(decl, S.FunDef) and decl.recursive):
                continue
            expanded = _expand_in_sequent(s, name, ctx)
            if expanded is not None:
                s = expanded
                changed = True
    while True:
        skolemized = _skolemize(s, tree, ctx)
        if skolemized is None:
            break
        s = skolemized
    return _prop_open(s, ctx)


# --------------------------------------------------------------------------
# Proof scripts


@dataclass(frozen=True)
class ProofScript:
    theory: str
    formula: str
    commands: tuple[str, ...]

    @property
    def filename(self) -> str:
        return script_filename(self.theory, self.formula)

    def to_json(self) -> str:
        payload = {
            "theory": self.theory,
            "formula": self.formula,
            "commands": list(self.commands),
        }
        return json.dumps(payload, indent=2) + "\n"


def script_filename(theory: str, formula: str) -> str:
    return f"{theory}.{formula}.proof.json"


def save_script(tree: ProofTree) -> ProofScript:
    return ProofScript(tree.theory, tree.formula, tuple(tree.history))


def write_script(script: ProofScript, directory: Union[str, Path]) -> Path:
    path = Path(directory) / script.filename
    path.write_text(script.to_json(), encoding="utf-8")
    return path


def load_script(path: Union[str, Path]) -> ProofScript:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return ProofScript(
            str(data["theory"]), str(data["formula"]), tuple(map(str, data["commands"]))
        )
    except (KeyError, TypeError) as err:
        raise ProverError(f"malformed proof script {path}: {err}", "bad-script") from None


def load_and_replay(script: ProofScript, ctx: ProofContext) -> ProofTree:
    """Re-run a saved script from scratch; the tree records how far it got."""
    if script.theory != ctx.theory_name:
        raise ProverError(
            f"script targets theory '{script.theory}' but the context is for "
            f"'{ctx.theory_name}'",
            "formula-not-found",
        )
    if script.formula not in ctx.formulas:
        raise ProverError(
            f"no formula named '{script.formula}' in theory '{ctx.theory_name}'",
            "formula-not-found",
        )
    tree = start_proof(script.formula, ctx)
    for step, text in enumerate(script.commands, start=1):
        result = apply_command(tree, text, ctx)
        if result.outcome == "error":
            active = tree.active()
            raise ProverError(
                f"command failed at step {step} ('{text}'): {result.message}",
                "command-failed-at-step",
                step=step,
                sequent=active.sequent if active else None,
            )
    return tree
