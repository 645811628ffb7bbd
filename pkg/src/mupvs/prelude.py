"""The built-in standard library theory.

A single small theory every file implicitly imports. The boolean
connectives are declared by name so hover, completion, and
find-declaration have real declaration sites to point at, even though
the grammar treats them as operators. Real libraries are orders of
magnitude larger; this one is a deliberately small stand-in.
"""

from __future__ import annotations

from . import syntax as S
from .parser import parse_theory_file
from .typecheck import TypecheckResult, typecheck

PRELUDE_URI = "prelude:/prelude.pvs"

PRELUDE_TEXT = """\
prelude: THEORY
BEGIN
  % Boolean connectives, declared so tooling can describe them.
  NOT: [bool -> bool]
  AND: [bool, bool -> bool]
  OR: [bool, bool -> bool]
  IMPLIES: [bool, bool -> bool]
  IFF: [bool, bool -> bool]

  % Small arithmetic helpers.
  id(x: real): real = x
  abs(x: real): real = IF x < 0 THEN -x ELSE x ENDIF
  min(x, y: real): real = IF x <= y THEN x ELSE y ENDIF
  max(x, y: real): real = IF x <= y THEN y ELSE x ENDIF
END prelude
"""

_theory: S.Theory | None = None
_result: TypecheckResult | None = None


def prelude_theory() -> S.Theory:
    """The parsed prelude theory (cached)."""
    global _theory
    if _theory is None:
        parsed = parse_theory_file(PRELUDE_URI, PRELUDE_TEXT, connective_decls=True)
        if parsed.diagnostics:
            raise RuntimeError(f"prelude does not parse: {parsed.diagnostics[0].message}")
        _theory = parsed.ast.theories[0]
    return _theory


def prelude_result() -> TypecheckResult:
    """The typechecked prelude (cached); always clean."""
    global _result
    if _result is None:
        result = typecheck(prelude_theory(), uri=PRELUDE_URI, use_prelude=False)
        if not result.ok:
            raise RuntimeError(
                f"prelude does not typecheck: {result.diagnostics[0].message}"
            )
        _result = result
    return _result
