"""Interactive prover sessions: a pool of isolated proof attempts.

Each session owns one proof tree and a single-worker queue, so commands for
one session run strictly in order while different sessions proceed in
parallel.  A separate background executor carries parse and typecheck work
without ever blocking prover traffic.
"""

from __future__ import annotations

import itertools
import os
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

from .prover import (
    ProofContext,
    ProofScript,
    ProofTree,
    ProverError,
    ProverResult,
    apply_command,
    save_script,
    start_proof,
    tree_to_wire,
    write_script,
)


class SessionError(Exception):
    """A session operation that cannot be honored."""

    def __init__(self, message: str, kind: str = "session-error"):
        super().__init__(message)
        self.message = message
        self.kind = kind


@dataclass(frozen=True)
class FormulaRef:
    uri: str
    theory: str
    formula: str

    def to_wire(self) -> dict:
        return {"uri": self.uri, "theory": self.theory, "formula": self.formula}

    @staticmethod
    def from_wire(d: dict) -> "FormulaRef":
        return FormulaRef(str(d["uri"]), str(d["theory"]), str(d["formula"]))


@dataclass
class ProverSession:
    session_id: str
    ref: FormulaRef
    tree: ProofTree
    ctx: ProofContext
    state: str  # active | quiescent | done | abandoned
    executor: ThreadPoolExecutor = field(repr=False)

    @property
    def command_history(self) -> list[str]:
        return list(self.tree.history)

    def rendered_goal(self) -> Union[str, None]:
        node = self.tree.active()
        return node.sequent.render() if node is not None else None


@dataclass(frozen=True)
class RoutedResult:
    result: ProverResult
    state: str
    tree: dict
    goal: Union[str, None]

    def to_wire(self) -> dict:
        return {
            "result": self.result.to_wire(),
            "state": self.state,
            "tree": self.tree,
            "goal": self.goal,
        }


_LIVE_STATES = ("active", "quiescent")


class SessionPool:
    """Routes prover commands to per-formula sessions.

    The session table is guarded by one lock; command execution happens on
    each session's own worker so a slow proof never delays another session.
    """

    def __init__(
        self,
        on_status: Union[Callable[[FormulaRef, str], None], None] = None,
        script_dir: Union[str, Path, None] = None,
        background_workers: Union[int, None] = None,
    ):
        self._sessions: dict[str, ProverSession] = {}
        self._lock = threading.Lock()
        self._ids = itertools.count(1)
        self._on_status = on_status
        self.script_dir = Path(script_dir) if script_dir is not None else None
        workers = background_workers or os.cpu_count() or 4
        self._background = ThreadPoolExecutor(
            max_workers=workers, thread_name_prefix="mupvs-bg"
        )

    # -- session lifecycle -------------------------------------------------

    def create_session(self, ref: FormulaRef, ctx: ProofContext) -> ProverSession:
        with self._lock:
            for existing in self._sessions.values():
                if existing.ref == ref and existing.state in _LIVE_STATES:
                    raise SessionError(
                        f"a prover session for {ref.theory}.{ref.formula} is already open",
                        "duplicate-session",
                    )
            try:
                tree = start_proof(ref.formula, ctx)
            except ProverError as err:
                raise SessionError(str(err), err.kind) from None
            session_id = f"proof-{next(self._ids)}"
            session = ProverSession(
                session_id,
                ref,
                tree,
                ctx,
                "active",
                ThreadPoolExecutor(max_workers=1, thread_name_prefix=session_id),
            )
            self._sessions[session_id] = session
        return session

    def session(self, session_id: str) -> ProverSession:
        with self._lock:
            found = self._sessions.get(session_id)
        if found is None:
            raise SessionError(f"unknown session '{session_id}'", "unknown-session")
        return found

    def sessions(self) -> list[ProverSession]:
        with self._lock:
            return list(self._sessions.values())

    # -- command routing ---------------------------------------------------

    def route_command(self, session_id: str, command: str) -> "Future[RoutedResult]":
        session = self.session(session_id)
        if session.state == "done":
            raise SessionError(
                f"session '{session_id}' already finished its proof", "session-done"
            )
        if session.state == "abandoned":
            raise SessionError(
                f"session '{session_id}' was abandoned", "session-done"
            )
        session.state = "active"
        return session.executor.submit(self._execute, session, command)

    def run_command(
        self, session_id: str, command: str, timeout: Union[float, None] = None
    ) -> RoutedResult:
        return self.route_command(session_id, command).result(timeout)

    def _execute(self, session: ProverSession, command: str) -> RoutedResult:
        result = apply_command(session.tree, command, session.ctx)
        if session.tree.is_proved:
            session.state = "done"
            self._notify(session.ref, "proved")
        elif session.tree.abandoned:
            session.state = "abandoned"
        else:
            session.state = "quiescent"
        return RoutedResult(
            result=result,
            state=session.state,
            tree=tree_to_wire(session.tree),
            goal=session.rendered_goal(),
        )

    # -- closing -----------------------------------------------------------

    def close_session(
        self, session_id: str, persist: bool = False
    ) -> Union[ProofScript, None]:
        with self._lock:
            session = self._sessions.pop(session_id, None)
        if session is None:
            raise SessionError(f"unknown session '{session_id}'", "unknown-session")
        # Drain the session's queue so the script reflects every command.
        script = session.executor.submit(
            lambda: save_script(session.tree) if persist else None
        ).result()
        session.executor.shutdown(wait=False)
        if session.tree.is_proved:
            session.state = "done"
        else:
            session.state = "abandoned"
            self._notify(session.ref, "unfinished")
        if persist and script is not None and self.script_dir is not None:
            self.script_dir.mkdir(parents=True, exist_ok=True)
            write_script(script, self.script_dir)
        return script

    def abandon_all(self) -> list[str]:
        """Drop every session without persisting; for connection teardown."""
        with self._lock:
            sessions = list(self._sessions.items())
            self._sessions.clear()
        for _sid, session in sessions:
            session.executor.shutdown(wait=False, cancel_futures=True)
            session.state = "abandoned"
        return [sid for sid, _ in sessions]

    # -- background work ---------------------------------------------------

    def submit_background(self, fn: Callable, *args, **kwargs) -> Future:
        return self._background.submit(fn, *args, **kwargs)

    def shutdown(self) -> None:
        self.abandon_all()
        self._background.shutdown(wait=False, cancel_futures=True)

    def _notify(self, ref: FormulaRef, status: str) -> None:
        if self._on_status is not None:
            self._on_status(ref, status)
