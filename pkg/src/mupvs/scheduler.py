"""Delayed-call scheduling with interchangeable real and virtual clocks.

The server debounces re-checks through a Debouncer so that a burst of edits
produces one background run. Timing-sensitive tests swap in VirtualScheduler
and step time by hand, which makes "two edits 50 ms apart yield one publish"
an exact statement instead of a sleep-and-hope.
"""

from __future__ import annotations

import heapq
import itertools
import threading
from typing import Callable


class TimerScheduler:
    """Wall-clock scheduling on daemon timer threads."""

    def call_later(self, delay: float, fn: Callable[[], None]) -> "threading.Timer":
        timer = threading.Timer(delay, fn)
        timer.daemon = True
        timer.start()
        return timer


class _VirtualHandle:
    __slots__ = ("cancelled",)

    def __init__(self) -> None:
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class VirtualScheduler:
    """Manual clock: callbacks run on the thread that advances time."""

    def __init__(self) -> None:
        self.now = 0.0
        self._seq = itertools.count()
        self._queue: list[tuple[float, int, _VirtualHandle, Callable[[], None]]] = []

    def call_later(self, delay: float, fn: Callable[[], None]) -> _VirtualHandle:
        handle = _VirtualHandle()
        heapq.heappush(self._queue, (self.now + delay, next(self._seq), handle, fn))
        return handle

    def advance(self, dt: float) -> None:
        """Move the clock forward, firing every callback that comes due."""
        target = self.now + dt
        while self._queue and self._queue[0][0] <= target:
            when, _, handle, fn = heapq.heappop(self._queue)
            self.now = when
            if not handle.cancelled:
                fn()
        self.now = target

    def pending(self) -> int:
        return sum(1 for _, _, handle, _ in self._queue if not handle.cancelled)


class _Pending:
    """One scheduled action; `dead` outlives a timer that already fired."""

    __slots__ = ("handle", "dead")

    def __init__(self) -> None:
        self.handle = None
        self.dead = False

    def cancel(self) -> None:
        self.dead = True
        if self.handle is not None:
            self.handle.cancel()


class Debouncer:
    """Runs at most one delayed action per key, keeping only the latest.

    trigger() restarts the countdown for its key; when the delay elapses
    without another trigger, the most recent action runs exactly once. A
    real timer that starts firing concurrently with a retrigger checks its
    record before running, so a superseded action never sneaks through.
    """

    def __init__(self, scheduler, delay: float):
        self._scheduler = scheduler
        self.delay = delay
        self._lock = threading.Lock()
        self._pending: dict[str, _Pending] = {}

    def trigger(self, key: str, fn: Callable[[], None]) -> None:
        record = _Pending()

        def fire() -> None:
            with self._lock:
                if record.dead or self._pending.get(key) is not record:
                    return
                del self._pending[key]
            fn()

        with self._lock:
            old = self._pending.get(key)
            if old is not None:
                old.cancel()
            self._pending[key] = record
            record.handle = self._scheduler.call_later(self.delay, fire)

    def cancel(self, key: str) -> None:
        with self._lock:
            record = self._pending.pop(key, None)
            if record is not None:
                record.cancel()

    def cancel_all(self) -> None:
        with self._lock:
            for record in self._pending.values():
                record.cancel()
            self._pending.clear()
