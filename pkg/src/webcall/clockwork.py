"""Injectable time: a Timeline owns both the clock and deferred callbacks.

Two implementations share one interface so every component that needs time
(expiries, retransmit timers, media ticks) can run either against the wall
clock with a scheduler thread, or against a virtual clock that a test or
the scenario runner advances deterministically.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time
from typing import Callable


class TimerHandle:
    __slots__ = ("when", "seq", "fn", "cancelled")

    def __init__(self, when: float, seq: int, fn: Callable[[], None]):
        self.when = when
        self.seq = seq
        self.fn = fn
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True

    def __lt__(self, other: "TimerHandle") -> bool:
        return (self.when, self.seq) < (other.when, other.seq)


class Timeline:
    """Clock plus deferred-callback scheduler."""

    def now(self) -> float:
        raise NotImplementedError

    def call_later(self, delay: float, fn: Callable[[], None]) -> TimerHandle:
        return self.call_at(self.now() + max(0.0, delay), fn)

    def call_at(self, when: float, fn: Callable[[], None]) -> TimerHandle:
        raise NotImplementedError


class VirtualTimeline(Timeline):
    """Deterministic single-threaded timeline.

    Callbacks run only inside advance()/advance_to(), in (time, insertion)
    order, with now() pinned to each callback's scheduled instant. Not
    thread-safe by design: everything simulated runs on the driving thread.
    """

    def __init__(self, start: float = 1_000_000.0):
        self._now = start
        self._heap: list[TimerHandle] = []
        self._seq = itertools.count()

    def now(self) -> float:
        return self._now

    def call_at(self, when: float, fn: Callable[[], None]) -> TimerHandle:
        handle = TimerHandle(max(when, self._now), next(self._seq), fn)
        heapq.heappush(self._heap, handle)
        return handle

    def next_due(self) -> float | None:
        while self._heap and self._heap[0].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0].when if self._heap else None

    def advance(self, dt: float) -> int:
        return self.advance_to(self._now + dt)

    def advance_to(self, deadline: float) -> int:
        """Run every callback due at or before deadline; returns run count."""
        ran = 0
        while True:
            due = self.next_due()
            if due is None or due > deadline:
                break
            handle = heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            self._now = handle.when
            handle.fn()
            ran += 1
        self._now = max(self._now, deadline)
        return ran


class RealTimeline(Timeline):
    """Wall-clock timeline; callbacks run on one daemon scheduler thread."""

    def __init__(self):
        self._heap: list[TimerHandle] = []
        self._seq = itertools.count()
        self._cond = threading.Condition()
        self._stopped = False
        self._thread = threading.Thread(target=self._run, daemon=True, name="timeline")
        self._thread.start()

    def now(self) -> float:
        # Wall clock, not monotonic: persisted absolute timestamps must stay
        # meaningful across process restarts.
        return time.time()

    def call_at(self, when: float, fn: Callable[[], None]) -> TimerHandle:
        handle = TimerHandle(when, next(self._seq), fn)
        with self._cond:
            heapq.heappush(self._heap, handle)
            self._cond.notify()
        return handle

    def stop(self) -> None:
        with self._cond:
            self._stopped = True
            self._cond.notify()

    def _run(self) -> None:
        while True:
            with self._cond:
                while not self._stopped and (not self._heap or self._heap[0].when > time.time()):
                    if self._heap:
                        self._cond.wait(timeout=max(0.0, self._heap[0].when - time.time()))
                    else:
                        self._cond.wait()
                if self._stopped:
                    return
                handle = heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            try:
                handle.fn()
            except Exception:  # a timer must never kill the scheduler
                import logging

                logging.getLogger(__name__).exception("timer callback failed")
