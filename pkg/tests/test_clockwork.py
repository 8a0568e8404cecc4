"""Timeline semantics: ordering, cancellation, pinned now, real-thread wakeups."""

import threading
import time

from webcall.clockwork import RealTimeline, VirtualTimeline


def test_virtual_runs_in_time_then_insertion_order():
    tl = VirtualTimeline()
    log = []
    tl.call_later(0.2, lambda: log.append("b"))
    tl.call_later(0.1, lambda: log.append("a1"))
    tl.call_later(0.1, lambda: log.append("a2"))  # same instant, later insertion
    tl.call_later(0.3, lambda: log.append("c"))
    tl.advance(0.25)
    assert log == ["a1", "a2", "b"]
    tl.advance(1.0)
    assert log == ["a1", "a2", "b", "c"]


def test_virtual_now_pinned_during_callback():
    tl = VirtualTimeline()
    seen = []
    t0 = tl.now()
    tl.call_later(0.5, lambda: seen.append(tl.now()))
    tl.advance(3.0)
    assert seen == [t0 + 0.5]
    assert tl.now() == t0 + 3.0


def test_virtual_callback_can_schedule_more():
    tl = VirtualTimeline()
    log = []

    def tick(n):
        log.append((round(tl.now() - t0, 3), n))
        if n < 3:
            tl.call_later(0.1, lambda: tick(n + 1))

    t0 = tl.now()
    tl.call_later(0.1, lambda: tick(1))
    tl.advance(1.0)
    assert log == [(0.1, 1), (0.2, 2), (0.3, 3)]


def test_virtual_cancel():
    tl = VirtualTimeline()
    log = []
    h = tl.call_later(0.1, lambda: log.append("x"))
    h.cancel()
    tl.advance(1.0)
    assert log == []


def test_virtual_advance_to_and_next_due():
    tl = VirtualTimeline()
    t0 = tl.now()
    tl.call_later(0.4, lambda: None)
    assert tl.next_due() == t0 + 0.4
    tl.advance_to(t0 + 0.4)
    assert tl.next_due() is None
    assert tl.now() == t0 + 0.4


def test_real_timeline_fires_and_cancels():
    tl = RealTimeline()
    try:
        fired = threading.Event()
        tl.call_later(0.02, fired.set)
        h = tl.call_later(0.02, lambda: fired.clear())
        h.cancel()
        assert fired.wait(2.0)
        time.sleep(0.05)
        assert fired.is_set()  # cancelled callback never ran
    finally:
        tl.stop()


def test_real_timeline_survives_callback_exception():
    tl = RealTimeline()
    try:
        ok = threading.Event()
        tl.call_later(0.01, lambda: 1 / 0)
        tl.call_later(0.03, ok.set)
        assert ok.wait(2.0)
    finally:
        tl.stop()
