"""Subscription streams: per-subscriber sequenced queues with fan-out.

Both services deliver events the same way: each subscription owns a bounded
FIFO, every enqueued event gets the next per-subscription sequence number
(starting at 1, gap-free), and a full queue terminates the stream with one
final error frame rather than blocking the producer.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from typing import Callable

QUEUE_LIMIT = 1024


def encode_frame(event: dict) -> bytes:
    """One NDJSON wire frame: seq/type/resource/timestamp/payload + newline."""
    return (json.dumps(event, separators=(",", ":")) + "\n").encode("utf-8")


class EventStream:
    """One subscriber's view of a resource: an ordered, bounded event queue.

    get() returns encoded frames (bytes); None is the end-of-stream sentinel.
    """

    _counter = 0
    _counter_lock = threading.Lock()

    def __init__(self, resource: str, timestamp_fn: Callable[[], float],
                 limit: int = QUEUE_LIMIT):
        with EventStream._counter_lock:
            EventStream._counter += 1
            self.sub_id = f"s{EventStream._counter}"
        self.resource = resource
        self.next_seq = 1
        self.closed = False
        self._timestamp_fn = timestamp_fn
        self._limit = limit
        self._items: deque[bytes | None] = deque()
        self._cv = threading.Condition()

    def _append(self, ev_type: str, payload: dict) -> dict:
        event = {
            "seq": self.next_seq,
            "type": ev_type,
            "resource": self.resource,
            "timestamp": self._timestamp_fn(),
            "payload": payload,
        }
        self.next_seq += 1
        self._items.append(encode_frame(event))
        return event

    def push(self, ev_type: str, payload: dict) -> dict | None:
        """Enqueue an event; returns the framed dict, or None if the stream died."""
        with self._cv:
            if self.closed:
                return None
            if len(self._items) >= self._limit:
                # Slow consumer: end the stream, never block the producer.
                # The error frame takes the seq the lost event would have had,
                # so everything actually delivered stays gap-free.
                self.closed = True
                self._append("error", {"message": "subscription queue overflow"})
                self._items.append(None)
                self._cv.notify_all()
                return None
            event = self._append(ev_type, payload)
            self._cv.notify_all()
            return event

    def close(self) -> None:
        with self._cv:
            if not self.closed:
                self.closed = True
                self._items.append(None)
                self._cv.notify_all()

    def get(self, timeout: float | None = None) -> bytes | None:
        """Take the next frame, blocking up to timeout; None means stream end."""
        with self._cv:
            if not self._items and not self._cv.wait_for(lambda: self._items, timeout):
                raise TimeoutError("no event within timeout")
            return self._items.popleft()

    def drain(self) -> list[dict]:
        """Non-blocking decode of everything currently queued (skips the sentinel)."""
        with self._cv:
            out = [json.loads(item) for item in self._items if item is not None]
            self._items.clear()
            return out


class Hub:
    """Resource-path keyed fan-out registry."""

    def __init__(self, timestamp_fn: Callable[[], float]):
        self._timestamp_fn = timestamp_fn
        self._subs: dict[str, list[EventStream]] = {}
        self._lock = threading.Lock()

    def subscribe(self, resource: str) -> EventStream:
        stream = EventStream(resource, self._timestamp_fn)
        with self._lock:
            self._subs.setdefault(resource, []).append(stream)
        return stream

    def unsubscribe(self, stream: EventStream) -> None:
        stream.close()
        with self._lock:
            subs = self._subs.get(stream.resource)
            if subs and stream in subs:
                subs.remove(stream)
                if not subs:
                    del self._subs[stream.resource]

    def subscribers(self, resource: str) -> list[EventStream]:
        with self._lock:
            return [s for s in self._subs.get(resource, []) if not s.closed]

    def publish(self, resource: str, ev_type: str, payload: dict) -> int:
        """Deliver one event to every live subscription on resource; returns count."""
        delivered = 0
        for stream in self.subscribers(resource):
            if stream.push(ev_type, payload) is not None:
                delivered += 1
        return delivered

    def close_resource(self, resource: str) -> None:
        with self._lock:
            streams = self._subs.pop(resource, [])
        for stream in streams:
            stream.close()
