"""Client-side consumption of NDJSON event streams.

Shared by the signaling and adaptor clients: a Subscription yields decoded
event frames either straight from an in-process EventStream or by pumping
a chunked HTTP response on a reader thread.
"""

from __future__ import annotations

import json
import queue
import socket
import threading
from typing import Callable

import requests

from .eventhub import EventStream


class Subscription:
    """A live event feed; take() yields decoded frames, None on stream end."""

    def close(self) -> None:
        raise NotImplementedError

    def take(self, timeout: float | None = None):
        raise NotImplementedError

    def drain(self) -> list[dict]:
        out = []
        while True:
            try:
                item = self.take(timeout=0)
            except TimeoutError:
                return out
            if item is None:
                return out
            out.append(item)


class DirectSubscription(Subscription):
    def __init__(self, stream: EventStream, unsubscribe: Callable[[], None]):
        self.stream = stream
        self._unsubscribe = unsubscribe
        self.sub_id = stream.sub_id
        self.resource = stream.resource

    def take(self, timeout: float | None = None):
        frame = self.stream.get(timeout=timeout)
        return None if frame is None else json.loads(frame)

    def close(self) -> None:
        self._unsubscribe()


class HttpSubscription(Subscription):
    def __init__(self, response: requests.Response):
        self._response = response
        self._q: queue.Queue = queue.Queue()
        self.sub_id = None
        self.resource = None
        self._ready = threading.Event()
        self._thread = threading.Thread(target=self._pump, daemon=True)
        self._thread.start()
        if not self._ready.wait(timeout=10):
            raise TimeoutError("subscription preamble never arrived")

    def _pump(self) -> None:
        try:
            for line in self._response.iter_lines(decode_unicode=True):
                if not line:
                    continue  # keepalive
                doc = json.loads(line)
                if "subscription" in doc and "seq" not in doc:
                    self.sub_id = doc["subscription"]
                    self.resource = doc["resource"]
                    self._ready.set()
                    continue
                self._q.put(doc)
        except Exception:
            pass
        finally:
            self._ready.set()
            self._q.put(None)

    def take(self, timeout: float | None = None):
        try:
            return self._q.get(timeout=timeout) if timeout != 0 else self._q.get_nowait()
        except queue.Empty:
            raise TimeoutError("no event within timeout") from None

    def close(self) -> None:
        # Unblock the pump's socket read first: closing the buffered stream
        # while another thread sits in read() would wait on its lock until
        # the server's next keepalive.
        conn = getattr(self._response.raw, "_connection", None)
        sock = getattr(conn, "sock", None)
        if sock is not None:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        self._response.close()
        self._thread.join(timeout=5)


def raise_for_error(response: requests.Response) -> None:
    from .errors import ApiError

    if response.status_code >= 400:
        try:
            err = response.json()["error"]
            raise ApiError(err["code"], err["message"])
        except (ValueError, KeyError):
            raise ApiError(response.status_code, response.text) from None
