"""Shared HTTP plumbing: routing, JSON bodies, bearer auth, NDJSON streaming.

All three services sit on stdlib ThreadingHTTPServer. Handlers receive a
Request and return a Response; raising ApiError short-circuits into the
standard error body. A handler may instead return a StreamingResponse,
which holds the connection open and writes NDJSON frames until the
subscription closes or the client goes away.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable
from urllib.parse import parse_qs, unquote, urlsplit

from .errors import ApiError, bad_request
from .eventhub import EventStream


class Request:
    def __init__(self, method: str, path: str, query: dict[str, str],
                 headers: dict[str, str], body: bytes):
        self.method = method
        self.path = path
        self.query = query
        self.headers = headers
        self.body = body

    def json(self) -> dict:
        if not self.body:
            return {}
        try:
            parsed = json.loads(self.body)
        except ValueError:
            raise bad_request("request body is not valid JSON")
        if not isinstance(parsed, dict):
            raise bad_request("request body must be a JSON object")
        return parsed

    @property
    def bearer(self) -> str | None:
        auth = self.headers.get("authorization", "")
        if auth.lower().startswith("bearer "):
            return auth[7:].strip()
        return None

    def int_query(self, name: str, default: int) -> int:
        raw = self.query.get(name)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise bad_request(f"query parameter {name} must be an integer")


class Response:
    def __init__(self, status: int = 200, body: dict | list | bytes | None = None,
                 content_type: str | None = None):
        self.status = status
        self.content_type = content_type
        if body is None:
            self.payload = b""
        elif isinstance(body, bytes):
            self.payload = body
        else:
            self.payload = json.dumps(body).encode("utf-8")
            self.content_type = content_type or "application/json"


class StreamingResponse:
    """Long-lived NDJSON response fed by an EventStream."""

    def __init__(self, stream: EventStream, on_close: Callable[[], None] | None = None,
                 preamble: list[dict] | None = None):
        self.stream = stream
        self.on_close = on_close
        self.preamble = preamble or []


def _compile(pattern: str) -> re.Pattern:
    regex = re.sub(r"\{(\w+)\}", r"(?P<\1>[^/]+)", pattern)
    return re.compile(f"^{regex}$")


class Router:
    def __init__(self):
        self._routes: list[tuple[str, re.Pattern, Callable]] = []

    def add(self, method: str, pattern: str, fn: Callable) -> None:
        self._routes.append((method.upper(), _compile(pattern), fn))

    def dispatch(self, request: Request):
        path_matched = False
        for method, regex, fn in self._routes:
            m = regex.match(request.path)
            if not m:
                continue
            path_matched = True
            if method == request.method:
                return fn(request, **m.groupdict())
        if path_matched:
            raise ApiError(405, "method not allowed")
        raise ApiError(404, "no such resource")


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default; tests assert on bodies
        pass

    def _read_request(self) -> Request:
        split = urlsplit(self.path)
        query = {k: v[-1] for k, v in parse_qs(split.query).items()}
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        headers = {k.lower(): v for k, v in self.headers.items()}
        return Request(self.command, unquote(split.path), query, headers, body)

    def _send(self, response: Response) -> None:
        self.send_response(response.status)
        self.send_header("Content-Type", response.content_type or "application/json")
        self.send_header("Content-Length", str(len(response.payload)))
        self.end_headers()
        if response.payload:
            self.wfile.write(response.payload)

    def _write_chunk(self, data: bytes) -> None:
        # Chunked framing so each flushed line reaches the client immediately;
        # a close-delimited body would sit in the peer's buffered reader.
        self.wfile.write(f"{len(data):x}\r\n".encode() + data + b"\r\n")
        self.wfile.flush()

    def _send_stream(self, response: StreamingResponse) -> None:
        self.send_response(200)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Cache-Control", "no-store")
        self.send_header("Transfer-Encoding", "chunked")
        self.end_headers()
        try:
            for extra in response.preamble:
                self._write_chunk(
                    (json.dumps(extra, separators=(",", ":")) + "\n").encode()
                )
            while True:
                try:
                    frame = response.stream.get(timeout=15.0)
                except TimeoutError:
                    self._write_chunk(b"\n")  # keepalive blank line
                    continue
                if frame is None:
                    break
                self._write_chunk(frame)
            self.wfile.write(b"0\r\n\r\n")
            self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.close_connection = True
            if response.on_close:
                response.on_close()

    def _handle(self) -> None:
        try:
            request = self._read_request()
            result = self.server.router.dispatch(request)  # type: ignore[attr-defined]
        except ApiError as exc:
            try:
                self._send(Response(exc.code, exc.body()))
            except (BrokenPipeError, ConnectionResetError, OSError):
                pass
            return
        except (BrokenPipeError, ConnectionResetError):
            return
        except Exception as exc:  # defensive: never kill the worker thread
            try:
                self._send(Response(500, {"error": {"code": 500, "message": str(exc)}}))
            except (BrokenPipeError, ConnectionResetError, OSError):
                pass
            return
        try:
            if isinstance(result, StreamingResponse):
                self._send_stream(result)
            else:
                self._send(result)
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass

    do_GET = do_POST = do_PUT = do_DELETE = _handle


class HttpService:
    """A ThreadingHTTPServer bound to a Router, with clean start/stop."""

    def __init__(self, host: str, port: int, router: Router):
        self._server = ThreadingHTTPServer((host, port), _Handler)
        self._server.daemon_threads = True
        self._server.router = router  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def host(self) -> str:
        return self._server.server_address[0]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)
