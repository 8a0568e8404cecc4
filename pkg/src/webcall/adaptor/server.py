"""Localhost HTTP surface of the adaptor daemon."""

from __future__ import annotations

import mimetypes
import re
from pathlib import Path

from ..errors import not_found
from ..httpkit import HttpService, Request, Response, Router, StreamingResponse
from .core import AdaptorCore

DEFAULT_PORT = 9191
_WIDGET_NAME = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*$")


def default_widgets_dir() -> Path:
    return Path(__file__).resolve().parent.parent / "widgets"


def build_router(core: AdaptorCore, widgets_dir: Path | None = None) -> Router:
    router = Router()
    widgets = Path(widgets_dir) if widgets_dir else default_widgets_dir()

    def auth(request: Request):
        body = request.json()
        return Response(200, core.authenticate_app(
            body.get("app_id"), body.get("prior_token")))

    def create(request: Request):
        body = request.json()
        return Response(201, core.create_object(
            request.bearer, body.get("class"), body.get("params")))

    def list_objects(request: Request):
        return Response(200, core.list_objects(request.bearer))

    def invoke(request: Request, object_id: str, method: str):
        args = request.json() if request.body else {}
        return Response(200, core.invoke(request.bearer, object_id, method, args))

    def close_object(request: Request, object_id: str):
        return Response(200, core.close_object(request.bearer, object_id))

    def events(request: Request):
        token = request.query.get("token") or request.bearer
        stream = core.subscribe_events(token)
        return StreamingResponse(
            stream,
            on_close=lambda: core.hub.unsubscribe(stream),
            preamble=[{"subscription": stream.sub_id, "resource": "/events"}],
        )

    def widget(request: Request, name: str = "index.html"):
        if not _WIDGET_NAME.match(name):
            raise not_found(f"no widget {name!r}")
        path = widgets / name
        if not path.is_file():
            raise not_found(f"no widget {name!r}")
        ctype = mimetypes.guess_type(name)[0] or "application/octet-stream"
        return Response(200, path.read_bytes(), content_type=ctype)

    router.add("POST", "/auth", auth)
    router.add("POST", "/objects", create)
    router.add("GET", "/objects", list_objects)
    router.add("POST", "/objects/{object_id}/{method}", invoke)
    router.add("DELETE", "/objects/{object_id}", close_object)
    router.add("GET", "/events", events)
    router.add("GET", "/widgets", widget)
    router.add("GET", "/widgets/{name}", widget)
    return router


class AdaptorServer:
    """Loopback-only by policy: the daemon serves the local user's browser."""

    def __init__(self, core: AdaptorCore, host: str = "127.0.0.1",
                 port: int = DEFAULT_PORT, widgets_dir: Path | None = None):
        if not (host.startswith("127.") or host == "localhost"):
            raise ValueError("adaptor API binds to loopback only")
        self.core = core
        self._service = HttpService(host, port, build_router(core, widgets_dir))

    @property
    def url(self) -> str:
        return f"http://{self._service.host}:{self._service.port}"

    @property
    def port(self) -> int:
        return self._service.port

    def start(self) -> None:
        self._service.start()

    def stop(self) -> None:
        self._service.stop()
        self.core.close()
