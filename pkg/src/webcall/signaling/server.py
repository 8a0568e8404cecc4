"""HTTP surface of the rendezvous service: routes onto SignalingCore."""

from __future__ import annotations

from ..httpkit import HttpService, Request, Response, Router, StreamingResponse
from .core import PAGE_LIMIT_DEFAULT, SignalingCore


def build_router(core: SignalingCore) -> Router:
    router = Router()

    def subscribe(request: Request, path: str) -> StreamingResponse:
        stream = core.subscribe(request.bearer, path)
        return StreamingResponse(
            stream,
            on_close=lambda: core.unsubscribe(stream),
            preamble=[{"subscription": stream.sub_id, "resource": path}],
        )

    def auth(request):
        body = request.json()
        return Response(200, core.auth(body.get("aor"), body.get("secret")))

    def list_logins(request):
        if request.query.get("command") == "subscribe":
            return subscribe(request, "/login")
        offset = request.int_query("offset", 0)
        limit = request.int_query("limit", PAGE_LIMIT_DEFAULT)
        return Response(200, core.list_logins(request.bearer, offset, limit))

    def login_post(request, aor):
        command = request.query.get("command")
        if command == "subscribe":
            return subscribe(request, f"/login/{aor}")
        if command == "notify":
            return Response(200, core.notify(request.bearer, f"/login/{aor}", request.json()))
        return Response(201, core.register(request.bearer, aor, request.json()))

    def login_get(request, aor):
        if request.query.get("command") == "subscribe":
            return subscribe(request, f"/login/{aor}")
        return Response(200, core.get_login(request.bearer, aor))

    def contact_put(request, aor, cid):
        return Response(200, core.update_contact(request.bearer, aor, cid, request.json()))

    def contact_delete(request, aor, cid):
        return Response(200, core.delete_contact(request.bearer, aor, cid))

    def call_create(request):
        return Response(201, core.create_call(request.bearer))

    def call_post(request, call_id):
        command = request.query.get("command")
        if command == "subscribe":
            return subscribe(request, f"/call/{call_id}")
        if command == "notify":
            return Response(200, core.notify(request.bearer, f"/call/{call_id}", request.json()))
        body = request.json()
        session = body.get("session", body)
        return Response(201, core.join_call(request.bearer, call_id, session))

    def call_get(request, call_id):
        if request.query.get("command") == "subscribe":
            return subscribe(request, f"/call/{call_id}")
        return Response(200, core.get_call(request.bearer, call_id))

    def participant_delete(request, call_id, pid):
        return Response(200, core.leave_call(request.bearer, call_id, pid))

    router.add("POST", "/auth", auth)
    router.add("GET", "/login", list_logins)
    router.add("POST", "/login/{aor}", login_post)
    router.add("GET", "/login/{aor}", login_get)
    router.add("PUT", "/login/{aor}/{cid}", contact_put)
    router.add("DELETE", "/login/{aor}/{cid}", contact_delete)
    router.add("POST", "/call", call_create)
    router.add("POST", "/call/{call_id}", call_post)
    router.add("GET", "/call/{call_id}", call_get)
    router.add("DELETE", "/call/{call_id}/{pid}", participant_delete)
    return router


class SignalingServer:
    def __init__(self, core: SignalingCore, host: str = "127.0.0.1", port: int = 0):
        self.core = core
        self.service = HttpService(host, port, build_router(core))

    @property
    def url(self) -> str:
        return f"http://{self.service.host}:{self.service.port}"

    def start(self) -> "SignalingServer":
        self.service.start()
        return self

    def stop(self) -> None:
        self.service.stop()
