"""Adaptor daemon core: token scopes, approvals, and the object registry.

The core is transport-free; the HTTP front-end in server.py and the
in-process client both drive these methods directly. All state is guarded
by one reentrant lock, which socket receive loops and timer callbacks
share, so per-object method execution is serialized.
"""

from __future__ import annotations

import json
import random
import threading
from pathlib import Path

from ..errors import ApiError, bad_request, conflict, forbidden, not_found, unauthorized
from ..eventhub import EventStream, Hub
from .network import Network
from .objects import (
    CONNECT_TABLE,
    CameraObject,
    DisplayObject,
    IceObject,
    MicrophoneObject,
    PipelineObject,
    RtpObject,
    SpeakerObject,
    TcpObject,
    UdpObject,
)

TOKEN_TTL = 24 * 3600.0
REAPER_INTERVAL = 10.0
CLASSES = ("UdpTransport", "TcpTransport", "IceTransport", "RtpTransport",
           "Microphone", "Speaker", "Camera", "Display")


class AppRecord:
    def __init__(self, app_id: str, token: str, expires_at: float | None):
        self.app_id = app_id
        self.token = token
        self.expires_at = expires_at  # None = permanent
        self.objects: dict[str, object] = {}
        self.grants: set[tuple[str, str]] = set()  # allow-always (kind, subject)
        self.peer_grants: set[str] = set()  # allow-always destination IPs
        self.bind_approved = False

    def expiry_doc(self):
        return "permanent" if self.expires_at is None else self.expires_at


class AdaptorCore:
    def __init__(self, timeline, network: Network, policy, rng: random.Random | None = None,
                 token_file: str | None = None):
        self.timeline = timeline
        self.network = network
        self.policy = policy
        self.rng = rng or random.Random()
        self.token_file = Path(token_file) if token_file else None
        self.lock = threading.RLock()
        self.hub = Hub(timestamp_fn=timeline.now)
        self.apps: dict[str, AppRecord] = {}
        self.owner_of: dict[str, str] = {}  # live object id -> token
        self.outbound_datagrams = 0
        self._next_object = 1
        self._permanent_tokens = self._load_token_file()
        self._reaper = timeline.call_later(REAPER_INTERVAL, self._reap)
        self._closed = False

    # -- approvals ---------------------------------------------------------

    def approve(self, app: AppRecord, kind: str, subject: str) -> bool:
        if (kind, subject) in app.grants:
            return True
        decision = self.policy.decide(kind, subject)
        if decision == "allow-always":
            app.grants.add((kind, subject))
            return True
        return decision == "allow-once"

    def ensure_peer_app(self, app: AppRecord, ip: str) -> bool:
        """Approval check for a destination IP, without an object allowlist."""
        if ip in app.peer_grants:
            return True
        decision = self.policy.decide("send-to-new-peer", f"{app.app_id}:{ip}")
        if decision == "allow-always":
            app.peer_grants.add(ip)
            return True
        return decision == "allow-once"

    def ensure_peer(self, app: AppRecord, udp: UdpObject, ip: str) -> bool:
        if udp.peer_allowed(ip):
            return True
        if not self.ensure_peer_app(app, ip):
            return False
        udp.allowlist.add(ip)
        return True

    # -- authentication --------------------------------------------------------

    def authenticate_app(self, app_id, prior_token=None) -> dict:
        if not isinstance(app_id, str) or not app_id:
            raise bad_request("app_id must be a non-empty string")
        with self.lock:
            if isinstance(prior_token, str) and prior_token:
                app = self.apps.get(prior_token)
                if app is not None and app.app_id == app_id and not self._expired(app):
                    if app.expires_at is not None:
                        app.expires_at = self.timeline.now() + TOKEN_TTL
                    return {"token": app.token, "expires_at": app.expiry_doc()}
                if self._permanent_tokens.get(prior_token) == app_id:
                    app = AppRecord(app_id, prior_token, None)
                    self.apps[prior_token] = app
                    return {"token": prior_token, "expires_at": "permanent"}
                # fall through: unknown or expired token is a first connection
            decision = self.policy.decide("app-connect", app_id)
            if decision == "deny":
                raise forbidden("application connection denied")
            token = f"app-{self.rng.getrandbits(128):032x}"
            expires = None if decision == "allow-always" else self.timeline.now() + TOKEN_TTL
            app = AppRecord(app_id, token, expires)
            self.apps[token] = app
            if expires is None:
                self._permanent_tokens[token] = app_id
                self._save_token_file()
            return {"token": token, "expires_at": app.expiry_doc()}

    def _expired(self, app: AppRecord) -> bool:
        return app.expires_at is not None and self.timeline.now() >= app.expires_at

    def _app(self, token) -> AppRecord:
        if not isinstance(token, str) or not token:
            raise unauthorized()
        app = self.apps.get(token)
        if app is None or self._expired(app):
            raise unauthorized("unknown or expired token")
        return app

    def _load_token_file(self) -> dict:
        if self.token_file is None or not self.token_file.exists():
            return {}
        try:
            doc = json.loads(self.token_file.read_text())
        except ValueError:
            return {}
        return {k: v for k, v in doc.items() if isinstance(v, str)}

    def _save_token_file(self) -> None:
        if self.token_file is not None:
            self.token_file.write_text(json.dumps(self._permanent_tokens, indent=2))

    # -- object management ---------------------------------------------------

    def _new_id(self) -> str:
        oid = f"o{self._next_object}"
        self._next_object += 1
        return oid

    def _register(self, app: AppRecord, obj) -> None:
        app.objects[obj.object_id] = obj
        self.owner_of[obj.object_id] = app.token

    def _bind_udp(self, app: AppRecord, port) -> UdpObject:
        if not isinstance(port, int) or isinstance(port, bool):
            raise bad_request("port must be an integer")
        if port != 0 and not 1025 <= port <= 65535:
            raise bad_request("port must be 0 (ephemeral) or within 1025-65535")
        if not app.bind_approved:
            if not self.approve(app, "bind", app.app_id):
                raise forbidden("bind denied")
            app.bind_approved = True
        try:
            endpoint = self.network.bind(port)
        except OSError as exc:
            raise conflict(f"bind failed: {exc}") from None
        obj = UdpObject(self, app, self._new_id(), endpoint)
        self._register(app, obj)
        return obj

    def _resolve_component(self, app: AppRecord, object_id) -> UdpObject:
        obj = app.objects.get(object_id)
        if obj is None:
            raise bad_request(f"unknown component {object_id!r}")
        if isinstance(obj, UdpObject):
            return obj
        if isinstance(obj, RtpObject):
            return obj.rtp
        raise bad_request(f"component {object_id!r} is not a transport")

    def create_object(self, token, cls, params=None) -> dict:
        params = params if isinstance(params, dict) else {}
        with self.lock:
            app = self._app(token)
            if cls not in CLASSES:
                raise bad_request(f"unknown class {cls!r}")
            obj = getattr(self, "_create_" + cls.lower())(app, params)
            return {"object_id": obj.object_id, "class": obj.CLASS,
                    "state": obj.document()}

    def _create_udptransport(self, app, params):
        return self._bind_udp(app, params.get("port", 0))

    def _create_tcptransport(self, app, params):
        obj = TcpObject(self, app, self._new_id(), secure=bool(params.get("secure", False)))
        self._register(app, obj)
        return obj

    def _create_icetransport(self, app, params):
        ids = params.get("components")
        if not isinstance(ids, list) or not ids:
            raise bad_request("components must be a non-empty list of object ids")
        components = [self._resolve_component(app, i) for i in ids]
        reflector = params.get("reflector")
        if reflector is not None:
            if (not isinstance(reflector, (list, tuple)) or len(reflector) != 2
                    or not isinstance(reflector[0], str)
                    or not isinstance(reflector[1], int)):
                raise bad_request("reflector must be [address, port]")
            reflector = (reflector[0], reflector[1])
            if self.ensure_peer_app(app, reflector[0]):
                for comp in components:
                    comp.allowlist.add(reflector[0])
            else:
                reflector = None  # denied: gather proceeds with host candidates
        obj = IceObject(self, app, self._new_id(), list(ids), components, reflector)
        self._register(app, obj)
        return obj

    def _create_rtptransport(self, app, params):
        if "rtp" in params or "rtcp" in params:
            rtp = app.objects.get(params.get("rtp"))
            rtcp = app.objects.get(params.get("rtcp"))
            if not isinstance(rtp, UdpObject) or not isinstance(rtcp, UdpObject):
                raise bad_request("rtp and rtcp must name owned UdpTransport objects")
            if rtcp.local_port != rtp.local_port + 1:
                raise bad_request("rtcp port must be rtp port + 1")
        else:
            rtp, rtcp = self._bind_adjacent(app, params.get("port", 0))
        ssrc = params.get("ssrc", self.rng.getrandbits(32))
        if not isinstance(ssrc, int) or not 0 <= ssrc < (1 << 32):
            raise bad_request("ssrc must be a 32-bit integer")
        obj = RtpObject(self, app, self._new_id(), rtp, rtcp, ssrc)
        self._register(app, obj)
        return obj

    def _bind_adjacent(self, app, port) -> tuple[UdpObject, UdpObject]:
        if port != 0:
            rtp = self._bind_udp(app, port)
            try:
                rtcp = self._bind_udp(app, port + 1)
            except ApiError:
                self._drop(app, rtp)
                raise
            return rtp, rtcp
        for _ in range(64):
            rtp = self._bind_udp(app, 0)
            try:
                rtcp = self._bind_udp(app, rtp.local_port + 1)
                return rtp, rtcp
            except ApiError:
                self._drop(app, rtp)
        raise conflict("could not find an adjacent udp port pair")

    def _drop(self, app, obj) -> None:
        obj.close()
        app.objects.pop(obj.object_id, None)
        self.owner_of.pop(obj.object_id, None)

    def _create_microphone(self, app, params):
        if not self.approve(app, "media-capture", "Microphone"):
            raise forbidden("media capture denied")
        obj = MicrophoneObject(self, app, self._new_id(), params)
        self._register(app, obj)
        return obj

    def _create_camera(self, app, params):
        if not self.approve(app, "media-capture", "Camera"):
            raise forbidden("media capture denied")
        obj = CameraObject(self, app, self._new_id(), params)
        self._register(app, obj)
        return obj

    def _create_speaker(self, app, params):
        obj = SpeakerObject(self, app, self._new_id())
        self._register(app, obj)
        return obj

    def _create_display(self, app, params):
        obj = DisplayObject(self, app, self._new_id())
        self._register(app, obj)
        return obj

    # -- invocation ------------------------------------------------------------

    def _own_object(self, app: AppRecord, object_id):
        obj = app.objects.get(object_id)
        if obj is not None:
            return obj
        if object_id in self.owner_of:
            raise forbidden("object belongs to another application")
        raise not_found(f"no such object {object_id!r}")

    def invoke(self, token, object_id, method, args=None):
        if not isinstance(method, str) or not method:
            raise bad_request("method must be a non-empty string")
        args = args if isinstance(args, dict) else {}
        with self.lock:
            app = self._app(token)
            obj = self._own_object(app, object_id)
            method = method.replace("-", "_")
            if method == "connect":
                return self.connect_objects(token, object_id, args.get("sink"))
            if method == "close":
                return self.close_object(token, object_id)
            return obj.invoke(method, args)

    def connect_objects(self, token, source_id, sink_id) -> dict:
        with self.lock:
            app = self._app(token)
            source = self._own_object(app, source_id)
            sink = self._own_object(app, sink_id)
            allowed = CONNECT_TABLE.get(source.CLASS, ())
            if sink.CLASS not in allowed:
                raise conflict(f"cannot connect {source.CLASS} to {sink.CLASS}")
            pipeline = PipelineObject(self, app, self._new_id(), source, sink)
            self._register(app, pipeline)
            return {"pipeline": pipeline.object_id}

    def close_object(self, token, object_id) -> dict:
        with self.lock:
            app = self._app(token)
            obj = self._own_object(app, object_id)
            self._close_tree(app, obj)
            return {"released": object_id}

    def _close_tree(self, app: AppRecord, obj) -> None:
        app.objects.pop(obj.object_id, None)
        self.owner_of.pop(obj.object_id, None)
        obj.close()
        # close() marks members of composites closed; drop those records too,
        # then tear down pipelines that lost an end.
        for oid, other in list(app.objects.items()):
            if getattr(other, "closed", False):
                app.objects.pop(oid, None)
                self.owner_of.pop(oid, None)
            elif isinstance(other, PipelineObject) and (
                    other.source.closed or other.sink.closed):
                app.objects.pop(oid, None)
                self.owner_of.pop(oid, None)
                other.close()

    def list_objects(self, token) -> dict:
        with self.lock:
            app = self._app(token)
            return {"objects": [
                {"object_id": oid, "class": obj.CLASS}
                for oid, obj in sorted(app.objects.items(),
                                       key=lambda kv: int(kv[0][1:]))
            ]}

    # -- events ------------------------------------------------------------

    def _resource(self, app: AppRecord) -> str:
        return f"/events/{app.token}"

    def publish(self, app: AppRecord, ev_type: str, payload: dict) -> None:
        self.hub.publish(self._resource(app), ev_type, payload)

    def subscribe_events(self, token) -> EventStream:
        with self.lock:
            app = self._app(token)
            return self.hub.subscribe(self._resource(app))

    # -- housekeeping ------------------------------------------------------------

    def _reap(self) -> None:
        with self.lock:
            if self._closed:
                return
            now = self.timeline.now()
            for token, app in list(self.apps.items()):
                if app.expires_at is not None and now >= app.expires_at:
                    for obj in list(app.objects.values()):
                        self._close_tree(app, obj)
                    self.hub.close_resource(self._resource(app))
                    del self.apps[token]
            self._reaper = self.timeline.call_later(REAPER_INTERVAL, self._reap)

    def close(self) -> None:
        with self.lock:
            self._closed = True
            self._reaper.cancel()
            for app in list(self.apps.values()):
                for obj in list(app.objects.values()):
                    self._close_tree(app, obj)
                self.hub.close_resource(self._resource(app))
            self.apps.clear()
