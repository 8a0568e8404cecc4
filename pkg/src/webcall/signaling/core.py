"""Rendezvous service logic, transport-free.

One instance holds the whole registry: login contacts, conferences, auth
tokens, and subscriptions. The HTTP layer and the in-process direct client
both call these methods; the core records a canonical trace entry per
operation so scenario runs produce identical traces either way.

Locking: one re-entrant lock serializes every operation. The concurrency
contract only demands per-resource serialization plus ordered fan-out, and
a global lock is a legal refinement that is easy to reason about at the
scale of a rendezvous server.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading

from ..clockwork import Timeline
from ..errors import bad_request, forbidden, not_found, unauthorized
from ..eventhub import EventStream, Hub
from .store import MemoryStore
from .types import (
    ConferenceResource,
    ContactRecord,
    ParticipantEntry,
    validate_candidates,
    validate_session,
)

DEFAULT_EXPIRY = 3600
MIN_EXPIRY = 60
MAX_EXPIRY = 86400
GRACE_PERIOD = 30.0
PAGE_LIMIT_DEFAULT = 20
PAGE_LIMIT_MAX = 100

NOTIFY_TYPES = ("invitation", "cancellation", "message")


class SignalingCore:
    def __init__(self, timeline: Timeline, store=None, secrets: dict | None = None,
                 rng: random.Random | None = None, grace_period: float = GRACE_PERIOD):
        self.timeline = timeline
        self.store = store or MemoryStore()
        self.secrets = secrets
        self.grace_period = grace_period
        self.hub = Hub(timestamp_fn=timeline.now)
        self.trace: list[dict] = []
        self._rng = rng or random.Random()
        self._lock = threading.RLock()
        self._contacts: dict[str, dict[str, ContactRecord]] = {}
        self._contact_counter: dict[str, int] = {}
        self._conferences: dict[str, ConferenceResource] = {}
        self._call_counter = 100
        self._tokens: dict[str, str] = {}
        self._replay()

    # -- journal ---------------------------------------------------------

    def _replay(self) -> None:
        for entry in self.store.entries():
            self._apply(entry, replay=True)
        for conf in self._conferences.values():
            if not conf.participants:
                self._arm_gc(conf)

    def _commit(self, entry: dict) -> None:
        self._apply(entry, replay=False)
        self.store.append(entry)

    def _apply(self, entry: dict, replay: bool) -> None:
        op = entry["op"]
        if op == "register":
            aor, cid = entry["aor"], entry["cid"]
            rec = entry["record"]
            self._contacts.setdefault(aor, {})[cid] = ContactRecord(
                cid, aor, rec["candidates"], rec["presence"], rec["expires_at"]
            )
            suffix = int(cid[1:])
            self._contact_counter[aor] = max(self._contact_counter.get(aor, 2), suffix + 1)
        elif op == "update":
            rec = entry["record"]
            contact = self._contacts[entry["aor"]][entry["cid"]]
            contact.candidates = rec["candidates"]
            contact.presence = rec["presence"]
            contact.expires_at = rec["expires_at"]
        elif op == "unregister":
            self._contacts.get(entry["aor"], {}).pop(entry["cid"], None)
        elif op == "create_call":
            call_id = entry["call_id"]
            self._conferences[call_id] = ConferenceResource(
                call_id, entry["created_by"], entry["created_at"]
            )
            self._call_counter = max(self._call_counter, int(call_id[1:]) + 1)
        elif op == "join":
            conf = self._conferences[entry["call_id"]]
            doc = entry["entry"]
            conf.participants.append(
                ParticipantEntry(entry["pid"], doc["aor"], doc["session"], doc["joined_at"])
            )
            conf.next_pid = max(conf.next_pid, int(entry["pid"][1:]) + 1)
        elif op == "leave":
            conf = self._conferences[entry["call_id"]]
            conf.participants = [
                p for p in conf.participants if p.participant_id != entry["pid"]
            ]
        elif op == "gc_call":
            self._conferences.pop(entry["call_id"], None)

    # -- helpers ---------------------------------------------------------

    def _trace_request(self, method: str, path: str) -> None:
        self.trace.append({"kind": "request", "method": method, "path": path})

    def _publish(self, resource: str, ev_type: str, payload: dict) -> int:
        self.trace.append({"kind": "event", "resource": resource, "type": ev_type})
        return self.hub.publish(resource, ev_type, payload)

    def _require_token(self, token: str | None) -> str:
        if not token or token not in self._tokens:
            raise unauthorized()
        return self._tokens[token]

    def _live_contacts(self, aor: str) -> list[ContactRecord]:
        now = self.timeline.now()
        return [r for r in self._contacts.get(aor, {}).values() if r.expires_at > now]

    def _purge_expired(self, aor: str) -> None:
        # Called from mutations only; reads must stay side-effect-free.
        now = self.timeline.now()
        table = self._contacts.get(aor, {})
        for cid in [c for c, r in table.items() if r.expires_at <= now]:
            del table[cid]

    def _conference(self, call_id: str) -> ConferenceResource:
        conf = self._conferences.get(call_id)
        if conf is None:
            raise not_found(f"no such call {call_id}")
        return conf

    def _conference_acl(self, conf: ConferenceResource, aor: str) -> None:
        allowed = (
            aor == conf.created_by
            or aor in conf.invited
            or any(p.aor == aor for p in conf.participants)
        )
        if not allowed:
            raise forbidden("not a participant, creator, or invitee of this call")

    def _arm_gc(self, conf: ConferenceResource) -> None:
        if conf.gc_handle is not None:
            conf.gc_handle.cancel()
        conf.gc_handle = self.timeline.call_later(
            self.grace_period, lambda: self._gc_call(conf.call_id)
        )

    def _gc_call(self, call_id: str) -> None:
        with self._lock:
            conf = self._conferences.get(call_id)
            if conf is None or conf.participants:
                return
            self._commit({"op": "gc_call", "call_id": call_id})
            self.hub.close_resource(f"/call/{call_id}")

    def state_hash(self) -> str:
        """Stable digest of registry state; GETs must never change it."""
        with self._lock:
            doc = {
                "contacts": {
                    aor: {cid: rec.document() for cid, rec in table.items()}
                    for aor, table in self._contacts.items()
                },
                "conferences": {
                    cid: {
                        "doc": conf.document(),
                        "created_by": conf.created_by,
                        "invited": sorted(conf.invited),
                        "next_pid": conf.next_pid,
                    }
                    for cid, conf in self._conferences.items()
                },
                "contact_counter": self._contact_counter,
                "call_counter": self._call_counter,
            }
        raw = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(raw).hexdigest()

    # -- auth --------------------------------------------------------------

    def auth(self, aor: str, secret: str) -> dict:
        with self._lock:
            self._trace_request("POST", "/auth")
            if not isinstance(aor, str) or "@" not in aor:
                raise bad_request("aor must be an email-style address")
            if not isinstance(secret, str) or not secret:
                raise unauthorized("missing secret")
            if self.secrets is not None and self.secrets.get(aor) != secret:
                raise unauthorized("bad credentials")
            token = f"tok-{self._rng.getrandbits(128):032x}"
            self._tokens[token] = aor
            return {"token": token, "aor": aor}

    # -- login registry ----------------------------------------------------

    def register(self, token: str | None, aor: str, body: dict) -> dict:
        with self._lock:
            self._trace_request("POST", f"/login/{aor}")
            caller = self._require_token(token)
            if caller != aor:
                raise forbidden(f"token is for {caller}, not {aor}")
            candidates = validate_candidates(body.get("candidates"))
            presence = body.get("presence") or {}
            if not isinstance(presence, dict):
                raise bad_request("presence must be an object")
            expires = body.get("expires_seconds", DEFAULT_EXPIRY)
            if not isinstance(expires, (int, float)):
                raise bad_request("expires_seconds must be a number")
            expires = min(max(expires, MIN_EXPIRY), MAX_EXPIRY)
            self._purge_expired(aor)
            counter = self._contact_counter.get(aor, 2)
            cid = f"c{counter}"
            self._commit({
                "op": "register",
                "aor": aor,
                "cid": cid,
                "record": {
                    "candidates": candidates,
                    "presence": presence,
                    "expires_at": self.timeline.now() + expires,
                },
            })
            self._publish(f"/login/{aor}", "contact-update",
                          {"action": "register", "contact_id": cid})
            return {"contact_id": cid, "contact_path": f"/login/{aor}/{cid}"}

    def update_contact(self, token: str | None, aor: str, cid: str, body: dict) -> dict:
        with self._lock:
            self._trace_request("PUT", f"/login/{aor}/{cid}")
            caller = self._require_token(token)
            if caller != aor:
                raise forbidden(f"token is for {caller}, not {aor}")
            existing = self._contacts.get(aor, {}).get(cid)
            if existing is None or existing.expires_at <= self.timeline.now():
                raise not_found(f"no such contact {cid}")
            candidates = validate_candidates(body.get("candidates"))
            presence = body.get("presence") or {}
            if not isinstance(presence, dict):
                raise bad_request("presence must be an object")
            expires = body.get("expires_seconds", DEFAULT_EXPIRY)
            if not isinstance(expires, (int, float)):
                raise bad_request("expires_seconds must be a number")
            expires = min(max(expires, MIN_EXPIRY), MAX_EXPIRY)
            self._purge_expired(aor)
            self._commit({
                "op": "update",
                "aor": aor,
                "cid": cid,
                "record": {
                    "candidates": candidates,
                    "presence": presence,
                    "expires_at": self.timeline.now() + expires,
                },
            })
            self._publish(f"/login/{aor}", "contact-update",
                          {"action": "update", "contact_id": cid})
            return self._contacts[aor][cid].document()

    def delete_contact(self, token: str | None, aor: str, cid: str) -> dict:
        with self._lock:
            self._trace_request("DELETE", f"/login/{aor}/{cid}")
            caller = self._require_token(token)
            if caller != aor:
                raise forbidden(f"token is for {caller}, not {aor}")
            existing = self._contacts.get(aor, {}).get(cid)
            if existing is None or existing.expires_at <= self.timeline.now():
                raise not_found(f"no such contact {cid}")
            self._purge_expired(aor)
            self._commit({"op": "unregister", "aor": aor, "cid": cid})
            self._publish(f"/login/{aor}", "contact-update",
                          {"action": "unregister", "contact_id": cid})
            return {"removed": cid}

    def list_logins(self, token: str | None, offset: int = 0,
                    limit: int = PAGE_LIMIT_DEFAULT) -> dict:
        with self._lock:
            self._trace_request("GET", "/login")
            self._require_token(token)
            if offset < 0:
                raise bad_request("offset must be non-negative")
            if not 1 <= limit <= PAGE_LIMIT_MAX:
                raise bad_request(f"limit must be in 1..{PAGE_LIMIT_MAX}")
            aors = sorted(a for a in self._contacts if self._live_contacts(a))
            return {"total": len(aors), "items": aors[offset:offset + limit]}

    def get_login(self, token: str | None, aor: str) -> dict:
        with self._lock:
            self._trace_request("GET", f"/login/{aor}")
            live = self._live_contacts(aor)
            if not live:
                raise not_found(f"{aor} is offline")
            return {"aor": aor, "contacts": [r.document() for r in live]}

    # -- conferences ---------------------------------------------------------

    def create_call(self, token: str | None) -> dict:
        with self._lock:
            self._trace_request("POST", "/call")
            caller = self._require_token(token)
            call_id = f"c{self._call_counter}"
            self._commit({
                "op": "create_call",
                "call_id": call_id,
                "created_by": caller,
                "created_at": self.timeline.now(),
            })
            self._arm_gc(self._conferences[call_id])
            return {"call_id": call_id, "call_path": f"/call/{call_id}"}

    def get_call(self, token: str | None, call_id: str) -> dict:
        with self._lock:
            self._trace_request("GET", f"/call/{call_id}")
            aor = self._require_token(token)
            conf = self._conference(call_id)
            self._conference_acl(conf, aor)
            return conf.document()

    def join_call(self, token: str | None, call_id: str, session: dict) -> dict:
        with self._lock:
            self._trace_request("POST", f"/call/{call_id}")
            aor = self._require_token(token)
            conf = self._conference(call_id)
            session = validate_session(session)
            pid = f"p{conf.next_pid}"
            self._commit({
                "op": "join",
                "call_id": call_id,
                "pid": pid,
                "entry": {"aor": aor, "session": session,
                          "joined_at": self.timeline.now()},
            })
            if conf.gc_handle is not None:
                conf.gc_handle.cancel()
                conf.gc_handle = None
            self._publish(f"/call/{call_id}", "membership-change", {
                "action": "join",
                "participant_id": pid,
                "aor": aor,
                "participants": conf.document()["participants"],
            })
            return {"participant_id": pid,
                    "participant_path": f"/call/{call_id}/{pid}"}

    def leave_call(self, token: str | None, call_id: str, pid: str) -> dict:
        with self._lock:
            self._trace_request("DELETE", f"/call/{call_id}/{pid}")
            aor = self._require_token(token)
            conf = self._conference(call_id)
            entry = next((p for p in conf.participants if p.participant_id == pid), None)
            if entry is None:
                raise not_found(f"no such participant {pid}")
            if entry.aor != aor and conf.created_by != aor:
                raise forbidden("only the participant or the call creator may remove it")
            self._commit({"op": "leave", "call_id": call_id, "pid": pid})
            self._publish(f"/call/{call_id}", "membership-change", {
                "action": "leave",
                "participant_id": pid,
                "aor": entry.aor,
                "participants": conf.document()["participants"],
            })
            if not conf.participants:
                self._arm_gc(conf)
            return {"removed": pid}

    # -- subscribe / notify ------------------------------------------------

    def subscribe(self, token: str | None, path: str) -> EventStream:
        with self._lock:
            self._trace_request("POST", f"{path}?command=subscribe")
            aor = self._require_token(token)
            if path.startswith("/login/"):
                target = path[len("/login/"):]
                if "/" in target:
                    raise not_found("subscribe targets a login or call resource")
                if target != aor:
                    raise forbidden("cannot subscribe to another user's login resource")
            elif path.startswith("/call/"):
                call_id = path[len("/call/"):]
                if "/" in call_id:
                    raise not_found("subscribe targets a login or call resource")
                self._conference_acl(self._conference(call_id), aor)
            else:
                raise not_found("subscribe targets a login or call resource")
            return self.hub.subscribe(path)

    def unsubscribe(self, stream: EventStream) -> None:
        self.hub.unsubscribe(stream)

    def notify(self, token: str | None, path: str, body: dict) -> dict:
        with self._lock:
            self._trace_request("POST", f"{path}?command=notify")
            sender = self._require_token(token)
            ev_type = body.get("type")
            if ev_type not in NOTIFY_TYPES:
                raise bad_request(f"notify type must be one of {NOTIFY_TYPES}")
            payload = {k: v for k, v in body.items() if k != "type"}
            if ev_type in ("invitation", "cancellation"):
                conference = payload.get("conference")
                if not isinstance(conference, str) or not conference.startswith("/call/"):
                    raise bad_request("payload missing conference URL")
            payload.setdefault("from", sender)
            if path.startswith("/login/"):
                target = path[len("/login/"):]
                if not self._live_contacts(target):
                    raise not_found(f"{target} is offline")
                if ev_type == "invitation":
                    conf = self._conferences.get(payload["conference"][len("/call/"):])
                    if conf is not None:
                        conf.invited.add(target)
            elif path.startswith("/call/"):
                conf = self._conference(path[len("/call/"):])
                self._conference_acl(conf, sender)
            else:
                raise not_found("notify targets a login or call resource")
            delivered = self._publish(path, ev_type, payload)
            return {"delivered": delivered}
