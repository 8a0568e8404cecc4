"""Single-threaded reference model of the rendezvous service, plus a driver
that replays one random operation sequence against both the model and the
real core and compares everything observable.

The model is written as plain dict bookkeeping, independent of the service
code: it derives ids, expiry, ACLs, and event payloads directly from the
documented rules, so agreement is meaningful.
"""

import random

from webcall.clockwork import VirtualTimeline
from webcall.errors import ApiError
from webcall.signaling.core import SignalingCore

START = 1_000_000.0
GRACE = 30.0
AORS = ["amy@x.net", "bob@x.net", "cat@x.net", "dan@x.net"]


class RefError(Exception):
    def __init__(self, code):
        self.code = code


class RefModel:
    def __init__(self):
        self.now = START
        self.contacts = {}  # aor -> {cid: record}
        self.next_cid = {}
        self.calls = {}  # call_id -> dict
        self.next_call = 100
        self.subs = []  # dicts: resource, events, next_seq, closed

    # -- time ------------------------------------------------------------

    def advance(self, dt):
        self.now += dt
        for call_id in list(self.calls):
            call = self.calls[call_id]
            if call["empty_since"] is not None and self.now >= call["empty_since"] + GRACE:
                del self.calls[call_id]
                for sub in self.subs:
                    if sub["resource"] == f"/call/{call_id}":
                        sub["closed"] = True

    def _live(self, aor):
        return {cid: r for cid, r in self.contacts.get(aor, {}).items()
                if r["expires_at"] > self.now}

    def _emit(self, resource, ev_type, payload):
        delivered = 0
        for sub in self.subs:
            if sub["resource"] == resource and not sub["closed"]:
                sub["events"].append({
                    "seq": sub["next_seq"],
                    "type": ev_type,
                    "resource": resource,
                    "timestamp": self.now,
                    "payload": payload,
                })
                sub["next_seq"] += 1
                delivered += 1
        return delivered

    # -- operations --------------------------------------------------------

    def register(self, aor, candidates, expires):
        if not candidates:
            raise RefError(400)
        if any(c["port"] <= 1024 for c in candidates):
            raise RefError(400)
        if len({c["priority"] for c in candidates}) != len(candidates):
            raise RefError(400)
        expires = min(max(expires, 60), 86400)
        # mutation purges expired records of this aor
        self.contacts[aor] = self._live(aor)
        n = self.next_cid.get(aor, 2)
        cid = f"c{n}"
        self.next_cid[aor] = n + 1
        self.contacts.setdefault(aor, {})[cid] = {
            "candidates": candidates,
            "presence": {},
            "expires_at": self.now + expires,
        }
        self._emit(f"/login/{aor}", "contact-update",
                   {"action": "register", "contact_id": cid})
        return cid

    def update(self, aor, cid, candidates, expires):
        if cid not in self._live(aor):
            raise RefError(404)
        expires = min(max(expires, 60), 86400)
        self.contacts[aor] = self._live(aor)
        self.contacts[aor][cid] = {
            "candidates": candidates,
            "presence": {},
            "expires_at": self.now + expires,
        }
        self._emit(f"/login/{aor}", "contact-update",
                   {"action": "update", "contact_id": cid})

    def unregister(self, aor, cid):
        if cid not in self._live(aor):
            raise RefError(404)
        self.contacts[aor] = self._live(aor)
        del self.contacts[aor][cid]
        self._emit(f"/login/{aor}", "contact-update",
                   {"action": "unregister", "contact_id": cid})

    def get_login(self, aor):
        live = self._live(aor)
        if not live:
            raise RefError(404)
        return sorted(live)

    def list_logins(self, offset, limit):
        if offset < 0 or not 1 <= limit <= 100:
            raise RefError(400)
        aors = sorted(a for a in self.contacts if self._live(a))
        return {"total": len(aors), "items": aors[offset:offset + limit]}

    def create_call(self, creator):
        call_id = f"c{self.next_call}"
        self.next_call += 1
        self.calls[call_id] = {
            "created_by": creator,
            "created_at": self.now,
            "participants": [],
            "invited": set(),
            "next_pid": 1,
            "empty_since": self.now,
        }
        return call_id

    def _call_acl(self, call, aor):
        if (aor != call["created_by"] and aor not in call["invited"]
                and all(p["aor"] != aor for p in call["participants"])):
            raise RefError(403)

    def get_call(self, aor, call_id):
        call = self.calls.get(call_id)
        if call is None:
            raise RefError(404)
        self._call_acl(call, aor)
        return [p["participant_id"] for p in call["participants"]]

    def join(self, aor, call_id, session):
        call = self.calls.get(call_id)
        if call is None:
            raise RefError(404)
        if not set(session.get("codecs_preferred", [])) <= set(session.get("codecs_supported", [])):
            raise RefError(400)
        pid = f"p{call['next_pid']}"
        call["next_pid"] += 1
        call["participants"].append({
            "participant_id": pid,
            "aor": aor,
            "session": session,
            "joined_at": self.now,
        })
        call["empty_since"] = None
        self._emit(f"/call/{call_id}", "membership-change", {
            "action": "join",
            "participant_id": pid,
            "aor": aor,
            "participants": [dict(p) for p in call["participants"]],
        })
        return pid

    def leave(self, aor, call_id, pid):
        call = self.calls.get(call_id)
        if call is None:
            raise RefError(404)
        entry = next((p for p in call["participants"] if p["participant_id"] == pid), None)
        if entry is None:
            raise RefError(404)
        if entry["aor"] != aor and call["created_by"] != aor:
            raise RefError(403)
        call["participants"].remove(entry)
        self._emit(f"/call/{call_id}", "membership-change", {
            "action": "leave",
            "participant_id": pid,
            "aor": entry["aor"],
            "participants": [dict(p) for p in call["participants"]],
        })
        if not call["participants"]:
            call["empty_since"] = self.now
        return pid

    def subscribe(self, aor, resource):
        if resource.startswith("/login/"):
            if resource[len("/login/"):] != aor:
                raise RefError(403)
        elif resource.startswith("/call/"):
            call = self.calls.get(resource[len("/call/"):])
            if call is None:
                raise RefError(404)
            self._call_acl(call, aor)
        sub = {"resource": resource, "events": [], "next_seq": 1, "closed": False}
        self.subs.append(sub)
        return sub

    def unsubscribe(self, sub):
        sub["closed"] = True

    def notify(self, sender, target, body):
        if body.get("type") not in ("invitation", "cancellation", "message"):
            raise RefError(400)
        payload = {k: v for k, v in body.items() if k != "type"}
        if body["type"] in ("invitation", "cancellation"):
            conference = payload.get("conference")
            if not isinstance(conference, str) or not conference.startswith("/call/"):
                raise RefError(400)
        payload.setdefault("from", sender)
        if not self._live(target):
            raise RefError(404)
        if body["type"] == "invitation":
            call = self.calls.get(payload["conference"][len("/call/"):])
            if call is not None:
                call["invited"].add(target)
        return self._emit(f"/login/{target}", body["type"], payload)


def session_doc(rng):
    return {
        "candidates": [{"kind": "udp", "address": "10.0.0.1",
                        "port": rng.randrange(2000, 60000), "priority": 0}],
        "codecs_supported": ["pcm16", "tone"],
        "codecs_preferred": ["pcm16"],
    }


def run_sequence(seed, ops=30):
    """Drive core and model with one seeded random op sequence; compare."""
    rng = random.Random(seed)
    timeline = VirtualTimeline(START)
    core = SignalingCore(timeline, rng=random.Random(seed ^ 0xFFFF))
    model = RefModel()
    tokens = {aor: core.auth(aor, "pw")["token"] for aor in AORS}
    call_ids = []
    pids = []  # (call_id, pid, aor)
    pairs = []  # (core EventStream, model sub)

    def both(core_fn, model_fn):
        """Run both sides; assert they agree on success/failure and result."""
        try:
            got = core_fn()
            code = None
        except ApiError as exc:
            got, code = None, exc.code
        try:
            want = model_fn()
            want_code = None
        except RefError as exc:
            want, want_code = None, exc.code
        assert code == want_code, f"status mismatch: core={code} model={want_code}"
        return got, want

    for _ in range(ops):
        op = rng.choice(
            ["register"] * 4 + ["update"] * 2 + ["unregister"] * 2
            + ["get_login"] * 2 + ["list"] * 2 + ["create_call"] * 2
            + ["join"] * 3 + ["leave"] * 2 + ["get_call"]
            + ["subscribe"] * 3 + ["unsubscribe"] + ["notify"] * 3
            + ["advance"] * 3
        )
        aor = rng.choice(AORS)
        tok = tokens[aor]
        if op == "register":
            bad = rng.random() < 0.15
            cands = [] if bad else [{"kind": "udp", "address": "10.0.0.9",
                                     "port": rng.randrange(2000, 60000), "priority": 0}]
            expires = rng.choice([30, 60, 600, 100000])
            got, want = both(
                lambda: core.register(tok, aor, {"candidates": cands,
                                                 "expires_seconds": expires}),
                lambda: model.register(aor, cands, expires),
            )
            if got is not None:
                assert got["contact_id"] == want
        elif op == "update":
            table = model.contacts.get(aor, {})
            cid = rng.choice(sorted(table) + ["c99"]) if table else "c99"
            cands = [{"kind": "udp", "address": "10.0.0.9",
                      "port": rng.randrange(2000, 60000), "priority": 0}]
            expires = rng.choice([60, 600])
            both(
                lambda: core.update_contact(tok, aor, cid,
                                            {"candidates": cands,
                                             "expires_seconds": expires}),
                lambda: model.update(aor, cid, cands, expires),
            )
        elif op == "unregister":
            table = model.contacts.get(aor, {})
            cid = rng.choice(sorted(table) + ["c99"]) if table else "c99"
            both(lambda: core.delete_contact(tok, aor, cid),
                 lambda: model.unregister(aor, cid))
        elif op == "get_login":
            target = rng.choice(AORS)
            before = core.state_hash()
            got, want = both(lambda: core.get_login(tok, target),
                             lambda: model.get_login(target))
            assert core.state_hash() == before, "GET /login/{aor} was not pure"
            if got is not None:
                assert sorted(c["contact_id"] for c in got["contacts"]) == want
        elif op == "list":
            offset = rng.choice([0, 1, 2, -1])
            limit = rng.choice([1, 2, 20, 0, 101])
            before = core.state_hash()
            got, want = both(lambda: core.list_logins(tok, offset, limit),
                             lambda: model.list_logins(offset, limit))
            assert core.state_hash() == before, "GET /login was not pure"
            if got is not None:
                assert got == want
        elif op == "create_call":
            got, want = both(lambda: core.create_call(tok),
                             lambda: model.create_call(aor))
            assert got["call_id"] == want
            call_ids.append(want)
        elif op == "join":
            call_id = rng.choice(call_ids + ["c999"]) if call_ids else "c999"
            doc = session_doc(rng)
            if rng.random() < 0.1:
                doc["codecs_preferred"] = ["bogus"]
            got, want = both(lambda: core.join_call(tok, call_id, doc),
                             lambda: model.join(aor, call_id, doc))
            if got is not None:
                assert got["participant_id"] == want
                pids.append((call_id, want, aor))
        elif op == "leave":
            if pids and rng.random() < 0.8:
                call_id, pid, _owner = rng.choice(pids)
            else:
                call_id, pid = (rng.choice(call_ids) if call_ids else "c999"), "p77"
            got, _ = both(lambda: core.leave_call(tok, call_id, pid),
                          lambda: model.leave(aor, call_id, pid))
            if got is not None:
                pids = [p for p in pids if (p[0], p[1]) != (call_id, pid)]
        elif op == "get_call":
            call_id = rng.choice(call_ids + ["c999"]) if call_ids else "c999"
            before = core.state_hash()
            got, want = both(lambda: core.get_call(tok, call_id),
                             lambda: model.get_call(aor, call_id))
            assert core.state_hash() == before, "GET /call/{id} was not pure"
            if got is not None:
                assert [p["participant_id"] for p in got["participants"]] == want
        elif op == "subscribe":
            if rng.random() < 0.5 or not call_ids:
                resource = f"/login/{rng.choice(AORS)}"
            else:
                resource = f"/call/{rng.choice(call_ids)}"
            got, want = both(lambda: core.subscribe(tok, resource),
                             lambda: model.subscribe(aor, resource))
            if got is not None:
                pairs.append((got, want))
        elif op == "unsubscribe":
            live = [(s, m) for s, m in pairs if not s.closed and not m["closed"]]
            if live:
                stream, sub = rng.choice(live)
                core.unsubscribe(stream)
                model.unsubscribe(sub)
        elif op == "notify":
            target = rng.choice(AORS)
            body = {"type": rng.choice(["invitation", "cancellation"])}
            if rng.random() < 0.9:
                body["conference"] = f"/call/{rng.choice(call_ids)}" if call_ids else "/call/c999"
            got, want = both(lambda: core.notify(tok, f"/login/{target}", body),
                             lambda: model.notify(aor, target, body))
            if got is not None:
                assert got["delivered"] == want
        elif op == "advance":
            dt = rng.choice([0.5, 5.0, 31.0, 65.0])
            timeline.advance(dt)
            model.advance(dt)

    # Final comparison: every subscription saw exactly the model's log.
    for stream, sub in pairs:
        got = stream.drain()
        assert got == sub["events"], (
            f"event log mismatch on {sub['resource']}: {got} != {sub['events']}"
        )
        assert stream.closed == sub["closed"]
    return len(pairs)
