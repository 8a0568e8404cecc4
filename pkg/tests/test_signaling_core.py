"""Rendezvous core: registry, conferences, subscribe/notify, expiry, paging."""

import random

import pytest

from webcall.clockwork import VirtualTimeline
from webcall.errors import ApiError
from webcall.signaling.core import SignalingCore

ALICE = "alice@example.net"
BOB = "bob@example.net"


def candidate(port=5060, priority=0, kind="udp", address="10.0.0.1"):
    return {"kind": kind, "address": address, "port": port, "priority": priority}


def make_core(**kw):
    tl = VirtualTimeline()
    return tl, SignalingCore(tl, rng=random.Random(7), **kw)


def login(core, aor):
    return core.auth(aor, "pw")["token"]


def test_first_contact_id_is_c2():
    _, core = make_core()
    tok = login(core, ALICE)
    out = core.register(tok, ALICE, {"candidates": [candidate()]})
    assert out == {"contact_id": "c2", "contact_path": f"/login/{ALICE}/c2"}


def test_register_requires_matching_aor():
    _, core = make_core()
    tok = login(core, ALICE)
    with pytest.raises(ApiError) as err:
        core.register(tok, BOB, {"candidates": [candidate()]})
    assert err.value.code == 403
    with pytest.raises(ApiError) as err:
        core.register(None, ALICE, {"candidates": [candidate()]})
    assert err.value.code == 401
    with pytest.raises(ApiError) as err:
        core.register("tok-bogus", ALICE, {"candidates": [candidate()]})
    assert err.value.code == 401


def test_register_validation():
    _, core = make_core()
    tok = login(core, ALICE)
    for bad in (
        {"candidates": []},
        {"candidates": [candidate(port=1024)]},
        {"candidates": [candidate(port=80)]},
        {"candidates": [candidate(priority=0), candidate(port=5062, priority=0)]},
        {"candidates": [{"kind": "sctp", "address": "1.2.3.4", "port": 5060, "priority": 0}]},
        {},
    ):
        with pytest.raises(ApiError) as err:
            core.register(tok, ALICE, bad)
        assert err.value.code == 400


def test_register_twice_lists_both():
    _, core = make_core()
    tok = login(core, ALICE)
    reference = {}
    for port in (5060, 5062):
        out = core.register(tok, ALICE, {"candidates": [candidate(port=port)]})
        reference[out["contact_id"]] = port
    got = core.get_login(tok, ALICE)
    assert {c["contact_id"]: c["candidates"][0]["port"] for c in got["contacts"]} == reference
    assert sorted(reference) == ["c2", "c3"]


def test_delete_then_get_omits_contact():
    _, core = make_core()
    tok = login(core, ALICE)
    core.register(tok, ALICE, {"candidates": [candidate()]})
    core.register(tok, ALICE, {"candidates": [candidate(port=5062)]})
    core.delete_contact(tok, ALICE, "c2")
    ids = [c["contact_id"] for c in core.get_login(tok, ALICE)["contacts"]]
    assert ids == ["c3"]
    with pytest.raises(ApiError) as err:
        core.delete_contact(tok, ALICE, "c2")
    assert err.value.code == 404


def test_put_updates_port_and_refreshes_expiry():
    tl, core = make_core()
    tok = login(core, ALICE)
    core.register(tok, ALICE, {"candidates": [candidate()], "expires_seconds": 60})
    tl.advance(50)
    core.update_contact(tok, ALICE, "c2", {"candidates": [candidate(port=5062)]})
    tl.advance(60)  # old expiry long gone; refreshed record survives
    got = core.get_login(tok, ALICE)
    assert got["contacts"][0]["candidates"][0]["port"] == 5062


def test_update_unknown_contact_404():
    _, core = make_core()
    tok = login(core, ALICE)
    with pytest.raises(ApiError) as err:
        core.update_contact(tok, ALICE, "c9", {"candidates": [candidate()]})
    assert err.value.code == 404


def test_expiry_clamping():
    tl, core = make_core()
    tok = login(core, ALICE)
    core.register(tok, ALICE, {"candidates": [candidate()], "expires_seconds": 5})
    rec = core.get_login(tok, ALICE)["contacts"][0]
    assert rec["expires_at"] == tl.now() + 60  # clamped up to the minimum
    core.register(tok, ALICE, {"candidates": [candidate(port=5062)], "expires_seconds": 10**9})
    rec = [c for c in core.get_login(tok, ALICE)["contacts"] if c["contact_id"] == "c3"][0]
    assert rec["expires_at"] == tl.now() + 86400


def test_expired_contact_reads_as_offline():
    tl, core = make_core()
    tok = login(core, ALICE)
    core.register(tok, ALICE, {"candidates": [candidate()], "expires_seconds": 60})
    assert core.get_login(tok, ALICE)["contacts"]
    tl.advance(61)
    with pytest.raises(ApiError) as err:
        core.get_login(tok, ALICE)
    assert err.value.code == 404
    with pytest.raises(ApiError):
        core.get_login(tok, BOB)  # never registered


def test_gets_are_pure_under_expiry():
    tl, core = make_core()
    tok = login(core, ALICE)
    core.register(tok, ALICE, {"candidates": [candidate()], "expires_seconds": 60})
    tl.advance(61)
    before = core.state_hash()
    with pytest.raises(ApiError):
        core.get_login(tok, ALICE)
    core.list_logins(tok)
    assert core.state_hash() == before


def test_pagination_shapes():
    _, core = make_core()
    aors = [f"user{i:02d}@example.net" for i in range(25)]
    for aor in aors:
        tok = login(core, aor)
        core.register(tok, aor, {"candidates": [candidate()]})
    tok = login(core, ALICE)  # authenticated but unregistered caller
    assert core.list_logins(tok, 20, 10)["items"] == sorted(aors)[20:]
    assert len(core.list_logins(tok, 20, 10)["items"]) == 5
    assert core.list_logins(tok)["total"] == 25


def test_pagination_middle_element_and_reassembly():
    _, core = make_core()
    aors = ["zoe@x.net", "amy@x.net", "mia@x.net"]
    for aor in aors:
        tok = login(core, aor)
        core.register(tok, aor, {"candidates": [candidate()]})
    tok = login(core, ALICE)
    assert core.list_logins(tok, 1, 1)["items"] == [sorted(aors)[1]]
    for k in (1, 2, 3, 7):
        pages, offset = [], 0
        while True:
            items = core.list_logins(tok, offset, k)["items"]
            if not items:
                break
            pages.extend(items)
            offset += k
        assert pages == sorted(aors)


def test_pagination_validation():
    _, core = make_core()
    tok = login(core, ALICE)
    for offset, limit in ((-1, 10), (0, 0), (0, 101), (0, -5)):
        with pytest.raises(ApiError) as err:
            core.list_logins(tok, offset, limit)
        assert err.value.code == 400


def test_empty_registry_lists_empty():
    _, core = make_core()
    tok = login(core, ALICE)
    assert core.list_logins(tok) == {"total": 0, "items": []}


def test_call_create_and_join():
    _, core = make_core()
    tok = login(core, ALICE)
    out = core.create_call(tok)
    assert out["call_id"] == "c100"
    joined = core.join_call(tok, "c100", {"candidates": [candidate()],
                                          "codecs_supported": ["pcm16"],
                                          "codecs_preferred": ["pcm16"]})
    assert joined["participant_id"] == "p1"
    doc = core.get_call(tok, "c100")
    assert len(doc["participants"]) == 1
    assert doc["participants"][0]["aor"] == ALICE


def test_join_validation_and_unknown_call():
    _, core = make_core()
    tok = login(core, ALICE)
    core.create_call(tok)
    with pytest.raises(ApiError) as err:
        core.join_call(tok, "c100", {"codecs_supported": ["pcm16"],
                                     "codecs_preferred": ["x"]})
    assert err.value.code == 400
    with pytest.raises(ApiError) as err:
        core.join_call(tok, "c999", {})
    assert err.value.code == 404


def test_two_joins_deliver_seq_1_then_2():
    _, core = make_core()
    tok_a, tok_b = login(core, ALICE), login(core, BOB)
    call_id = core.create_call(tok_a)["call_id"]
    stream = core.subscribe(tok_a, f"/call/{call_id}")
    core.join_call(tok_a, call_id, {})
    core._conferences[call_id].invited.add(BOB)  # direct grant for the test
    core.join_call(tok_b, call_id, {})
    events = stream.drain()
    assert [e["seq"] for e in events] == [1, 2]
    assert [e["type"] for e in events] == ["membership-change", "membership-change"]
    assert len(events[1]["payload"]["participants"]) == 2


def test_third_join_membership_lists_three():
    _, core = make_core()
    toks = [login(core, a) for a in (ALICE, BOB, "carol@example.net")]
    call_id = core.create_call(toks[0])["call_id"]
    conf = core._conferences[call_id]
    conf.invited.update({BOB, "carol@example.net"})
    stream = core.subscribe(toks[0], f"/call/{call_id}")
    for tok in toks:
        core.join_call(tok, call_id, {})
    last = stream.drain()[-1]
    assert len(last["payload"]["participants"]) == 3


def test_leave_and_grace_collection():
    tl, core = make_core()
    tok = login(core, ALICE)
    call_id = core.create_call(tok)["call_id"]
    pid = core.join_call(tok, call_id, {})["participant_id"]
    core.leave_call(tok, call_id, pid)
    assert core.get_call(tok, call_id)["participants"] == []
    with pytest.raises(ApiError) as err:
        core.leave_call(tok, call_id, "p9")
    assert err.value.code == 404
    tl.advance(30.1)
    with pytest.raises(ApiError) as err:
        core.get_call(tok, call_id)
    assert err.value.code == 404


def test_rejoin_cancels_grace_collection():
    tl, core = make_core()
    tok = login(core, ALICE)
    call_id = core.create_call(tok)["call_id"]
    tl.advance(29)
    core.join_call(tok, call_id, {})  # cancels the pending collection
    tl.advance(10)
    assert core.get_call(tok, call_id)["participants"]


def test_unjoined_call_is_collected_after_grace():
    tl, core = make_core()
    tok = login(core, ALICE)
    call_id = core.create_call(tok)["call_id"]
    tl.advance(30.1)
    with pytest.raises(ApiError):
        core.get_call(tok, call_id)


def test_subscribe_acl():
    _, core = make_core()
    tok_a, tok_b = login(core, ALICE), login(core, BOB)
    with pytest.raises(ApiError) as err:
        core.subscribe(tok_a, f"/login/{BOB}")
    assert err.value.code == 403
    call_id = core.create_call(tok_a)["call_id"]
    with pytest.raises(ApiError) as err:
        core.subscribe(tok_b, f"/call/{call_id}")
    assert err.value.code == 403
    with pytest.raises(ApiError) as err:
        core.subscribe(tok_a, "/call/c999")
    assert err.value.code == 404
    core.subscribe(tok_a, f"/login/{ALICE}")  # own login always allowed
    core.subscribe(tok_a, f"/call/{call_id}")  # creator allowed


def test_notify_invitation_flow():
    _, core = make_core()
    tok_a, tok_b = login(core, ALICE), login(core, BOB)
    core.register(tok_b, BOB, {"candidates": [candidate()]})
    stream = core.subscribe(tok_b, f"/login/{BOB}")
    call_id = core.create_call(tok_a)["call_id"]
    out = core.notify(tok_a, f"/login/{BOB}", {
        "type": "invitation",
        "conference": f"/call/{call_id}",
        "time": 123.0,
        "return": f"/login/{ALICE}",
    })
    assert out == {"delivered": 1}
    event = stream.drain()[0]
    assert event["type"] == "invitation"
    assert event["payload"]["conference"] == f"/call/{call_id}"
    assert event["payload"]["return"] == f"/login/{ALICE}"
    assert event["payload"]["from"] == ALICE
    # The invitation grants Bob access to the conference.
    core.subscribe(tok_b, f"/call/{call_id}")


def test_notify_validation_and_targets():
    _, core = make_core()
    tok_a, tok_b = login(core, ALICE), login(core, BOB)
    core.register(tok_b, BOB, {"candidates": [candidate()]})
    with pytest.raises(ApiError) as err:
        core.notify(tok_a, f"/login/{BOB}", {"type": "invitation"})
    assert err.value.code == 400
    with pytest.raises(ApiError) as err:
        core.notify(tok_a, f"/login/{BOB}", {"type": "ring"})
    assert err.value.code == 400
    with pytest.raises(ApiError) as err:
        core.notify(tok_a, "/login/carol@example.net",
                    {"type": "invitation", "conference": "/call/c1"})
    assert err.value.code == 404
    # Registered but not subscribed: delivery count 0 is still success.
    out = core.notify(tok_a, f"/login/{BOB}",
                      {"type": "invitation", "conference": "/call/c1"})
    assert out == {"delivered": 0}


def test_invitation_then_cancellation_ordered():
    _, core = make_core()
    tok_a, tok_b = login(core, ALICE), login(core, BOB)
    core.register(tok_b, BOB, {"candidates": [candidate()]})
    stream = core.subscribe(tok_b, f"/login/{BOB}")
    stream.drain()
    core.notify(tok_a, f"/login/{BOB}", {"type": "invitation", "conference": "/call/c1"})
    core.notify(tok_a, f"/login/{BOB}", {"type": "cancellation", "conference": "/call/c1"})
    events = stream.drain()
    assert [(e["type"], e["seq"]) for e in events] == [
        ("invitation", events[0]["seq"]),
        ("cancellation", events[0]["seq"] + 1),
    ]


def test_auth_validation():
    _, core = make_core()
    with pytest.raises(ApiError) as err:
        core.auth("not-an-aor", "pw")
    assert err.value.code == 400
    with pytest.raises(ApiError) as err:
        core.auth(ALICE, "")
    assert err.value.code == 401
    tl = VirtualTimeline()
    strict = SignalingCore(tl, secrets={ALICE: "s3cret"})
    with pytest.raises(ApiError) as err:
        strict.auth(ALICE, "wrong")
    assert err.value.code == 401
    assert strict.auth(ALICE, "s3cret")["aor"] == ALICE


def test_contact_update_events_fire_per_mutation():
    _, core = make_core()
    tok = login(core, ALICE)
    stream = core.subscribe(tok, f"/login/{ALICE}")
    core.register(tok, ALICE, {"candidates": [candidate()]})
    core.update_contact(tok, ALICE, "c2", {"candidates": [candidate(port=5062)]})
    core.delete_contact(tok, ALICE, "c2")
    actions = [e["payload"]["action"] for e in stream.drain()]
    assert actions == ["register", "update", "unregister"]
