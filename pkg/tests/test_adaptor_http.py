"""Adaptor daemon over its real localhost HTTP surface."""

import random

import pytest
import requests

from webcall.adaptor import (
    AdaptorCore,
    AdaptorServer,
    AllowAllPolicy,
    HttpAdaptor,
    RealNetwork,
)
from webcall.clockwork import RealTimeline
from webcall.errors import ApiError


@pytest.fixture()
def server():
    timeline = RealTimeline()
    core = AdaptorCore(timeline, RealNetwork(), AllowAllPolicy(),
                       rng=random.Random(7))
    srv = AdaptorServer(core, port=0)
    srv.start()
    yield srv
    srv.stop()
    timeline.stop()


def test_auth_create_invoke_delete_roundtrip(server):
    client = HttpAdaptor(server.url)
    out = client.auth("widget.example")
    assert out["token"].startswith("app-")

    created = client.create("UdpTransport", {"port": 0})
    oid = created["object_id"]
    assert created["state"]["local_port"] > 1024

    stats = client.invoke(oid, "stats")
    assert stats["bytes_out"] == 0

    listed = client.list_objects()
    assert [o["object_id"] for o in listed["objects"]] == [oid]

    client.close_object(oid)
    with pytest.raises(ApiError) as err:
        client.invoke(oid, "stats")
    assert err.value.code == 404


def test_datagram_and_event_stream_over_real_sockets(server):
    client = HttpAdaptor(server.url)
    client.auth("widget.example")
    a = client.create("UdpTransport", {"port": 0})
    b = client.create("UdpTransport", {"port": 0})
    events = client.events()

    client.invoke(a["object_id"], "send", {
        "to": ["127.0.0.1", b["state"]["local_port"]], "data": "aGVsbG8="})
    event = events.take(timeout=5)
    assert event["type"] == "udp-recv"
    assert event["payload"]["object"] == b["object_id"]
    assert event["payload"]["data"] == "aGVsbG8="

    got = client.invoke(b["object_id"], "recv_poll")
    assert got["datagrams"][0]["data"] == "aGVsbG8="
    events.close()
    client.close()


def test_requests_without_token_are_unauthorized(server):
    resp = requests.post(server.url + "/objects",
                         json={"class": "UdpTransport", "params": {}})
    assert resp.status_code == 401
    resp = requests.get(server.url + "/events")
    assert resp.status_code == 401


def test_widget_static_serving(server):
    resp = requests.get(server.url + "/widgets")
    assert resp.status_code == 200
    assert "text/html" in resp.headers["Content-Type"]
    assert resp.text.strip()

    resp = requests.get(server.url + "/widgets/index.html")
    assert resp.status_code == 200

    resp = requests.get(server.url + "/widgets/missing.js")
    assert resp.status_code == 404

    # names that try to walk out of the widgets dir never resolve
    resp = requests.get(server.url + "/widgets/..%2F..%2Fpyproject.toml")
    assert resp.status_code == 404


def test_adaptor_binds_loopback_only():
    timeline = RealTimeline()
    core = AdaptorCore(timeline, RealNetwork(), AllowAllPolicy(),
                       rng=random.Random(7))
    with pytest.raises(ValueError):
        AdaptorServer(core, host="0.0.0.0", port=0)
    core.close()
    timeline.stop()
