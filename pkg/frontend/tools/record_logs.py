#!/usr/bin/env python3
"""Record the widget test fixtures against live services.

Brings up a signaling server and two adaptor daemons on loopback, drives the
remote side with a stock user agent, and plays the widget's part by hand:
every HTTP request the widget shell would make is made here, and every
request outcome, NDJSON frame, and user intent is appended to an event log
in the exact shape the reducer consumes. The logs land in test/fixtures/
and are frozen there; re-running this script rewrites them (timestamps and
ports will differ, view-model content should not).

Usage: python tools/record_logs.py
"""

from __future__ import annotations

import json
import random
import sys
import time
from pathlib import Path

from webcall.adaptor import (
    AdaptorCore,
    AdaptorServer,
    AllowAllPolicy,
    HttpAdaptor,
    RealNetwork,
)
from webcall.clockwork import RealTimeline
from webcall.errors import ApiError
from webcall.sdk import UserAgent
from webcall.signaling.client import HttpClient
from webcall.signaling.core import SignalingCore
from webcall.signaling.server import SignalingServer

FIXTURES = Path(__file__).resolve().parent.parent / "test" / "fixtures"

ALICE = "alice@example.net"
BOB = "bob@example.net"
SECRET = "pw"
CODECS_SUPPORTED = ["tone", "pcm16"]
CODECS_PREFERRED = ["tone"]


class WidgetDriver:
    """Plays the widget shell: runs its HTTP requests, logs what it saw."""

    def __init__(self, server_url: str, adaptor_url: str, aor: str, mode: str,
                 target: str | None):
        self.config = {
            "server_url": server_url,
            "adaptor_url": adaptor_url,
            "mode": mode,
            "target": target,
            "aor": aor,
            "secret": SECRET,
        }
        self.aor = aor
        self.sig = HttpClient(server_url)
        self.adaptor = HttpAdaptor(adaptor_url)
        self.log: list[dict] = []
        self._t0 = time.monotonic()
        self._subs: list[tuple[str, object]] = []
        self.candidates: list[dict] = []
        self.call_path = None
        self.pid = None
        self.peer_pid = None
        self.peer_session = None
        self.rtp = self.ice = self.mic = self.spk = None
        self.pipes: list[str] = []

    # -- logging ---------------------------------------------------------

    def _t(self) -> int:
        return round((time.monotonic() - self._t0) * 1000)

    def _log(self, event: dict) -> None:
        self.log.append({"t": self._t(), "event": event})

    def intent(self, **intent) -> None:
        self._log({"source": "ui", "intent": intent})

    def net(self, **result) -> None:
        self._log({"source": "net", "result": result})

    def stream(self, stream: str, status: str) -> None:
        self._log({"source": "stream", "stream": stream, "status": status})

    def drain(self) -> list[dict]:
        """Move everything queued on the subscriptions into the log."""
        fresh = []
        for source, sub in self._subs:
            for frame in sub.drain():
                if "type" not in frame:
                    continue
                self._log({"source": source, "frame": frame})
                fresh.append(frame)
        return fresh

    # -- widget choreography ------------------------------------------------

    def open(self) -> None:
        self.intent(action="open")
        try:
            self.sig.auth(self.aor, SECRET)
            self.net(op="auth", ok=True, status=200)
        except ApiError as err:
            self.net(op="auth", ok=False, status=err.code)
            raise
        try:
            self.adaptor.auth(f"webcall:{self.aor}")
            events = self.adaptor.events()
            self._subs.append(("adaptor", events))
            self.net(op="adaptor-auth", ok=True)
            self.stream("adaptor", "open")
        except Exception:
            self.net(op="adaptor-auth", ok=False)
            raise
        self._prepare_media()
        self._wait_gathered()
        out = self.sig.register(self.aor, {
            "candidates": self.candidates,
            "presence": {"status": "online"},
        })
        self.net(op="register", ok=True, contactId=out["contact_id"])
        self._subs.append(("server", self.sig.subscribe(f"/login/{self.aor}")))
        self.stream("server", "open")
        if self.config["mode"] == "phone":
            self.refresh_roster()

    def _prepare_media(self) -> None:
        self.rtp = self.adaptor.create("RtpTransport", {"port": 0})["object_id"]
        self.ice = self.adaptor.create(
            "IceTransport", {"components": [self.rtp]})["object_id"]

    def _wait_gathered(self, timeout: float = 10.0) -> None:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            for frame in self.drain():
                if (frame["type"] == "ice-phase"
                        and frame["payload"].get("phase") == "gathered"):
                    self.candidates = frame["payload"]["candidates"]
                    return
            time.sleep(0.02)
        raise TimeoutError("ICE never gathered")

    def refresh_roster(self) -> None:
        offset, seen = 0, []
        while True:
            page = self.sig.list_logins(offset=offset, limit=20)
            self.net(op="roster-page", ok=True, total=page["total"],
                     items=page["items"])
            seen.extend(page["items"])
            offset += len(page["items"])
            if offset >= page["total"] or not page["items"]:
                break
        for aor in seen:
            if aor == self.aor:
                continue
            try:
                doc = self.sig.get_login(aor)
            except ApiError:
                doc = None
            self.net(op="login-doc", ok=True, aor=aor, doc=doc)

    def session(self) -> dict:
        return {"candidates": self.candidates,
                "codecs_supported": CODECS_SUPPORTED,
                "codecs_preferred": CODECS_PREFERRED}

    def dial(self, target: str, via_button: bool) -> None:
        if via_button:
            self.intent(action="click-call")
        else:
            self.intent(action="call", target=target)
        try:
            self.sig.get_login(target)
            self.net(op="probe", ok=True, target=target, status=200)
        except ApiError as err:
            self.net(op="probe", ok=False, target=target, status=err.code)
            return
        out = self.sig.create_call()
        self.call_path = out["call_path"]
        self.net(op="call-created", ok=True, callPath=self.call_path)
        joined = self.sig.join_call(out["call_id"], self.session())
        self.pid = joined["participant_id"]
        self.net(op="join", ok=True, pid=self.pid)
        self._subs.append(("server", self.sig.subscribe(self.call_path)))
        try:
            self.sig.notify(f"/login/{target}", {
                "type": "invitation",
                "conference": self.call_path,
                "return": f"/login/{self.aor}",
            })
            self.net(op="invite-sent", ok=True)
        except ApiError:
            self.net(op="invite-sent", ok=False)

    def on_peer_joined(self, frame: dict) -> None:
        """Mirror of the reducer's inviting->joining step: start checks."""
        payload = frame["payload"]
        entry = next(p for p in payload["participants"]
                     if p["participant_id"] == payload["participant_id"])
        self.peer_pid = entry["participant_id"]
        self.peer_session = entry["session"]
        remote = [c for c in entry["session"]["candidates"]
                  if c["kind"] == "udp"]
        self.adaptor.invoke(self.ice, "ice_run", {"remote": remote})

    def on_connected(self, frame: dict) -> None:
        remote = frame["payload"]["selected_pair"]["remote"]
        self.adaptor.invoke(self.rtp, "set_remote",
                            {"to": [remote["address"], remote["port"]]})
        self.mic = self.adaptor.create("Microphone", {"codec": "tone"})["object_id"]
        self.spk = self.adaptor.create("Speaker", {})["object_id"]
        self.pipes = [
            self.adaptor.invoke(self.mic, "connect", {"sink": self.rtp})["pipeline"],
            self.adaptor.invoke(self.rtp, "connect", {"sink": self.spk})["pipeline"],
        ]
        self.net(op="media-wired", ok=True)

    def poll_stats(self) -> None:
        doc = self.adaptor.invoke(self.spk, "stats")
        self.net(op="stats", ok=True, frames=doc["frames"], gaps=doc["gaps"])

    def send_chat(self, text: str) -> None:
        self.intent(action="send-chat", text=text)
        self.sig.notify(self.call_path, {"type": "message", "text": text})

    def hangup_cleanup(self) -> None:
        """What the shell does after the reducer says the call ended."""
        if self.pid and self.call_path:
            try:
                self.sig.leave_call(self.call_path.rsplit("/", 1)[-1], self.pid)
            except ApiError:
                pass
        for oid in [*self.pipes, self.mic, self.spk, self.ice, self.rtp]:
            if oid:
                try:
                    self.adaptor.close_object(oid)
                except ApiError:
                    pass

    def close(self) -> None:
        for _, sub in self._subs:
            sub.close()
        self.sig.close()
        self.adaptor.close()


class Stack:
    """One signaling server plus per-user adaptor daemons, all loopback."""

    def __init__(self):
        self.timelines = [RealTimeline()]
        self.sig_core = SignalingCore(self.timelines[0], rng=random.Random(42))
        self.sig = SignalingServer(self.sig_core).start()
        self.adaptors: list[AdaptorServer] = []

    def adaptor(self) -> AdaptorServer:
        timeline = RealTimeline()
        self.timelines.append(timeline)
        core = AdaptorCore(timeline, RealNetwork(), AllowAllPolicy(),
                           rng=random.Random(len(self.adaptors) + 7))
        server = AdaptorServer(core, port=0)
        server.start()
        self.adaptors.append(server)
        return server

    def stop(self) -> None:
        for server in self.adaptors:
            server.stop()
        self.sig.stop()
        for timeline in self.timelines:
            timeline.stop()


def spin(driver: WidgetDriver, bob: UserAgent, condition, timeout: float = 10.0):
    """Pump the remote agent and drain the widget subscriptions until
    condition(frames_so_far) returns a frame (or anything truthy)."""
    got = []
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        bob.pump()
        got.extend(driver.drain())
        hit = condition(got)
        if hit:
            return hit
        time.sleep(0.03)
    raise TimeoutError("condition never met")


def frame_of(frames: list[dict], ev_type: str, **payload_match):
    for frame in frames:
        if frame["type"] != ev_type:
            continue
        if all(frame["payload"].get(k) == v for k, v in payload_match.items()):
            return frame
    return None


def bob_agent(stack: Stack) -> UserAgent:
    adaptor = stack.adaptor()
    bob = UserAgent(BOB, SECRET, HttpClient(stack.sig.url),
                    HttpAdaptor(adaptor.url), incoming="prompt")
    bob.login()
    deadline = time.monotonic() + 10
    while bob.state != "online" and time.monotonic() < deadline:
        bob.pump()
        time.sleep(0.02)
    assert bob.state == "online", bob.state
    return bob


def record_happy_path() -> dict:
    stack = Stack()
    try:
        bob = bob_agent(stack)
        driver = WidgetDriver(stack.sig.url, stack.adaptor().url, ALICE,
                              "phone", None)
        driver.open()
        driver.dial(BOB, via_button=False)

        spin(driver, bob, lambda fs: bob.state == "invited")
        bob.accept()
        joined = spin(driver, bob, lambda fs: frame_of(
            fs, "membership-change", action="join", aor=BOB))
        driver.on_peer_joined(joined)
        connected = spin(driver, bob, lambda fs: frame_of(
            fs, "ice-phase", phase="connected"))
        driver.on_connected(connected)
        spin(driver, bob, lambda fs: bob.state == "in-call")

        for _ in range(3):
            time.sleep(0.4)
            bob.pump()
            driver.drain()
            driver.poll_stats()

        driver.send_chat("hello from the widget")
        spin(driver, bob, lambda fs: frame_of(fs, "message",
                                              text="hello from the widget"))
        bob.signaling.notify(driver.call_path, {"type": "message",
                                                "text": "hi back"})
        spin(driver, bob, lambda fs: frame_of(fs, "message", text="hi back"))

        bob.hangup()
        spin(driver, bob, lambda fs: frame_of(
            fs, "membership-change", action="leave", aor=BOB))
        driver.hangup_cleanup()
        driver.close()
        bob.close()
        return {"config": driver.config, "log": driver.log}
    finally:
        stack.stop()


def record_rejected_call() -> dict:
    stack = Stack()
    try:
        bob = bob_agent(stack)
        driver = WidgetDriver(stack.sig.url, stack.adaptor().url, ALICE,
                              "click-to-call", BOB)
        driver.open()
        driver.dial(BOB, via_button=True)

        spin(driver, bob, lambda fs: bob.state == "invited")
        bob.reject()
        spin(driver, bob, lambda fs: frame_of(
            fs, "cancellation", reason="rejected"))
        driver.hangup_cleanup()
        driver.close()
        bob.close()
        return {"config": driver.config, "log": driver.log}
    finally:
        stack.stop()


def record_cancelled_call() -> dict:
    stack = Stack()
    try:
        bob = bob_agent(stack)
        driver = WidgetDriver(stack.sig.url, stack.adaptor().url, ALICE,
                              "phone", None)
        driver.open()

        bob.place_call(ALICE)
        spin(driver, bob, lambda fs: frame_of(fs, "invitation"))
        bob.hangup()
        spin(driver, bob, lambda fs: frame_of(fs, "cancellation"))
        driver.close()
        bob.close()
        return {"config": driver.config, "log": driver.log}
    finally:
        stack.stop()


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    scenarios = {
        "happy-path": record_happy_path,
        "rejected-call": record_rejected_call,
        "cancelled-call": record_cancelled_call,
    }
    for name, recorder in scenarios.items():
        fixture = recorder()
        path = FIXTURES / f"{name}.log.json"
        path.write_text(json.dumps(fixture, indent=1) + "\n")
        print(f"{name}: {len(fixture['log'])} events -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
