"""ICE-style connectivity establishment over the adaptor's UDP transports.

Lightweight by design: candidates are gathered from the bound sockets plus
an optional public reflector, then every (component x remote candidate)
pair is probed with a three-way JSON handshake:

    {"t":"ping","txid":h}  ->  {"t":"pong","txid":h}  ->  {"t":"ack","txid":h}

A pair succeeds on either kind of evidence: a pong for a ping we sent
(remote = the advertised candidate) or an ack for a pong we sent (remote =
the observed source, which may be a peer-reflexive address a NAT minted
for this flow). Both prove a live bidirectional 4-tuple.

Phases move strictly new -> gathering -> gathered -> checking ->
connected | failed. While connected, a keepalive ping flows every 15 s,
safely inside the 30 s NAT binding lifetime.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Callable

from ..errors import ApiError, bad_request

Addr = tuple[str, int]

HOST_PRIORITY_BASE = 200
REFLEXIVE_PRIORITY_BASE = 100
PROBE_SCHEDULE = (0.0, 0.1, 0.2)
GATHER_TIMEOUT = 0.5
CHECK_STAGGER = 0.02
PING_SCHEDULE = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
PAIR_TIMEOUT = 1.5
KEEPALIVE_INTERVAL = 15.0

PHASES = ("new", "gathering", "gathered", "checking", "connected", "failed")


def _frame(doc: dict) -> bytes:
    data = json.dumps(doc, separators=(",", ":")).encode()
    assert len(data) <= 128, "check datagram over budget"
    return data


@dataclass
class CandidatePair:
    component: int
    local: dict
    remote: dict
    priority: int
    txid: str
    state: str = "waiting"  # waiting | in-progress | succeeded | failed
    reason: str = ""
    timers: list = field(default_factory=list)

    def cancel_timers(self):
        for handle in self.timers:
            handle.cancel()
        self.timers.clear()


class IceAgent:
    """One logical ICE transport over a fixed list of component sockets.

    send_fn(component_index, to, data) performs the gated socket send and
    returns False when the destination is not approved; emit(type, payload)
    posts an event to the owner's stream.
    """

    def __init__(self, components: int, timeline, send_fn: Callable[[int, Addr, bytes], bool],
                 local_addrs: list[Addr], emit: Callable[[str, dict], None],
                 rng: random.Random | None = None):
        self.timeline = timeline
        self.send_fn = send_fn
        self.local_addrs = local_addrs
        self.emit = emit
        self.rng = rng or random.Random()
        self.n_components = components
        self.phase = "new"
        self.local_candidates: list[dict] = []
        self.remote_candidates: list[dict] = []
        self.pairs: list[CandidatePair] = []
        self.selected_pair: dict | None = None
        self._selected_component: int | None = None
        self._probe_txids: dict[str, int] = {}  # txid -> component
        self._acked_components: set[int] = set()
        self._sent_pongs: dict[str, tuple[int, Addr]] = {}
        self._gather_done = False
        self._gather_timer = None
        self._keepalive_timer = None
        self._keepalive_txids: set[str] = set()
        self.keepalive_pongs = 0
        self.closed = False
        self.on_app_data: Callable[[Addr, bytes], None] | None = None

    # -- helpers ---------------------------------------------------------

    def _txid(self) -> str:
        return f"{self.rng.getrandbits(64):016x}"

    def _set_phase(self, phase: str, extra: dict | None = None) -> None:
        self.phase = phase
        payload = {"phase": phase}
        payload.update(extra or {})
        self.emit("ice-phase", payload)

    def state(self) -> dict:
        return {
            "phase": self.phase,
            "components": self.n_components,
            "local_candidates": list(self.local_candidates),
            "remote_candidates": list(self.remote_candidates),
            "selected_pair": self.selected_pair,
        }

    # -- gathering ---------------------------------------------------------

    def gather(self, reflector: Addr | None = None) -> None:
        if self.phase != "new":
            raise ApiError(409, f"gather is not valid in phase {self.phase}")
        self._set_phase("gathering")
        for i, addr in enumerate(self.local_addrs):
            self.local_candidates.append({
                "kind": "udp", "address": addr[0], "port": addr[1],
                "priority": HOST_PRIORITY_BASE - i,
            })
        if reflector is None:
            self.timeline.call_later(0.0, self._finish_gathering)
            return
        reflector = (reflector[0], reflector[1])
        for i in range(self.n_components):
            txid = self._txid()
            self._probe_txids[txid] = i
            probe = _frame({"t": "probe", "txid": txid})
            for delay in PROBE_SCHEDULE:
                self.timeline.call_later(
                    delay, lambda i=i, probe=probe: self._probe_send(i, reflector, probe))
        self._gather_timer = self.timeline.call_later(GATHER_TIMEOUT, self._finish_gathering)

    def _probe_send(self, component: int, reflector: Addr, probe: bytes) -> None:
        if not self._gather_done and not self.closed:
            self.send_fn(component, reflector, probe)

    def _on_probe_ack(self, doc: dict) -> None:
        component = self._probe_txids.get(doc.get("txid", ""))
        if component is None or self._gather_done:
            return
        addr = doc.get("addr")
        if not isinstance(addr, list) or len(addr) != 2:
            return
        candidate = {
            "kind": "udp", "address": addr[0], "port": int(addr[1]),
            "priority": REFLEXIVE_PRIORITY_BASE - component,
        }
        known = {(c["address"], c["port"]) for c in self.local_candidates}
        if (candidate["address"], candidate["port"]) not in known:
            self.local_candidates.append(candidate)
        self._acked_components.add(component)
        if self._acked_components == set(self._probe_txids.values()):
            self._finish_gathering()

    def _finish_gathering(self) -> None:
        if self._gather_done or self.closed:
            return
        self._gather_done = True
        self._set_phase("gathered", {"candidates": list(self.local_candidates)})

    # -- checks ------------------------------------------------------------

    def set_remote_candidates(self, candidates: list[dict]) -> None:
        if self.phase not in ("new", "gathering", "gathered"):
            raise ApiError(409, f"set_remote_candidates is not valid in phase {self.phase}")
        kept = [c for c in candidates if c.get("kind") == "udp"]
        if not kept:
            raise bad_request("remote candidate list must contain a udp candidate")
        self.remote_candidates = kept

    def start_checks(self) -> None:
        if self.phase != "gathered":
            raise ApiError(409, f"start_checks requires phase gathered, not {self.phase}")
        if not self.remote_candidates:
            raise ApiError(409, "no remote candidates set")
        self._set_phase("checking")
        # One pair per (component socket x remote candidate); a component's
        # reflexive candidate shares its socket, so it adds no extra pair.
        for component in range(self.n_components):
            local = self.local_candidates[component]  # host candidate
            for remote in self.remote_candidates:
                self.pairs.append(CandidatePair(
                    component=component,
                    local=local,
                    remote=remote,
                    priority=local["priority"] * 65536 + remote["priority"],
                    txid=self._txid(),
                ))
        self.pairs.sort(key=lambda p: (-p.priority,
                                       p.local["address"], p.remote["address"]))
        for index, pair in enumerate(self.pairs):
            start = index * CHECK_STAGGER
            pair.state = "in-progress"
            for delay in PING_SCHEDULE:
                pair.timers.append(self.timeline.call_later(
                    start + delay, lambda p=pair: self._ping(p)))
            pair.timers.append(self.timeline.call_later(
                start + PAIR_TIMEOUT, lambda p=pair: self._pair_timeout(p)))

    def _remote_addr(self, pair: CandidatePair) -> Addr:
        return (pair.remote["address"], pair.remote["port"])

    def _ping(self, pair: CandidatePair) -> None:
        if pair.state != "in-progress" or self.closed:
            return
        ok = self.send_fn(pair.component, self._remote_addr(pair),
                          _frame({"t": "ping", "txid": pair.txid}))
        if not ok:
            pair.state = "failed"
            pair.reason = "destination not approved"
            pair.cancel_timers()
            self._maybe_fail()

    def _pair_timeout(self, pair: CandidatePair) -> None:
        if pair.state == "in-progress":
            pair.state = "failed"
            pair.reason = "timeout"
            pair.cancel_timers()
            self._maybe_fail()

    def _maybe_fail(self) -> None:
        if self.phase == "checking" and all(p.state == "failed" for p in self.pairs):
            self._set_phase("failed", {
                "reasons": {
                    f"{p.local['address']}:{p.local['port']}->"
                    f"{p.remote['address']}:{p.remote['port']}": p.reason
                    for p in self.pairs
                },
            })

    def _succeed(self, component: int, remote: Addr, via: str) -> None:
        if self.phase != "checking":
            return
        for pair in self.pairs:
            if pair.state == "in-progress":
                pair.cancel_timers()
        local = self.local_candidates[component]
        self.selected_pair = {
            "local": {"address": local["address"], "port": local["port"]},
            "remote": {"address": remote[0], "port": remote[1]},
            "component": component,
            "evidence": via,
        }
        self._selected_component = component
        self._set_phase("connected", {"selected_pair": self.selected_pair})
        self._schedule_keepalive()

    def _schedule_keepalive(self) -> None:
        self._keepalive_timer = self.timeline.call_later(
            KEEPALIVE_INTERVAL, self._keepalive)

    def _keepalive(self) -> None:
        if self.phase != "connected" or self.closed:
            return
        txid = self._txid()
        self._keepalive_txids.add(txid)
        remote = self.selected_pair["remote"]
        self.send_fn(self._selected_component, (remote["address"], remote["port"]),
                     _frame({"t": "ping", "txid": txid}))
        self._schedule_keepalive()

    # -- datagram plane ------------------------------------------------------

    def on_datagram(self, component: int, src: Addr, data: bytes) -> bool:
        """Returns True when the datagram belonged to this agent."""
        if self.closed or not data or data[0] != 0x7B:  # '{'
            return False
        try:
            doc = json.loads(data)
        except ValueError:
            return False
        kind = doc.get("t")
        txid = doc.get("txid", "")
        if kind == "probe-ack":
            self._on_probe_ack(doc)
            return True
        if kind == "ping":
            self._sent_pongs[txid] = (component, src)
            self.send_fn(component, src, _frame({"t": "pong", "txid": txid}))
            return True
        if kind == "pong":
            if txid in self._keepalive_txids:
                self._keepalive_txids.discard(txid)
                self.keepalive_pongs += 1
                return True
            pair = next((p for p in self.pairs if p.txid == txid), None)
            if pair is not None:
                if pair.state == "in-progress":
                    pair.state = "succeeded"
                    pair.cancel_timers()
                    self._succeed(pair.component, self._remote_addr(pair), "pong")
                self.send_fn(component, src, _frame({"t": "ack", "txid": txid}))
            return True
        if kind == "ack":
            pong = self._sent_pongs.get(txid)
            if pong is not None:
                self._succeed(pong[0], pong[1], "ack")
            return True
        if kind == "data":
            if self.phase == "connected" and self.on_app_data is not None:
                try:
                    payload = bytes.fromhex(doc.get("d", ""))
                except ValueError:
                    payload = b""
                self.on_app_data(src, payload)
            return True
        return False

    def send(self, data: bytes) -> None:
        if self.phase != "connected":
            raise ApiError(409, f"send requires phase connected, not {self.phase}")
        remote = self.selected_pair["remote"]
        self.send_fn(self._selected_component, (remote["address"], remote["port"]),
                     json.dumps({"t": "data", "d": data.hex()},
                                separators=(",", ":")).encode())

    def close(self) -> None:
        self.closed = True
        for pair in self.pairs:
            pair.cancel_timers()
        if self._keepalive_timer is not None:
            self._keepalive_timer.cancel()
