"""Deterministic network simulator with behavioral NAT models.

One SimNetwork instance is a tiny internet: public hosts, private realms,
and one NAT per realm. Components under test exchange packets only through
it; delivery happens on the injected virtual timeline with a fixed delay
and seeded i.i.d. loss, so runs are replayable.

NAT behavior axes (classic mapping/filtering taxonomy):
  mapping "eim"  endpoint-independent: one external port per internal
                 endpoint, whatever the destination;
          "adm"  address-dependent: a separate external port per
                 (internal endpoint, destination IP).
  filtering "eif"  admit any inbound to a live binding;
            "adf"  admit only source IPs the binding has sent to;
            "apdf" admit only exact (source IP, port) pairs the binding
                   has sent to.
Filtering always consults the owning binding's own outbound history.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from ..adaptor.network import Endpoint, Network

Addr = tuple[str, int]


@dataclass
class Binding:
    internal: Addr
    external_port: int
    last_used: float
    history: set = field(default_factory=set)  # addrs this binding sent to


class NatModel:
    def __init__(self, external_ip: str, mapping: str = "eim", filtering: str = "eif",
                 binding_ttl: float = 30.0, first_port: int = 40000):
        if mapping not in ("eim", "adm"):
            raise ValueError(f"unknown mapping behavior {mapping!r}")
        if filtering not in ("eif", "adf", "apdf"):
            raise ValueError(f"unknown filtering behavior {filtering!r}")
        self.external_ip = external_ip
        self.mapping = mapping
        self.filtering = filtering
        self.binding_ttl = binding_ttl
        self._next_port = first_port
        self._bindings: dict[tuple, Binding] = {}

    def _key(self, internal: Addr, dst: Addr) -> tuple:
        if self.mapping == "eim":
            return internal
        return (internal, dst[0])

    def outbound(self, now: float, internal: Addr, dst: Addr) -> Addr:
        """Rewrite an outbound packet's source; creates/refreshes the binding."""
        key = self._key(internal, dst)
        binding = self._bindings.get(key)
        if binding is None or now - binding.last_used > self.binding_ttl:
            binding = Binding(internal, self._next_port, now)
            self._next_port += 1
            self._bindings[key] = binding
        binding.last_used = now
        binding.history.add((dst[0], dst[1]))
        return (self.external_ip, binding.external_port)

    def inbound(self, now: float, src: Addr, external_port: int) -> Addr | None:
        """Deliver an inbound packet to its internal endpoint, or None (drop)."""
        binding = next((b for b in self._bindings.values()
                        if b.external_port == external_port), None)
        if binding is None or now - binding.last_used > self.binding_ttl:
            return None
        if self.filtering == "eif":
            pass
        elif self.filtering == "adf":
            if src[0] not in {ip for ip, _ in binding.history}:
                return None
        else:  # apdf
            if (src[0], src[1]) not in binding.history:
                return None
        return binding.internal


class SimEndpoint(Endpoint):
    def __init__(self, net: "SimNetwork", host: str, addr: Addr):
        self._net = net
        self.host = host
        self.local_addr = addr
        self._receiver = None
        self.closed = False

    def send(self, to: Addr, data: bytes) -> None:
        if self.closed:
            raise OSError("endpoint closed")
        self._net.send(self.host, self.local_addr, (to[0], to[1]), data)

    def set_receiver(self, fn) -> None:
        self._receiver = fn

    def deliver(self, src: Addr, data: bytes) -> None:
        if not self.closed and self._receiver is not None:
            self._receiver(src, data)

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self._net._release(self)


class HostNetwork(Network):
    """One host's view of the simulator; what an adaptor gets injected."""

    def __init__(self, net: "SimNetwork", host: str):
        self._net = net
        self.host = host
        self.host_ip = net.host_ip(host)

    def bind(self, port: int = 0) -> Endpoint:
        return self._net.bind(self.host, port)


class SimNetwork:
    def __init__(self, timeline, seed: int = 0, delay: float = 0.001, loss: float = 0.0):
        self.timeline = timeline
        self.delay = delay
        self.loss = loss
        self._rng = random.Random(seed)
        self._hosts: dict[str, tuple[str | None, str]] = {}  # host -> (realm, ip)
        self._nats: dict[str, NatModel] = {}  # realm -> NAT
        self._endpoints: dict[tuple[str, int], SimEndpoint] = {}  # (host, port)
        self._next_ephemeral: dict[str, int] = {}
        self.injected = 0
        self.delivered = 0
        self.dropped = 0
        self.drop_reasons: dict[str, int] = {}

    # -- topology ---------------------------------------------------------

    def add_host(self, host: str, ip: str, realm: str | None = None) -> HostNetwork:
        """realm=None is the public internet; a realm name is a private site."""
        self._hosts[host] = (realm, ip)
        return HostNetwork(self, host)

    def add_nat(self, realm: str, nat: NatModel) -> NatModel:
        self._nats[realm] = nat
        return nat

    def host_ip(self, host: str) -> str:
        return self._hosts[host][1]

    def bind(self, host: str, port: int = 0) -> SimEndpoint:
        if port == 0:
            port = self._next_ephemeral.get(host, 5000)
            while (host, port) in self._endpoints:
                port += 1
            self._next_ephemeral[host] = port + 1
        elif port <= 1024:
            raise OSError(f"port {port} is privileged")
        if (host, port) in self._endpoints:
            raise OSError(f"port {port} in use on {host}")
        endpoint = SimEndpoint(self, host, (self.host_ip(host), port))
        self._endpoints[(host, port)] = endpoint
        return endpoint

    def _release(self, endpoint: SimEndpoint) -> None:
        self._endpoints.pop((endpoint.host, endpoint.local_addr[1]), None)

    # -- packet plane -----------------------------------------------------

    def _drop(self, reason: str) -> None:
        self.dropped += 1
        self.drop_reasons[reason] = self.drop_reasons.get(reason, 0) + 1

    def send(self, src_host: str, src_addr: Addr, dst: Addr, data: bytes) -> None:
        self.injected += 1
        if self.loss and self._rng.random() < self.loss:
            self._drop("loss")
            return
        now = self.timeline.now()
        realm, _ip = self._hosts[src_host]
        src = src_addr
        if realm is not None:
            # Same-realm traffic short-circuits the NAT.
            target = self._find_host(dst[0], realm)
            if target is not None:
                self._schedule(target, dst, src, data)
                return
            nat = self._nats.get(realm)
            if nat is None:
                self._drop("unroutable")
                return
            src = nat.outbound(now, src_addr, dst)
        self._route_public(src, dst, data)

    def _route_public(self, src: Addr, dst: Addr, data: bytes) -> None:
        now = self.timeline.now()
        for realm, nat in self._nats.items():
            if nat.external_ip == dst[0]:
                internal = nat.inbound(now, src, dst[1])
                if internal is None:
                    self._drop("nat-filtered")
                    return
                target = self._find_host(internal[0], realm)
                if target is None:
                    self._drop("no-listener")
                    return
                self._schedule(target, internal, src, data)
                return
        target = self._find_host(dst[0], None)
        if target is None:
            self._drop("unroutable")
            return
        self._schedule(target, dst, src, data)

    def _find_host(self, ip: str, realm: str | None) -> str | None:
        for host, (host_realm, host_ip) in self._hosts.items():
            if host_realm == realm and host_ip == ip:
                return host
        return None

    def _schedule(self, host: str, dst: Addr, src: Addr, data: bytes) -> None:
        endpoint = self._endpoints.get((host, dst[1]))
        if endpoint is None or endpoint.closed:
            self._drop("no-listener")
            return

        def deliver():
            if endpoint.closed:
                self._drop("no-listener")
            else:
                self.delivered += 1
                endpoint.deliver(src, data)

        self.timeline.call_later(self.delay, deliver)


class Reflector:
    """Public echo service revealing the observed source address.

    Speaks one datagram form: {"t":"probe","txid":...} in,
    {"t":"probe-ack","txid":...,"addr":[ip,port]} out.
    """

    def __init__(self, endpoint: Endpoint):
        self.endpoint = endpoint
        self.addr = endpoint.local_addr
        endpoint.set_receiver(self._on_datagram)

    def _on_datagram(self, src: Addr, data: bytes) -> None:
        try:
            doc = json.loads(data)
        except ValueError:
            return
        if doc.get("t") != "probe":
            return
        reply = {"t": "probe-ack", "txid": doc.get("txid"), "addr": [src[0], src[1]]}
        self.endpoint.send(src, json.dumps(reply, separators=(",", ":")).encode())
