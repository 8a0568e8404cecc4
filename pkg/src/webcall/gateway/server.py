"""Long-running gateway process: real UDP socket, real clock, REST over HTTP."""

from __future__ import annotations

import threading

from ..adaptor.network import RealNetwork
from ..clockwork import RealTimeline
from ..signaling.client import HttpClient
from .core import GatewayCore

PUMP_INTERVAL = 0.05


class GatewayServer:
    """Owns a GatewayCore plus the pump thread that drains REST events."""

    def __init__(self, rest_url: str, registrar: tuple[str, int],
                 port: int = 5060, host_ip: str = "127.0.0.1",
                 public_ip: str | None = None, timeline=None):
        self.timeline = timeline or RealTimeline()
        endpoint = RealNetwork(host_ip).bind(port)
        self.core = GatewayCore(
            self.timeline, endpoint,
            rest_factory=lambda: HttpClient(rest_url),
            registrar=registrar, public_ip=public_ip,
        )
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    @property
    def sip_address(self) -> tuple[str, int]:
        return self.core.endpoint.local_addr

    def start(self) -> "GatewayServer":
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def _run(self) -> None:
        while not self._stop.wait(PUMP_INTERVAL):
            self.core.pump()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2)
            self._thread = None
        self.core.close()
