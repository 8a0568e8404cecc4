"""Socket layer the adaptor builds on, with a test-injection seam.

A Network hands out bound Endpoints; the adaptor never touches sockets
directly. RealNetwork wraps actual UDP sockets (one receive thread per
socket). The deterministic simulated implementation lives in
webcall.harness.natsim and plugs in through the same surface.
"""

from __future__ import annotations

import socket
import threading
from typing import Callable

Receiver = Callable[[tuple[str, int], bytes], None]

MAX_DATAGRAM = 65536


class Endpoint:
    """One bound UDP endpoint: send anywhere, receive via callback."""

    local_addr: tuple[str, int]

    def send(self, to: tuple[str, int], data: bytes) -> None:
        raise NotImplementedError

    def set_receiver(self, fn: Receiver | None) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class Network:
    """Endpoint factory; also knows the address sockets should advertise."""

    host_ip: str

    def bind(self, port: int = 0) -> Endpoint:
        """Bind a UDP endpoint; port 0 picks an ephemeral port > 1024.

        Raises OSError if the requested port is taken.
        """
        raise NotImplementedError


class RealEndpoint(Endpoint):
    def __init__(self, sock: socket.socket):
        self._sock = sock
        self.local_addr = sock.getsockname()[:2]
        self._receiver: Receiver | None = None
        self._closed = False
        self._thread = threading.Thread(target=self._recv_loop, daemon=True)
        self._thread.start()

    def _recv_loop(self) -> None:
        while not self._closed:
            try:
                data, addr = self._sock.recvfrom(MAX_DATAGRAM)
            except OSError:
                return
            receiver = self._receiver
            if receiver is not None:
                try:
                    receiver((addr[0], addr[1]), data)
                except Exception:
                    pass  # a receiver fault must not kill the socket loop

    def send(self, to: tuple[str, int], data: bytes) -> None:
        if self._closed:
            raise OSError("endpoint closed")
        self._sock.sendto(data, tuple(to))

    def set_receiver(self, fn: Receiver | None) -> None:
        self._receiver = fn

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._sock.close()


class RealNetwork(Network):
    def __init__(self, host_ip: str = "127.0.0.1"):
        self.host_ip = host_ip

    def bind(self, port: int = 0) -> Endpoint:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            sock.bind((self.host_ip, port))
            if sock.getsockname()[1] <= 1024:
                # An ephemeral pick this low never happens in practice, but
                # the contract says ports stay above 1024.
                sock.close()
                raise OSError("allocated a privileged port")
        except OSError:
            sock.close()
            raise
        return RealEndpoint(sock)
