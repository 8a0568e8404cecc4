"""Transport and media object classes hosted by the adaptor.

Every object lives inside exactly one application scope (the token that
created it), publishes its asynchronous effects to that scope's event
stream, and rejects method calls after close. Composite objects
(RtpTransport, IceTransport, pipelines) are built from member objects and
close them along with themselves.
"""

from __future__ import annotations

import base64
import socket
import threading
from collections import deque

from ..errors import ApiError, bad_request, conflict
from ..media.codecs import CodecDescriptor, codec_by_name, codec_by_payload_type
from ..media.frames import MediaFrame, PatternSource, StatsSink, ToneSource
from ..media.rtp import RtcpSenderReport, RtpError, RtpPacket
from .ice import IceAgent

RECV_BUFFER = 256
RTCP_INTERVAL = 5.0
NTP_EPOCH_OFFSET = 2208988800


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode()


def _unb64(text) -> bytes:
    if not isinstance(text, str):
        raise bad_request("data must be a base64 string")
    try:
        return base64.b64decode(text, validate=True)
    except Exception:
        raise bad_request("data is not valid base64") from None


def _addr(value) -> tuple[str, int]:
    """Accepts {"address": a, "port": p} or [a, p]."""
    if isinstance(value, dict):
        value = (value.get("address"), value.get("port"))
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not isinstance(value[0], str) or not isinstance(value[1], int)):
        raise bad_request("address must be {address, port} or [address, port]")
    return (value[0], value[1])


class BaseObject:
    CLASS = "?"

    def __init__(self, core, app, object_id: str):
        self.core = core
        self.app = app
        self.object_id = object_id
        self.closed = False

    def emit(self, ev_type: str, payload: dict) -> None:
        self.core.publish(self.app, ev_type, {"object": self.object_id, **payload})

    def document(self) -> dict:
        return {"object_id": self.object_id, "class": self.CLASS}

    def invoke(self, method: str, args: dict):
        handler = getattr(self, "op_" + method, None)
        if handler is None:
            raise ApiError(409, f"{self.CLASS} has no method {method!r}")
        return handler(args)

    def op_stats(self, args: dict) -> dict:
        return self.document()

    def close(self) -> None:
        self.closed = True


class UdpObject(BaseObject):
    CLASS = "UdpTransport"

    def __init__(self, core, app, object_id, endpoint):
        super().__init__(core, app, object_id)
        self.endpoint = endpoint
        self.allowlist: set[str] = set()
        self.bytes_in = 0
        self.bytes_out = 0
        self.recv_buffer: deque = deque(maxlen=RECV_BUFFER)
        # Composite owners (ICE, RTP) prepend demux claims; a claim returning
        # True consumes the datagram before it reaches the app-facing buffer.
        self.claims: list = []
        endpoint.set_receiver(self._on_datagram)

    @property
    def local_port(self) -> int:
        return self.endpoint.local_addr[1]

    def document(self) -> dict:
        return {
            "object_id": self.object_id, "class": self.CLASS,
            "local_port": self.local_port,
            "peer_allowlist": sorted(self.allowlist | self.app.peer_grants),
            "bytes_in": self.bytes_in, "bytes_out": self.bytes_out,
        }

    def _on_datagram(self, src: tuple[str, int], data: bytes) -> None:
        with self.core.lock:
            if self.closed:
                return
            self.bytes_in += len(data)
            for claim in list(self.claims):
                if claim(src, data):
                    return
            record = {"from": [src[0], src[1]], "data": _b64(data)}
            self.recv_buffer.append(record)
            self.emit("udp-recv", record)

    def peer_allowed(self, ip: str) -> bool:
        return ip in self.allowlist or ip in self.app.peer_grants

    def raw_send(self, to: tuple[str, int], data: bytes) -> bool:
        # Last line of defense: timers and composites route through here, so
        # an unapproved destination is unreachable even if a caller upstream
        # forgot to consult the policy.
        if self.closed or not self.peer_allowed(to[0]):
            return False
        self.endpoint.send(to, data)
        self.bytes_out += len(data)
        self.core.outbound_datagrams += 1
        return True

    def op_send(self, args: dict) -> dict:
        to = _addr(args.get("to"))
        data = _unb64(args.get("data"))
        if not self.core.ensure_peer(self.app, self, to[0]):
            raise ApiError(403, f"destination {to[0]} not approved")
        self.raw_send(to, data)
        return {"queued": True}

    def op_recv_poll(self, args: dict) -> dict:
        drained = list(self.recv_buffer)
        self.recv_buffer.clear()
        return {"datagrams": drained}

    def op_stats(self, args: dict) -> dict:
        return self.document()

    def close(self) -> None:
        self.closed = True
        self.endpoint.close()


class TcpObject(BaseObject):
    """Outbound-only TCP connection; `secure` accepted but carried as a flag."""

    CLASS = "TcpTransport"

    def __init__(self, core, app, object_id, secure: bool = False):
        super().__init__(core, app, object_id)
        self.secure = bool(secure)
        self.sock: socket.socket | None = None
        self.remote: tuple[str, int] | None = None
        self.bytes_in = 0
        self.bytes_out = 0

    def document(self) -> dict:
        return {
            "object_id": self.object_id, "class": self.CLASS,
            "secure": self.secure, "connected": self.sock is not None,
            "remote": list(self.remote) if self.remote else None,
            "bytes_in": self.bytes_in, "bytes_out": self.bytes_out,
        }

    def op_connect_remote(self, args: dict) -> dict:
        if self.sock is not None:
            raise ApiError(409, "already connected")
        to = _addr(args.get("to"))
        if not self.core.ensure_peer_app(self.app, to[0]):
            raise ApiError(403, f"destination {to[0]} not approved")
        try:
            self.sock = socket.create_connection(to, timeout=5)
        except OSError as exc:
            raise ApiError(409, f"connect failed: {exc}") from None
        self.remote = to
        threading.Thread(target=self._reader, daemon=True).start()
        return {"connected": True}

    def _reader(self) -> None:
        sock = self.sock
        try:
            while True:
                chunk = sock.recv(65536)
                if not chunk:
                    break
                with self.core.lock:
                    if self.closed:
                        break
                    self.bytes_in += len(chunk)
                    self.emit("tcp-recv", {"data": _b64(chunk)})
        except OSError:
            pass

    def op_send(self, args: dict) -> dict:
        if self.sock is None:
            raise ApiError(409, "not connected")
        data = _unb64(args.get("data"))
        self.sock.sendall(data)
        self.bytes_out += len(data)
        return {"queued": True}

    def close(self) -> None:
        self.closed = True
        if self.sock is not None:
            try:
                self.sock.close()
            except OSError:
                pass
            self.sock = None


class IceObject(BaseObject):
    CLASS = "IceTransport"

    def __init__(self, core, app, object_id, component_ids: list[str],
                 components: list[UdpObject], reflector: tuple[str, int] | None):
        super().__init__(core, app, object_id)
        self.component_ids = component_ids
        self.components = components
        self.recv_buffer: deque = deque(maxlen=RECV_BUFFER)
        self.agent = IceAgent(
            len(components), core.timeline,
            self._gated_send,
            [c.endpoint.local_addr for c in components],
            self.emit, rng=core.rng)
        self.agent.on_app_data = self._on_app_data
        for index, comp in enumerate(components):
            comp.claims.append(
                lambda src, data, i=index: self.agent.on_datagram(i, src, data))
        self.agent.gather(reflector)

    def _gated_send(self, component: int, to: tuple[str, int], data: bytes) -> bool:
        return self.components[component].raw_send(to, data)

    def _on_app_data(self, src: tuple[str, int], data: bytes) -> None:
        record = {"from": [src[0], src[1]], "data": _b64(data)}
        self.recv_buffer.append(record)
        self.emit("ice-recv", record)

    def document(self) -> dict:
        doc = self.agent.state()
        doc.update({"object_id": self.object_id, "class": self.CLASS,
                    "components": list(self.component_ids)})
        return doc

    def op_set_remote_candidates(self, args: dict) -> dict:
        candidates = args.get("candidates")
        if not isinstance(candidates, list) or not candidates:
            raise bad_request("candidates must be a non-empty list")
        self.agent.set_remote_candidates(candidates)
        return {"accepted": len(self.agent.remote_candidates)}

    def op_start_checks(self, args: dict) -> dict:
        for candidate in self.agent.remote_candidates:
            ip = candidate["address"]
            if self.core.ensure_peer_app(self.app, ip):
                for comp in self.components:
                    comp.allowlist.add(ip)
        self.agent.start_checks()
        return {"pairs": len(self.agent.pairs)}

    def op_ice_run(self, args: dict) -> dict:
        remote = args.get("remote")
        if not isinstance(remote, list) or not remote:
            raise bad_request("remote must be a non-empty candidate list")
        self.agent.set_remote_candidates(remote)
        return self.op_start_checks({})

    def op_send(self, args: dict) -> dict:
        self.agent.send(_unb64(args.get("data")))
        return {"queued": True}

    def op_recv_poll(self, args: dict) -> dict:
        drained = list(self.recv_buffer)
        self.recv_buffer.clear()
        return {"datagrams": drained}

    def op_stats(self, args: dict) -> dict:
        return self.document()

    def close(self) -> None:
        self.closed = True
        self.agent.close()
        for comp in self.components:
            if not comp.closed:
                comp.close()


class RtpObject(BaseObject):
    CLASS = "RtpTransport"

    def __init__(self, core, app, object_id, rtp: UdpObject, rtcp: UdpObject,
                 ssrc: int):
        super().__init__(core, app, object_id)
        self.rtp = rtp
        self.rtcp = rtcp
        self.ssrc = ssrc
        self.remote: tuple[str, int] | None = None
        self.rtcp_remote: tuple[str, int] | None = None
        self.seq = core.rng.randrange(1 << 16)
        self.sent_packets = 0
        self.sent_octets = 0
        self.recv_packets = 0
        self.recv_octets = 0
        self.malformed = 0
        self.last_sr: dict | None = None
        self.sinks: list[BaseObject] = []
        self._ext_high: int | None = None
        self._sr_timer = None
        rtp.claims.append(self._claim_rtp)
        rtcp.claims.append(self._claim_rtcp)

    def document(self) -> dict:
        return {
            "object_id": self.object_id, "class": self.CLASS,
            "rtp_transport": self.rtp.object_id,
            "rtcp_transport": self.rtcp.object_id,
            "rtp_port": self.rtp.local_port, "rtcp_port": self.rtcp.local_port,
            "ssrc": self.ssrc,
            "remote": list(self.remote) if self.remote else None,
            "sent_packets": self.sent_packets, "recv_packets": self.recv_packets,
            "malformed": self.malformed,
            "last_sender_report": self.last_sr,
        }

    def op_set_remote(self, args: dict) -> dict:
        to = _addr(args.get("to") if "to" in args else args)
        if not self.core.ensure_peer(self.app, self.rtp, to[0]):
            raise ApiError(403, f"destination {to[0]} not approved")
        self.rtcp.allowlist.add(to[0])
        self.remote = to
        # Adjacency mirrors the local pairing rule; fine on the loopback and
        # simulator paths where media actually flows.
        self.rtcp_remote = (to[0], to[1] + 1)
        if self._sr_timer is None:
            self._sr_timer = self.core.timeline.call_later(
                RTCP_INTERVAL, self._sender_report)
        return {"remote": list(to)}

    def op_stats(self, args: dict) -> dict:
        return self.document()

    # -- sending -----------------------------------------------------------

    def send_frame(self, frame: MediaFrame, codec: CodecDescriptor) -> None:
        if self.closed or self.remote is None:
            return
        packet = RtpPacket(payload_type=codec.payload_type, seq=self.seq,
                           timestamp=frame.timestamp, ssrc=self.ssrc,
                           payload=frame.data)
        self.seq = (self.seq + 1) & 0xFFFF
        if self.rtp.raw_send(self.remote, packet.serialize()):
            self.sent_packets += 1
            self.sent_octets += len(frame.data)

    def _sender_report(self) -> None:
        if self.closed:
            return
        if self.rtcp_remote is not None and self.sent_packets:
            now = self.core.timeline.now()
            report = RtcpSenderReport(
                ssrc=self.ssrc,
                ntp_seconds=(int(now) + NTP_EPOCH_OFFSET) & 0xFFFFFFFF,
                ntp_fraction=int((now % 1.0) * (1 << 32)) & 0xFFFFFFFF,
                rtp_timestamp=0,
                packet_count=self.sent_packets,
                octet_count=self.sent_octets,
            )
            self.rtcp.raw_send(self.rtcp_remote, report.serialize())
        self._sr_timer = self.core.timeline.call_later(
            RTCP_INTERVAL, self._sender_report)

    # -- receiving -----------------------------------------------------------

    def _extend_seq(self, seq: int) -> int:
        if self._ext_high is None:
            self._ext_high = seq
            return seq
        high16 = self._ext_high & 0xFFFF
        forward = (seq - high16) & 0xFFFF
        if forward < 0x8000:
            ext = self._ext_high + forward
            self._ext_high = ext
            return ext
        return self._ext_high - ((high16 - seq) & 0xFFFF)

    def _claim_rtp(self, src: tuple[str, int], data: bytes) -> bool:
        if not data or data[0] < 0x80:
            return False
        try:
            packet = RtpPacket.parse(data)
        except RtpError:
            self.malformed += 1
            return True
        self.recv_packets += 1
        self.recv_octets += len(packet.payload)
        codec = codec_by_payload_type(packet.payload_type)
        if codec is None:
            self.malformed += 1
            return True
        kind = "video" if codec.name == "pattern" else "audio"
        frame = MediaFrame(kind=kind, seq=self._extend_seq(packet.seq),
                           timestamp=packet.timestamp, rate=codec.clock_rate,
                           data=packet.payload)
        for sink in list(self.sinks):
            if not sink.closed:
                sink.consume(frame)
        return True

    def _claim_rtcp(self, src: tuple[str, int], data: bytes) -> bool:
        if not data or data[0] < 0x80:
            return False
        try:
            report = RtcpSenderReport.parse(data)
        except RtpError:
            self.malformed += 1
            return True
        self.last_sr = {
            "ssrc": report.ssrc, "packet_count": report.packet_count,
            "octet_count": report.octet_count,
        }
        return True

    def close(self) -> None:
        self.closed = True
        if self._sr_timer is not None:
            self._sr_timer.cancel()
        for member in (self.rtp, self.rtcp):
            if not member.closed:
                member.close()


class MediaSourceObject(BaseObject):
    """Common machinery for the synthetic capture devices."""

    KIND = "?"

    def __init__(self, core, app, object_id):
        super().__init__(core, app, object_id)
        self.started = True
        self.attributes: dict = {}

    def frame_interval(self) -> float:
        raise NotImplementedError

    def next_frame(self) -> MediaFrame:
        raise NotImplementedError

    def codec(self) -> CodecDescriptor:
        return codec_by_name(self.attributes["codec"])

    def document(self) -> dict:
        return {"object_id": self.object_id, "class": self.CLASS,
                "started": self.started, "attributes": dict(self.attributes)}

    def op_start(self, args: dict) -> dict:
        self.started = True
        return {"started": True}

    def op_stop(self, args: dict) -> dict:
        self.started = False
        return {"started": False}

    def op_set_attribute(self, args: dict) -> dict:
        name = args.get("name")
        if name not in self.attributes:
            raise bad_request(f"unknown attribute {name!r}")
        self._apply_attribute(name, args.get("value"))
        return {"attributes": dict(self.attributes)}

    def _apply_attribute(self, name: str, value) -> None:
        self.attributes[name] = value


class MicrophoneObject(MediaSourceObject):
    CLASS = "Microphone"
    KIND = "audio"

    def __init__(self, core, app, object_id, params: dict):
        super().__init__(core, app, object_id)
        codec = params.get("codec", "tone")
        if codec not in ("tone", "pcm16"):
            raise bad_request(f"unsupported microphone codec {codec!r}")
        frequency = params.get("frequency", 440.0)
        try:
            self.source = ToneSource(float(frequency))
        except (TypeError, ValueError) as exc:
            raise bad_request(str(exc)) from None
        self.attributes = {"codec": codec, "frequency": float(frequency),
                           "volume": 1.0}

    def frame_interval(self) -> float:
        return self.source.frame_interval

    def next_frame(self) -> MediaFrame:
        return self.source.next_frame()

    def _apply_attribute(self, name: str, value) -> None:
        if name == "frequency":
            try:
                self.source = ToneSource(float(value))
            except (TypeError, ValueError) as exc:
                raise bad_request(str(exc)) from None
            value = float(value)
        elif name == "volume":
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise bad_request("volume must be within [0, 1]")
        elif name == "codec":
            if value not in ("tone", "pcm16"):
                raise bad_request(f"unsupported microphone codec {value!r}")
        self.attributes[name] = value


class CameraObject(MediaSourceObject):
    CLASS = "Camera"
    KIND = "video"

    def __init__(self, core, app, object_id, params: dict):
        super().__init__(core, app, object_id)
        self.source = PatternSource()
        self.attributes = {"codec": "pattern"}

    def frame_interval(self) -> float:
        return self.source.frame_interval

    def next_frame(self) -> MediaFrame:
        return self.source.next_frame()

    def _apply_attribute(self, name: str, value) -> None:
        if name == "codec" and value != "pattern":
            raise bad_request("camera emits the pattern codec only")
        self.attributes[name] = value


class MediaSinkObject(BaseObject):
    KIND = "?"

    def __init__(self, core, app, object_id):
        super().__init__(core, app, object_id)
        self.sink = StatsSink()
        self.deliver_to_client = False
        self.mismatched = 0

    def document(self) -> dict:
        doc = self.sink.snapshot()
        doc.update({"object_id": self.object_id, "class": self.CLASS,
                    "deliver_to_client": self.deliver_to_client,
                    "mismatched": self.mismatched})
        return doc

    def consume(self, frame: MediaFrame) -> None:
        if frame.kind != self.KIND:
            self.mismatched += 1
            return
        self.sink.push(frame)
        if self.deliver_to_client:
            self.emit("media-frame", {
                "kind": frame.kind, "seq": frame.seq,
                "timestamp": frame.timestamp, "data": _b64(frame.data),
            })

    def op_set_attribute(self, args: dict) -> dict:
        if args.get("name") != "deliver_to_client":
            raise bad_request(f"unknown attribute {args.get('name')!r}")
        value = bool(args.get("value"))
        if value and not self.deliver_to_client:
            if not self.core.approve(self.app, "media-to-client", self.CLASS):
                raise ApiError(403, "media-to-client delivery denied")
        self.deliver_to_client = value
        return {"deliver_to_client": value}

    def op_stats(self, args: dict) -> dict:
        return self.document()


class SpeakerObject(MediaSinkObject):
    CLASS = "Speaker"
    KIND = "audio"


class DisplayObject(MediaSinkObject):
    CLASS = "Display"
    KIND = "video"


# Source class -> acceptable sink classes.
CONNECT_TABLE = {
    "Microphone": ("RtpTransport", "Speaker"),
    "Camera": ("RtpTransport", "Display"),
    "RtpTransport": ("Speaker", "Display"),
}


class PipelineObject(BaseObject):
    CLASS = "Pipeline"

    def __init__(self, core, app, object_id, source: BaseObject, sink: BaseObject):
        super().__init__(core, app, object_id)
        self.source = source
        self.sink = sink
        self._timer = None
        if isinstance(source, MediaSourceObject):
            self._timer = core.timeline.call_later(
                source.frame_interval(), self._tick)
        else:
            source.sinks.append(sink)

    def document(self) -> dict:
        return {"object_id": self.object_id, "class": self.CLASS,
                "source": self.source.object_id, "sink": self.sink.object_id}

    def _tick(self) -> None:
        with self.core.lock:
            if self.closed or self.source.closed or self.sink.closed:
                return
            if self.source.started:
                frame = self.source.next_frame()
                if isinstance(self.sink, RtpObject):
                    self.sink.send_frame(frame, self.source.codec())
                else:
                    self.sink.consume(frame)
            self._timer = self.core.timeline.call_later(
                self.source.frame_interval(), self._tick)

    def close(self) -> None:
        self.closed = True
        if self._timer is not None:
            self._timer.cancel()
        if isinstance(self.source, RtpObject) and self.sink in self.source.sinks:
            self.source.sinks.remove(self.sink)
