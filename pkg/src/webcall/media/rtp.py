"""RTP fixed-header packetization and a minimal RTCP sender report.

Header layout (12 bytes, network byte order):

     0                   1                   2                   3
     0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
    +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
    |V=2|P|X|  CC   |M|     PT      |       sequence number         |
    +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
    |                           timestamp                           |
    +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
    |           synchronization source (SSRC) identifier           |
    +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+

No padding, extensions, or CSRC lists: those bits are always zero here and
rejected as unsupported on parse only when the version is wrong.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

HEADER_LEN = 12
VERSION = 2
SEQ_MOD = 1 << 16
TS_MOD = 1 << 32

_HEADER = struct.Struct(">BBHII")


class RtpError(ValueError):
    pass


@dataclass
class RtpPacket:
    payload_type: int
    seq: int
    timestamp: int
    ssrc: int
    payload: bytes = b""
    marker: bool = False

    def __post_init__(self):
        if not 0 <= self.payload_type <= 127:
            raise RtpError(f"payload type {self.payload_type} out of range")
        self.seq %= SEQ_MOD
        self.timestamp %= TS_MOD
        self.ssrc %= TS_MOD

    def serialize(self) -> bytes:
        b0 = VERSION << 6
        b1 = (0x80 if self.marker else 0) | self.payload_type
        return _HEADER.pack(b0, b1, self.seq, self.timestamp, self.ssrc) + self.payload

    @classmethod
    def parse(cls, data: bytes) -> "RtpPacket":
        if len(data) < HEADER_LEN:
            raise RtpError(f"datagram too short for RTP header: {len(data)} bytes")
        b0, b1, seq, timestamp, ssrc = _HEADER.unpack_from(data)
        if b0 >> 6 != VERSION:
            raise RtpError(f"unsupported RTP version {b0 >> 6}")
        return cls(
            payload_type=b1 & 0x7F,
            seq=seq,
            timestamp=timestamp,
            ssrc=ssrc,
            payload=data[HEADER_LEN:],
            marker=bool(b1 & 0x80),
        )


# RTCP SR: header word, SSRC, NTP (2 words), RTP timestamp, packet count,
# octet count. Report blocks are never attached (reception reports are out
# of scope), so length is fixed at 6 32-bit words after the header word.
_SR = struct.Struct(">BBHIIIIII")
RTCP_SR_TYPE = 200
SR_LEN = _SR.size


@dataclass
class RtcpSenderReport:
    ssrc: int
    ntp_seconds: int
    ntp_fraction: int
    rtp_timestamp: int
    packet_count: int
    octet_count: int = field(default=0)

    def serialize(self) -> bytes:
        return _SR.pack(
            VERSION << 6,
            RTCP_SR_TYPE,
            (SR_LEN // 4) - 1,
            self.ssrc % TS_MOD,
            self.ntp_seconds % TS_MOD,
            self.ntp_fraction % TS_MOD,
            self.rtp_timestamp % TS_MOD,
            self.packet_count % TS_MOD,
            self.octet_count % TS_MOD,
        )

    @classmethod
    def parse(cls, data: bytes) -> "RtcpSenderReport":
        if len(data) < SR_LEN:
            raise RtpError(f"datagram too short for RTCP SR: {len(data)} bytes")
        b0, ptype, _length, ssrc, ntp_s, ntp_f, rtp_ts, pkts, octets = _SR.unpack_from(data)
        if b0 >> 6 != VERSION:
            raise RtpError(f"unsupported RTCP version {b0 >> 6}")
        if ptype != RTCP_SR_TYPE:
            raise RtpError(f"not a sender report: packet type {ptype}")
        return cls(ssrc, ntp_s, ntp_f, rtp_ts, pkts, octets)
