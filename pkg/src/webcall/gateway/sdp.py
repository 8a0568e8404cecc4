"""SDP <-> SessionDescriptor, for the one place SDP still exists.

Only the fields both models share survive the trip: connection address,
media port, and codec names (via the registry's payload-type table).
"""

from __future__ import annotations

from ..media.codecs import codec_by_name, codec_by_payload_type


class SdpError(ValueError):
    pass


def _decimal(s: str) -> bool:
    # str.isdigit alone admits unicode digits that int() then rejects
    return s.isascii() and s.isdigit()


def descriptor_to_sdp(desc: dict, session_id: int = 1, origin: str = "webcall") -> bytes:
    candidates = [c for c in desc.get("candidates", []) if c.get("kind") == "udp"]
    if not candidates:
        raise SdpError("descriptor has no udp candidate to advertise")
    best = max(candidates, key=lambda c: c.get("priority", 0))
    names = desc.get("codecs_preferred") or desc.get("codecs_supported") or []
    codecs = [codec_by_name(n) for n in desc.get("codecs_supported", [])]
    codecs = [c for c in codecs if c is not None]
    if not codecs:
        raise SdpError("descriptor carries no registry codec")
    preferred = [codec_by_name(n) for n in names if codec_by_name(n)]
    ordered = preferred + [c for c in codecs if c not in preferred]
    pts = " ".join(str(c.payload_type) for c in ordered)
    lines = [
        "v=0",
        f"o={origin} {session_id} {session_id} IN IP4 {best['address']}",
        "s=-",
        f"c=IN IP4 {best['address']}",
        "t=0 0",
        f"m=audio {best['port']} RTP/AVP {pts}",
    ]
    lines += [f"a=rtpmap:{c.payload_type} {c.name}/{c.clock_rate}" for c in ordered]
    return ("\r\n".join(lines) + "\r\n").encode()


def sdp_to_descriptor(blob: bytes) -> dict:
    try:
        text = blob.decode("utf-8", errors="strict")
    except UnicodeDecodeError as exc:
        raise SdpError(f"undecodable SDP: {exc}") from None
    address = None
    port = None
    pts: list[int] = []
    for raw in text.replace("\r\n", "\n").split("\n"):
        line = raw.strip()
        if line.startswith("c="):
            parts = line[2:].split()
            if len(parts) != 3 or parts[0] != "IN" or parts[1] != "IP4":
                raise SdpError(f"unsupported connection line {line!r}")
            address = parts[2]
        elif line.startswith("m=audio "):
            parts = line[2:].split()
            if len(parts) < 4 or parts[2] != "RTP/AVP":
                raise SdpError(f"unsupported media line {line!r}")
            if not _decimal(parts[1]):
                raise SdpError(f"bad media port in {line!r}")
            port = int(parts[1])
            pts = [int(p) for p in parts[3:] if _decimal(p)]
    if address is None or port is None:
        raise SdpError("SDP lacks a connection or audio media line")
    if not 1 <= port <= 65535:
        raise SdpError(f"media port {port} out of range")
    names = []
    for pt in pts:
        codec = codec_by_payload_type(pt)
        if codec is not None and codec.name not in names:
            names.append(codec.name)
    if not names:
        raise SdpError("no mutually known payload type in SDP")
    return {
        "candidates": [{"kind": "udp", "address": address, "port": port,
                        "priority": 200}],
        "codecs_supported": names,
        "codecs_preferred": names[:1],
    }
