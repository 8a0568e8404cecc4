"""Minimal SIP message layer: one datagram in, one SipMessage out.

Subset by design: UDP only, methods REGISTER / INVITE / ACK / BYE / CANCEL.
The parser must survive arbitrary bytes (fuzzed heavily in tests): every
malformed input raises SipParseError, never anything else.
"""

from __future__ import annotations

from dataclasses import dataclass, field

METHODS = ("REGISTER", "INVITE", "ACK", "BYE", "CANCEL")
MANDATORY = ("Via", "From", "To", "Call-ID", "CSeq")
SIP_VERSION = "SIP/2.0"


def _decimal(s: str) -> bool:
    # str.isdigit alone admits unicode digits that int() then rejects
    return s.isascii() and s.isdigit()


class SipParseError(ValueError):
    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind


class Headers:
    """Ordered multimap with case-insensitive names, original case kept."""

    def __init__(self, items=()):
        self._items: list[tuple[str, str]] = [(n, v) for n, v in items]

    def add(self, name: str, value: str) -> None:
        self._items.append((name, str(value)))

    def get(self, name: str, default=None):
        low = name.lower()
        for n, v in self._items:
            if n.lower() == low:
                return v
        return default

    def get_all(self, name: str) -> list[str]:
        low = name.lower()
        return [v for n, v in self._items if n.lower() == low]

    def replace(self, name: str, value: str) -> None:
        low = name.lower()
        kept = [(n, v) for n, v in self._items if n.lower() != low]
        self._items = kept
        self.add(name, value)

    def remove(self, name: str) -> None:
        low = name.lower()
        self._items = [(n, v) for n, v in self._items if n.lower() != low]

    def items(self) -> list[tuple[str, str]]:
        return list(self._items)

    def __contains__(self, name: str) -> bool:
        return self.get(name) is not None

    def __eq__(self, other):
        return isinstance(other, Headers) and self._items == other._items


@dataclass
class SipMessage:
    kind: str                      # "request" | "response"
    method: str | None = None
    uri: str | None = None
    status: int | None = None
    reason: str | None = None
    headers: Headers = field(default_factory=Headers)
    body: bytes = b""

    @property
    def cseq(self) -> tuple[int, str]:
        raw = (self.headers.get("CSeq") or "").split(None, 1)
        if len(raw) != 2 or not _decimal(raw[0]):
            raise SipParseError("cseq", f"unparseable CSeq {self.headers.get('CSeq')!r}")
        return int(raw[0]), raw[1].strip()

    def via_branch(self) -> str | None:
        via = self.headers.get("Via") or ""
        for param in via.split(";")[1:]:
            key, _, value = param.strip().partition("=")
            if key.lower() == "branch":
                return value
        return None

    def tag(self, header: str) -> str | None:
        value = self.headers.get(header) or ""
        for param in value.split(";")[1:]:
            key, _, v = param.strip().partition("=")
            if key.lower() == "tag":
                return v
        return None

    def uri_of(self, header: str) -> str:
        """Bare URI from a From/To/Contact style value."""
        value = (self.headers.get(header) or "").split(";")[0].strip()
        if "<" in value:
            value = value[value.index("<") + 1:]
            value = value.split(">")[0]
        return value.strip()


def parse(data: bytes) -> SipMessage:
    if not isinstance(data, (bytes, bytearray)):
        raise SipParseError("input", "datagram must be bytes")
    try:
        text = bytes(data).decode("latin-1")
    except Exception:  # pragma: no cover - latin-1 cannot fail, belt anyway
        raise SipParseError("input", "undecodable datagram") from None
    head, sep, rest = text.partition("\r\n\r\n")
    if not sep:
        raise SipParseError("framing", "missing header terminator")
    lines = head.split("\r\n")
    msg = _parse_start_line(lines[0])
    _parse_headers(lines[1:], msg.headers)
    for name in MANDATORY:
        if name not in msg.headers:
            raise SipParseError("header", f"missing mandatory {name}")
    if msg.kind == "request" and msg.method in ("REGISTER", "INVITE"):
        if "Contact" not in msg.headers:
            raise SipParseError("header", f"{msg.method} requires Contact")
    msg.cseq  # validates
    body = rest.encode("latin-1")
    declared = msg.headers.get("Content-Length")
    if declared is not None:
        if not _decimal(declared.strip()):
            raise SipParseError("content-length", f"not a number: {declared!r}")
        if int(declared.strip()) != len(body):
            raise SipParseError(
                "content-length",
                f"declared {declared.strip()}, got {len(body)} bytes")
    msg.body = body
    return msg


def _parse_start_line(line: str) -> SipMessage:
    parts = line.split(" ", 2)
    if len(parts) == 3 and parts[0] == SIP_VERSION:
        if not _decimal(parts[1]) or not 100 <= int(parts[1]) <= 699:
            raise SipParseError("start-line", f"bad status {parts[1]!r}")
        return SipMessage(kind="response", status=int(parts[1]), reason=parts[2])
    if len(parts) == 3 and parts[2] == SIP_VERSION:
        method = parts[0]
        if method not in METHODS:
            raise SipParseError("start-line", f"unsupported method {method!r}")
        if not parts[1]:
            raise SipParseError("start-line", "empty request URI")
        return SipMessage(kind="request", method=method, uri=parts[1])
    raise SipParseError("start-line", f"unrecognized start line {line!r}")


def _parse_headers(lines: list[str], headers: Headers) -> None:
    current: list[str] | None = None
    for line in lines:
        if line.startswith((" ", "\t")):  # folded continuation
            if current is None:
                raise SipParseError("header", "continuation before first header")
            current[1] = current[1] + " " + line.strip()
            continue
        if current is not None:
            headers.add(current[0], current[1])
        name, sep, value = line.partition(":")
        if not sep or not name.strip() or name != name.strip() or " " in name:
            raise SipParseError("header", f"malformed header line {line!r}")
        current = [name, value.strip()]
    if current is not None:
        headers.add(current[0], current[1])


def serialize(msg: SipMessage) -> bytes:
    if msg.kind == "request":
        start = f"{msg.method} {msg.uri} {SIP_VERSION}"
    else:
        start = f"{SIP_VERSION} {msg.status} {msg.reason}"
    out = [start]
    for name, value in msg.headers.items():
        if name.lower() == "content-length":
            continue  # always recomputed below
        out.append(f"{name}: {value}")
    out.append(f"Content-Length: {len(msg.body)}")
    return ("\r\n".join(out) + "\r\n\r\n").encode("latin-1") + msg.body


def request(method: str, uri: str, headers: list[tuple[str, str]],
            body: bytes = b"") -> SipMessage:
    msg = SipMessage(kind="request", method=method, uri=uri, body=body)
    for name, value in headers:
        msg.headers.add(name, value)
    return msg


def response_to(req: SipMessage, status: int, reason: str,
                extra: list[tuple[str, str]] = (), body: bytes = b"",
                to_tag: str | None = None) -> SipMessage:
    """Response echoing the transaction-identifying headers of `req`."""
    msg = SipMessage(kind="response", status=status, reason=reason, body=body)
    for name in ("Via", "From", "To", "Call-ID", "CSeq"):
        value = req.headers.get(name)
        if name == "To" and to_tag and ";tag=" not in (value or ""):
            value = f"{value};tag={to_tag}"
        msg.headers.add(name, value or "")
    for name, value in extra:
        msg.headers.add(name, value)
    return msg
