"""Codec registry and offer/answer negotiation."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CodecDescriptor:
    name: str
    clock_rate: int
    payload_type: int


REGISTRY = (
    CodecDescriptor("pcm16", 8000, 96),
    CodecDescriptor("tone", 8000, 97),
    CodecDescriptor("pattern", 90000, 98),
)

_BY_NAME = {c.name: c for c in REGISTRY}
_BY_PT = {c.payload_type: c for c in REGISTRY}


def codec_by_name(name: str) -> CodecDescriptor | None:
    return _BY_NAME.get(name)


def codec_by_payload_type(pt: int) -> CodecDescriptor | None:
    return _BY_PT.get(pt)


def negotiate_codecs(offered: list[str], answered: list[str]) -> list[CodecDescriptor]:
    """Intersect two preference lists, keeping the offerer's order.

    Unknown names are ignored rather than rejected: a peer advertising a
    codec this build lacks simply cannot have it selected. An empty result
    means no media can flow.
    """
    answer_set = set(answered)
    out = []
    for name in offered:
        if name in answer_set and name in _BY_NAME and _BY_NAME[name] not in out:
            out.append(_BY_NAME[name])
    return out
