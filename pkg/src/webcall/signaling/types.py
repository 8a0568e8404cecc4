"""Domain documents for the rendezvous service, with schema validation.

Everything crosses the wire as JSON, so these are validated plain dicts
wrapped in small constructors rather than a serialization framework.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import bad_request
from ..media.codecs import codec_by_name

CANDIDATE_KINDS = ("udp", "tcp")


def validate_candidate(doc: dict) -> dict:
    if not isinstance(doc, dict):
        raise bad_request("candidate must be an object")
    kind = doc.get("kind")
    if kind not in CANDIDATE_KINDS:
        raise bad_request(f"candidate kind must be one of {CANDIDATE_KINDS}")
    address = doc.get("address")
    if not isinstance(address, str) or not address:
        raise bad_request("candidate address must be a non-empty string")
    port = doc.get("port")
    if not isinstance(port, int) or not 1025 <= port <= 65535:
        raise bad_request("candidate port must be an integer in 1025..65535")
    priority = doc.get("priority", 0)
    if not isinstance(priority, int) or priority < 0:
        raise bad_request("candidate priority must be a non-negative integer")
    return {"kind": kind, "address": address, "port": port, "priority": priority}


def validate_candidates(docs, allow_empty=False) -> list[dict]:
    if not isinstance(docs, list):
        raise bad_request("candidates must be a list")
    if not docs and not allow_empty:
        raise bad_request("candidates must be non-empty")
    out = [validate_candidate(d) for d in docs]
    priorities = [c["priority"] for c in out]
    if len(set(priorities)) != len(priorities):
        raise bad_request("candidate priorities must be unique within one list")
    return out


def validate_session(doc: dict) -> dict:
    """SessionDescriptor: candidates + codec lists, JSON end to end."""
    if not isinstance(doc, dict):
        raise bad_request("session must be an object")
    candidates = validate_candidates(doc.get("candidates", []), allow_empty=True)
    supported = doc.get("codecs_supported", [])
    preferred = doc.get("codecs_preferred", [])
    if not isinstance(supported, list) or not all(isinstance(c, str) for c in supported):
        raise bad_request("codecs_supported must be a list of names")
    if not isinstance(preferred, list) or not all(isinstance(c, str) for c in preferred):
        raise bad_request("codecs_preferred must be a list of names")
    if not set(preferred) <= set(supported):
        raise bad_request("codecs_preferred must be a subset of codecs_supported")
    for name in supported:
        # Unknown codec names are allowed through (a peer may know more than
        # this build), but must at least be plausible tokens.
        if not name or codec_by_name(name) is None and not name.isidentifier():
            raise bad_request(f"codec name {name!r} is not a valid token")
    session = {
        "candidates": candidates,
        "codecs_supported": supported,
        "codecs_preferred": preferred,
    }
    if "media_stream_url" in doc and doc["media_stream_url"] is not None:
        if not isinstance(doc["media_stream_url"], str):
            raise bad_request("media_stream_url must be a string")
        session["media_stream_url"] = doc["media_stream_url"]
    return session


@dataclass
class ContactRecord:
    contact_id: str
    aor: str
    candidates: list
    presence: dict
    expires_at: float

    def document(self) -> dict:
        return {
            "contact_id": self.contact_id,
            "candidates": self.candidates,
            "presence": self.presence,
            "expires_at": self.expires_at,
        }


@dataclass
class ParticipantEntry:
    participant_id: str
    aor: str
    session: dict
    joined_at: float

    def document(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "aor": self.aor,
            "session": self.session,
            "joined_at": self.joined_at,
        }


@dataclass
class ConferenceResource:
    call_id: str
    created_by: str
    created_at: float
    participants: list[ParticipantEntry] = field(default_factory=list)
    invited: set = field(default_factory=set)
    next_pid: int = 1
    gc_handle: object = None

    def document(self) -> dict:
        return {
            "call_id": self.call_id,
            "created_at": self.created_at,
            "participants": [p.document() for p in self.participants],
        }
