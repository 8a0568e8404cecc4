"""Call-control SDK consumed by the CLI harness and the web widget."""

from .calls import AUDIO_CODECS, CallError, ClickToCall, LEGAL_TRANSITIONS, STATES, UserAgent
from .roster import RosterModel

__all__ = [
    "AUDIO_CODECS",
    "CallError",
    "ClickToCall",
    "LEGAL_TRANSITIONS",
    "RosterModel",
    "STATES",
    "UserAgent",
]
