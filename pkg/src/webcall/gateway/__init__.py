"""SIP gateway: REST signaling on one side, RFC 3261 subset on the other."""

from .core import GATEWAY_SECRET, GatewayCore
from .dialog import MAX_ATTEMPTS, RETRANSMIT_BASE, TIMEOUT_BUDGET, DialogState, Transaction
from .sdp import SdpError, descriptor_to_sdp, sdp_to_descriptor
from .server import GatewayServer
from .sip import (
    METHODS,
    SipMessage,
    SipParseError,
    parse,
    request,
    response_to,
    serialize,
)

__all__ = [
    "GATEWAY_SECRET",
    "GatewayCore",
    "GatewayServer",
    "DialogState",
    "MAX_ATTEMPTS",
    "METHODS",
    "RETRANSMIT_BASE",
    "TIMEOUT_BUDGET",
    "Transaction",
    "SdpError",
    "SipMessage",
    "SipParseError",
    "descriptor_to_sdp",
    "parse",
    "request",
    "response_to",
    "sdp_to_descriptor",
    "serialize",
]
