from .approval import (
    AllowAllPolicy,
    ApprovalPolicy,
    DenyAllPolicy,
    FilePolicy,
    PromptPolicy,
    ScriptedPolicy,
    open_policy,
)
from .client import AdaptorClient, DirectAdaptor, HttpAdaptor
from .core import AdaptorCore
from .network import RealNetwork
from .server import AdaptorServer

__all__ = [
    "AdaptorClient", "AdaptorCore", "AdaptorServer", "AllowAllPolicy",
    "ApprovalPolicy", "DenyAllPolicy", "DirectAdaptor", "FilePolicy",
    "HttpAdaptor", "PromptPolicy", "RealNetwork", "ScriptedPolicy",
    "open_policy",
]
