from .client import DirectClient, HttpClient, SignalingClient, Subscription
from .core import SignalingCore
from .server import SignalingServer
from .store import FileStore, MemoryStore, open_store

__all__ = [
    "DirectClient",
    "FileStore",
    "HttpClient",
    "MemoryStore",
    "SignalingClient",
    "SignalingCore",
    "SignalingServer",
    "Subscription",
    "open_store",
]
