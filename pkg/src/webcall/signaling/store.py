"""Durability backends: the core journals every state mutation through one.

State itself lives in the core; a store only has to persist the journal and
hand it back at startup. The file variant is append-only JSON lines.
"""

from __future__ import annotations

import json
import os
import threading


class MemoryStore:
    """Keeps nothing. The journal exists only while the process lives."""

    def append(self, entry: dict) -> None:
        pass

    def entries(self) -> list[dict]:
        return []

    def close(self) -> None:
        pass


class FileStore:
    """Append-only JSON-lines journal, replayed at startup."""

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        self._fh = open(path, "a", encoding="utf-8")

    def append(self, entry: dict) -> None:
        line = json.dumps(entry, separators=(",", ":"))
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def entries(self) -> list[dict]:
        out = []
        with self._lock:
            self._fh.flush()
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    out.append(json.loads(line))
                except ValueError:
                    continue  # torn final line after a crash is expected
        return out

    def close(self) -> None:
        with self._lock:
            self._fh.close()


def open_store(spec: str):
    """CLI store flag: "memory" or "file:PATH"."""
    if spec == "memory":
        return MemoryStore()
    if spec.startswith("file:"):
        return FileStore(spec[5:])
    raise ValueError(f"unknown store spec {spec!r}; use memory or file:PATH")
