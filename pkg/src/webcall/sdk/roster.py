"""Contact-list model: last-received presence per address-of-record."""

from __future__ import annotations


class RosterModel:
    """Pure projection of contact-update traffic.

    entries maps aor -> the latest login document for that aor (or drops
    the aor once it goes offline). version bumps by exactly one per applied
    update so a widget can cheaply detect staleness.
    """

    def __init__(self):
        self.entries: dict[str, dict] = {}
        self.version = 0

    def apply(self, aor: str, snapshot: dict | None) -> bool:
        """Record the latest word on `aor`; None means offline."""
        if snapshot is None:
            if aor not in self.entries:
                return False
            del self.entries[aor]
        else:
            self.entries[aor] = snapshot
        self.version += 1
        return True

    def refresh(self, client, aor: str) -> bool:
        """Pull one aor's login document and apply it."""
        from ..errors import ApiError
        try:
            doc = client.get_login(aor)
        except ApiError as err:
            if err.code != 404:
                raise
            doc = None
        return self.apply(aor, doc)

    def refresh_all(self, client, page_size: int = 20) -> int:
        """Walk the paged login index and rebuild the whole roster."""
        offset, seen = 0, []
        while True:
            page = client.list_logins(offset=offset, limit=page_size)
            seen.extend(page["items"])
            offset += len(page["items"])
            if offset >= page["total"] or not page["items"]:
                break
        for aor in seen:
            self.refresh(client, aor)
        for gone in set(self.entries) - set(seen):
            self.apply(gone, None)
        return len(seen)

    def snapshot(self) -> dict:
        return {"version": self.version,
                "entries": {aor: dict(doc) for aor, doc in self.entries.items()}}
