"""Two interchangeable rendezvous clients.

DirectClient calls a SignalingCore in-process (deterministic tests, virtual
time). HttpClient speaks real HTTP/NDJSON to a running server. The SDK and
the scenario runner only see this shared surface.
"""

from __future__ import annotations

import requests

from ..errors import ApiError
from ..streamclient import DirectSubscription, HttpSubscription, Subscription
from .core import SignalingCore

__all__ = ["DirectClient", "DirectSubscription", "HttpClient",
           "HttpSubscription", "SignalingClient", "Subscription"]


class SignalingClient:
    """Shared surface; holds one user's bearer token after auth()."""

    token: str | None = None
    aor: str | None = None

    def auth(self, aor: str, secret: str) -> dict:
        raise NotImplementedError

    def register(self, aor, body) -> dict: raise NotImplementedError
    def update_contact(self, aor, cid, body) -> dict: raise NotImplementedError
    def delete_contact(self, aor, cid) -> dict: raise NotImplementedError
    def list_logins(self, offset=0, limit=20) -> dict: raise NotImplementedError
    def get_login(self, aor) -> dict: raise NotImplementedError
    def create_call(self) -> dict: raise NotImplementedError
    def get_call(self, call_id) -> dict: raise NotImplementedError
    def join_call(self, call_id, session) -> dict: raise NotImplementedError
    def leave_call(self, call_id, pid) -> dict: raise NotImplementedError
    def subscribe(self, path) -> Subscription: raise NotImplementedError
    def notify(self, path, body) -> dict: raise NotImplementedError
    def close(self) -> None: pass


class DirectClient(SignalingClient):
    def __init__(self, core: SignalingCore):
        self.core = core
        self._subs: list[DirectSubscription] = []

    def auth(self, aor, secret):
        out = self.core.auth(aor, secret)
        self.token, self.aor = out["token"], aor
        return out

    def register(self, aor, body):
        return self.core.register(self.token, aor, body)

    def update_contact(self, aor, cid, body):
        return self.core.update_contact(self.token, aor, cid, body)

    def delete_contact(self, aor, cid):
        return self.core.delete_contact(self.token, aor, cid)

    def list_logins(self, offset=0, limit=20):
        return self.core.list_logins(self.token, offset, limit)

    def get_login(self, aor):
        return self.core.get_login(self.token, aor)

    def create_call(self):
        return self.core.create_call(self.token)

    def get_call(self, call_id):
        return self.core.get_call(self.token, call_id)

    def join_call(self, call_id, session):
        return self.core.join_call(self.token, call_id, session)

    def leave_call(self, call_id, pid):
        return self.core.leave_call(self.token, call_id, pid)

    def subscribe(self, path):
        stream = self.core.subscribe(self.token, path)
        sub = DirectSubscription(stream, lambda: self.core.unsubscribe(stream))
        self._subs.append(sub)
        return sub

    def notify(self, path, body):
        return self.core.notify(self.token, path, body)

    def close(self):
        for sub in self._subs:
            sub.close()
        self._subs.clear()


class HttpClient(SignalingClient):
    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")
        self._session = requests.Session()
        self._subs: list[HttpSubscription] = []

    def _headers(self):
        return {"Authorization": f"Bearer {self.token}"} if self.token else {}

    def _call(self, method: str, path: str, body: dict | None = None,
              params: dict | None = None) -> dict:
        response = self._session.request(
            method, self.base_url + path, json=body, params=params,
            headers=self._headers(), timeout=30,
        )
        if response.status_code >= 400:
            try:
                err = response.json()["error"]
                raise ApiError(err["code"], err["message"])
            except (ValueError, KeyError):
                raise ApiError(response.status_code, response.text)
        return response.json() if response.content else {}

    def auth(self, aor, secret):
        out = self._call("POST", "/auth", {"aor": aor, "secret": secret})
        self.token, self.aor = out["token"], aor
        return out

    def register(self, aor, body):
        return self._call("POST", f"/login/{aor}", body)

    def update_contact(self, aor, cid, body):
        return self._call("PUT", f"/login/{aor}/{cid}", body)

    def delete_contact(self, aor, cid):
        return self._call("DELETE", f"/login/{aor}/{cid}")

    def list_logins(self, offset=0, limit=20):
        return self._call("GET", "/login", params={"offset": offset, "limit": limit})

    def get_login(self, aor):
        return self._call("GET", f"/login/{aor}")

    def create_call(self):
        return self._call("POST", "/call")

    def get_call(self, call_id):
        return self._call("GET", f"/call/{call_id}")

    def join_call(self, call_id, session):
        return self._call("POST", f"/call/{call_id}", {"session": session})

    def leave_call(self, call_id, pid):
        return self._call("DELETE", f"/call/{call_id}/{pid}")

    def subscribe(self, path):
        response = self._session.post(
            self.base_url + path, params={"command": "subscribe"},
            headers=self._headers(), stream=True, timeout=30,
        )
        if response.status_code >= 400:
            try:
                err = response.json()["error"]
                raise ApiError(err["code"], err["message"])
            except (ValueError, KeyError):
                raise ApiError(response.status_code, response.text)
        sub = HttpSubscription(response)
        self._subs.append(sub)
        return sub

    def notify(self, path, body):
        return self._call("POST", path, body, params={"command": "notify"})

    def close(self):
        for sub in self._subs:
            sub.close()
        self._subs.clear()
        self._session.close()
