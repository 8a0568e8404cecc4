"""In-process and HTTP clients for the adaptor API, one shared surface."""

from __future__ import annotations

import requests

from ..streamclient import DirectSubscription, HttpSubscription, Subscription, raise_for_error
from .core import AdaptorCore


class AdaptorClient:
    token: str | None = None

    def auth(self, app_id: str, prior_token: str | None = None) -> dict:
        raise NotImplementedError

    def create(self, cls: str, params: dict | None = None) -> dict: raise NotImplementedError
    def invoke(self, object_id: str, method: str, args: dict | None = None) -> dict:
        raise NotImplementedError
    def close_object(self, object_id: str) -> dict: raise NotImplementedError
    def list_objects(self) -> dict: raise NotImplementedError
    def events(self) -> Subscription: raise NotImplementedError
    def close(self) -> None: pass


class DirectAdaptor(AdaptorClient):
    def __init__(self, core: AdaptorCore):
        self.core = core
        self._subs: list[Subscription] = []

    def auth(self, app_id, prior_token=None):
        out = self.core.authenticate_app(app_id, prior_token)
        self.token = out["token"]
        return out

    def create(self, cls, params=None):
        return self.core.create_object(self.token, cls, params)

    def invoke(self, object_id, method, args=None):
        return self.core.invoke(self.token, object_id, method, args)

    def close_object(self, object_id):
        return self.core.close_object(self.token, object_id)

    def list_objects(self):
        return self.core.list_objects(self.token)

    def events(self):
        stream = self.core.subscribe_events(self.token)
        sub = DirectSubscription(stream, lambda: self.core.hub.unsubscribe(stream))
        self._subs.append(sub)
        return sub

    def close(self):
        for sub in self._subs:
            sub.close()
        self._subs.clear()


class HttpAdaptor(AdaptorClient):
    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")
        self._session = requests.Session()
        self._subs: list[Subscription] = []

    def _headers(self):
        return {"Authorization": f"Bearer {self.token}"} if self.token else {}

    def _call(self, method, path, body=None, params=None):
        response = self._session.request(
            method, self.base_url + path, json=body, params=params,
            headers=self._headers(), timeout=30,
        )
        raise_for_error(response)
        return response.json() if response.content else {}

    def auth(self, app_id, prior_token=None):
        body = {"app_id": app_id}
        if prior_token:
            body["prior_token"] = prior_token
        out = self._call("POST", "/auth", body)
        self.token = out["token"]
        return out

    def create(self, cls, params=None):
        return self._call("POST", "/objects", {"class": cls, "params": params or {}})

    def invoke(self, object_id, method, args=None):
        return self._call("POST", f"/objects/{object_id}/{method}", args or {})

    def close_object(self, object_id):
        return self._call("DELETE", f"/objects/{object_id}")

    def list_objects(self):
        return self._call("GET", "/objects")

    def events(self):
        response = self._session.get(
            self.base_url + "/events", params={"token": self.token},
            stream=True, timeout=30,
        )
        raise_for_error(response)
        sub = HttpSubscription(response)
        self._subs.append(sub)
        return sub

    def close(self):
        for sub in self._subs:
            sub.close()
        self._subs.clear()
        self._session.close()
