"""Call control: one user agent driving signaling and the local adaptor.

The agent is a plain state machine with no threads of its own. API calls
(login, place_call, accept, ...) start work; pump() consumes whatever has
arrived on the signaling and adaptor event streams and advances staged
work. Embedders call pump() from their event loop; tests call it after
advancing a virtual timeline.
"""

from __future__ import annotations

from collections import deque

from ..errors import ApiError
from ..media.codecs import negotiate_codecs

STATES = ("idle", "registering", "online", "inviting", "invited",
          "joining", "in-call", "ended", "failed")

# online->inviting for the caller, online->invited for the callee; hangup
# and errors may strike from anywhere.
LEGAL_TRANSITIONS = frozenset(
    {("idle", "registering"), ("registering", "online"),
     ("online", "inviting"), ("online", "invited"),
     ("inviting", "joining"), ("invited", "joining"),
     ("joining", "in-call")}
    | {(s, "ended") for s in STATES if s not in ("ended", "failed")}
    | {(s, "failed") for s in STATES if s not in ("ended", "failed")}
)

AUDIO_CODECS = ("tone", "pcm16")


class CallError(RuntimeError):
    """The embedding application drove the agent out of order."""


class UserAgent:
    def __init__(self, aor: str, secret: str, signaling, adaptor=None,
                 reflector=None, incoming: str = "prompt",
                 codecs_supported=("tone", "pcm16"), codecs_preferred=("tone",)):
        self.aor = aor
        self.secret = secret
        self.signaling = signaling
        self.adaptor = adaptor
        self.reflector = reflector
        self.incoming = incoming  # "prompt" surfaces invited; "ignore" drops
        self.codecs_supported = list(codecs_supported)
        self.codecs_preferred = list(codecs_preferred)

        self._state = "idle"
        self.reason = None
        self.transitions: list[tuple[str, str]] = []
        self.contact_id = None
        self._registered = False

        self.peer = None
        self.call_id = None
        self.call_path = None
        self.pid = None
        self.invitation = None
        self.participants: list[dict] = []
        self.session_local = None
        self.session_remote = None
        self._peer_pid = None
        self._cancelled: set[str] = set()
        self._stage = None
        self._refresh_contact = False

        self._login_sub = None
        self._conf_sub = None
        self._adaptor_sub = None
        self._rtp = None
        self._ice = None
        self._mic = None
        self._spk = None
        self._pipes: list[str] = []

    # -- machine bookkeeping -------------------------------------------------

    @property
    def state(self) -> str:
        return self._state

    def _transition(self, new: str, reason=None) -> None:
        old = self._state
        if (old, new) not in LEGAL_TRANSITIONS:
            raise CallError(f"illegal transition {old} -> {new}")
        self._state = new
        self.reason = reason
        if new in ("ended", "failed"):
            self._stage = None
        self.transitions.append((old, new))

    def _require(self, *states) -> None:
        if self._state not in states:
            raise CallError(f"requires state in {states}, agent is {self._state}")

    def _silent_reset(self) -> None:
        """A finished call clears the deck; the session is online again."""
        self._state = "online"
        self.reason = None
        self.peer = self.call_id = self.call_path = self.pid = None
        self.invitation = None
        self.participants = []
        self.session_local = self.session_remote = None
        self._peer_pid = None
        self._stage = None

    # -- login ----------------------------------------------------------------

    def login(self):
        self._require("idle")
        self._transition("registering")
        try:
            self.signaling.auth(self.aor, self.secret)
        except ApiError:
            self._transition("failed", "auth")
            return self
        if self.adaptor is None:
            self._transition("failed", "install-hint")
            return self
        try:
            self.adaptor.auth(f"webcall:{self.aor}")
            self._adaptor_sub = self.adaptor.events()
            self._prepare_media()
        except ApiError as err:
            self._transition("failed",
                             "adaptor-denied" if err.code == 403 else "adaptor-error")
        except Exception:
            self._transition("failed", "install-hint")
        return self

    def _prepare_media(self) -> None:
        self._rtp = self.adaptor.create("RtpTransport", {"port": 0})["object_id"]
        params = {"components": [self._rtp]}
        if self.reflector is not None:
            params["reflector"] = list(self.reflector)
        self._ice = self.adaptor.create("IceTransport", params)["object_id"]

    def _ensure_media(self) -> None:
        if self._ice is not None:
            phase = self._ice_stats()["phase"]
            if phase in ("gathering", "gathered"):
                return
        self._teardown_media()
        self._prepare_media()
        self._refresh_contact = True

    def _ice_stats(self) -> dict:
        return self.adaptor.invoke(self._ice, "stats")

    def _local_session(self, stats: dict) -> dict:
        return {"candidates": stats["local_candidates"],
                "codecs_supported": self.codecs_supported,
                "codecs_preferred": self.codecs_preferred}

    # -- caller ----------------------------------------------------------------

    def place_call(self, callee: str):
        if self._state in ("ended", "failed") and self._registered:
            self._silent_reset()
        self._require("online")
        try:
            self.signaling.get_login(callee)
        except ApiError as err:
            if err.code == 404:
                self._transition("failed", "offline")  # and no call created
                return self
            raise
        self.peer = callee
        out = self.signaling.create_call()
        self.call_id = out["call_id"]
        self.call_path = out["call_path"]
        self._ensure_media()
        self._stage = "caller-start"
        self.pump()
        return self

    def _send_invite(self, stats: dict) -> None:
        self._maybe_refresh_contact(stats)
        session = self._local_session(stats)
        self.pid = self.signaling.join_call(self.call_id, session)["participant_id"]
        self.session_local = session
        self._conf_sub = self.signaling.subscribe(self.call_path)
        try:
            self.signaling.notify(f"/login/{self.peer}", {
                "type": "invitation",
                "conference": self.call_path,
                "return": f"/login/{self.aor}",
            })
        except ApiError:
            # callee dropped off between the probe and the invite
            self._leave_quietly()
            self._stage = None
            self._transition("failed", "offline")
            return
        self._stage = None
        self._transition("inviting")

    def _maybe_refresh_contact(self, stats: dict) -> None:
        if self._refresh_contact and self.contact_id:
            self.signaling.update_contact(self.aor, self.contact_id, {
                "candidates": stats["local_candidates"]})
            self._refresh_contact = False

    # -- callee ----------------------------------------------------------------

    def accept(self):
        self._require("invited")
        if self.invitation["conference"] in self._cancelled:
            self._transition("ended", "cancelled")
            return self
        self._ensure_media()
        self._stage = "callee-start"
        self.pump()
        return self

    def reject(self):
        self._require("invited")
        self._decline("rejected")
        return self

    def _decline(self, reason: str) -> None:
        ret = (self.invitation or {}).get("return")
        if ret:
            try:
                self.signaling.notify(ret, {
                    "type": "cancellation",
                    "conference": self.invitation["conference"],
                    "reason": reason,
                })
            except ApiError:
                pass  # caller is already gone; nothing to tell
        self._transition("ended", reason)

    def _join_as_callee(self, stats: dict) -> None:
        try:
            self._conf_sub = self.signaling.subscribe(self.call_path)
            doc = self.signaling.get_call(self.call_id)
        except ApiError:
            self._stage = None
            self._transition("ended", "cancelled")
            return
        self.participants = doc["participants"]
        peer_entry = next((p for p in self.participants if p["aor"] != self.aor), None)
        if peer_entry is None:
            self._stage = None
            self._transition("ended", "cancelled")  # caller already left
            return
        self.session_remote = peer_entry["session"]
        self._peer_pid = peer_entry["participant_id"]
        self._maybe_refresh_contact(stats)
        session = self._local_session(stats)
        try:
            self.pid = self.signaling.join_call(self.call_id, session)["participant_id"]
        except ApiError:
            self._stage = None
            self._transition("ended", "cancelled")
            return
        self.session_local = session
        self._stage = None
        self._transition("joining")
        self._start_checks()

    # -- media path --------------------------------------------------------------

    def _start_checks(self) -> None:
        remote = [c for c in self.session_remote["candidates"] if c["kind"] == "udp"]
        try:
            self.adaptor.invoke(self._ice, "ice_run", {"remote": remote})
        except ApiError:
            self._teardown_media()
            self._transition("failed", "no-path")

    def _select_codec(self) -> str | None:
        sessions = {self.pid: self.session_local,
                    self._peer_pid: self.session_remote}
        offerer = min(sessions)  # both sides compute the same offerer
        offer, answer = sessions[offerer], sessions[max(sessions)]
        offered = offer["codecs_preferred"] or offer["codecs_supported"]
        chosen = negotiate_codecs(offered, answer["codecs_supported"])
        return chosen[0].name if chosen else None

    def _wire_media(self, stats: dict) -> None:
        codec = self._select_codec()
        if codec not in AUDIO_CODECS:
            self._teardown_media()
            self._transition("failed", "no-codec")
            return
        remote = stats["selected_pair"]["remote"]
        self.adaptor.invoke(self._rtp, "set_remote",
                            {"to": [remote["address"], remote["port"]]})
        self._mic = self.adaptor.create("Microphone", {"codec": codec})["object_id"]
        self._spk = self.adaptor.create("Speaker", {})["object_id"]
        self._pipes = [
            self.adaptor.invoke(self._mic, "connect", {"sink": self._rtp})["pipeline"],
            self.adaptor.invoke(self._rtp, "connect", {"sink": self._spk})["pipeline"],
        ]
        self._transition("in-call")

    def _teardown_media(self) -> None:
        doomed = [*self._pipes, self._mic, self._spk, self._ice, self._rtp]
        self._pipes = []
        self._mic = self._spk = self._ice = self._rtp = None
        if self.adaptor is None:
            return
        for oid in doomed:
            if oid is None:
                continue
            try:
                self.adaptor.close_object(oid)
            except ApiError:
                pass  # already swept with a composite parent

    # -- teardown ------------------------------------------------------------------

    def hangup(self):
        if self._state in ("in-call", "joining"):
            self._leave_quietly()
            self._teardown_media()
            self._transition("ended", "hangup")
        elif self._state == "inviting":
            self._leave_quietly()
            if self.peer:
                try:
                    self.signaling.notify(f"/login/{self.peer}", {
                        "type": "cancellation",
                        "conference": self.call_path,
                        "reason": "cancelled",
                    })
                except ApiError:
                    pass
            self._teardown_media()
            self._transition("ended", "cancelled")
        elif self._state == "invited":
            self._decline("rejected")
        return self

    def _leave_quietly(self) -> None:
        if self.pid and self.call_id:
            try:
                self.signaling.leave_call(self.call_id, self.pid)
            except ApiError:
                pass
        self.pid = None
        if self._conf_sub is not None:
            self._conf_sub.close()
            self._conf_sub = None

    def close(self) -> None:
        if self._state not in ("ended", "failed", "idle"):
            try:
                self.hangup()
            except CallError:
                pass
        self._teardown_media()
        for sub in (self._login_sub, self._conf_sub, self._adaptor_sub):
            if sub is not None:
                sub.close()
        self._login_sub = self._conf_sub = self._adaptor_sub = None

    # -- event pump -------------------------------------------------------------------

    def pump(self):
        # staged work first: an invite headed out must not be preempted by
        # one coming in (that is what makes crossed calls a real glare)
        self._progress()
        if self._login_sub is not None:
            for ev in self._login_sub.drain():
                self._on_login_event(ev)
        if self._conf_sub is not None:
            for ev in self._conf_sub.drain():
                self._on_conf_event(ev)
        if self._adaptor_sub is not None:
            self._adaptor_sub.drain()  # merged inbox; nothing keyed off it yet
        return self

    def _progress(self) -> None:
        if self._state == "registering" and self._ice is not None:
            stats = self._ice_stats()
            if stats["phase"] == "gathered":
                self._finish_login(stats)
        elif self._stage == "caller-start" and self._state == "online":
            stats = self._ice_stats()
            if stats["phase"] == "gathered":
                self._send_invite(stats)
        elif self._stage == "callee-start" and self._state == "invited":
            stats = self._ice_stats()
            if stats["phase"] == "gathered":
                self._join_as_callee(stats)
        elif self._state == "joining" and self._ice is not None:
            stats = self._ice_stats()
            if stats["phase"] == "connected":
                self._wire_media(stats)
            elif stats["phase"] == "failed":
                self._teardown_media()
                self._transition("failed", "no-path")  # membership stands

    def _finish_login(self, stats: dict) -> None:
        try:
            out = self.signaling.register(self.aor, {
                "candidates": stats["local_candidates"],
                "presence": {"status": "online"},
            })
        except ApiError:
            self._transition("failed", "register")
            return
        self.contact_id = out["contact_id"]
        self._login_sub = self.signaling.subscribe(f"/login/{self.aor}")
        self._registered = True
        self._transition("online")

    # -- inbound events ------------------------------------------------------------------

    def _on_login_event(self, ev: dict) -> None:
        payload = ev.get("payload", {})
        if ev["type"] == "invitation":
            self._on_invitation(payload)
        elif ev["type"] == "cancellation":
            self._on_cancellation(payload)

    def _on_invitation(self, payload: dict) -> None:
        conference = payload.get("conference")
        if self.incoming == "ignore" or not conference:
            return
        if self._state in ("ended", "failed") and self._registered:
            self._silent_reset()
        if self._state == "online":
            self._become_invited(payload)
        elif self._state == "inviting" and payload.get("from") == self.peer:
            self._resolve_glare(payload)
        elif conference != self.call_path:
            self._send_busy(payload)

    def _become_invited(self, payload: dict) -> None:
        self._stage = None  # a staged outbound call folds to the incoming one
        self.invitation = payload
        self.peer = payload.get("from")
        self.call_path = payload["conference"]
        self.call_id = self.call_path.rsplit("/", 1)[-1]
        self._transition("invited")

    def _resolve_glare(self, payload: dict) -> None:
        theirs = payload["conference"].rsplit("/", 1)[-1]
        if theirs >= self.call_id:
            return  # our call has the smaller id; they will fold
        self._leave_quietly()
        self._transition("ended", "glare")
        self._silent_reset()
        self._become_invited(payload)
        self.accept()

    def _send_busy(self, payload: dict) -> None:
        ret = payload.get("return")
        if ret:
            try:
                self.signaling.notify(ret, {
                    "type": "cancellation",
                    "conference": payload["conference"],
                    "reason": "busy",
                })
            except ApiError:
                pass

    def _on_cancellation(self, payload: dict) -> None:
        conference = payload.get("conference")
        if conference:
            self._cancelled.add(conference)
        reason = payload.get("reason", "cancelled")
        if (self._state == "invited" and self.invitation
                and self.invitation["conference"] == conference):
            self._transition("ended", "cancelled")
        elif conference == self.call_path and self._state in (
                "inviting", "joining", "in-call"):
            self._leave_quietly()
            self._teardown_media()
            self._transition("ended", reason)

    def _on_conf_event(self, ev: dict) -> None:
        if ev["type"] != "membership-change":
            return
        payload = ev["payload"]
        self.participants = payload["participants"]
        if (payload["action"] == "join" and payload["aor"] != self.aor
                and self._state == "inviting"):
            entry = next(p for p in self.participants
                         if p["participant_id"] == payload["participant_id"])
            self.session_remote = entry["session"]
            self._peer_pid = payload["participant_id"]
            self._transition("joining")
            self._start_checks()
        elif (payload["action"] == "leave" and payload["aor"] == self.peer
                and self._state in ("joining", "in-call")):
            self._leave_quietly()
            self._teardown_media()
            self._transition("ended", "peer-hangup")


class ClickToCall:
    """One-shot caller widget logic: dials a target, never answers."""

    LABELS = {
        "idle": "call",
        "registering": "connecting",
        "online": "call",
        "inviting": "calling",
        "joining": "connecting media",
        "in-call": "in call",
        "ended": "call ended",
        "failed": "call failed",
    }
    HISTORY_SIZE = 10

    def __init__(self, agent: UserAgent, target: str):
        agent.incoming = "ignore"  # meant to dial one number, not receive
        self.agent = agent
        self.target = target
        self.history: deque = deque(maxlen=self.HISTORY_SIZE)

    def click(self, target: str | None = None):
        aim = target or self.target
        self.history.append(aim)
        self.agent.place_call(aim)
        return self

    @property
    def progress(self) -> str:
        return self.LABELS.get(self.agent.state, self.agent.state)
