"""The REST<->SIP bridge.

Two jobs, mirroring the two call directions:

- Enrolled REST users are announced to a SIP registrar (REGISTER with the
  gateway's public address as Contact); incoming INVITEs for them become
  REST conferences plus an invitation notify, and the callee's join comes
  back as the 200/SDP answer.
- Proxied SIP users are registered as contacts on the REST signaling
  server; an invitation notify aimed at one becomes an outgoing INVITE,
  and the SIP answer's SDP is injected into the conference as the proxy's
  ParticipantEntry.

Media never touches the gateway; only signaling is translated.
"""

from __future__ import annotations

import random
import threading

from ..errors import ApiError
from . import sip
from .dialog import DialogState, Transaction
from .sdp import SdpError, descriptor_to_sdp, sdp_to_descriptor

GATEWAY_SECRET = "sip-gateway"


def _aor_of(uri: str) -> str:
    bare = uri.strip()
    if bare.lower().startswith("sip:"):
        bare = bare[4:]
    return bare.split(";")[0]


class GatewayCore:
    def __init__(self, timeline, endpoint, rest_factory, registrar,
                 public_ip: str | None = None, rng: random.Random | None = None):
        self.timeline = timeline
        self.endpoint = endpoint
        self.rest_factory = rest_factory
        self.registrar = (registrar[0], registrar[1])
        self.public_ip = public_ip or endpoint.local_addr[0]
        self.public_port = endpoint.local_addr[1]
        self.rng = rng or random.Random()
        self.lock = threading.RLock()
        self.malformed = 0
        self.register_results: dict[str, int] = {}
        self._users: dict[str, dict] = {}      # REST users enrolled toward SIP
        self._proxies: dict[str, dict] = {}    # SIP users represented on REST
        self._txns: dict[str, dict] = {}       # via-branch -> transaction ctx
        self._calls: dict[str, dict] = {}      # sip Call-ID -> call ctx
        self.closed = False
        endpoint.set_receiver(self.on_datagram)

    # -- small helpers -------------------------------------------------------

    def _hex(self, bits: int = 48) -> str:
        return f"{self.rng.getrandbits(bits):0{bits // 4}x}"

    def _branch(self) -> str:
        return "z9hG4bK" + self._hex()

    def _via(self, branch: str) -> str:
        return f"SIP/2.0/UDP {self.public_ip}:{self.public_port};branch={branch}"

    def _contact(self) -> str:
        return f"<sip:gw@{self.public_ip}:{self.public_port}>"

    def _send(self, to, msg: sip.SipMessage) -> None:
        if not self.closed:
            self.endpoint.send(to, sip.serialize(msg))

    def close(self) -> None:
        with self.lock:
            self.closed = True
            for entry in self._txns.values():
                entry["txn"].complete()
            self._txns.clear()
            for ctx in list(self._calls.values()):
                self._drop_call(ctx)
            for proxy in self._proxies.values():
                proxy["sub"].close()
                proxy["client"].close()
            self._proxies.clear()
            self.endpoint.close()

    # -- REST users announced to the SIP registrar ------------------------------

    def register_user(self, aor: str, expires: int = 3600, done=None) -> str:
        """REGISTER `aor` at the configured registrar; done({"status": n})."""
        with self.lock:
            branch = self._branch()
            user = aor.split("@")[0]
            msg = sip.request("REGISTER", f"sip:{aor.split('@', 1)[1]}", [
                ("Via", self._via(branch)),
                ("Max-Forwards", "70"),
                ("From", f"<sip:{aor}>;tag={self._hex()}"),
                ("To", f"<sip:{aor}>"),
                ("Call-ID", f"{self._hex(64)}@{self.public_ip}"),
                ("CSeq", "1 REGISTER"),
                ("Contact", f"<sip:{user}@{self.public_ip}:{self.public_port}>"),
                ("Expires", str(int(expires))),
            ])
            self._users[aor] = {"registered": False, "expires": expires}
            wire = sip.serialize(msg)

            def on_timeout():
                with self.lock:
                    self._txns.pop(branch, None)
                    self._finish_register(aor, 504, done)

            txn = Transaction(self.timeline, branch, wire,
                              lambda data: self.endpoint.send(self.registrar, data),
                              on_timeout)
            self._txns[branch] = {"kind": "register", "txn": txn,
                                  "aor": aor, "done": done}
            return branch

    def _finish_register(self, aor: str, status: int, done) -> None:
        self.register_results[aor] = status
        if aor in self._users:
            self._users[aor]["registered"] = status == 200
        if done is not None:
            done({"status": status})

    # -- SIP users represented on the REST server --------------------------------

    def proxy_sip_user(self, sip_aor: str) -> None:
        client = self.rest_factory()
        client.auth(sip_aor, GATEWAY_SECRET)
        out = client.register(sip_aor, {
            "candidates": [{"kind": "udp", "address": self.public_ip,
                            "port": self.public_port, "priority": 0}],
            "presence": {"via": "sip-gateway"},
        })
        sub = client.subscribe(f"/login/{sip_aor}")
        with self.lock:
            self._proxies[sip_aor] = {"client": client, "sub": sub,
                                      "contact_id": out["contact_id"]}

    # -- event pump ---------------------------------------------------------------

    def pump(self) -> None:
        with self.lock:
            for sip_aor, proxy in list(self._proxies.items()):
                for ev in proxy["sub"].drain():
                    self._on_proxy_login_event(sip_aor, proxy, ev)
            for ctx in list(self._calls.values()):
                for name in ("conf_sub", "login_sub"):
                    stream = ctx.get(name)
                    if stream is None:
                        continue
                    for ev in stream.drain():
                        self._on_call_event(ctx, name, ev)

    def _on_proxy_login_event(self, sip_aor: str, proxy: dict, ev: dict) -> None:
        payload = ev.get("payload", {})
        if ev["type"] == "invitation":
            self._start_outbound(sip_aor, proxy, payload)
        elif ev["type"] == "cancellation":
            for ctx in list(self._calls.values()):
                if (ctx["kind"] == "out"
                        and ctx["conference"] == payload.get("conference")):
                    self._cancel_outbound(ctx)

    # -- outbound: REST invitation -> INVITE ---------------------------------------

    def _start_outbound(self, sip_aor: str, proxy: dict, payload: dict) -> None:
        conference = payload.get("conference")
        ret = payload.get("return")
        client = proxy["client"]
        rest_call_id = conference.rsplit("/", 1)[-1]
        try:
            conf_sub = client.subscribe(conference)
            doc = client.get_call(rest_call_id)
        except ApiError:
            return  # cancelled before we ever looked
        caller = payload.get("from")
        entry = next((p for p in doc["participants"] if p["aor"] != sip_aor), None)
        if entry is None:
            conf_sub.close()
            return
        try:
            body = descriptor_to_sdp(entry["session"], session_id=1)
        except SdpError:
            conf_sub.close()
            self._notify_return(client, ret, conference, "488")
            return

        dialog = DialogState(f"{self._hex(64)}@{self.public_ip}",
                             local_tag=self._hex())
        cseq = dialog.next_cseq()
        branch = self._branch()
        msg = sip.request("INVITE", f"sip:{sip_aor}", [
            ("Via", self._via(branch)),
            ("Max-Forwards", "70"),
            ("From", f"<sip:{caller or 'gw@' + self.public_ip}>;tag={dialog.local_tag}"),
            ("To", f"<sip:{sip_aor}>"),
            ("Call-ID", dialog.call_id),
            ("CSeq", f"{cseq} INVITE"),
            ("Contact", self._contact()),
            ("Content-Type", "application/sdp"),
        ], body=body)
        ctx = {
            "kind": "out", "dialog": dialog, "sip_aor": sip_aor,
            "client": client, "conference": conference,
            "rest_call_id": rest_call_id, "caller": caller, "return": ret,
            "conf_sub": conf_sub, "login_sub": None,
            "invite": msg, "invite_cseq": cseq, "remote": self.registrar,
            "pid": None, "state": "inviting",
        }
        self._calls[dialog.call_id] = ctx

        def on_timeout():
            with self.lock:
                self._txns.pop(branch, None)
                if ctx["state"] == "inviting":
                    self._notify_return(client, ret, conference, "timeout")
                    self._drop_call(ctx)

        txn = Transaction(self.timeline, branch, sip.serialize(msg),
                          lambda data: self.endpoint.send(ctx["remote"], data),
                          on_timeout)
        self._txns[branch] = {"kind": "invite", "txn": txn, "ctx": ctx}

    def _notify_return(self, client, ret, conference, reason) -> None:
        if not ret:
            return
        try:
            client.notify(ret, {"type": "cancellation",
                                "conference": conference, "reason": reason})
        except ApiError:
            pass  # inviter already gone

    def _cancel_outbound(self, ctx: dict) -> None:
        if ctx["state"] != "inviting":
            return
        ctx["state"] = "cancelling"
        invite = ctx["invite"]
        branch = invite.via_branch()
        entry = self._txns.get(branch)
        if entry is not None:
            entry["txn"].complete()
        cancel = sip.request("CANCEL", invite.uri, [
            ("Via", invite.headers.get("Via")),
            ("Max-Forwards", "70"),
            ("From", invite.headers.get("From")),
            ("To", invite.headers.get("To")),
            ("Call-ID", invite.headers.get("Call-ID")),
            ("CSeq", f"{ctx['invite_cseq']} CANCEL"),
        ])
        self._send(ctx["remote"], cancel)

    def _ack_for(self, ctx: dict, resp: sip.SipMessage) -> sip.SipMessage:
        invite = ctx["invite"]
        return sip.request("ACK", invite.uri, [
            ("Via", self._via(self._branch())),
            ("Max-Forwards", "70"),
            ("From", invite.headers.get("From")),
            ("To", resp.headers.get("To") or invite.headers.get("To")),
            ("Call-ID", ctx["dialog"].call_id),
            ("CSeq", f"{ctx['invite_cseq']} ACK"),
        ])

    def _on_invite_response(self, entry: dict, resp: sip.SipMessage) -> None:
        ctx = entry["ctx"]
        dialog: DialogState = ctx["dialog"]
        if resp.status < 200:
            return  # provisional; keep the transaction alive
        entry["txn"].complete()
        self._txns.pop(resp.via_branch(), None)
        if ctx["state"] not in ("inviting", "cancelling"):
            return
        if resp.status < 300:
            dialog.remote_tag = resp.tag("To")
            try:
                desc = sdp_to_descriptor(resp.body)
            except SdpError:
                if dialog.should_ack(ctx["invite_cseq"]):
                    self._send(ctx["remote"], self._ack_for(ctx, resp))
                self._notify_return(ctx["client"], ctx["return"],
                                    ctx["conference"], "488")
                self._drop_call(ctx)
                return
            if dialog.should_ack(ctx["invite_cseq"]):
                self._send(ctx["remote"], self._ack_for(ctx, resp))
            dialog.confirm()
            try:
                out = ctx["client"].join_call(ctx["rest_call_id"], desc)
                ctx["pid"] = out["participant_id"]
            except ApiError:
                self._send_bye(ctx)
                return
            ctx["state"] = "confirmed"
            return
        # final negative answer
        self._send(ctx["remote"], self._ack_for(ctx, resp))
        reason = "busy" if resp.status == 486 else str(resp.status)
        if ctx["state"] == "inviting":
            self._notify_return(ctx["client"], ctx["return"],
                                ctx["conference"], reason)
        self._drop_call(ctx)

    def _send_bye(self, ctx: dict) -> None:
        dialog: DialogState = ctx["dialog"]
        if dialog.state == "terminated" or ctx["state"] == "closing":
            return
        ctx["state"] = "closing"
        cseq = dialog.next_cseq()
        branch = self._branch()
        invite = ctx.get("invite")
        if ctx["kind"] == "out":
            uri, from_h = invite.uri, invite.headers.get("From")
            to_h = f"<sip:{ctx['sip_aor']}>;tag={dialog.remote_tag}" \
                if dialog.remote_tag else invite.headers.get("To")
            remote = ctx["remote"]
        else:
            req = ctx["invite"]
            uri = req.uri_of("Contact") or req.uri_of("From")
            from_h = f"{req.headers.get('To')}"
            if ";tag=" not in from_h:
                from_h = f"{from_h};tag={dialog.local_tag}"
            to_h = req.headers.get("From")
            remote = ctx["remote"]
        bye = sip.request("BYE", uri, [
            ("Via", self._via(branch)),
            ("Max-Forwards", "70"),
            ("From", from_h),
            ("To", to_h),
            ("Call-ID", dialog.call_id),
            ("CSeq", f"{cseq} BYE"),
        ])

        def on_timeout():
            with self.lock:
                self._txns.pop(branch, None)
                self._drop_call(ctx)

        txn = Transaction(self.timeline, branch, sip.serialize(bye),
                          lambda data: self.endpoint.send(remote, data),
                          on_timeout)
        self._txns[branch] = {"kind": "bye", "txn": txn, "ctx": ctx}

    def _drop_call(self, ctx: dict) -> None:
        ctx["dialog"].terminate()
        if ctx.get("pid"):
            try:
                ctx["client"].leave_call(ctx["rest_call_id"], ctx["pid"])
            except ApiError:
                pass
            ctx["pid"] = None
        for name in ("conf_sub", "login_sub"):
            if ctx.get(name) is not None:
                ctx[name].close()
                ctx[name] = None
        if ctx["kind"] == "in" and ctx.get("client") is not None:
            if ctx.get("contact_id"):
                try:
                    ctx["client"].delete_contact(ctx["caller"], ctx["contact_id"])
                except ApiError:
                    pass
                ctx["contact_id"] = None
            ctx["client"].close()
        self._calls.pop(ctx["dialog"].call_id, None)

    # -- REST events on live calls ---------------------------------------------------

    def _on_call_event(self, ctx: dict, source: str, ev: dict) -> None:
        payload = ev.get("payload", {})
        if ev["type"] == "membership-change":
            self._on_membership(ctx, payload)
        elif (ev["type"] == "cancellation"
                and payload.get("conference") == ctx["conference"]
                and ctx["kind"] == "in" and not ctx["answered"]):
            # callee declined: surface it as busy toward the SIP caller
            self._respond_to_invite(ctx, 486, "Busy Here")
            self._drop_call(ctx)

    def _on_membership(self, ctx: dict, payload: dict) -> None:
        if ctx["kind"] == "out":
            if (payload["action"] == "leave" and payload["aor"] == ctx["caller"]):
                if ctx["state"] == "confirmed":
                    if ctx.get("pid"):
                        try:
                            ctx["client"].leave_call(ctx["rest_call_id"], ctx["pid"])
                        except ApiError:
                            pass
                        ctx["pid"] = None
                    self._send_bye(ctx)
                else:
                    self._cancel_outbound(ctx)
            return
        # inbound bridge: the REST callee picking up is our 200's SDP
        if (payload["action"] == "join" and payload["aor"] == ctx["callee"]
                and not ctx["answered"]):
            entry = next(p for p in ctx_participants(payload)
                         if p["participant_id"] == payload["participant_id"])
            try:
                body = descriptor_to_sdp(entry["session"], session_id=2)
            except SdpError:
                self._respond_to_invite(ctx, 488, "Not Acceptable Here")
                self._drop_call(ctx)
                return
            ctx["answered"] = True
            self._respond_to_invite(ctx, 200, "OK", body=body, sdp=True)
        elif (payload["action"] == "leave" and payload["aor"] == ctx["callee"]
                and ctx["answered"]):
            self._send_bye(ctx)

    def _respond_to_invite(self, ctx: dict, status: int, reason: str,
                           body: bytes = b"", sdp: bool = False) -> None:
        extra = [("Contact", self._contact())]
        if sdp:
            extra.append(("Content-Type", "application/sdp"))
        resp = sip.response_to(ctx["invite"], status, reason, extra=extra,
                               body=body, to_tag=ctx["dialog"].local_tag)
        self._send(ctx["src"], resp)

    # -- SIP ingress --------------------------------------------------------------------

    def on_datagram(self, src, data: bytes) -> None:
        try:
            msg = sip.parse(data)
        except sip.SipParseError:
            self.malformed += 1
            return
        with self.lock:
            if self.closed:
                return
            if msg.kind == "response":
                self._on_response(src, msg)
            else:
                self._on_request(src, msg)

    def _on_response(self, src, msg: sip.SipMessage) -> None:
        entry = self._txns.get(msg.via_branch() or "")
        if entry is None:
            return
        kind = entry["kind"]
        if kind == "register":
            if msg.status < 200:
                return
            entry["txn"].complete()
            self._txns.pop(msg.via_branch(), None)
            self._finish_register(entry["aor"], msg.status, entry["done"])
        elif kind == "invite":
            self._on_invite_response(entry, msg)
        elif kind == "bye":
            if msg.status < 200:
                return
            entry["txn"].complete()
            self._txns.pop(msg.via_branch(), None)
            self._drop_call(entry["ctx"])

    def _on_request(self, src, msg: sip.SipMessage) -> None:
        number, method = msg.cseq
        if method != msg.method:
            self._send(src, sip.response_to(msg, 400, "Bad Request"))
            return
        if msg.method == "INVITE":
            self._on_invite(src, msg, number)
        elif msg.method == "ACK":
            ctx = self._calls.get(msg.headers.get("Call-ID", ""))
            if ctx is not None and ctx["kind"] == "in" and ctx["answered"]:
                ctx["dialog"].confirm()
                ctx["state"] = "confirmed"
        elif msg.method == "CANCEL":
            self._on_cancel(src, msg)
        elif msg.method == "BYE":
            self._on_bye(src, msg, number)
        else:
            self._send(src, sip.response_to(msg, 405, "Method Not Allowed"))

    def _on_invite(self, src, msg: sip.SipMessage, cseq_number: int) -> None:
        call_id = msg.headers.get("Call-ID")
        if call_id in self._calls:
            self._send(src, sip.response_to(msg, 488, "Not Acceptable Here",
                                            to_tag=self._hex()))
            return  # re-INVITE is out of scope
        callee = _aor_of(msg.uri_of("To") or msg.uri)
        user = self._users.get(callee)
        if user is None or not user["registered"]:
            self._send(src, sip.response_to(msg, 404, "Not Found",
                                            to_tag=self._hex()))
            return
        try:
            desc = sdp_to_descriptor(msg.body)
        except SdpError as err:
            status, reason = (488, "Not Acceptable Here") \
                if "payload type" in str(err) else (400, "Bad Request")
            self._send(src, sip.response_to(msg, status, reason,
                                            to_tag=self._hex()))
            return
        caller_aor = _aor_of(msg.uri_of("From"))
        if "@" not in caller_aor:
            caller_aor = f"{caller_aor or 'anonymous'}@{src[0]}"
        dialog = DialogState(call_id, local_tag=self._hex(),
                             remote_tag=msg.tag("From"))
        dialog.accept_remote_cseq(cseq_number)
        client = self.rest_factory()
        ctx = {
            "kind": "in", "dialog": dialog, "invite": msg, "src": src,
            "remote": src, "callee": callee, "caller": caller_aor,
            "client": client, "answered": False, "state": "inviting",
            "pid": None, "conf_sub": None, "login_sub": None,
        }
        try:
            client.auth(caller_aor, GATEWAY_SECRET)
            # a live contact for the SIP caller, so return-path notifies land
            reg = client.register(caller_aor, {
                "candidates": [{"kind": "udp", "address": self.public_ip,
                                "port": self.public_port, "priority": 0}],
                "presence": {"via": "sip-gateway"},
            })
            ctx["contact_id"] = reg["contact_id"]
            call = client.create_call()
            ctx["rest_call_id"] = call["call_id"]
            ctx["conference"] = call["call_path"]
            ctx["pid"] = client.join_call(call["call_id"], desc)["participant_id"]
            ctx["conf_sub"] = client.subscribe(call["call_path"])
            ctx["login_sub"] = client.subscribe(f"/login/{caller_aor}")
            client.notify(f"/login/{callee}", {
                "type": "invitation",
                "conference": call["call_path"],
                "return": f"/login/{caller_aor}",
            })
        except ApiError:
            self._send(src, sip.response_to(msg, 480, "Temporarily Unavailable",
                                            to_tag=dialog.local_tag))
            if ctx.get("pid") and ctx.get("rest_call_id"):
                try:
                    client.leave_call(ctx["rest_call_id"], ctx["pid"])
                except ApiError:
                    pass
            for name in ("conf_sub", "login_sub"):
                if ctx.get(name) is not None:
                    ctx[name].close()
            client.close()
            return
        self._calls[call_id] = ctx
        self._send(src, sip.response_to(msg, 100, "Trying"))

    def _on_cancel(self, src, msg: sip.SipMessage) -> None:
        ctx = self._calls.get(msg.headers.get("Call-ID", ""))
        self._send(src, sip.response_to(msg, 200, "OK"))
        if ctx is None or ctx["kind"] != "in" or ctx["answered"]:
            return
        self._respond_to_invite(ctx, 487, "Request Terminated")
        self._notify_return(ctx["client"], f"/login/{ctx['callee']}",
                            ctx["conference"], "cancelled")
        self._drop_call(ctx)

    def _on_bye(self, src, msg: sip.SipMessage, cseq_number: int) -> None:
        ctx = self._calls.get(msg.headers.get("Call-ID", ""))
        if ctx is None:
            self._send(src, sip.response_to(msg, 481, "Call/Transaction Does Not Exist"))
            return
        if not ctx["dialog"].accept_remote_cseq(cseq_number):
            return  # stale retransmission
        self._send(src, sip.response_to(msg, 200, "OK"))
        self._drop_call(ctx)


def ctx_participants(payload: dict) -> list[dict]:
    return payload.get("participants", [])
