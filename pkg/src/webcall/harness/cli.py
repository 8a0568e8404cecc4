"""The `webcall` command: servers, a terminal softphone, and scenarios."""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
import time

from ..adaptor import AdaptorCore, AdaptorServer, HttpAdaptor, RealNetwork, open_policy
from ..clockwork import RealTimeline
from ..gateway import GatewayServer
from ..sdk import UserAgent
from ..signaling.client import HttpClient
from ..signaling.core import SignalingCore
from ..signaling.server import SignalingServer
from .scenario import ScenarioError, run_scenario_file

log = logging.getLogger("webcall")


def _serve_forever(stop_fn) -> None:
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        print("shutting down", file=sys.stderr)
    finally:
        stop_fn()


def cmd_serve(args) -> int:
    secrets = None
    if args.secrets:
        with open(args.secrets, encoding="utf-8") as fh:
            secrets = json.load(fh)
    core = SignalingCore(RealTimeline(), secrets=secrets)
    server = SignalingServer(core, host=args.host, port=args.port).start()
    print(f"signaling server on {server.url}")
    _serve_forever(server.stop)
    return 0


def cmd_adaptor(args) -> int:
    try:
        policy = open_policy(args.policy)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    core = AdaptorCore(RealTimeline(), RealNetwork(), policy,
                       rng=random.Random())
    server = AdaptorServer(core, host=args.host, port=args.port)
    server.start()
    print(f"adaptor daemon on {server.url} (policy: {args.policy})")
    print(f"widgets at {server.url}/widgets")
    _serve_forever(server.stop)
    return 0


def cmd_gateway(args) -> int:
    host, _, port = args.registrar.partition(":")
    if not host or not port.isdigit():
        print("--registrar must be HOST:PORT", file=sys.stderr)
        return 2
    server = GatewayServer(args.rest, (host, int(port)), port=args.port,
                           host_ip=args.bind_ip, public_ip=args.public_ip)
    for aor in args.register or []:
        server.core.register_user(
            aor, done=lambda r, aor=aor: print(f"REGISTER {aor}: {r['status']}"))
    for aor in args.proxy or []:
        server.core.proxy_sip_user(aor)
        print(f"proxying {aor} on the REST side")
    server.start()
    ip, sip_port = server.sip_address
    print(f"sip gateway on udp {ip}:{sip_port}, REST at {args.rest}")
    _serve_forever(server.stop)
    return 0


def cmd_call(args) -> int:
    ua = UserAgent(args.aor, args.secret, HttpClient(args.server),
                   HttpAdaptor(args.adaptor))
    seen = 0

    def pump_and_print():
        nonlocal seen
        ua.pump()
        while seen < len(ua.transitions):
            old, new = ua.transitions[seen]
            seen += 1
            suffix = f" ({ua.reason})" if new in ("ended", "failed") and ua.reason else ""
            print(f"{old} -> {new}{suffix}")

    ua.login()
    deadline = time.monotonic() + args.duration
    try:
        while time.monotonic() < deadline:
            pump_and_print()
            if ua.state == "online" and args.to and not ua.transitions.count(("online", "inviting")):
                ua.place_call(args.to)
            if ua.state == "invited" and args.answer:
                ua.accept()
            if ua.state in ("ended", "failed"):
                break
            time.sleep(0.05)
    except KeyboardInterrupt:
        pass
    if ua.state in ("in-call", "inviting", "invited", "joining"):
        ua.hangup()
    pump_and_print()
    print(f"final: {ua.state}" + (f" ({ua.reason})" if ua.reason else ""))
    return 0 if ua.state != "failed" else 1


def cmd_scenario(args) -> int:
    try:
        report = run_scenario_file(args.file, report_path=args.report)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(report, indent=2))
    return 0 if report["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="webcall",
        description="REST call signaling, adaptor daemon, SIP gateway, "
                    "softphone, and scenario runner")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the signaling server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--secrets", help="JSON file of {aor: secret}")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("adaptor", help="run the local adaptor daemon")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8754)
    p.add_argument("--policy", default="prompt",
                   help="prompt | allow | deny | file:PATH")
    p.set_defaults(fn=cmd_adaptor)

    p = sub.add_parser("gateway", help="run the REST/SIP gateway")
    p.add_argument("--rest", required=True, help="signaling server URL")
    p.add_argument("--registrar", required=True, help="HOST:PORT of the SIP registrar")
    p.add_argument("--port", type=int, default=5060)
    p.add_argument("--bind-ip", default="127.0.0.1")
    p.add_argument("--public-ip", default=None)
    p.add_argument("--register", action="append", metavar="AOR",
                   help="REST user to announce at the registrar (repeatable)")
    p.add_argument("--proxy", action="append", metavar="AOR",
                   help="SIP user to represent on the REST side (repeatable)")
    p.set_defaults(fn=cmd_gateway)

    p = sub.add_parser("call", help="terminal softphone")
    p.add_argument("--server", required=True, help="signaling server URL")
    p.add_argument("--adaptor", required=True, help="adaptor daemon URL")
    p.add_argument("--aor", required=True)
    p.add_argument("--secret", default="pw",
                   help="login secret; any non-empty value works against an "
                        "open-auth server (default: pw)")
    p.add_argument("--to", help="place a call once online")
    p.add_argument("--answer", action="store_true",
                   help="auto-accept an incoming call")
    p.add_argument("--duration", type=float, default=30.0)
    p.set_defaults(fn=cmd_call)

    p = sub.add_parser("scenario", help="run a scenario file")
    p.add_argument("file")
    p.add_argument("--report", help="also write the JSON report here")
    p.set_defaults(fn=cmd_scenario)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
