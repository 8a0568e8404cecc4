"""Deterministic scenario runner.

A scenario is a JSON document: a seed, optional host addresses, and a list
of steps driving scripted user agents against an in-process signaling core
on a virtual timeline. Same file, same seed, same trace; that is the whole
point, and what makes recorded traces usable as regression oracles.
"""

from __future__ import annotations

import json
import random

from ..adaptor import AdaptorCore, AllowAllPolicy, DirectAdaptor
from ..clockwork import VirtualTimeline
from ..sdk import CallError, UserAgent
from ..signaling.client import DirectClient
from ..signaling.core import SignalingCore
from .natsim import HostNetwork, SimNetwork

OPS = ("spawn", "login", "call", "accept", "reject", "hangup",
       "wait-for-state", "advance-clock", "assert")
DEFAULT_TIMEOUT = 10.0
STEP = 0.05


class ScenarioError(Exception):
    """The scenario file itself is unusable (not a step failure)."""


def load_scenario(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from None
    validate_scenario(doc)
    return doc


def validate_scenario(doc: dict) -> None:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    steps = doc.get("steps")
    if not isinstance(steps, list) or not steps:
        raise ScenarioError("scenario needs a non-empty steps list")
    for i, step in enumerate(steps):
        if not isinstance(step, dict) or step.get("op") not in OPS:
            raise ScenarioError(f"step {i}: op must be one of {OPS}")


class ScenarioRunner:
    def __init__(self, scenario: dict):
        validate_scenario(scenario)
        self.scenario = scenario
        self.seed = int(scenario.get("seed", 0))
        self.timeline = VirtualTimeline()
        self.sim = SimNetwork(self.timeline, seed=self.seed)
        self.score = SignalingCore(self.timeline, rng=random.Random(self.seed))
        self.agents: dict[str, UserAgent] = {}
        self._hosts = 0

    # each spawned agent gets its own loopback host and adaptor core
    def _spawn(self, step: dict) -> None:
        name = step["agent"]
        if name in self.agents:
            raise ScenarioError(f"agent {name!r} spawned twice")
        self._hosts += 1
        host = f"host{self._hosts}"
        ip = step.get("host", f"127.0.0.{self._hosts}")
        self.sim.add_host(host, ip)
        core = AdaptorCore(self.timeline, HostNetwork(self.sim, host),
                           AllowAllPolicy(),
                           rng=random.Random(self.seed * 1000 + self._hosts))
        self.agents[name] = UserAgent(
            step.get("aor", f"{name}@example.net"), step.get("secret", "pw"),
            DirectClient(self.score), DirectAdaptor(core),
            incoming=step.get("incoming", "prompt"),
        )

    def _agent(self, step: dict) -> UserAgent:
        name = step.get("agent")
        ua = self.agents.get(name)
        if ua is None:
            raise ScenarioError(f"unknown agent {name!r}")
        return ua

    def _advance(self, seconds: float) -> None:
        elapsed = 0.0
        while elapsed < seconds:
            self.timeline.advance(STEP)
            elapsed += STEP
            for ua in self.agents.values():
                ua.pump()

    def _run_step(self, step: dict) -> str | None:
        """None on success, otherwise a failure detail."""
        op = step["op"]
        if op == "spawn":
            self._spawn(step)
        elif op == "login":
            self._agent(step).login()
        elif op == "call":
            self._agent(step).place_call(step["to"])
        elif op == "accept":
            self._agent(step).accept()
        elif op == "reject":
            self._agent(step).reject()
        elif op == "hangup":
            self._agent(step).hangup()
        elif op == "advance-clock":
            self._advance(float(step.get("seconds", 1.0)))
        elif op == "wait-for-state":
            ua = self._agent(step)
            want = step["state"]
            timeout = float(step.get("timeout", DEFAULT_TIMEOUT))
            waited = 0.0
            while ua.state != want and waited < timeout:
                self._advance(STEP)
                waited += STEP
            if ua.state != want:
                return (f"{step['agent']} is {ua.state!r} "
                        f"after {timeout}s, wanted {want!r}")
        elif op == "assert":
            ua = self._agent(step)
            field = step.get("field", "state")
            if field not in ("state", "reason"):
                raise ScenarioError(f"assert field must be state or reason")
            actual = getattr(ua, field)
            if actual != step.get("equals"):
                return f"{step['agent']}.{field} is {actual!r}, wanted {step.get('equals')!r}"
        return None

    def run(self) -> dict:
        steps_report = []
        ok = True
        for i, step in enumerate(self.scenario["steps"]):
            if not ok:
                steps_report.append({"index": i, "op": step["op"],
                                     "ok": None, "detail": "skipped"})
                continue
            try:
                detail = self._run_step(step)
            except CallError as exc:
                detail = f"call error: {exc}"
            if detail is None:
                steps_report.append({"index": i, "op": step["op"], "ok": True})
            else:
                ok = False
                steps_report.append({"index": i, "op": step["op"],
                                     "ok": False, "detail": detail})
        return {
            "name": self.scenario.get("name", "scenario"),
            "seed": self.seed,
            "ok": ok,
            "steps": steps_report,
            "agents": {name: {"state": ua.state, "reason": ua.reason}
                       for name, ua in self.agents.items()},
            "trace": list(self.score.trace),
        }


def run_scenario_file(path: str, report_path: str | None = None) -> dict:
    report = ScenarioRunner(load_scenario(path)).run()
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return report
