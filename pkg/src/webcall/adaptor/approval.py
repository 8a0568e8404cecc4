"""User-approval gating: the contract is the decision, not the dialog.

Every sensitive operation (app connect, socket bind, first send to a new
peer, media capture, media delivery to the client) asks the policy and
blocks on its answer. Decisions are "allow-once", "allow-always", or
"deny"; every policy records what it was asked so tests can assert on
prompt counts.
"""

from __future__ import annotations

KINDS = ("app-connect", "bind", "send-to-new-peer", "media-capture", "media-to-client")
DECISIONS = ("allow-once", "allow-always", "deny")


class ApprovalPolicy:
    def __init__(self):
        self.log: list[tuple[str, str, str]] = []  # (kind, subject, decision)

    def decide(self, kind: str, subject: str) -> str:
        decision = self._decide(kind, subject)
        if decision not in DECISIONS:
            decision = "deny"
        self.log.append((kind, subject, decision))
        return decision

    def _decide(self, kind: str, subject: str) -> str:
        raise NotImplementedError

    def prompts(self, kind: str | None = None) -> int:
        return sum(1 for k, _, _ in self.log if kind is None or k == kind)


class AllowAllPolicy(ApprovalPolicy):
    def _decide(self, kind, subject):
        return "allow-once"


class DenyAllPolicy(ApprovalPolicy):
    def _decide(self, kind, subject):
        return "deny"


class ScriptedPolicy(ApprovalPolicy):
    """Per-kind scripted answers, defaulting to allow-once."""

    def __init__(self, script: dict | None = None, default: str = "allow-once"):
        super().__init__()
        self.script = dict(script or {})
        self.default = default

    def _decide(self, kind, subject):
        if (kind, subject) in self.script:
            return self.script[(kind, subject)]
        return self.script.get(kind, self.default)


class PromptPolicy(ApprovalPolicy):
    """Terminal stand-in for the native dialog box."""

    def _decide(self, kind, subject):
        while True:
            answer = input(f"[approval] {kind}: {subject} -- allow once (o), "
                           f"always (a), or deny (d)? ").strip().lower()
            if answer in ("o", "once"):
                return "allow-once"
            if answer in ("a", "always"):
                return "allow-always"
            if answer in ("d", "deny", "n", "no"):
                return "deny"


class FilePolicy(ApprovalPolicy):
    """Static rules from a config file: lines `kind[:subject] = decision`."""

    def __init__(self, path: str, default: str = "deny"):
        super().__init__()
        self.rules: dict[str, str] = {}
        self.default = default
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or "=" not in line:
                    continue
                key, _, value = line.partition("=")
                self.rules[key.strip()] = value.strip()

    def _decide(self, kind, subject):
        return self.rules.get(f"{kind}:{subject}", self.rules.get(kind, self.default))


def open_policy(spec: str) -> ApprovalPolicy:
    """CLI policy flag: prompt | allow | deny | file:PATH."""
    if spec == "prompt":
        return PromptPolicy()
    if spec == "allow":
        return AllowAllPolicy()
    if spec == "deny":
        return DenyAllPolicy()
    if spec.startswith("file:"):
        return FilePolicy(spec[5:])
    raise ValueError(f"unknown policy {spec!r}; use prompt, allow, deny, or file:PATH")
