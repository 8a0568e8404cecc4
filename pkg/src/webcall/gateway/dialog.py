"""Dialog and transaction state, kept deliberately small.

A Transaction owns one request and its retransmission schedule (0.5 s
doubling, five sends, giving up 15.5 s after the first). A DialogState
tracks tags, per-direction CSeq counters, and the ACK-once rule.
"""

from __future__ import annotations

RETRANSMIT_BASE = 0.5
MAX_ATTEMPTS = 5
# sends at 0, 0.5, 1.5, 3.5, 7.5; the budget runs out at 15.5
TIMEOUT_BUDGET = RETRANSMIT_BASE * (2 ** MAX_ATTEMPTS - 1)


class Transaction:
    def __init__(self, timeline, branch: str, message: bytes, send, on_timeout):
        self.timeline = timeline
        self.branch = branch
        self.message = message
        self.send = send
        self.on_timeout = on_timeout
        self.attempts = 0
        self.completed = False
        self._timer = None
        self._fire()

    def _fire(self) -> None:
        if self.completed:
            return
        if self.attempts >= MAX_ATTEMPTS:
            self.completed = True
            self.on_timeout()
            return
        self.send(self.message)
        delay = RETRANSMIT_BASE * (2 ** self.attempts)
        self.attempts += 1
        self._timer = self.timeline.call_later(delay, self._fire)

    def complete(self) -> None:
        self.completed = True
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None


class DialogState:
    def __init__(self, call_id: str, local_tag: str, remote_tag: str | None = None):
        self.call_id = call_id
        self.local_tag = local_tag
        self.remote_tag = remote_tag
        self.state = "early"  # early -> confirmed -> terminated
        self.local_cseq = 0
        self.remote_cseq = 0
        self._acked: set[int] = set()

    def next_cseq(self) -> int:
        self.local_cseq += 1
        return self.local_cseq

    def accept_remote_cseq(self, number: int) -> bool:
        """True iff strictly newer than anything seen from the peer."""
        if number <= self.remote_cseq:
            return False
        self.remote_cseq = number
        return True

    def should_ack(self, invite_cseq: int) -> bool:
        """Exactly one ACK per 200-to-INVITE, keyed by the INVITE's CSeq."""
        if invite_cseq in self._acked:
            return False
        self._acked.add(invite_cseq)
        return True

    def confirm(self) -> None:
        if self.state == "early":
            self.state = "confirmed"

    def terminate(self) -> None:
        self.state = "terminated"
