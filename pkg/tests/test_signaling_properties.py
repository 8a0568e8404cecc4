"""Randomized operation sequences vs the single-threaded reference model.

The full 1,000-sequence run lives in the acceptance suite; this keeps a
quick 150-sequence version in the unit tier plus targeted idempotence
properties.
"""

import random

import pytest

from reference_signaling import run_sequence
from webcall.clockwork import VirtualTimeline
from webcall.errors import ApiError
from webcall.signaling.core import SignalingCore


def test_random_sequences_match_reference_model():
    for seed in range(150):
        run_sequence(seed, ops=30)


def test_put_twice_equals_once():
    rng = random.Random(42)
    for trial in range(20):
        tl = VirtualTimeline()
        core = SignalingCore(tl, rng=random.Random(trial))
        tok = core.auth("amy@x.net", "pw")["token"]
        core.register(tok, "amy@x.net",
                      {"candidates": [{"kind": "udp", "address": "1.2.3.4",
                                       "port": 5060, "priority": 0}]})
        body = {"candidates": [{"kind": "udp", "address": "1.2.3.4",
                                "port": rng.randrange(2000, 60000), "priority": 0}],
                "expires_seconds": rng.choice([60, 600, 3600])}
        core.update_contact(tok, "amy@x.net", "c2", body)
        once = core.state_hash()
        core.update_contact(tok, "amy@x.net", "c2", body)
        assert core.state_hash() == once


def test_delete_twice_idempotent_modulo_status():
    tl = VirtualTimeline()
    core = SignalingCore(tl)
    tok = core.auth("amy@x.net", "pw")["token"]
    core.register(tok, "amy@x.net",
                  {"candidates": [{"kind": "udp", "address": "1.2.3.4",
                                   "port": 5060, "priority": 0}]})
    core.delete_contact(tok, "amy@x.net", "c2")
    once = core.state_hash()
    with pytest.raises(ApiError) as err:
        core.delete_contact(tok, "amy@x.net", "c2")
    assert err.value.code == 404
    assert core.state_hash() == once
