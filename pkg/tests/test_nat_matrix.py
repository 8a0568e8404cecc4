"""Full NAT pairing matrix: ICE outcome must equal the brute-force oracle.

Two mapping behaviors x three filtering behaviors per side gives 36
ordered pairings (21 distinct up to symmetry; running all 36 also checks
that outcomes are order-independent). Each cell runs the real adaptor
stack over the simulated network and compares the terminal ICE phase on
both sides against tests/nat_oracle.py.
"""

import random

import pytest

from nat_oracle import SPECS, connectivity
from webcall.adaptor import AdaptorCore, AllowAllPolicy, DirectAdaptor
from webcall.clockwork import VirtualTimeline
from webcall.harness.natsim import HostNetwork, NatModel, Reflector, SimNetwork

REFL = "198.51.100.250"

# Hand-derived spot checks, worked out on paper from the filtering rules
# (see the nat_oracle docstring for the reasoning on each).
HAND_CELLS = {
    (("eim", "eif"), ("eim", "eif")): True,
    (("eim", "apdf"), ("eim", "apdf")): True,
    (("adm", "adf"), ("eim", "eif")): True,
    (("adm", "apdf"), ("eim", "eif")): True,
    (("adm", "adf"), ("adm", "adf")): False,
    (("adm", "apdf"), ("adm", "eif")): False,
}


def run_cell(a_spec, b_spec):
    timeline = VirtualTimeline()
    sim = SimNetwork(timeline, seed=9)
    sim.add_host("refl", REFL)
    Reflector(sim.bind("refl", 3478))
    sim.add_nat("r1", NatModel("203.0.113.1", *a_spec))
    sim.add_nat("r2", NatModel("203.0.113.2", *b_spec))
    sim.add_host("a", "10.0.1.5", realm="r1")
    sim.add_host("b", "10.0.2.5", realm="r2")

    sides = []
    for host, seed in (("a", 101), ("b", 202)):
        core = AdaptorCore(timeline, HostNetwork(sim, host), AllowAllPolicy(),
                           rng=random.Random(seed))
        client = DirectAdaptor(core)
        client.auth(f"app-{host}")
        udp = client.create("UdpTransport", {"port": 0})
        ice = client.create("IceTransport", {
            "components": [udp["object_id"]], "reflector": [REFL, 3478]})
        sides.append((client, ice["object_id"]))
    timeline.advance(1.0)

    (a, ice_a), (b, ice_b) = sides
    cands_a = a.invoke(ice_a, "stats")["local_candidates"]
    cands_b = b.invoke(ice_b, "stats")["local_candidates"]
    a.invoke(ice_a, "ice_run", {"remote": cands_b})
    b.invoke(ice_b, "ice_run", {"remote": cands_a})
    timeline.advance(5.0)
    st_a = a.invoke(ice_a, "stats")
    st_b = b.invoke(ice_b, "stats")
    assert st_a["phase"] in ("connected", "failed")
    assert st_b["phase"] in ("connected", "failed")
    return st_a["phase"] == "connected", st_b["phase"] == "connected"


@pytest.mark.parametrize("a_spec", SPECS, ids=lambda s: "-".join(s))
@pytest.mark.parametrize("b_spec", SPECS, ids=lambda s: "-".join(s))
def test_matrix_cell_matches_oracle(a_spec, b_spec):
    expected = connectivity(a_spec, b_spec)
    got = run_cell(a_spec, b_spec)
    assert got == expected, (
        f"{a_spec} vs {b_spec}: implementation {got}, oracle {expected}")


def test_oracle_matches_hand_derived_cells():
    for (a_spec, b_spec), expected in HAND_CELLS.items():
        assert connectivity(a_spec, b_spec) == (expected, expected), (a_spec, b_spec)


def test_oracle_is_symmetric_and_order_independent():
    for a_spec in SPECS:
        for b_spec in SPECS:
            ab = connectivity(a_spec, b_spec)
            ba = connectivity(b_spec, a_spec)
            assert ab[0] == ab[1], "one side cannot stay connected alone"
            assert ab == ba[::-1]
