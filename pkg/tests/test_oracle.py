import numpy as np
import pytest

from dfsnet import network as nw
from dfsnet import oracle as orc
from dfsnet import protocols as pr
from dfsnet.cli import oracle_cases


def maps_for(n, parts, entry=None, rest=0):
    g = nw.build_ring_network(n)
    sched = nw.compile_schedule(g, parts, entry)
    return g, sched, orc.enumerate_logical_map(g, sched, rest=rest)


def test_standard_targets():
    assert np.array_equal(orc.standard_target("CPZ(2)"), np.diag([1, 1, 1, -1]))
    assert np.array_equal(orc.standard_target("CPZ", 3), np.diag([1] * 7 + [-1]))
    h = orc.standard_target("Hadamard")
    assert np.allclose(h @ h, np.eye(2))
    t = orc.standard_target("Toffoli")
    assert np.array_equal(t @ np.eye(8)[:, 6], np.eye(8)[:, 7])
    assert np.array_equal(t[:6, :6], np.eye(6))
    with pytest.raises(ValueError):
        orc.standard_target("SWAP")
    with pytest.raises(ValueError):
        orc.standard_target("CPZ")


def test_global_phase_examples():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert orc.assert_equal_up_to_global_phase(m, -m, 1e-12) < 1e-12
    assert orc.assert_equal_up_to_global_phase(m, np.exp(2.1j) * m, 1e-12) < 1e-12
    with pytest.raises(orc.GlobalPhaseMismatch) as err:
        orc.assert_equal_up_to_global_phase(np.eye(2), np.diag([1, -1]), 0.99)
    # best phase is +-i, leaving sqrt2 on both entries
    assert err.value.deviation == pytest.approx(2**0.5, abs=1e-5)
    with pytest.raises(ValueError):
        orc.assert_equal_up_to_global_phase(np.eye(2), np.eye(3))


def test_three_node_maps():
    _, _, lm = maps_for(3, [0, 1, 2])
    orc.assert_equal_up_to_global_phase(lm.matrix("Dv") * 2**0.5, orc.standard_target("CPZ(3)"), 1e-12)
    orc.assert_equal_up_to_global_phase(lm.matrix("Dh") * 2**0.5, np.eye(8), 1e-12)
    assert np.allclose(lm.probabilities("Dv"), 0.5, atol=1e-12)
    assert lm.leakage == 0


def test_single_node_maps():
    _, _, lm = maps_for(1, [0])
    orc.assert_equal_up_to_global_phase(lm.matrix("Dv") * 2**0.5, np.diag([1, -1]), 1e-12)
    orc.assert_equal_up_to_global_phase(lm.matrix("Dh") * 2**0.5, np.eye(2), 1e-12)


def test_skip_node_map():
    _, _, lm = maps_for(3, [0, 2])
    orc.assert_equal_up_to_global_phase(lm.matrix("Dv") * 2**0.5, orc.standard_target("CPZ(2)"), 1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_completeness(n):
    for parts in ([0], list(range(n))):
        for rest in (0, 1):
            _, _, lm = maps_for(n, parts, rest=rest)
            assert np.allclose(lm.completeness(), np.eye(lm.dim), atol=1e-12)


def test_case_enumeration_counts():
    # cumulative sum over N of N * 2**(N-1)
    assert [len(oracle_cases(n)) for n in range(1, 6)] == [1, 5, 17, 49, 129]
    assert len(set(oracle_cases(5))) == 129


@pytest.mark.parametrize("n", [1, 2, 3])
def test_engine_matches_oracle(n):
    g = nw.build_ring_network(n)
    for _, subset, entry in (c for c in oracle_cases(n) if c[0] == n):
        parts = nw.ring_order(n, entry, subset)
        sched = nw.compile_schedule(g, parts, entry)
        for rest in (0, 1):
            lm = orc.enumerate_logical_map(g, sched, rest=rest)
            engine = pr.conditioned_maps(g, sched, rest=rest)
            for outcome in ("Dv", "Dh"):
                orc.assert_equal_up_to_global_phase(engine[outcome], lm.matrix(outcome), 1e-10)


def test_oracle_limit():
    g = nw.build_ring_network(6)
    sched = nw.compile_schedule(g, list(range(6)))
    with pytest.raises(ValueError):
        orc.enumerate_logical_map(g, sched)


def test_walk_is_normalized():
    g, sched, _ = maps_for(2, [0, 1])
    amps = orc.walk(g, sched, pr.logical_atom_string(2, [1, 0]))
    assert sum(abs(a) ** 2 for a in amps.values()) == pytest.approx(1.0, abs=1e-12)
