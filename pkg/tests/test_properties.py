"""Randomized invariants of the engine, the protocols and the noise model."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from dfsnet import network as nw
from dfsnet import noise as nz
from dfsnet import oracle as orc
from dfsnet import protocols as pr
from dfsnet import qstate as qs
from dfsnet.optics import hwp_matrix

GRAPHS = {n: nw.build_ring_network(n) for n in range(1, 5)}


@st.composite
def runs(draw):
    """A network size, a clockwise participant list with its entry, and logical amplitudes."""
    n = draw(st.integers(1, 4))
    subset = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n, unique=True))
    entry = draw(st.sampled_from(subset))
    parts = nw.ring_order(n, entry, subset)
    re = draw(st.lists(st.floats(-1, 1), min_size=2 ** len(parts), max_size=2 ** len(parts)))
    im = draw(st.lists(st.floats(-1, 1), min_size=2 ** len(parts), max_size=2 ** len(parts)))
    amps = np.array(re) + 1j * np.array(im)
    if np.linalg.norm(amps) < 1e-3:
        amps = np.eye(2 ** len(parts))[0].astype(complex)
    return n, parts, entry, amps / np.linalg.norm(amps)


@settings(max_examples=60, deadline=None)
@given(runs())
def test_heralds_are_sound(case):
    n, parts, entry, amps = case
    s = pr.logical_register(n, parts, amps)
    br = pr.cp_branches(s, GRAPHS[n], parts, entry)
    assert abs(br["Dv"].probability - 0.5) < 1e-12
    ((_, dv),) = br["Dv"].components
    ((_, dh),) = br["Dh"].components
    assert abs(qs.fidelity_up_to_global_phase(dv, pr.ideal_cpz(s, parts)) - 1) < 1e-12
    assert abs(qs.fidelity_up_to_global_phase(dh, s) - 1) < 1e-12
    assert max(pr.leakage(dv, m) for m in range(n)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(runs(), st.lists(st.floats(-np.pi, np.pi), min_size=4, max_size=4))
def test_collective_dephasing_is_a_global_phase(case, phis):
    n, parts, _, amps = case
    s = pr.logical_register(n, parts, amps)
    out = s
    for node in range(n):
        out = nz.apply_collective_dephasing(out, node, phis[node])
    assert abs(qs.fidelity_up_to_global_phase(out, s) - 1) < 1e-12
    ratio = np.vdot(s.atomic_vector(), out.atomic_vector())
    assert abs(ratio - np.exp(1j * sum(phis[:n]))) < 1e-12


@settings(max_examples=30, deadline=None)
@given(runs())
def test_sink_norm_is_conserved(case):
    n, parts, entry, amps = case
    g = GRAPHS[n]
    sched = nw.compile_schedule(g, parts, entry)
    state = nw.inject_photon(pr.logical_register(n, parts, amps), g, entry, pr.DIAGONAL_PHOTON)
    r = nw.propagate(state, g, sched)
    assert abs(r.state.norm_sq() - 1) < 1e-12
    assert all(m.is_sink for m in r.state.occupied_modes())


@settings(max_examples=30, deadline=None)
@given(runs(), st.floats(0, 0.05))
def test_loss_only_rescales_the_dv_branch(case, loss):
    n, parts, entry, amps = case
    g = GRAPHS[n]
    s = pr.logical_register(n, parts, amps)
    clean = pr.cp_branches(s, g, parts, entry)
    lossy = pr.cp_branches(s, g, parts, entry, noise=nz.NoiseRealization(n, loss_per_tick=loss))
    (t,) = nw.arrival_ticks(g, nw.compile_schedule(g, parts, entry), "Dv")
    assert abs(lossy["Dv"].probability - 0.5 * (1 - loss) ** t) < 1e-12
    ((_, a),) = lossy["Dv"].components
    ((_, b),) = clean["Dv"].components
    assert np.allclose(a.atomic_vector(), b.atomic_vector(), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n - 1))))
def test_every_subset_schedule_has_equal_arrival(case):
    n, entry = case
    g = GRAPHS[n]
    for k in range(1, n + 1):
        parts = nw.ring_order(n, entry, [(entry + j) % n for j in range(k)])
        assert nw.validate_equal_arrival(g, nw.compile_schedule(g, parts, entry)) == []


@settings(max_examples=50, deadline=None)
@given(st.floats(-360, 360))
def test_hwp_is_a_unitary_involution(theta):
    m = hwp_matrix(theta)
    assert np.allclose(m @ m, np.eye(2), atol=1e-12)
    assert np.allclose(m.conj().T @ m, np.eye(2), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8), st.floats(-np.pi, np.pi))
def test_global_phase_check_accepts_phased_copies(entries, theta):
    a = np.array(entries).reshape(2, 4) + 0j
    assert orc.assert_equal_up_to_global_phase(np.exp(1j * theta) * a, a, 1e-10) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.5, 0.5))
def test_scattering_error_is_even(eps):
    sc = nz.GateScenario(3, (0, 1, 2), combiner="balanced")
    f = [nz.monte_carlo_fidelity(sc, nz.NoiseParams(scattering_phase_error=e), 1).fidelity_mean for e in (eps, -eps)]
    assert abs(f[0] - f[1]) < 1e-12
    assert f[0] <= 1 + 1e-12
