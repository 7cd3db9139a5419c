"""One check per acceptance criterion, each printing a single pass/fail line."""

import time

import numpy as np

from dfsnet import network as nw
from dfsnet import noise as nz
from dfsnet import oracle as orc
from dfsnet import protocols as pr
from dfsnet import qstate as qs
from dfsnet.cli import oracle_cases
from dfsnet.qstate import Pol
from dfsnet.timing import TimingParams, dark_count_penalty, gate_time

SQRT_HALF = 0.5**0.5
H, V = Pol.H.value, Pol.V.value


def median_time(fn, repeats=21):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def random_amplitudes(rng, k):
    a = rng.normal(size=2**k) + 1j * rng.normal(size=2**k)
    return a / np.linalg.norm(a)


def run_oracle_suite():
    """Engine vs oracle for every (N <= 5, subset, entry, resting value); returns (cases, worst, seconds)."""
    t0 = time.perf_counter()
    worst, cases = 0.0, 0
    graphs = {}
    for n, subset, entry in oracle_cases(5):
        g = graphs.setdefault(n, nw.build_ring_network(n))
        sched = nw.compile_schedule(g, nw.ring_order(n, entry, subset), entry)
        for rest in (0, 1):
            lm = orc.enumerate_logical_map(g, sched, rest=rest)
            engine = pr.conditioned_maps(g, sched, rest=rest)
            for outcome in ("Dv", "Dh"):
                try:
                    dev = orc.assert_equal_up_to_global_phase(engine[outcome], lm.matrix(outcome), 1e-10)
                except orc.GlobalPhaseMismatch as e:
                    dev = e.deviation
                worst = max(worst, dev)
            cases += 1
    return cases, worst, time.perf_counter() - t0


def test_criterion_1_single_node(report):
    g = nw.build_ring_network(1)
    sched = nw.compile_schedule(g, [0])
    probes = ("C0", "HWP45_0", "HWPout0")
    expected = {
        0: {"C0": (-SQRT_HALF, SQRT_HALF), "HWP45_0": (SQRT_HALF, -SQRT_HALF), "HWPout0": (0, 1)},
        1: {"C0": (SQRT_HALF, SQRT_HALF), "HWP45_0": (SQRT_HALF, SQRT_HALF), "HWPout0": (1, 0)},
    }
    out_port = {"C0": "3", "HWP45_0": "out", "HWPout0": "out"}
    worst = 0.0
    for bit in (0, 1):
        idx = pr.logical_atom_string(1, [bit])
        state = nw.inject_photon(pr.logical_basis_state(1, [bit]), g, 0, pr.DIAGONAL_PHOTON)
        r = nw.propagate(state, g, sched, probes=probes)
        for eid in probes:
            got = r.probes[eid]
            for pol, amp in zip((H, V), expected[bit][eid]):
                vec = got.get((out_port[eid], pol), np.zeros(4))
                other = np.delete(vec, idx)
                worst = max(worst, abs(vec[idx] - amp), float(np.abs(other).max(initial=0)))
    state = nw.inject_photon(pr.logical_basis_state(1, [0]), g, 0, pr.DIAGONAL_PHOTON)
    runtime = median_time(lambda: nw.propagate(state, g, sched))
    ok = worst < 1e-12 and runtime < 1e-3
    report(1, ok, f"single-node amplitudes max error {worst:.1e} (tol 1e-12), runtime {runtime * 1e3:.3f} ms (< 1 ms)")
    assert ok


def test_criterion_2_three_node_branches(report):
    rng = np.random.default_rng(2024)
    g = nw.build_ring_network(3)
    sched = nw.compile_schedule(g, [0, 1, 2])
    beta = random_amplitudes(rng, 3)
    state = nw.inject_photon(pr.logical_register(3, [0, 1, 2], beta), g, 0, pr.DIAGONAL_PHOTON)

    r = nw.propagate(state, g, sched)
    index = [pr.logical_atom_string(3, [(m >> 2) & 1, (m >> 1) & 1, m & 1]) for m in range(8)]
    (dh,) = r.detector_amplitudes["Dh"].values()
    (dv,) = r.detector_amplitudes["Dv"].values()
    flipped = beta.copy()
    flipped[7] *= -1
    err_h = np.abs(dh[index] - beta / 2**0.5).max()
    err_v = np.abs(dv[index] - (-flipped / 2**0.5)).max()
    outside = max(np.abs(np.delete(dh, index)).max(), np.abs(np.delete(dv, index)).max())
    p_h, p_v = r.detector_probability("Dh"), r.detector_probability("Dv")
    runtime = median_time(lambda: nw.propagate(state, g, sched))
    worst = max(err_h, err_v, outside)
    ok = worst < 1e-12 and abs(p_h - 0.5) < 1e-12 and abs(p_v - 0.5) < 1e-12 and runtime < 1e-2
    report(2, ok, f"Dh/Dv branch amplitudes max error {worst:.1e}, P(Dh)={p_h:.15f}, P(Dv)={p_v:.15f}, "
                  f"runtime {runtime * 1e3:.2f} ms (< 10 ms)")
    assert ok


def test_criterion_3_oracle_equivalence(report):
    cases, worst, seconds = run_oracle_suite()
    ok = cases >= 100 and worst <= 1e-10 and seconds < 30
    report(3, ok, f"{cases} cases, max deviation {worst:.1e} (tol 1e-10), {seconds:.1f} s (< 30 s)")
    assert ok


def test_criterion_4_toffoli(report):
    g = nw.build_ring_network(3)
    rng = np.random.default_rng(7)
    target = orc.standard_target("Toffoli")
    worst = 0.0
    for m in range(8):
        amps = np.eye(8)[m]
        out = pr.toffoli(pr.logical_register(3, [0, 1, 2], amps), g, (0, 1), 2, rng=rng)
        ideal = pr.logical_register(3, [0, 1, 2], target @ amps)
        worst = max(worst, abs(1 - qs.fidelity_up_to_global_phase(out.post_state, ideal)))
    for _ in range(20):
        amps = random_amplitudes(rng, 3)
        out = pr.toffoli(pr.logical_register(3, [0, 1, 2], amps), g, (0, 1), 2, rng=rng)
        ideal = pr.logical_register(3, [0, 1, 2], target @ amps)
        worst = max(worst, abs(1 - qs.fidelity_up_to_global_phase(out.post_state, ideal)))

    runs = 10_000
    attempts = np.empty(runs)
    for t in range(runs):
        amps = random_amplitudes(rng, 3)
        attempts[t] = pr.toffoli(pr.logical_register(3, [0, 1, 2], amps), g, (0, 1), 2, rng=rng).attempts_used
    mean = attempts.mean()
    ok = worst <= 1e-10 and abs(mean - 2) <= 0.1
    report(4, ok, f"Toffoli fidelity error {worst:.1e} over 8 basis + 20 random inputs (tol 1e-10), "
                  f"mean attempts {mean:.4f} over {runs} runs (2 +- 5%)")
    assert ok


def test_criterion_5_dfs_immunity(report):
    trials = 1000
    sigma = 0.5
    rngs = lambda seed: [np.random.default_rng([seed, t]) for t in range(trials)]  # noqa: E731
    dfs = nz.GateScenario(3, (0, 1, 2))
    outcomes = nz.run_batch(dfs, nz.NoiseParams(dephasing_sigma=sigma), rngs(1))
    dfs_worst = max(abs(1 - o.fidelity) for o in outcomes)

    bare = nz.monte_carlo_fidelity(nz.GateScenario(3, (0, 1, 2), encoding="bare"),
                                   nz.NoiseParams(dephasing_sigma=sigma), trials, seed=2)
    window = nz.monte_carlo_fidelity(dfs, nz.NoiseParams(dephasing_sigma=sigma,
                                                         dephasing_timing="include-sandwich-window"), trials, seed=3)
    bare_ok = bare.fidelity_mean + 2 * bare.fidelity_stderr < 0.95
    window_ok = window.fidelity_mean + 2 * window.fidelity_stderr < 1
    ok = dfs_worst <= 1e-12 and bare_ok and window_ok
    report(5, ok, f"DFS worst |1-F| {dfs_worst:.1e} over {trials} realizations (tol 1e-12); "
                  f"bare F={bare.fidelity_mean:.4f}+-{bare.fidelity_stderr:.4f} (< 0.95 at 2 sigma); "
                  f"in-window F={window.fidelity_mean:.4f}+-{window.fidelity_stderr:.4f} (< 1)")
    assert ok


def test_criterion_6_heralded_loss(report):
    rng = np.random.default_rng(6)
    g = nw.build_ring_network(3)
    loss = 0.01
    sched = nw.compile_schedule(g, [0, 1, 2])
    (route_ticks,) = nw.arrival_ticks(g, sched, "Dv")
    survival = (1 - loss) ** route_ticks
    state_err = prob_err = 0.0
    for _ in range(10):
        s = pr.logical_register(3, [0, 1, 2], random_amplitudes(rng, 3))
        clean = pr.cp_branches(s, g, [0, 1, 2])
        lossy = pr.cp_branches(s, g, [0, 1, 2], noise=nz.NoiseRealization(3, loss_per_tick=loss))
        ((_, a),) = lossy["Dv"].components
        ((_, b),) = clean["Dv"].components
        state_err = max(state_err, float(np.abs(a.atomic_vector() - b.atomic_vector()).max()))
        prob_err = max(prob_err, abs(lossy["Dv"].probability - clean["Dv"].probability * survival))
    ok = state_err <= 1e-12 and prob_err <= 1e-12
    report(6, ok, f"Dv state change {state_err:.1e} (tol 1e-12); P(Dv) vs 0.5*(0.99)^{route_ticks} "
                  f"= {0.5 * survival:.6f} error {prob_err:.1e}")
    assert ok


def test_criterion_7_timing(report):
    t = TimingParams(kappa_over_2pi=4e6, kappa_T=100)
    cpf, had = gate_time("CPF", t), gate_time("Hadamard", t)
    cpn = {n: gate_time("CPN", t, n) for n in (3, 4, 5)}
    quoted = {3: 12e-6, 4: 16e-6, 5: 20e-6}
    dark = dark_count_penalty(100, 1e-6)
    ok = (
        3e-6 <= cpf <= 5e-6
        and 6e-6 <= had <= 10e-6
        and all(abs(cpn[n] / quoted[n] - 1) <= 0.25 for n in quoted)
        and abs(dark / 1e-4 - 1) <= 0.01
    )
    report(7, ok, f"CPF {cpf * 1e6:.2f} us, Hadamard {had * 1e6:.2f} us, "
                  f"CP3/4/5 {cpn[3] * 1e6:.1f}/{cpn[4] * 1e6:.1f}/{cpn[5] * 1e6:.1f} us, dark penalty {dark:.4e}")
    assert ok


def test_criterion_8_equal_paths(report):
    bad = 0
    schedules = 0
    graphs = {}
    for n, subset, entry in oracle_cases(5):
        g = graphs.setdefault(n, nw.build_ring_network(n))
        sched = nw.compile_schedule(g, nw.ring_order(n, entry, subset), entry)
        schedules += 1
        bad += bool(nw.validate_equal_arrival(g, sched))
    g = graphs[3]
    sched = nw.compile_schedule(g, [0, 1, 2])
    e = g.edge("PADx2", "out")
    shortened = g.with_edge_length("PADx2", "out", e.length + 1)
    detected = bool(nw.validate_equal_arrival(shortened, sched))
    ok = bad == 0 and detected
    report(8, ok, f"{schedules - bad}/{schedules} compiled schedules have equal arrival; "
                  f"lengthened closing path detected: {detected}")
    assert ok


def test_criterion_9_performance(report):
    def cp5():
        g = nw.build_ring_network(5)
        s = pr.logical_register(5, list(range(5)), np.full(32, 32**-0.5))
        return pr.cp_branches(s, g, list(range(5)))

    t0 = time.perf_counter()
    branches = cp5()
    cp5_time = time.perf_counter() - t0
    _, worst, suite_time = run_oracle_suite()
    ok = cp5_time < 1 and suite_time < 30 and abs(branches["Dv"].probability - 0.5) < 1e-12 and worst <= 1e-10
    report(9, ok, f"CP5 exact run {cp5_time * 1e3:.1f} ms (< 1 s), oracle suite {suite_time:.1f} s (< 30 s)")
    assert ok
