"""Noise realizations and Monte Carlo estimates of heralded gate quality.

A :class:`NoiseRealization` is one draw of every random ingredient of a
run: collective phases per node, loss strength, path phases on the
combining paths, scattering phase error and dark-count flags. It is passed
straight to :func:`dfsnet.network.propagate`, which reads the attributes it
understands.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import network as nw
from . import protocols as pr
from . import qstate as qs
from .qstate import JointState
from .timing import TimingParams, dark_count_penalty, default_detection_window

SCOPES = ("per-node", "global")
TIMINGS = ("boundaries-only", "include-sandwich-window")


@dataclass(frozen=True)
class NoiseParams:
    """Noise knobs. Angles in radians, rates in Hz, windows in seconds.

    ``loss_per_element`` is the amplitude-diversion probability per unit of
    optical delay (one network tick). ``detection_window=None`` means a
    quarter of the single-pulse gate time.
    """

    dephasing_sigma: float = 0.0
    dephasing_scope: str = "per-node"
    dephasing_timing: str = "boundaries-only"
    loss_per_element: float = 0.0
    path_jitter_sigma: float = 0.0
    dark_rate: float = 0.0
    detection_window: float | None = None
    scattering_phase_error: float = 0.0

    def __post_init__(self) -> None:
        if self.dephasing_scope not in SCOPES:
            raise ValueError(f"dephasing_scope must be one of {SCOPES}")
        if self.dephasing_timing not in TIMINGS:
            raise ValueError(f"dephasing_timing must be one of {TIMINGS}")
        if not 0 <= self.loss_per_element < 1:
            raise ValueError("loss_per_element must be in [0, 1)")
        for name in ("dephasing_sigma", "path_jitter_sigma", "dark_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.detection_window is not None and self.detection_window < 0:
            raise ValueError("detection_window must be non-negative")

    def window(self, timing: TimingParams | None = None) -> float:
        return default_detection_window(timing) if self.detection_window is None else self.detection_window


@dataclass
class NoiseRealization:
    """One sampled set of noise values for an ``n_nodes`` network."""

    n_nodes: int
    dephasing_phases: tuple[float, ...] = ()
    window_phases: dict[int, float] = field(default_factory=dict)
    loss_per_tick: float = 0.0
    path_phases: dict[str, float] = field(default_factory=dict)
    scattering_phase_error: float = 0.0
    dark_flags: dict[str, bool] = field(default_factory=dict)

    @property
    def survival_per_tick(self) -> float:
        return 1 - self.loss_per_tick

    @property
    def is_trivial(self) -> bool:
        return (
            not any(self.dephasing_phases)
            and not any(self.window_phases.values())
            and self.loss_per_tick == 0
            and not any(self.path_phases.values())
            and self.scattering_phase_error == 0
            and not any(self.dark_flags.values())
        )


def apply_collective_dephasing(state: JointState, node: int, phi: float) -> JointState:
    """Both atoms of ``node`` pick up ``exp(i phi)`` on ``|1>``."""
    if not 0 <= node < state.n_nodes:
        raise ValueError(f"node {node} out of range")
    if phi == 0:
        return state.copy()
    out = {}
    for (mode, atoms), amp in state.amplitudes.items():
        a1, a2 = qs.node_bits(atoms, node)
        out[(mode, atoms)] = amp * np.exp(1j * phi * (a1 + a2))
    return JointState(state.n_nodes, out, set(state.modes))


def apply_boundary_dephasing(state: JointState, realization: NoiseRealization) -> JointState:
    for node, phi in enumerate(realization.dephasing_phases):
        state = apply_collective_dephasing(state, node, phi)
    return state


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_realization(
    params: NoiseParams, seed, n_nodes: int, timing: TimingParams | None = None
) -> NoiseRealization:
    """Draw one realization; deterministic in ``(params, seed)``.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts, or a
    generator. Draws happen in a fixed order so adding a knob never
    reshuffles the others.
    """
    rng = _rng(seed)

    def phases(sigma: float) -> np.ndarray:
        if params.dephasing_scope == "global":
            draw = rng.normal(0.0, sigma) if sigma else 0.0
            return np.full(n_nodes, draw)
        return rng.normal(0.0, sigma, n_nodes) if sigma else np.zeros(n_nodes)

    boundary = phases(params.dephasing_sigma)
    in_window = params.dephasing_timing == "include-sandwich-window"
    window = phases(params.dephasing_sigma if in_window else 0.0)
    path_ids = [f"PADc{n}" for n in range(n_nodes)] + [f"PADx{n}" for n in range(n_nodes)]
    if params.path_jitter_sigma:
        jitter = rng.normal(0.0, params.path_jitter_sigma, len(path_ids))
    else:
        jitter = np.zeros(len(path_ids))
    p_dark = dark_count_penalty(params.dark_rate, params.window(timing))
    flags = rng.random(len(nw.DETECTORS)) < p_dark if p_dark else np.zeros(len(nw.DETECTORS), bool)
    return NoiseRealization(
        n_nodes=n_nodes,
        dephasing_phases=tuple(float(x) for x in boundary),
        window_phases={n: float(p) for n, p in enumerate(window) if p},
        loss_per_tick=params.loss_per_element,
        path_phases={pid: float(p) for pid, p in zip(path_ids, jitter) if p},
        scattering_phase_error=params.scattering_phase_error,
        dark_flags={d: bool(f) for d, f in zip(nw.DETECTORS, flags)},
    )


@dataclass(frozen=True)
class GateScenario:
    """A heralded gate to be studied under noise.

    ``op`` is ``"cpz"`` on all ``participants`` or ``"toffoli"`` with the
    last participant as target. ``amplitudes`` is the logical input (first
    participant most significant); ``None`` means the uniform superposition.
    ``encoding="bare"`` stores one qubit per node as ``alpha|10> + beta|00>``.
    """

    n_nodes: int
    participants: tuple[int, ...]
    entry: int | None = None
    op: str = "cpz"
    encoding: str = "dfs"
    amplitudes: tuple[complex, ...] | None = None
    combiner: str = "ideal"
    max_attempts: int = 100

    def __post_init__(self) -> None:
        if self.op not in ("cpz", "toffoli"):
            raise ValueError(f"unknown op {self.op!r}")
        if self.encoding not in ("dfs", "bare"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if self.op == "toffoli" and (len(self.participants) != 3 or self.encoding != "dfs"):
            raise ValueError("toffoli needs three participants in the paired encoding")
        if not self.participants or len(set(self.participants)) != len(self.participants):
            raise ValueError("participants must be distinct and non-empty")
        if any(not 0 <= p < self.n_nodes for p in self.participants):
            raise ValueError("participant out of range")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")

    @property
    def entry_node(self) -> int:
        return self.participants[0] if self.entry is None else self.entry

    @property
    def ring_participants(self) -> list[int]:
        return nw.ring_order(self.n_nodes, self.entry_node, self.participants)

    def logical_amplitudes(self) -> np.ndarray:
        k = len(self.participants)
        if self.amplitudes is None:
            return np.full(2**k, 2 ** (-k / 2), dtype=complex)
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**k,):
            raise ValueError(f"need {2**k} amplitudes")
        return amps / np.linalg.norm(amps)

    def basis_string(self, m: int) -> int:
        """Atom string of logical basis state ``m`` (other nodes in ``|10>``)."""
        k = len(self.participants)
        one = (0, 1) if self.encoding == "dfs" else (0, 0)
        pairs = [(1, 0)] * self.n_nodes
        for pos, node in enumerate(self.participants):
            if (m >> (k - 1 - pos)) & 1:
                pairs[node] = one
        return qs.pack_atoms(pairs)

    def initial_state(self) -> JointState:
        amps = self.logical_amplitudes()
        state = pr.logical_register(self.n_nodes, list(self.participants), amps)
        if self.encoding == "dfs":
            return state
        # same amplitudes with logical one stored as |00> instead of |01>
        out = {}
        for (mode, atoms), a in state.amplitudes.items():
            for n in self.participants:
                if qs.node_bits(atoms, n) == (0, 1):
                    atoms &= ~(1 << (2 * n + 1))
            out[(mode, atoms)] = a
        return JointState(self.n_nodes, out, set(state.modes))

    def ideal_output(self, state: JointState) -> JointState:
        if self.op == "cpz":
            return pr.ideal_cpz(state, self.participants, self.encoding)
        return pr.target_state(state, "toffoli", list(self.participants))

    def graph(self) -> nw.NetworkGraph:
        return nw.build_ring_network(self.n_nodes, combiner=self.combiner)


@dataclass
class TrialOutcome:
    success_prob: float
    fidelity: float | None
    attempts: int | None


@dataclass
class MonteCarloResult:
    trials: int
    success_prob: float
    success_stderr: float
    fidelity_mean: float
    fidelity_stderr: float
    attempt_histogram: dict[str, int]
    conditioned_trials: int

    def to_json(self) -> dict:
        return asdict(self)


def _mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    arr = np.asarray(values, dtype=float)
    err = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return float(arr.mean()), err


def _mixture_fidelity(components: Iterable[tuple[float, JointState]], target: JointState) -> float:
    return float(sum(w * qs.fidelity_up_to_global_phase(s, target) for w, s in components))


def run_trial(
    scenario: GateScenario,
    params: NoiseParams,
    rng: np.random.Generator,
    graph: nw.NetworkGraph | None = None,
    timing: TimingParams | None = None,
) -> TrialOutcome:
    """One realization, with the herald branches enumerated exactly.

    The success probability is the probability that ``Dv`` appears to click,
    including a dark count on ``Dv`` when the photon was lost. The fidelity
    is that of the conditioned register (a mixture if several modes fed the
    apparent click) against the ideal output of the noiseless input.
    """
    graph = scenario.graph() if graph is None else graph
    real = sample_realization(params, rng, scenario.n_nodes, timing)
    start = scenario.initial_state()
    ideal = scenario.ideal_output(start)
    state = apply_boundary_dephasing(start, real)
    target = scenario.participants[-1]
    if scenario.op == "toffoli":
        state = pr.logical_hadamard(state, target)
    branches = pr.cp_branches(
        state, graph, scenario.ring_participants, scenario.entry_node, noise=real,
        check_leakage=scenario.encoding == "dfs",
    )
    parts: list[tuple[float, JointState]] = []
    if "Dv" in branches:
        b = branches["Dv"]
        parts += [(b.probability * w, s) for w, s in b.components]
    fired = [d for d in nw.DETECTORS if real.dark_flags.get(d)]
    if fired == ["Dv"] and qs.NO_CLICK in branches:
        b = branches[qs.NO_CLICK]
        parts += [(b.probability * w, s) for w, s in b.components]
    p = float(sum(w for w, _ in parts))
    if p <= 0:
        return TrialOutcome(0.0, None, None)
    if scenario.op == "toffoli":
        parts = [(w, pr.logical_hadamard(s, target)) for w, s in parts]
    fid = _mixture_fidelity(((w / p, s) for w, s in parts), ideal)
    attempts = int(rng.geometric(min(p, 1.0)))
    return TrialOutcome(p, fid, attempts)


def _node_operator(n_nodes: int, node: int, u: np.ndarray) -> np.ndarray:
    """Dense ``4**N`` matrix of a two-atom unitary on ``node`` (node 0 is the lowest digit)."""
    return np.kron(np.kron(np.eye(4 ** (n_nodes - 1 - node)), u), np.eye(4**node))


def run_batch(
    scenario: GateScenario,
    params: NoiseParams,
    rngs: Sequence[np.random.Generator],
    graph: nw.NetworkGraph | None = None,
    timing: TimingParams | None = None,
) -> list[TrialOutcome]:
    """Same as :func:`run_trial` for each generator, with all runs pushed through the network at once."""
    graph = scenario.graph() if graph is None else graph
    n = scenario.n_nodes
    reals = [sample_realization(params, rng, n, timing) for rng in rngs]
    batch = len(reals)
    reg = nw._register(n)
    start = scenario.initial_state()
    base = start.atomic_vector()
    ideal = scenario.ideal_output(start).atomic_vector()
    phases = np.array([r.dephasing_phases for r in reals]).reshape(batch, n)
    exc = np.array(reg.excitations)
    inputs = base * np.exp(1j * phases @ exc)
    if scenario.op == "toffoli":
        had = _node_operator(n, scenario.participants[-1], pr._LOGICAL_HADAMARD)
        inputs = inputs @ had.T
        ideal = had @ ideal
    path_ids = sorted({pid for r in reals for pid in r.path_phases})
    windows = sorted({m for r in reals for m in r.window_phases})
    parts = scenario.ring_participants
    schedule = nw.compile_schedule(graph, parts, scenario.entry_node)
    result = nw.propagate_batch(
        inputs, graph, schedule, pr.DIAGONAL_PHOTON,
        loss_per_tick=params.loss_per_element,
        path_phases={pid: [r.path_phases.get(pid, 0.0) for r in reals] for pid in path_ids},
        window_phases={m: [r.window_phases.get(m, 0.0) for r in reals] for m in windows},
        scattering_phase_error=params.scattering_phase_error,
    )

    def tally(outcome: str) -> tuple[np.ndarray, np.ndarray]:
        prob, overlap = np.zeros(batch), np.zeros(batch)
        for v in result.outcome_vectors(outcome):
            prob += np.sum(np.abs(v) ** 2, axis=1)
            overlap += np.abs(v @ ideal.conj()) ** 2
        return prob, overlap

    p_dv, o_dv = tally("Dv")
    p_nc, o_nc = tally(qs.NO_CLICK)
    fake = np.array([[d for d in nw.DETECTORS if r.dark_flags.get(d)] == ["Dv"] for r in reals])
    p = p_dv + fake * p_nc
    overlap = o_dv + fake * o_nc
    outcomes = []
    for b, rng in enumerate(rngs):
        if p[b] <= 0:
            outcomes.append(TrialOutcome(0.0, None, None))
            continue
        fid = min(1.0, float(overlap[b] / p[b]))
        outcomes.append(TrialOutcome(float(p[b]), fid, int(rng.geometric(min(p[b], 1.0)))))
    return outcomes


def monte_carlo_fidelity(
    scenario: GateScenario,
    params: NoiseParams,
    trials: int,
    seed: int = 0,
    timing: TimingParams | None = None,
    batch_size: int = 1000,
) -> MonteCarloResult:
    """Average success probability and conditioned fidelity over ``trials`` realizations.

    Trial ``t`` draws from its own generator seeded by ``(seed, t)``, so
    results do not depend on evaluation order or batching. The attempt
    histogram counts a repeat-until-success attempt number drawn per trial
    from the trial's success probability; runs needing more than
    ``max_attempts`` land in ``"exhausted"``. ``batch_size=0`` evaluates
    trials one at a time through the sparse-state protocol functions.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    graph = scenario.graph()
    rngs = [np.random.default_rng([seed, t]) for t in range(trials)]
    if batch_size <= 0:
        outcomes = [run_trial(scenario, params, rng, graph, timing) for rng in rngs]
    else:
        outcomes = []
        for lo in range(0, trials, batch_size):
            outcomes += run_batch(scenario, params, rngs[lo : lo + batch_size], graph, timing)
    return merge_outcomes(outcomes, scenario.max_attempts)


def merge_outcomes(outcomes: Sequence[TrialOutcome], max_attempts: int) -> MonteCarloResult:
    succ, succ_err = _mean_stderr([o.success_prob for o in outcomes])
    fids = [o.fidelity for o in outcomes if o.fidelity is not None]
    fid, fid_err = _mean_stderr(fids)
    hist: Counter[str] = Counter()
    for o in outcomes:
        if o.attempts is None or o.attempts > max_attempts:
            hist["exhausted"] += 1
        else:
            hist[str(o.attempts)] += 1
    ordered = dict(sorted(hist.items(), key=lambda kv: (kv[0] == "exhausted", int(kv[0]) if kv[0].isdigit() else 0)))
    return MonteCarloResult(len(outcomes), succ, succ_err, fid, fid_err, ordered, len(fids))


def bare_expected_fidelity(sigma: float, n_qubits: int) -> float:
    """Mean fidelity of a uniform bare-encoded register after one Gaussian phase per qubit."""
    return ((1 + math.exp(-(sigma**2) / 2)) / 2) ** n_qubits


SWEEP_PARAMS = (
    "dephasing_sigma",
    "loss_per_element",
    "path_jitter_sigma",
    "dark_rate",
    "detection_window",
    "scattering_phase_error",
)


def sweep(
    scenario: GateScenario,
    params: NoiseParams,
    parameter: str,
    values: Sequence[float],
    trials: int,
    seed: int = 0,
    timing: TimingParams | None = None,
) -> list[dict]:
    """Monte Carlo estimate for each value of one noise parameter, in the given order."""
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"cannot sweep {parameter!r}; choose from {SWEEP_PARAMS}")
    rows = []
    for value in values:
        res = monte_carlo_fidelity(scenario, replace(params, **{parameter: value}), trials, seed, timing)
        rows.append(
            {
                "parameter": parameter,
                "value": value,
                "success_prob": res.success_prob,
                "fidelity_mean": res.fidelity_mean,
                "fidelity_stderr": res.fidelity_stderr,
                "trials": res.trials,
            }
        )
    return rows


SWEEP_COLUMNS = ("parameter", "value", "success_prob", "fidelity_mean", "fidelity_stderr", "trials")


def sweep_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()
