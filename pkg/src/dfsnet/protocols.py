"""Logical qubits in two-atom decoherence-free pairs, and the heralded gates on them.

A logical qubit lives in the two atoms of one node: logical zero is
``|atom1 atom2> = |10>`` and logical one is ``|01>``. Collective dephasing
multiplies both by the same phase, so the encoding is blind to it.

The multi-qubit gate sends one photon through the participating nodes. A
``Dv`` click heralds the conditional phase flip on the all-ones logical
state; ``Dh`` heralds the identity; no click means the photon was lost.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import network as nw
from . import qstate as qs
from .qstate import JointState

SQRT_HALF = 1 / np.sqrt(2)
DIAGONAL_PHOTON = (SQRT_HALF, SQRT_HALF)
LEAK_TOL = 1e-10

DV_SUCCESS = "Dv-success"
DH_IDENTITY = "Dh-identity"
NOCLICK_LOSS = "NoClick-loss"
DARK_FALSE = "DarkFalse"

# local two-atom index is atom1 + 2 * atom2
_LOGICAL_HADAMARD = np.eye(4, dtype=complex)
_LOGICAL_HADAMARD[1:3, 1:3] = np.array([[1, 1], [1, -1]]) * SQRT_HALF


class LeakageError(qs.StateError):
    """A node expected in the logical subspace carries |00> or |11> amplitude."""


class GateExhausted(RuntimeError):
    def __init__(self, outcome: HeraldedOutcome) -> None:
        super().__init__(f"no success heralded after {outcome.attempts_used} attempts")
        self.outcome = outcome


@dataclass
class HeraldedOutcome:
    """Record of one heralded gate run.

    ``which`` is the true event; ``apparent`` is what the detectors show
    (a dark count can fake a click). ``probability`` is the probability of
    the sampled event in the final attempt.
    """

    which: str
    apparent: str
    probability: float
    post_state: JointState
    attempts_used: int = 1
    success: bool = False

    def to_json(self) -> dict:
        return {
            "which": self.which,
            "apparent": self.apparent,
            "probability": self.probability,
            "attempts": self.attempts_used,
            "success": self.success,
        }


def logical_atom_string(n_nodes: int, values: Mapping[int, int] | Sequence[int]) -> int:
    """Atom string for a logical basis assignment (missing nodes default to logical zero)."""
    if not isinstance(values, Mapping):
        values = dict(enumerate(values))
    pairs = [(1, 0) if values.get(n, 0) == 0 else (0, 1) for n in range(n_nodes)]
    return qs.pack_atoms(pairs)


def logical_basis_state(n_nodes: int, values: Mapping[int, int] | Sequence[int]) -> JointState:
    return qs.new_state(n_nodes, logical_atom_string(n_nodes, values))


def logical_register(
    n_nodes: int, nodes: Sequence[int], amplitudes: Sequence[complex], rest: Mapping[int, int] | None = None
) -> JointState:
    """Arbitrary (possibly entangled) logical state of ``nodes``.

    ``amplitudes[m]`` multiplies the basis state whose binary expansion gives
    the logical values of ``nodes`` with the first node most significant, so
    for three nodes ``amplitudes`` lists the eight coefficients of
    ``|000>, |001>, ..., |111>``. Other nodes sit in ``rest`` (default zero).
    """
    amps = np.asarray(amplitudes, dtype=complex)
    k = len(nodes)
    if amps.shape != (2**k,):
        raise ValueError(f"need {2**k} amplitudes for {k} nodes")
    if abs(np.vdot(amps, amps).real - 1) > qs.NORM_TOL:
        raise ValueError("logical amplitudes must be normalized")
    vec = np.zeros(4**n_nodes, dtype=complex)
    for m, bits in enumerate(itertools.product((0, 1), repeat=k)):
        values = dict(rest or {})
        values.update(zip(nodes, bits))
        vec[logical_atom_string(n_nodes, values)] += amps[m]
    return qs.from_atomic_vector(n_nodes, vec)


def logical_amplitudes(state: JointState, nodes: Sequence[int], rest: Mapping[int, int] | None = None) -> np.ndarray:
    """Inverse of :func:`logical_register` for the no-photon part of ``state``."""
    vec = state.atomic_vector()
    out = np.zeros(2 ** len(nodes), dtype=complex)
    for m, bits in enumerate(itertools.product((0, 1), repeat=len(nodes))):
        values = dict(rest or {})
        values.update(zip(nodes, bits))
        out[m] = vec[logical_atom_string(state.n_nodes, values)]
    return out


def leakage(state: JointState, node: int) -> float:
    """Largest amplitude modulus on ``|00>`` or ``|11>`` of ``node``."""
    worst = 0.0
    for (_, atoms), amp in state.amplitudes.items():
        if qs.node_bits(atoms, node) in ((0, 0), (1, 1)):
            worst = max(worst, abs(amp))
    return worst


def _require_logical(state: JointState, nodes: Sequence[int]) -> None:
    for n in nodes:
        if leakage(state, n) >= LEAK_TOL:
            raise LeakageError(f"node {n} is outside the logical subspace")


def encode_logical(state: JointState, node: int, alpha: complex, beta: complex) -> JointState:
    """Put the two atoms of ``node`` into ``alpha |10> + beta |01>``.

    The node must currently be in one basis configuration across the whole
    state (a product with the rest), as after initialization.
    """
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-12:
        raise ValueError("(alpha, beta) must be normalized")
    configs = {qs.node_bits(atoms, node) for _, atoms in state.amplitudes}
    if len(configs) != 1:
        raise qs.StateError(f"node {node} is not in a known product basis state")
    shift = 2 * node
    mask = 3 << shift
    out: dict = {}
    for (mode, atoms), amp in state.amplitudes.items():
        base = atoms & ~mask
        for local, coeff in ((1, alpha), (2, beta)):
            if coeff != 0:
                key = (mode, base | (local << shift))
                out[key] = out.get(key, 0j) + coeff * amp
    return JointState(state.n_nodes, out, set(state.modes))


def encode_bare(state: JointState, node: int, alpha: complex, beta: complex) -> JointState:
    """Comparison encoding with one atom per logical qubit: ``alpha |10> + beta |00>``.

    Atom 1 carries the qubit and atom 2 is a spectator in ``|0>``. The gate
    network acts on it exactly as on the paired encoding, but collective
    dephasing now imprints a relative phase.
    """
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-12:
        raise ValueError("(alpha, beta) must be normalized")
    configs = {qs.node_bits(atoms, node) for _, atoms in state.amplitudes}
    if len(configs) != 1:
        raise qs.StateError(f"node {node} is not in a known product basis state")
    shift = 2 * node
    mask = 3 << shift
    out: dict = {}
    for (mode, atoms), amp in state.amplitudes.items():
        base = atoms & ~mask
        for local, coeff in ((1, alpha), (0, beta)):
            if coeff != 0:
                key = (mode, base | (local << shift))
                out[key] = out.get(key, 0j) + coeff * amp
    return JointState(state.n_nodes, out, set(state.modes))


def logical_hadamard(state: JointState, node: int) -> JointState:
    """Hadamard on the logical qubit of ``node``; ``|00>`` and ``|11>`` are left alone."""
    _require_logical(state, [node])
    return qs.apply_node_unitary(state, node, _LOGICAL_HADAMARD)


def _resolve_dark(outcome: str, dark: Mapping[str, bool]) -> tuple[str, str]:
    """Map a true detector outcome to ``(which, apparent)`` given dark-count flags."""
    if outcome == "Dv":
        return DV_SUCCESS, "Dv"
    if outcome == "Dh":
        return DH_IDENTITY, "Dh"
    fired = [d for d in nw.DETECTORS if dark.get(d)]
    if len(fired) == 1:
        return DARK_FALSE, fired[0]
    return NOCLICK_LOSS, qs.NO_CLICK


def _run(state, graph, participants, entry, noise, check_leakage=True):
    parts = nw.ring_order(graph.n_nodes, participants[0] if entry is None else entry, participants)
    if check_leakage:
        _require_logical(state, parts)
    schedule = nw.compile_schedule(graph, parts, parts[0] if entry is None else entry)
    flying = nw.inject_photon(state, graph, schedule.entry, DIAGONAL_PHOTON)
    return nw.propagate(flying, graph, schedule, noise=noise)


def cp_branches(
    state: JointState,
    graph: nw.NetworkGraph,
    participants: Sequence[int],
    entry: int | None = None,
    noise=None,
    check_leakage: bool = True,
) -> dict[str, qs.Branch]:
    """Every herald outcome of one photon run, exactly.

    The ``Dv`` branch has the overall minus sign of the raw photon amplitude
    removed, so its state equals the conditional phase flip of the input.
    """
    result = _run(state, graph, participants, entry, noise, check_leakage)
    branches = qs.detector_branches(result.state, nw.DETECTORS)
    if "Dv" in branches:
        b = branches["Dv"]
        b.components = [(w, _negate(s)) for w, s in b.components]
    return branches


def _negate(state: JointState) -> JointState:
    return JointState(state.n_nodes, {k: -a for k, a in state.amplitudes.items()}, set(state.modes))


def u_cp_subset(
    state: JointState,
    graph: nw.NetworkGraph,
    participants: Sequence[int],
    entry: int | None = None,
    rng: np.random.Generator | None = None,
    noise=None,
    check_leakage: bool = True,
) -> HeraldedOutcome:
    """One heralded attempt of the conditional phase gate on ``participants``.

    Participants are visited in clockwise order starting at ``entry``
    (default: the first listed node).
    """
    rng = np.random.default_rng() if rng is None else rng
    result = _run(state, graph, participants, entry, noise, check_leakage)
    outcome, prob, collapsed = qs.measure_detectors(result.state, nw.DETECTORS, rng)
    which, apparent = _resolve_dark(outcome, getattr(noise, "dark_flags", {}) or {})
    if outcome == "Dv":
        collapsed = _negate(collapsed)
    return HeraldedOutcome(which, apparent, prob, collapsed, 1, apparent == "Dv")


def repeat_until_success(
    state: JointState,
    graph: nw.NetworkGraph,
    participants: Sequence[int],
    entry: int | None = None,
    max_attempts: int = 100,
    rng: np.random.Generator | None = None,
    noise_for_attempt: Callable[[int], object] | None = None,
    check_leakage: bool = True,
) -> HeraldedOutcome:
    """Repeat the heralded gate until ``Dv`` clicks or ``max_attempts`` run out.

    After ``Dh`` the register is untouched and after a lost photon it is
    whatever the loss left, so the next attempt starts from that state.
    ``noise_for_attempt(k)`` supplies a fresh noise realization per attempt.
    On exhaustion the outcome has ``success=False``.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    current = state
    for attempt in range(1, max_attempts + 1):
        noise = noise_for_attempt(attempt) if noise_for_attempt else None
        out = u_cp_subset(current, graph, participants, entry, rng, noise, check_leakage)
        out.attempts_used = attempt
        if out.apparent == "Dv":
            out.success = True
            return out
        current = out.post_state
    return out


def toffoli(
    state: JointState,
    graph: nw.NetworkGraph,
    controls: tuple[int, int],
    target: int,
    max_attempts: int = 100,
    rng: np.random.Generator | None = None,
    noise_for_attempt: Callable[[int], object] | None = None,
) -> HeraldedOutcome:
    """Toffoli on logical qubits: Hadamard on the target, heralded CPZ on all three, Hadamard again.

    Raises :class:`GateExhausted` if no success is heralded in time.
    """
    i, j = controls
    if len({i, j, target}) != 3:
        raise ValueError("controls and target must be three distinct nodes")
    parts = nw.ring_order(graph.n_nodes, i, (i, j, target))
    state = logical_hadamard(state, target)
    out = repeat_until_success(state, graph, parts, i, max_attempts, rng, noise_for_attempt)
    if not out.success:
        raise GateExhausted(out)
    out.post_state = logical_hadamard(out.post_state, target)
    return out


def readout_logical(state: JointState, node: int, rng: np.random.Generator) -> tuple[str, float, JointState]:
    """Measure both atoms of ``node``; value is ``"0"``, ``"1"``, ``"leak00"`` or ``"leak11"``."""
    labels = {(1, 0): "0", (0, 1): "1", (0, 0): "leak00", (1, 1): "leak11"}
    weights = dict.fromkeys(labels.values(), 0.0)
    for (_, atoms), amp in state.amplitudes.items():
        weights[labels[qs.node_bits(atoms, node)]] += abs(amp) ** 2
    names = list(weights)
    probs = np.array([weights[n] for n in names])
    value = names[rng.choice(len(names), p=probs / probs.sum())]
    keep = {k: a for k, a in state.amplitudes.items() if labels[qs.node_bits(k[1], node)] == value}
    scale = 1 / np.sqrt(sum(abs(a) ** 2 for a in keep.values()))
    collapsed = JointState(state.n_nodes, {k: a * scale for k, a in keep.items()}, set(state.modes))
    return value, float(weights[value] / probs.sum()), collapsed


def conditioned_maps(graph: nw.NetworkGraph, schedule: nw.SwitchSchedule, rest: int = 0) -> dict[str, np.ndarray]:
    """Logical Kraus matrix of each detector outcome, measured with the propagation engine.

    Every logical basis input of the schedule's participants is propagated
    separately; the output columns are read back on the logical basis.
    Outcomes fed by several distinguishable detector modes are rejected.
    """
    parts = list(schedule.participants)
    k = len(parts)
    n = graph.n_nodes
    rest_values = {m: rest for m in range(n) if m not in parts}
    maps: dict[str, np.ndarray] = {}
    for col, bits in enumerate(itertools.product((0, 1), repeat=k)):
        values = dict(rest_values)
        values.update(zip(parts, bits))
        state = logical_basis_state(n, values)
        state = nw.inject_photon(state, graph, schedule.entry, DIAGONAL_PHOTON)
        result = nw.propagate(state, graph, schedule)
        for name, per_sink in result.detector_amplitudes.items():
            if len(per_sink) > 1:
                raise ValueError(f"outcome {name} is fed by several distinguishable modes")
            vec = next(iter(per_sink.values()))
            mat = maps.setdefault(name, np.zeros((2**k, 2**k), dtype=complex))
            for row, out_bits in enumerate(itertools.product((0, 1), repeat=k)):
                out_values = dict(rest_values)
                out_values.update(zip(parts, out_bits))
                mat[row, col] = vec[logical_atom_string(n, out_values)]
    return maps


def ideal_cpz(state: JointState, nodes: Sequence[int], encoding: str = "dfs") -> JointState:
    """Reference conditional phase flip: minus sign on the all-ones logical string of ``nodes``.

    Logical one is ``|01>`` in the paired encoding and ``|00>`` in the bare one.
    """
    if encoding not in ("dfs", "bare"):
        raise ValueError(f"unknown encoding {encoding!r}")
    mask = 0
    target = 0
    for n in nodes:
        mask |= 3 << (2 * n)
        if encoding == "dfs":
            target |= 1 << (2 * n + 1)
    out = {k: (-a if (k[1] & mask) == target else a) for k, a in state.amplitudes.items()}
    return JointState(state.n_nodes, out, set(state.modes))


def target_state(state: JointState, op: str, nodes: Sequence[int]) -> JointState:
    """Ideal output of ``op`` (``"cpz"`` or ``"toffoli"`` with target last) on ``state``."""
    if op == "cpz":
        return ideal_cpz(state, nodes)
    if op == "toffoli":
        k = nodes[-1]
        return logical_hadamard(ideal_cpz(logical_hadamard(state, k), nodes), k)
    raise ValueError(f"unknown op {op!r}")


__all__ = [
    "DARK_FALSE",
    "DH_IDENTITY",
    "DV_SUCCESS",
    "NOCLICK_LOSS",
    "GateExhausted",
    "HeraldedOutcome",
    "LeakageError",
    "conditioned_maps",
    "cp_branches",
    "encode_bare",
    "encode_logical",
    "ideal_cpz",
    "leakage",
    "logical_amplitudes",
    "logical_atom_string",
    "logical_basis_state",
    "logical_hadamard",
    "logical_register",
    "readout_logical",
    "repeat_until_success",
    "target_state",
    "toffoli",
    "u_cp_subset",
]

