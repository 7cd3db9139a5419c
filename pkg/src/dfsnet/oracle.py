"""Brute-force reference for the conditioned logical maps of a network run.

For every logical basis input the photon is walked through the graph one
component at a time by a memoized recursion over
``(element, port, polarization, tick, atom string)``. Nothing here shares
routing code with :mod:`dfsnet.network`; only the graph data and the element
transfer tables from :mod:`dfsnet.optics` are reused.
"""

from __future__ import annotations

import functools
import itertools
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .optics import transfer
from .qstate import Pol

SQRT_HALF = 1 / np.sqrt(2)


class GlobalPhaseMismatch(AssertionError):
    def __init__(self, deviation: float, tol: float) -> None:
        super().__init__(f"matrices differ by {deviation:.3e} after phase alignment (tol {tol:.1e})")
        self.deviation = deviation


@dataclass
class LogicalMap:
    """Detector outcome -> Kraus matrices on the logical basis of the participants.

    Each outcome may be fed by several distinguishable detector modes (tick,
    port, polarization); ``kraus[outcome][tag]`` is one ``2^k x 2^k`` matrix
    per mode. Basis index bit ``k-1-m`` is participant ``m`` (the first
    participant is the most significant bit), ``1`` meaning logical one.
    """

    participants: tuple[int, ...]
    kraus: dict[str, dict[tuple, np.ndarray]] = field(default_factory=dict)
    leakage: float = 0.0

    @property
    def dim(self) -> int:
        return 2 ** len(self.participants)

    def matrix(self, outcome: str) -> np.ndarray:
        """The single Kraus matrix of ``outcome`` (zero if it never fires)."""
        mats = self.kraus.get(outcome, {})
        if len(mats) > 1:
            raise ValueError(f"outcome {outcome} has {len(mats)} distinguishable modes")
        if not mats:
            return np.zeros((self.dim, self.dim), dtype=complex)
        return next(iter(mats.values()))

    def probabilities(self, outcome: str) -> np.ndarray:
        """Outcome probability for each logical basis input."""
        total = np.zeros(self.dim)
        for m in self.kraus.get(outcome, {}).values():
            total += np.sum(np.abs(m) ** 2, axis=0)
        return total

    def completeness(self) -> np.ndarray:
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for mats in self.kraus.values():
            for m in mats.values():
                total += m.conj().T @ m
        return total


def _basis_string(n_nodes: int, values: dict[int, int], rest: int) -> int:
    index = 0
    for n in range(n_nodes):
        v = values.get(n, rest)
        index |= (1 << (2 * n)) if v == 0 else (1 << (2 * n + 1))
    return index


def _decode(n_nodes: int, atoms: int, participants: Sequence[int], rest: int) -> int | None:
    """Logical basis index of an atom string, or ``None`` if it left the code space."""
    index = 0
    k = len(participants)
    for n in range(n_nodes):
        a1, a2 = (atoms >> (2 * n)) & 1, (atoms >> (2 * n + 1)) & 1
        if (a1, a2) == (1, 0):
            v = 0
        elif (a1, a2) == (0, 1):
            v = 1
        else:
            return None
        if n in participants:
            index |= v << (k - 1 - participants.index(n))
        elif v != rest:
            return None
    return index


def walk(graph, schedule, atoms: int, pol_amplitudes=(SQRT_HALF, SQRT_HALF)) -> dict[tuple, complex]:
    """Amplitudes on every sink for one atom basis string.

    Keys are ``(sink name, tick, port, pol, final atom string)``.
    """
    entry = schedule.entry
    first = graph.edges[(graph.sources[entry], "out")]
    hooks = schedule.hooks

    @functools.lru_cache(maxsize=None)
    def response(eid: str, port: str, pol: Pol, t: int, a: int) -> tuple[tuple[tuple, complex], ...]:
        el = graph.elements[eid]
        if el.kind == "DET":
            return (((el.name, t, port, pol.value, a), 1.0 + 0j),)
        factor = 1.0 + 0j
        if el.kind == "CAVITY" and el.node in hooks:
            bit2 = 1 << (2 * el.node + 1)
            both = 3 << (2 * el.node)
            for op in hooks[el.node]:
                if op == "sx2":
                    a ^= bit2
                elif op == "scatter" and pol is Pol.H and a & both == both:
                    factor = -factor
        acc: dict[tuple, complex] = {}
        if el.kind == "P45":
            rejected = (SQRT_HALF if pol is Pol.H else -SQRT_HALF) * factor
            key = ("Lost", t, eid, "rejected", a)
            acc[key] = acc.get(key, 0) + rejected
        setting = schedule.settings.get(eid)
        dt = el.delay(setting)
        for out_port, out_pol, f in transfer(el, setting, port, pol):
            edge = graph.edges[(eid, out_port)]
            for key, amp in response(edge.dst, edge.dst_port, out_pol, t + dt + edge.length, a):
                acc[key] = acc.get(key, 0) + f * factor * amp
        return tuple(acc.items())

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 20 * len(graph.elements) + 1000))
    try:
        total: dict[tuple, complex] = {}
        for pol, amp in zip((Pol.H, Pol.V), pol_amplitudes):
            if amp == 0:
                continue
            for key, val in response(first.dst, first.dst_port, pol, first.length, atoms):
                total[key] = total.get(key, 0) + amp * val
    finally:
        sys.setrecursionlimit(limit)
    return total


def enumerate_logical_map(graph, schedule, participants: Sequence[int] | None = None, rest: int = 0) -> LogicalMap:
    """Conditioned logical maps of one photon run, by brute-force enumeration.

    Non-participant nodes are held in logical ``rest``. Amplitude ending on
    atom strings outside the code space is summed into ``leakage``.
    """
    participants = tuple(schedule.participants if participants is None else participants)
    if len(participants) > 5:
        raise ValueError("the oracle is limited to five participants")
    k = len(participants)
    n = graph.n_nodes
    result = LogicalMap(participants)
    for col, bits in enumerate(itertools.product((0, 1), repeat=k)):
        atoms = _basis_string(n, dict(zip(participants, bits)), rest)
        for (name, t, port, pol, a_out), amp in walk(graph, schedule, atoms).items():
            if abs(amp) < 1e-15:
                continue
            row = _decode(n, a_out, list(participants), rest)
            if row is None:
                result.leakage += abs(amp) ** 2
                continue
            mats = result.kraus.setdefault(name, {})
            tag = (t, port, pol)
            if tag not in mats:
                mats[tag] = np.zeros((2**k, 2**k), dtype=complex)
            mats[tag][row, col] += amp
    return result


def standard_target(name: str, n: int | None = None) -> np.ndarray:
    """Textbook gates on the logical basis (first qubit most significant).

    ``name`` is ``"CPZ"`` (with ``n`` qubits, or written ``"CPZ(3)"``),
    ``"Toffoli"`` (controls are the first two qubits) or ``"Hadamard"``.
    """
    if name.upper().startswith("CPZ"):
        if "(" in name:
            n = int(name[name.index("(") + 1 : name.index(")")])
        if n is None or n < 1:
            raise ValueError("CPZ needs a qubit count")
        diag = np.ones(2**n, dtype=complex)
        diag[-1] = -1
        return np.diag(diag)
    if name.lower() == "toffoli":
        m = np.eye(8, dtype=complex)
        m[[6, 7]] = m[[7, 6]]
        return m
    if name.lower() == "hadamard":
        return np.array([[1, 1], [1, -1]], dtype=complex) * SQRT_HALF
    raise ValueError(f"unknown target {name!r}")


def assert_equal_up_to_global_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> float:
    """Check ``a ~ lambda * b`` for some unit ``lambda``; returns the max deviation.

    Raises :class:`GlobalPhaseMismatch` when the best phase still leaves an
    entry off by more than ``tol``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")

    def deviation(theta: float) -> float:
        return float(np.max(np.abs(a - np.exp(1j * theta) * b), initial=0.0))

    inner = np.vdot(b, a)
    theta0 = float(np.angle(inner)) if abs(inner) > 0 else 0.0
    best = deviation(theta0)
    if best > tol:
        res = minimize_scalar(deviation, bounds=(theta0 - np.pi, theta0 + np.pi), method="bounded")
        best = min(best, float(res.fun))
    if best > tol:
        raise GlobalPhaseMismatch(best, tol)
    return best
