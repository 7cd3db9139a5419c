"""Sparse pure states of one photon jointly with a register of cavity atoms.

Every node holds two atoms. The atomic basis string is packed into an
integer: atom 1 of node ``n`` sits at bit ``2n`` and atom 2 at bit ``2n + 1``,
so atom 1 of node 0 is the least significant bit. A register of ``N`` nodes
therefore spans ``4**N`` basis strings.

The photon lives on a finite set of labelled modes. A mode is a location
(any hashable label, typically an edge of the optical network) together
with a polarization, except for terminal modes (detector sinks and the
"no photon" mode) which carry no polarization.

Amplitudes are kept in a dictionary keyed by ``(mode, atom_string)``. Only a
handful of photon modes are occupied at once, so the table stays small even
for five nodes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

PRUNE_CUTOFF = 1e-15
UNITARY_TOL = 1e-12
NORM_TOL = 1e-9

NO_CLICK = "NoClick"
LOST = "Lost"
ABSORBED = "Absorbed"


class Pol(str, enum.Enum):
    H = "H"
    V = "V"


POLS = (Pol.H, Pol.V)


class StateError(ValueError):
    """Raised for operations that are undefined on the given state."""


class CollisionError(StateError):
    """Two occupied modes were merged into one (a physically invalid beam merge)."""


@dataclass(frozen=True)
class Sink:
    """Terminal photon location: a detector, the loss bin, or an absorber."""

    name: str
    tag: Hashable = None


@dataclass(frozen=True)
class PhotonMode:
    location: Hashable
    pol: Pol | None = None

    @property
    def is_sink(self) -> bool:
        return isinstance(self.location, Sink)

    @property
    def is_terminal(self) -> bool:
        return self.is_sink or self.location == _NO_PHOTON_LOCATION


_NO_PHOTON_LOCATION = "NoPhoton"
NO_PHOTON = PhotonMode(_NO_PHOTON_LOCATION)

Key = tuple[PhotonMode, int]


def atom_bit(node: int, atom: int) -> int:
    """Bit position of ``atom`` (1 or 2) of ``node`` in the packed basis string."""
    if atom not in (1, 2):
        raise ValueError(f"atom index must be 1 or 2, got {atom}")
    return 2 * node + (atom - 1)


def pack_atoms(pairs: Sequence[Sequence[int]]) -> int:
    """Pack per-node ``(atom1, atom2)`` bits into a basis string index.

    >>> pack_atoms([(1, 0)])
    1
    >>> pack_atoms([(1, 0), (0, 1)])
    9
    """
    index = 0
    for node, (a1, a2) in enumerate(pairs):
        if a1 not in (0, 1) or a2 not in (0, 1):
            raise ValueError(f"atom bits must be 0 or 1, got {(a1, a2)}")
        index |= a1 << atom_bit(node, 1)
        index |= a2 << atom_bit(node, 2)
    return index


def node_bits(index: int, node: int) -> tuple[int, int]:
    """Return ``(atom1, atom2)`` of ``node`` in the basis string ``index``."""
    return (index >> (2 * node)) & 1, (index >> (2 * node + 1)) & 1


def _check_unitary(u: np.ndarray, dim: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {u.shape}")
    if not np.allclose(u.conj().T @ u, np.eye(dim), atol=UNITARY_TOL, rtol=0):
        raise ValueError("matrix is not unitary")
    return u


@dataclass
class JointState:
    """Amplitude table over ``(PhotonMode, atom_string)``.

    ``modes`` is the registry of legal photon modes. Operations never place
    amplitude on a mode that is not registered; relocation registers its
    targets as it goes.
    """

    n_nodes: int
    amplitudes: dict[Key, complex] = field(default_factory=dict)
    modes: set[PhotonMode] = field(default_factory=set)

    def __post_init__(self) -> None:
        if self.n_nodes < 1:
            raise ValueError("a register needs at least one node")
        self.modes.add(NO_PHOTON)

    @property
    def dim_atoms(self) -> int:
        return 4**self.n_nodes

    def copy(self) -> JointState:
        return JointState(self.n_nodes, dict(self.amplitudes), set(self.modes))

    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def register(self, *modes: PhotonMode) -> None:
        self.modes.update(modes)

    def occupied_modes(self) -> set[PhotonMode]:
        return {mode for mode, _ in self.amplitudes}

    def in_flight(self) -> set[PhotonMode]:
        """Occupied modes that are not terminal."""
        return {mode for mode in self.occupied_modes() if not mode.is_terminal}

    def prune(self, cutoff: float = PRUNE_CUTOFF) -> None:
        self.amplitudes = {k: a for k, a in self.amplitudes.items() if abs(a) >= cutoff}

    def amplitude(self, mode: PhotonMode, atoms: int) -> complex:
        return self.amplitudes.get((mode, atoms), 0j)

    def atomic_vector(self, mode: PhotonMode = NO_PHOTON) -> np.ndarray:
        """Dense atomic amplitudes attached to one photon mode."""
        vec = np.zeros(self.dim_atoms, dtype=complex)
        for (m, atoms), amp in self.amplitudes.items():
            if m == mode:
                vec[atoms] += amp
        return vec

    def photon_vector(self) -> tuple[list[Key], np.ndarray]:
        keys = sorted(self.amplitudes, key=repr)
        return keys, np.array([self.amplitudes[k] for k in keys], dtype=complex)


def from_atomic_vector(n_nodes: int, vec: np.ndarray, mode: PhotonMode = NO_PHOTON) -> JointState:
    """Wrap a dense atomic register vector as a joint state on one photon mode."""
    vec = np.asarray(vec, dtype=complex)
    if vec.shape != (4**n_nodes,):
        raise ValueError(f"vector of length {vec.size} does not match {n_nodes} nodes")
    state = JointState(n_nodes)
    state.register(mode)
    state.amplitudes = {(mode, int(i)): complex(vec[i]) for i in np.flatnonzero(np.abs(vec) >= PRUNE_CUTOFF)}
    return state


def new_state(
    n_nodes: int,
    atoms: int | Sequence[Sequence[int]] = 0,
    photon: tuple[Hashable, Sequence[complex]] | None = None,
) -> JointState:
    """Product state of a basis atom string and an optional photon.

    ``photon`` is ``(location, (amp_h, amp_v))``; without it the whole
    amplitude sits on the ``NO_PHOTON`` mode.
    """
    if n_nodes < 1:
        raise ValueError("a register needs at least one node")
    index = atoms if isinstance(atoms, (int, np.integer)) else pack_atoms(atoms)
    if not 0 <= index < 4**n_nodes:
        raise ValueError(f"atom string {index} out of range for {n_nodes} nodes")
    state = JointState(n_nodes)
    if photon is None:
        state.amplitudes[(NO_PHOTON, int(index))] = 1.0 + 0j
        return state
    location, pol_amps = photon
    pol_amps = np.asarray(pol_amps, dtype=complex)
    if pol_amps.shape != (2,) or abs(np.vdot(pol_amps, pol_amps) - 1) > NORM_TOL:
        raise ValueError("photon polarization amplitudes must be a normalized pair")
    if isinstance(location, Sink) or location == _NO_PHOTON_LOCATION:
        raise StateError("a photon must be injected on a polarized location")
    for pol, amp in zip(POLS, pol_amps):
        mode = PhotonMode(location, pol)
        state.register(mode)
        if abs(amp) >= PRUNE_CUTOFF:
            state.amplitudes[(mode, int(index))] = complex(amp)
    return state


def _check_node(state: JointState, node: int) -> None:
    if not 0 <= node < state.n_nodes:
        raise ValueError(f"node {node} out of range for {state.n_nodes} nodes")


def apply_atom_unitary(state: JointState, node: int, atom: int, u: np.ndarray) -> JointState:
    """Apply a single-atom 2x2 unitary to atom 1 or 2 of ``node``."""
    _check_node(state, node)
    u = _check_unitary(u, 2)
    bit = atom_bit(node, atom)
    out: dict[Key, complex] = {}
    for (mode, atoms), amp in state.amplitudes.items():
        b = (atoms >> bit) & 1
        base = atoms & ~(1 << bit)
        for nb in (0, 1):
            coeff = u[nb, b]
            if coeff != 0:
                key = (mode, base | (nb << bit))
                out[key] = out.get(key, 0j) + coeff * amp
    new = JointState(state.n_nodes, out, set(state.modes))
    new.prune()
    return new


def apply_node_unitary(state: JointState, node: int, u: np.ndarray) -> JointState:
    """Apply a 4x4 unitary to both atoms of ``node``.

    The local basis index is ``atom1 + 2 * atom2``, i.e. ``|00>, |10>, |01>, |11>``
    written as ``|atom1 atom2>``.
    """
    _check_node(state, node)
    u = _check_unitary(u, 4)
    shift = 2 * node
    mask = 3 << shift
    out: dict[Key, complex] = {}
    for (mode, atoms), amp in state.amplitudes.items():
        local = (atoms & mask) >> shift
        base = atoms & ~mask
        for nl in range(4):
            coeff = u[nl, local]
            if coeff != 0:
                key = (mode, base | (nl << shift))
                out[key] = out.get(key, 0j) + coeff * amp
    new = JointState(state.n_nodes, out, set(state.modes))
    new.prune()
    return new


def apply_scattering(
    state: JointState, node: int, cavity_mode: Hashable | PhotonMode, phase: float = np.pi
) -> JointState:
    """Cavity-assisted phase: ``e^{i phase}`` on the h photon at the cavity iff both atoms are ``|1>``.

    ``cavity_mode`` may be the cavity location or its h-polarized mode.
    """
    _check_node(state, node)
    location = cavity_mode.location if isinstance(cavity_mode, PhotonMode) else cavity_mode
    if isinstance(location, Sink) or location == _NO_PHOTON_LOCATION:
        raise StateError("scattering needs a polarized cavity mode, not a sink")
    h_mode = PhotonMode(location, Pol.H)
    if h_mode not in state.modes:
        raise StateError(f"unknown mode {h_mode}")
    both = 3 << (2 * node)
    factor = np.exp(1j * phase)
    out = dict(state.amplitudes)
    for (mode, atoms), amp in state.amplitudes.items():
        if mode == h_mode and atoms & both == both:
            out[(mode, atoms)] = amp * factor
    return JointState(state.n_nodes, out, set(state.modes))


def apply_pol_unitary(state: JointState, location: Hashable, u: np.ndarray) -> JointState:
    """Mix the (H, V) amplitude pair held at ``location`` by a 2x2 unitary."""
    u = _check_unitary(u, 2)
    h_mode, v_mode = PhotonMode(location, Pol.H), PhotonMode(location, Pol.V)
    if h_mode not in state.modes or v_mode not in state.modes:
        raise StateError(f"location {location!r} is not a registered polarized mode pair")
    out: dict[Key, complex] = {}
    for (mode, atoms), amp in state.amplitudes.items():
        if mode == h_mode or mode == v_mode:
            col = 0 if mode == h_mode else 1
            for row, target in enumerate((h_mode, v_mode)):
                if u[row, col] != 0:
                    key = (target, atoms)
                    out[key] = out.get(key, 0j) + u[row, col] * amp
        else:
            out[(mode, atoms)] = out.get((mode, atoms), 0j) + amp
    new = JointState(state.n_nodes, out, set(state.modes))
    new.prune()
    return new


ModeMap = Mapping[PhotonMode, Sequence[tuple[PhotonMode, complex]]]


def relocate_modes(state: JointState, mode_map: ModeMap, tol: float = 1e-12) -> JointState:
    """Move photon amplitude between modes.

    ``mode_map[src]`` lists ``(target, factor)`` pairs. Sources absent from the
    map stay where they are. For every atom string the images of the occupied
    sources must be mutually orthogonal; otherwise two beams would be merged
    into one mode and :class:`CollisionError` is raised.
    """
    for src in mode_map:
        if src not in state.modes:
            raise StateError(f"unknown mode {src}")
    occupied: dict[int, list[PhotonMode]] = {}
    for mode, atoms in state.amplitudes:
        if mode in mode_map:
            occupied.setdefault(atoms, []).append(mode)
    for atoms, sources in occupied.items():
        if len(sources) < 2:
            continue
        images = [dict(mode_map[s]) for s in sources]
        for a in range(len(sources)):
            for b in range(a + 1, len(sources)):
                common = images[a].keys() & images[b].keys()
                overlap = sum(np.conj(images[a][t]) * images[b][t] for t in common)
                if abs(overlap) > tol:
                    raise CollisionError(
                        f"modes {sources[a]} and {sources[b]} merge for atom string {atoms}"
                    )
    modes = set(state.modes)
    for targets in mode_map.values():
        modes.update(t for t, _ in targets)
    out: dict[Key, complex] = {}
    for (mode, atoms), amp in state.amplitudes.items():
        targets = mode_map.get(mode)
        if targets is None:
            out[(mode, atoms)] = out.get((mode, atoms), 0j) + amp
            continue
        for target, factor in targets:
            key = (target, atoms)
            out[key] = out.get(key, 0j) + factor * amp
    new = JointState(state.n_nodes, out, modes)
    new.prune()
    return new


def project_polarizer(
    state: JointState, location: Hashable, rejected: PhotonMode | None = None
) -> tuple[float, JointState]:
    """Pass the photon at ``location`` through a +45 degree polarizer.

    The transmitted ray ``(H + V)/sqrt(2)`` stays at ``location`` and is stored
    under the ``H`` label by convention; the orthogonal ray moves to the
    ``rejected`` sink mode (``Lost`` by default). Total norm is conserved, so
    conditioning happens at detection. Returns the transmitted fraction of
    the amplitude that was at ``location`` (1.0 if it held none).
    """
    h_mode, v_mode = PhotonMode(location, Pol.H), PhotonMode(location, Pol.V)
    if h_mode not in state.modes:
        raise StateError(f"unknown location {location!r}")
    if rejected is None:
        rejected = PhotonMode(Sink(LOST, ("P45", location)))
    s = 1 / np.sqrt(2)
    mode_map = {
        h_mode: [(h_mode, s), (rejected, s)],
        v_mode: [(h_mode, s), (rejected, -s)],
    }
    before = sum(abs(a) ** 2 for (m, _), a in state.amplitudes.items() if m in (h_mode, v_mode))
    state = state.copy()
    state.register(v_mode)
    new = relocate_modes(state, mode_map)
    after = sum(abs(a) ** 2 for (m, _), a in new.amplitudes.items() if m == h_mode)
    return (float(after / before) if before > 0 else 1.0), new


@dataclass
class Branch:
    """One detection outcome with its probability and conditioned atomic states.

    ``components`` holds ``(weight, state)`` pairs, one per distinguishable
    sink mode that fed the outcome; weights sum to 1. A single component
    means the conditioned register is pure.
    """

    outcome: str
    probability: float
    components: list[tuple[float, JointState]]

    @property
    def is_pure(self) -> bool:
        return len(self.components) == 1

    @property
    def state(self) -> JointState:
        if not self.is_pure:
            raise StateError(f"outcome {self.outcome} leaves a mixed register")
        return self.components[0][1]


def _outcome_of(mode: PhotonMode, detectors: frozenset[str]) -> str:
    if mode.is_sink and mode.location.name in detectors:
        return mode.location.name
    return NO_CLICK


def detector_branches(state: JointState, detectors: Iterable[str]) -> dict[str, Branch]:
    """Enumerate every detection outcome exactly.

    Anything not on one of ``detectors`` (loss bins, other detectors, no
    photon) counts as ``NoClick``.
    """
    detectors = frozenset(detectors)
    if state.in_flight():
        raise StateError("photon still in flight; propagate before measuring")
    by_mode: dict[PhotonMode, dict[int, complex]] = {}
    for (mode, atoms), amp in state.amplitudes.items():
        by_mode.setdefault(mode, {})[atoms] = amp
    grouped: dict[str, list[tuple[float, JointState]]] = {}
    for mode in sorted(by_mode, key=repr):
        amps = by_mode[mode]
        weight = float(sum(abs(a) ** 2 for a in amps.values()))
        if weight == 0:
            continue
        scale = 1 / np.sqrt(weight)
        collapsed = JointState(state.n_nodes, {(NO_PHOTON, k): a * scale for k, a in amps.items()})
        grouped.setdefault(_outcome_of(mode, detectors), []).append((weight, collapsed))
    branches = {}
    for outcome, comps in grouped.items():
        total = sum(w for w, _ in comps)
        branches[outcome] = Branch(outcome, total, [(w / total, s) for w, s in comps])
    return branches


def measure_detectors(
    state: JointState, detectors: Iterable[str], rng: np.random.Generator
) -> tuple[str, float, JointState]:
    """Sample a detection outcome; returns ``(outcome, probability, collapsed register)``.

    When several distinguishable sink modes feed the sampled outcome, one of
    them is drawn by weight (trajectory picture).
    """
    branches = detector_branches(state, detectors)
    outcomes = sorted(branches)
    probs = np.array([branches[o].probability for o in outcomes])
    choice = outcomes[rng.choice(len(outcomes), p=probs / probs.sum())]
    branch = branches[choice]
    weights = np.array([w for w, _ in branch.components])
    _, collapsed = branch.components[rng.choice(len(weights), p=weights / weights.sum())]
    return choice, branch.probability, collapsed


def _as_vector(x: JointState | np.ndarray, keys: list[Key] | None) -> np.ndarray:
    if isinstance(x, JointState):
        assert keys is not None
        return np.array([x.amplitudes.get(k, 0j) for k in keys], dtype=complex)
    return np.asarray(x, dtype=complex).ravel()


def fidelity_up_to_global_phase(a: JointState | np.ndarray, b: JointState | np.ndarray) -> float:
    """``|<a|b>|^2`` for normalized pure states."""
    if isinstance(a, JointState) != isinstance(b, JointState):
        raise ValueError("cannot compare a joint state with a bare vector")
    keys = None
    if isinstance(a, JointState):
        if a.n_nodes != b.n_nodes:
            raise ValueError("dimension mismatch: different node counts")
        keys = sorted(set(a.amplitudes) | set(b.amplitudes), key=repr)
    va, vb = _as_vector(a, keys), _as_vector(b, keys)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    for v in (va, vb):
        if abs(np.vdot(v, v).real - 1) > NORM_TOL:
            raise ValueError("fidelity needs normalized states")
    return float(min(1.0, abs(np.vdot(va, vb)) ** 2))
