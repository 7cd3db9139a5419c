"""Ring network of two-atom cavity nodes, switch schedules, and photon propagation.

Geometry built by :func:`build_ring_network` (``n`` is a node, ring runs n -> n+1):

Inside node ``n``::

    SRC{n} -> STR{n}.port0           (entry from port 0)
    HWPin{n} -> STR{n}.port1         (entry from the ring)
    STR{n}.cav -> C{n}.1 ; C{n}.2 -> PBS{n}.in1
    PBS{n}.thru (H) -> CAV{n} -> PBSm{n}.in1
    PBS{n}.refl (V) -> M{n}   -> PBSm{n}.in2
    PBSm{n}.thru -> C{n}.2 ; C{n}.3 -> TR0_{n}.a
    TR0_{n}.y (Reflect) -> HWP45_{n} -> STR{n}.ret
    TR0_{n}.x (Transmit) -> P45_{n} -> D{n}

``PBS{n}`` and ``PBSm{n}`` are the single node PBS traversed outbound and
back; the cavity and the mirror arm have equal length.

On the ring after node ``n``::

    STR{n}.port2 -> HWPout{n} (22.5) -> TR{n}I.a
    TR{n}I.x -> PBSr{n}.in1 ;  TR{n}I.y -> TR{n}II.b       (bypass of the branch PBS)
    PBSr{n}.thru (H) -> TR{n}II.a
    PBSr{n}.refl (V) -> PADc{n} -> HWPc{n} (22.5) -> COMB.in{n}        center path n
    TR{n}II.x -> HWPin{n+1} (22.5) -> STR{n+1}.port1                  onward
    TR{n}II.y -> PADx{n} -> HWPx{n} (22.5) -> COMB.in{N+n}             closing path n

and at the center ``COMB.out -> PBSd.in1``, ``PBSd.thru -> Dh``,
``PBSd.refl -> Dv``. Unused outputs go to the ``Lost`` sink.

All edges have length 1. The pads ``PADc``/``PADx`` are adjustable delay
lines whose lengths the schedule compiler sets so that every route reaches
PBSd on the same tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from . import qstate as qs
from .optics import (
    ConfigError,
    Element,
    Setting,
    STRConfig,
    TRState,
    transfer,
)
from .qstate import NO_PHOTON, JointState, PhotonMode, Pol, Sink

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
STANDARD_HOOKS = ("sx2", "scatter", "sx2")
DETECTORS = ("Dh", "Dv")


class ScheduleError(ValueError):
    """Participants, entry node or settings do not form a valid run."""


class RoutingError(RuntimeError):
    """The photon did not reach the sinks within the tick budget."""


@dataclass(frozen=True)
class Edge:
    src: str
    src_port: str
    dst: str
    dst_port: str
    length: int = 1


@dataclass
class NetworkGraph:
    """Placed elements and directed, length-annotated connections."""

    n_nodes: int
    elements: dict[str, Element] = field(default_factory=dict)
    edges: dict[tuple[str, str], Edge] = field(default_factory=dict)
    sources: dict[int, str] = field(default_factory=dict)
    path_labels: dict[str, str] = field(default_factory=dict)
    # compiled schedules; cleared by add/connect
    _schedules: dict = field(default_factory=dict, repr=False, compare=False)

    def add(self, el: Element) -> Element:
        if el.id in self.elements:
            raise ValueError(f"duplicate element id {el.id}")
        self.elements[el.id] = el
        self._schedules.clear()
        return el

    def connect(self, src: str, src_port: str, dst: str, dst_port: str, length: int = 1) -> None:
        if (src, src_port) in self.edges:
            raise ValueError(f"output {src}.{src_port} already connected")
        for eid in (src, dst):
            if eid not in self.elements:
                raise ValueError(f"unknown element {eid!r}")
        if src_port not in self.elements[src].out_ports():
            raise ValueError(f"{src} has no output {src_port!r}")
        if dst_port not in self.elements[dst].in_ports() and not self.elements[dst].is_sink:
            raise ValueError(f"{dst} has no input {dst_port!r}")
        if length < 1:
            raise ValueError("edge length must be at least one tick")
        self.edges[(src, src_port)] = Edge(src, src_port, dst, dst_port, length)
        self._schedules.clear()

    def edge(self, src: str, src_port: str) -> Edge:
        return self.edges[(src, src_port)]

    def configurable(self) -> list[str]:
        return sorted(eid for eid, el in self.elements.items() if el.configurable)

    def check(self) -> None:
        """Every output port of every element has exactly one outgoing edge."""
        for eid, el in self.elements.items():
            for port in el.out_ports():
                if (eid, port) not in self.edges:
                    raise ValueError(f"dangling output {eid}.{port}")

    def with_edge_length(self, src: str, src_port: str, length: int) -> NetworkGraph:
        """Copy with one edge re-lengthened (used to break path equality on purpose)."""
        g = NetworkGraph(self.n_nodes, dict(self.elements), dict(self.edges), dict(self.sources), dict(self.path_labels))
        e = g.edges[(src, src_port)]
        g.edges[(src, src_port)] = Edge(e.src, e.src_port, e.dst, e.dst_port, length)
        return g


@dataclass(frozen=True)
class SwitchSchedule:
    """Settings of every configurable element plus per-node cavity hooks.

    ``hooks[n]`` is the ordered list of local operations run when the photon
    reaches the cavity of node ``n``: ``"sx2"`` flips atom 2, ``"scatter"``
    applies the cavity phase on the h component.
    """

    settings: Mapping[str, Setting]
    hooks: Mapping[int, tuple[str, ...]]
    participants: tuple[int, ...] = ()
    entry: int | None = None

    def setting(self, eid: str) -> Setting | None:
        return self.settings.get(eid)

    def override(self, **changes: Setting) -> SwitchSchedule:
        settings = dict(self.settings)
        settings.update(changes)
        return SwitchSchedule(settings, dict(self.hooks), self.participants, self.entry)


@dataclass
class PropagationResult:
    state: JointState
    detector_amplitudes: dict[str, dict[Sink, np.ndarray]]
    ticks: int
    trace: list[tuple[int, tuple[tuple[tuple, str], ...]]] | None
    probes: dict[str, dict[tuple[str, str], np.ndarray]] = field(default_factory=dict)

    def detector_probability(self, name: str) -> float:
        return float(sum(np.vdot(v, v).real for v in self.detector_amplitudes.get(name, {}).values()))


def build_ring_network(n_nodes: int, combiner: str = "ideal") -> NetworkGraph:
    """Build the ring of ``n_nodes`` two-atom cavity nodes with central detection.

    ``combiner="ideal"`` merges the center paths losslessly (valid while at
    most one path is occupied per atom string, which holds for the noiseless
    gate). ``combiner="balanced"`` uses a unitary multiport whose extra outputs
    go to loss; it tolerates multi-path interference at the price of a
    ``1/(2N)`` success-rate factor.
    """
    if n_nodes < 1:
        raise ValueError("need at least one node")
    if combiner not in ("ideal", "balanced"):
        raise ValueError(f"unknown combiner model {combiner!r}")
    N = n_nodes
    g = NetworkGraph(N)
    g.add(Element("Lost", "DET", name=qs.LOST))
    g.add(Element("Dh", "DET", name="Dh"))
    g.add(Element("Dv", "DET", name="Dv"))
    g.add(Element("PBSd", "PBS"))
    g.add(Element("COMB", "COMBINER", ports=2 * N, balanced=combiner == "balanced"))
    g.connect("COMB", "out", "PBSd", "in1")
    for r in range(1, 2 * N if combiner == "balanced" else 1):
        g.connect("COMB", f"loss{r}", "Lost", f"COMB.loss{r}")
    g.connect("PBSd", "thru", "Dh", "*")
    g.connect("PBSd", "refl", "Dv", "*")

    for n in range(N):
        for el in (
            Element(f"SRC{n}", "SOURCE", node=n),
            Element(f"STR{n}", "STR", node=n),
            Element(f"C{n}", "CIRC", ports=3, node=n),
            Element(f"PBS{n}", "PBS", node=n),
            Element(f"PBSm{n}", "PBS", node=n),
            Element(f"CAV{n}", "CAVITY", node=n),
            Element(f"M{n}", "MIRROR", node=n),
            Element(f"TR0_{n}", "TR", node=n),
            Element(f"HWP45_{n}", "HWP", theta=45.0, node=n),
            Element(f"P45_{n}", "P45", node=n),
            Element(f"D{n}", "DET", name=f"D{n}", node=n),
            Element(f"HWPin{n}", "HWP", theta=22.5, node=n),
            Element(f"HWPout{n}", "HWP", theta=22.5, node=n),
            Element(f"TR{n}I", "TR", node=n),
            Element(f"PBSr{n}", "PBS", node=n),
            Element(f"TR{n}II", "TR", node=n),
            Element(f"PADc{n}", "DELAY", adjustable=True, node=n),
            Element(f"HWPc{n}", "HWP", theta=22.5, node=n),
            Element(f"PADx{n}", "DELAY", adjustable=True, node=n),
            Element(f"HWPx{n}", "HWP", theta=22.5, node=n),
        ):
            g.add(el)
        g.sources[n] = f"SRC{n}"
        g.path_labels[f"in{n}"] = f"center{n}"
        g.path_labels[f"in{N + n}"] = f"closing{n}"

    for n in range(N):
        nxt = (n + 1) % N
        g.connect(f"SRC{n}", "out", f"STR{n}", "port0")
        g.connect(f"HWPin{n}", "out", f"STR{n}", "port1")
        g.connect(f"STR{n}", "cav", f"C{n}", "1")
        g.connect(f"C{n}", "2", f"PBS{n}", "in1")
        g.connect(f"PBS{n}", "thru", f"CAV{n}", "in")
        g.connect(f"PBS{n}", "refl", f"M{n}", "in")
        g.connect(f"CAV{n}", "out", f"PBSm{n}", "in1")
        g.connect(f"M{n}", "out", f"PBSm{n}", "in2")
        g.connect(f"PBSm{n}", "thru", f"C{n}", "2")
        g.connect(f"PBSm{n}", "refl", "Lost", f"PBSm{n}.refl")
        g.connect(f"C{n}", "3", f"TR0_{n}", "a")
        g.connect(f"C{n}", "1", "Lost", f"C{n}.1")
        g.connect(f"TR0_{n}", "y", f"HWP45_{n}", "in")
        g.connect(f"TR0_{n}", "x", f"P45_{n}", "in")
        g.connect(f"P45_{n}", "out", f"D{n}", "*")
        g.connect(f"HWP45_{n}", "out", f"STR{n}", "ret")

        g.connect(f"STR{n}", "port2", f"HWPout{n}", "in")
        g.connect(f"HWPout{n}", "out", f"TR{n}I", "a")
        g.connect(f"TR{n}I", "x", f"PBSr{n}", "in1")
        g.connect(f"TR{n}I", "y", f"TR{n}II", "b")
        g.connect(f"PBSr{n}", "thru", f"TR{n}II", "a")
        g.connect(f"PBSr{n}", "refl", f"PADc{n}", "in")
        g.connect(f"PADc{n}", "out", f"HWPc{n}", "in")
        g.connect(f"HWPc{n}", "out", "COMB", f"in{n}")
        g.connect(f"TR{n}II", "x", f"HWPin{nxt}", "in")
        g.connect(f"TR{n}II", "y", f"PADx{n}", "in")
        g.connect(f"PADx{n}", "out", f"HWPx{n}", "in")
        g.connect(f"HWPx{n}", "out", "COMB", f"in{N + n}")
    g.check()
    return g


def ring_order(n_nodes: int, entry: int, participants: Iterable[int]) -> list[int]:
    """Participants sorted by clockwise distance from ``entry``."""
    return sorted(set(participants), key=lambda n: (n - entry) % n_nodes)


def compile_schedule(
    graph: NetworkGraph, participants: Sequence[int], entry: int | None = None
) -> SwitchSchedule:
    """Switch settings that send one photon through ``participants`` in ring order.

    See :func:`_compile_schedule`; results are cached on the graph.
    """
    key = (tuple(participants), entry)
    if key not in graph._schedules:
        graph._schedules[key] = _compile_schedule(graph, participants, entry)
    return graph._schedules[key]


def _compile_schedule(
    graph: NetworkGraph, participants: Sequence[int], entry: int | None = None
) -> SwitchSchedule:
    """Switch settings that send one photon through ``participants`` in ring order.

    The photon enters ``entry`` (default: the first participant) by port 0,
    visits every participant's cavity, is bypassed around all other nodes and
    their branch PBSs, and leaves the last participant towards the closing
    path. Center and closing delay lines are set for equal arrival at PBSd.
    """
    N = graph.n_nodes
    parts = list(participants)
    if not parts:
        raise ScheduleError("need at least one participant")
    if len(set(parts)) != len(parts):
        raise ScheduleError("duplicate participant")
    if any(not 0 <= n < N for n in parts):
        raise ScheduleError(f"participant out of range for {N} nodes")
    if entry is None:
        entry = parts[0]
    if entry not in parts:
        raise ScheduleError(f"entry node {entry} is not a participant")
    order = ring_order(N, entry, parts)
    if parts != order:
        raise ScheduleError(f"participants {parts} are not in clockwise ring order from node {entry}: {order}")

    last = order[-1]
    arc = [(entry + k) % N for k in range((last - entry) % N + 1)]
    settings: dict[str, Setting] = {}
    for n in range(N):
        settings[f"TR0_{n}"] = TRState.REFLECT
        if n == entry:
            settings[f"STR{n}"] = STRConfig.PORT0_ENTRY
        elif n in order:
            settings[f"STR{n}"] = STRConfig.PORT1_ENTRY
        else:
            settings[f"STR{n}"] = STRConfig.BYPASS_1TO2
        if n in order:
            settings[f"TR{n}I"] = TRState.TRANSMIT
            settings[f"TR{n}II"] = TRState.REFLECT if n == last else TRState.TRANSMIT
        else:
            settings[f"TR{n}I"] = TRState.REFLECT
            settings[f"TR{n}II"] = TRState.REFLECT
        settings[f"PADc{n}"] = 0
        settings[f"PADx{n}"] = 0
    assert all(n in arc for n in order)

    schedule = SwitchSchedule(settings, {n: STANDARD_HOOKS for n in order}, tuple(order), entry)
    arrivals = combiner_arrivals(graph, schedule)
    if not arrivals:
        raise ScheduleError("no route reaches the combiner")
    latest = max(t for ts in arrivals.values() for t in ts)
    for port, ts in arrivals.items():
        if len(ts) != 1:
            raise ScheduleError(f"combiner input {port} reached at several times {sorted(ts)}")
        n = int(port[2:])
        pad = f"PADc{n}" if n < N else f"PADx{n - N}"
        settings[pad] = latest - next(iter(ts))
    return SwitchSchedule(settings, {n: STANDARD_HOOKS for n in order}, tuple(order), entry)


def _routes(graph: NetworkGraph, schedule: SwitchSchedule, stop: str) -> dict[str, set[int]]:
    """Arrival ticks at element ``stop`` from the entry source, keyed by combiner input used.

    Both polarizations are followed through every element so that every
    route the photon could take under the schedule is enumerated.
    """
    if schedule.entry is None:
        raise ScheduleError("schedule has no entry node")
    src = graph.sources[schedule.entry]
    first = graph.edge(src, "out")
    budget = _tick_budget(graph, schedule)
    stack = [(first.dst, first.dst_port, pol, first.length, None) for pol in (Pol.H, Pol.V)]
    seen = set()
    found: dict[str, set[int]] = {}
    while stack:
        item = stack.pop()
        if item in seen:
            continue
        seen.add(item)
        eid, port, pol, t, label = item
        if t > budget:
            raise RoutingError("route exceeds the tick budget; the schedule leaves a cycle")
        el = graph.elements[eid]
        if eid == "COMB":
            label = port
        if eid == stop:
            found.setdefault(label, set()).add(t)
            continue
        if el.is_sink:
            continue
        setting = schedule.setting(eid)
        outs = transfer(el, setting, port, pol)
        dt = el.delay(setting)
        for out_port, out_pol, factor in outs:
            if factor == 0:
                continue
            e = graph.edge(eid, out_port)
            stack.append((e.dst, e.dst_port, out_pol, t + dt + e.length, label))
    return found


def combiner_arrivals(graph: NetworkGraph, schedule: SwitchSchedule) -> dict[str, set[int]]:
    """Ticks at which each combiner input is reached (pads counted at their current setting)."""
    found = _routes(graph, schedule, "COMB")
    return {port: ts for port, ts in found.items() if port is not None}


def arrival_ticks(graph: NetworkGraph, schedule: SwitchSchedule, element: str) -> set[int]:
    """Every tick at which some route legal under ``schedule`` reaches ``element``."""
    if element not in graph.elements:
        raise ValueError(f"unknown element {element!r}")
    return set().union(*_routes(graph, schedule, element).values())


def validate_equal_arrival(graph: NetworkGraph, schedule: SwitchSchedule) -> list[tuple[tuple[str, int], tuple[str, int]]]:
    """Compare the arrival tick at PBSd of every route legal under ``schedule``.

    Returns the offending pairs ``((path_a, ticks_a), (path_b, ticks_b))``;
    an empty list means all routes have equal optical length.
    """
    found = _routes(graph, schedule, "PBSd")
    flat = sorted(
        (graph.path_labels.get(port, str(port)), t) for port, ts in found.items() for t in ts
    )
    bad = []
    for i in range(len(flat)):
        for j in range(i + 1, len(flat)):
            if flat[i][1] != flat[j][1]:
                bad.append((flat[i], flat[j]))
    return bad


def _tick_budget(graph: NetworkGraph, schedule: SwitchSchedule) -> int:
    """Longest conceivable acyclic route: every edge and every delay once."""
    total = sum(e.length for e in graph.edges.values())
    for eid, el in graph.elements.items():
        if el.kind == "DELAY":
            setting = schedule.setting(eid)
            if not el.adjustable:
                total += el.length
            elif isinstance(setting, int):
                total += setting
    return total + 1


def _edge_loc(edge: Edge, remaining: int) -> tuple:
    return ("edge", edge.src, edge.src_port, remaining)


def source_location(graph: NetworkGraph, node: int) -> tuple:
    e = graph.edge(graph.sources[node], "out")
    return _edge_loc(e, e.length)


def inject_photon(
    state: JointState, graph: NetworkGraph, node: int, pol_amplitudes: Sequence[complex]
) -> JointState:
    """Place a photon with polarization ``(amp_h, amp_v)`` at port 0 of ``node``."""
    if node not in graph.sources:
        raise ScheduleError(f"no source at node {node}")
    amps = np.asarray(pol_amplitudes, dtype=complex)
    if amps.shape != (2,) or abs(np.vdot(amps, amps).real - 1) > qs.NORM_TOL:
        raise ValueError("photon polarization amplitudes must be a normalized pair")
    if any(mode != NO_PHOTON for mode in state.occupied_modes()):
        raise qs.StateError("a photon is already present")
    loc = source_location(graph, node)
    targets = [(PhotonMode(loc, pol), complex(a)) for pol, a in zip(qs.POLS, amps) if abs(a) >= qs.PRUNE_CUTOFF]
    state = state.copy()
    state.register(PhotonMode(loc, Pol.H), PhotonMode(loc, Pol.V))
    return qs.relocate_modes(state, {NO_PHOTON: targets})


class _Register:
    """Index tables for dense atomic vectors of one register size."""

    def __init__(self, n_nodes: int) -> None:
        self.dim = 4**n_nodes
        idx = np.arange(self.dim)
        self.flip2 = [idx ^ (1 << qs.atom_bit(n, 2)) for n in range(n_nodes)]
        self.both = [((idx >> (2 * n)) & 3) == 3 for n in range(n_nodes)]
        self.excitations = [((idx >> (2 * n)) & 1) + ((idx >> (2 * n + 1)) & 1) for n in range(n_nodes)]


_REGISTERS: dict[int, _Register] = {}


def _register(n_nodes: int) -> _Register:
    if n_nodes not in _REGISTERS:
        _REGISTERS[n_nodes] = _Register(n_nodes)
    return _REGISTERS[n_nodes]


def _dense(state: JointState) -> tuple[dict[tuple, np.ndarray], dict[PhotonMode, np.ndarray]]:
    flying: dict[tuple, np.ndarray] = {}
    terminal: dict[PhotonMode, np.ndarray] = {}
    dim = state.dim_atoms
    for (mode, atoms), amp in state.amplitudes.items():
        if mode.is_terminal:
            vec = terminal.setdefault(mode, np.zeros(dim, dtype=complex))
        else:
            loc = mode.location
            if not (isinstance(loc, tuple) and loc and loc[0] == "edge"):
                raise qs.StateError(f"photon mode {mode} is not on a network edge")
            vec = flying.setdefault((loc, mode.pol), np.zeros(dim, dtype=complex))
        vec[atoms] += amp
    return flying, terminal


def _add(table: dict, key, vec: np.ndarray) -> None:
    if key in table:
        table[key] = table[key] + vec
    else:
        table[key] = vec


def _check_collisions(eid: str, images: list[tuple[np.ndarray, dict]], tol: float = 1e-12) -> None:
    """Images of different sources must be orthogonal wherever both sources are occupied."""
    for a in range(len(images)):
        for b in range(a + 1, len(images)):
            va, ia = images[a]
            vb, ib = images[b]
            common = ia.keys() & ib.keys()
            if not common:
                continue
            overlap = sum(np.conj(ia[t]) * ib[t] for t in common)
            if abs(overlap) > tol:
                shared = (np.abs(va) >= qs.PRUNE_CUTOFF) & (np.abs(vb) >= qs.PRUNE_CUTOFF)
                if shared.any():
                    atoms = int(np.flatnonzero(shared)[0]) % va.shape[-1]
                    raise qs.CollisionError(f"two beams merge at {eid} for atom string {atoms}")


def _check_schedule(graph: NetworkGraph, schedule: SwitchSchedule) -> None:
    for eid in graph.configurable():
        if schedule.setting(eid) is None:
            raise ConfigError(f"schedule has no setting for {eid}")
    for node in schedule.hooks:
        if not 0 <= node < graph.n_nodes:
            raise ScheduleError(f"hook on unknown node {node}")


def propagate(
    state: JointState,
    graph: NetworkGraph,
    schedule: SwitchSchedule,
    noise=None,
    max_ticks: int | None = None,
    record_trace: bool = False,
    probes: Sequence[str] = (),
) -> PropagationResult:
    """Advance the photon tick by tick until all amplitude rests on sinks.

    Each tick moves every in-flight amplitude one unit along its edge; an
    amplitude reaching the head of an edge is handed to the element there,
    which places its outputs on the outgoing edges. Cavity hooks run when the
    photon reaches a scheduled cavity.

    ``noise`` is an optional realization exposing ``loss_per_tick``,
    ``path_phases`` (element id -> radians), ``scattering_phase_error`` and
    ``window_phases`` (node -> radians, applied inside the flip window).
    With ``record_trace`` the occupied modes after every tick are kept.
    For every element id in ``probes`` the amplitude leaving it is summed
    per ``(out_port, pol)`` into ``result.probes[eid]``.

    Internally every occupied photon mode carries a dense vector over the
    ``4**N`` atom strings; the result is returned as a sparse state.
    """
    _check_schedule(graph, schedule)
    if state.n_nodes != graph.n_nodes:
        raise ValueError("state and network have different node counts")
    path_phases = {e: p for e, p in (getattr(noise, "path_phases", {}) or {}).items() if p}
    window = {n: p for n, p in (getattr(noise, "window_phases", {}) or {}).items() if p}
    flying, terminal = _dense(state)
    for eid in probes:
        if eid not in graph.elements:
            raise ValueError(f"cannot probe unknown element {eid}")
    probed: dict[str, dict] = {eid: {} for eid in probes}
    terminal, tick, trace = _evolve(
        flying, terminal, graph, schedule,
        loss=float(getattr(noise, "loss_per_tick", 0.0) or 0.0),
        rotations={e: np.exp(1j * p) for e, p in path_phases.items()},
        eps=float(getattr(noise, "scattering_phase_error", 0.0) or 0.0),
        window=window,
        budget=max_ticks if max_ticks is not None else _tick_budget(graph, schedule),
        record_trace=record_trace,
        probes=probed,
    )
    out = JointState(state.n_nodes, modes=set(state.modes))
    detector_amplitudes: dict[str, dict[Sink, np.ndarray]] = {}
    for mode, vec in terminal.items():
        nz = np.flatnonzero(np.abs(vec) >= qs.PRUNE_CUTOFF)
        if not len(nz):
            continue
        out.register(mode)
        for i in nz:
            out.amplitudes[(mode, int(i))] = complex(vec[i])
        if mode.is_sink:
            detector_amplitudes.setdefault(mode.location.name, {})[mode.location] = vec
    return PropagationResult(out, detector_amplitudes, tick, trace, probed)


@dataclass
class BatchResult:
    """Terminal amplitudes of many runs that share one schedule.

    ``terminal[mode]`` has shape ``(batch, 4**N)``: row ``b`` is the atomic
    vector left on that sink by run ``b``.
    """

    terminal: dict[PhotonMode, np.ndarray]
    ticks: int

    def outcome_vectors(self, outcome: str) -> list[np.ndarray]:
        """Sink arrays feeding a detector (or ``qs.NO_CLICK`` for everything else)."""
        if outcome == qs.NO_CLICK:
            return [v for m, v in self.terminal.items() if not (m.is_sink and m.location.name in DETECTORS)]
        return [v for m, v in self.terminal.items() if m.is_sink and m.location.name == outcome]

    def probability(self, outcome: str) -> np.ndarray:
        vecs = self.outcome_vectors(outcome)
        if not vecs:
            return np.zeros(0)
        return sum(np.sum(np.abs(v) ** 2, axis=-1) for v in vecs)


def propagate_batch(
    inputs: np.ndarray,
    graph: NetworkGraph,
    schedule: SwitchSchedule,
    entry_pol: Sequence[complex],
    loss_per_tick: float = 0.0,
    path_phases: Mapping[str, np.ndarray] | None = None,
    window_phases: Mapping[int, np.ndarray] | None = None,
    scattering_phase_error: float = 0.0,
) -> BatchResult:
    """Run one photon per row of ``inputs`` (shape ``(batch, 4**N)`` atomic vectors).

    The photon enters at the schedule's entry node with polarization
    ``entry_pol``. Path and window phases are arrays of length ``batch``
    (one value per run); loss and scattering error are shared. This is the
    same tick engine as :func:`propagate`, vectorized over runs.
    """
    _check_schedule(graph, schedule)
    inputs = np.atleast_2d(np.asarray(inputs, dtype=complex))
    batch, dim = inputs.shape
    if dim != 4**graph.n_nodes:
        raise ValueError("atomic vectors do not match the network size")

    def column(values):
        return np.asarray(values, dtype=float).reshape(batch, 1)

    loc = source_location(graph, schedule.entry)
    flying = {(loc, pol): a * inputs for pol, a in zip(qs.POLS, entry_pol) if abs(a) >= qs.PRUNE_CUTOFF}
    terminal, tick, _ = _evolve(
        flying, {}, graph, schedule,
        loss=loss_per_tick,
        rotations={e: np.exp(1j * column(p)) for e, p in (path_phases or {}).items()},
        eps=scattering_phase_error,
        window={n: column(p) for n, p in (window_phases or {}).items()},
        budget=_tick_budget(graph, schedule),
    )
    return BatchResult(terminal, tick)


def _evolve(flying, terminal, graph, schedule, loss, rotations, eps, window, budget, record_trace=False, probes=None):
    """Tick loop on dense amplitude arrays of shape ``(..., 4**N)``."""
    keep, drop = math.sqrt(1 - loss), math.sqrt(loss)
    reg = _register(graph.n_nodes)
    scatter_factor = np.exp(1j * (np.pi + eps))
    # routing tables depend only on (graph, schedule); keep them on the schedule
    cache = schedule.__dict__.setdefault("_route_cache", {})
    hit = cache.get(id(graph))
    if hit is None or hit[0] is not graph:
        hit = cache[id(graph)] = (graph, {})
    routes: dict[tuple[str, str, Pol], list[tuple[tuple, Pol, complex]]] = hit[1]

    def outputs(el: Element, port: str, pol: Pol) -> list[tuple[tuple, Pol, complex]]:
        key = (el.id, port, pol)
        if key not in routes:
            setting = schedule.setting(el.id)
            dt = el.delay(setting)
            outs = [("out", Pol.H, 1.0)] if el.kind == "P45" else transfer(el, setting, port, pol)
            table = []
            for out_port, out_pol, factor in outs:
                edge = graph.edge(el.id, out_port)
                table.append((_edge_loc(edge, edge.length + dt), out_pol, factor))
            routes[key] = table
        return routes[key]

    trace: list[tuple[int, tuple[tuple[tuple, str], ...]]] | None = [] if record_trace else None
    tick = 0
    while flying:
        tick += 1
        if tick > budget:
            raise RoutingError(f"photon still in flight after {budget} ticks; the schedule leaves a cycle")

        moved: dict[tuple, np.ndarray] = {}
        arrivals: dict[tuple[str, str, Pol], np.ndarray] = {}
        for (loc, pol), vec in flying.items():
            _, src, src_port, remaining = loc
            if loss > 0:
                terminal[PhotonMode(Sink(qs.LOST, ("loss", tick, loc, pol.value)))] = drop * vec
                vec = keep * vec
            if remaining > 1:
                _add(moved, (("edge", src, src_port, remaining - 1), pol), vec)
            else:
                edge = graph.edge(src, src_port)
                _add(arrivals, (edge.dst, edge.dst_port, pol), vec)
        flying = moved

        touched: set[tuple] = set()
        by_element: dict[str, list[tuple[str, Pol]]] = {}
        for eid, port, pol in arrivals:
            by_element.setdefault(eid, []).append((port, pol))
        for eid, keys in by_element.items():
            el = graph.elements[eid]
            if el.is_sink:
                for port, pol in keys:
                    sink = PhotonMode(Sink(el.name, (tick, port, pol.value)))
                    _add(terminal, sink, arrivals.pop((eid, port, pol)))
                continue
            if el.kind == "CAVITY" and el.node in schedule.hooks:
                _run_hooks(el.node, schedule.hooks[el.node], (eid, "in", Pol.H), reg,
                           scatter_factor, window, (flying, terminal, arrivals))
            if el.kind == "P45":
                vh = arrivals.pop((eid, "in", Pol.H), None)
                vv = arrivals.pop((eid, "in", Pol.V), None)
                vh = np.zeros_like(vv) if vh is None else vh
                vv = np.zeros_like(vh) if vv is None else vv
                s = 1 / math.sqrt(2)
                terminal[PhotonMode(Sink(qs.LOST, ("P45", tick, eid)))] = s * (vh - vv)
                arrivals[(eid, "in", Pol.H)] = s * (vh + vv)
                keys = [("in", Pol.H)]
            rot = rotations.get(eid)
            images = []
            for port, pol in keys:
                vec = arrivals.pop((eid, port, pol))
                image: dict[tuple, complex] = {}
                for loc, out_pol, factor in outputs(el, port, pol):
                    image[(loc, out_pol)] = image.get((loc, out_pol), 0) + factor
                images.append((vec, image))
            if len(images) > 1:
                _check_collisions(eid, images)
            probe = probes.get(eid) if probes else None
            for vec, image in images:
                if rot is not None:
                    vec = rot * vec
                for target, factor in image.items():
                    _add(flying, target, factor * vec)
                    touched.add(target)
                    if probe is not None:
                        (_, _, out_port, _), out_pol = target
                        _add(probe, (out_port, out_pol.value), factor * vec)

        # only element outputs can interfere away; moved amplitudes keep their size
        for key in touched:
            if key in flying and not (np.abs(flying[key]) >= qs.PRUNE_CUTOFF).any():
                del flying[key]
        if trace is not None:
            trace.append((tick, tuple((loc, pol.value) for loc, pol in flying)))
    return terminal, tick, trace


def _run_hooks(
    node: int,
    ops: Sequence[str],
    cavity_key: tuple,
    reg: _Register,
    scatter_factor: complex,
    window: Mapping[int, float | np.ndarray],
    tables: tuple[dict, ...],
) -> None:
    """Run a node's cavity hook sequence on the dense amplitude tables in place.

    Atom-2 flips are tracked as a frame change: diagonal operations inside the
    flipped frame are applied as their conjugates ``X O X`` in the lab frame,
    and a real permutation is applied only if an odd number of flips remains.
    Collective dephasing in the flip window (``window[node]``) acts on every
    amplitude, not only the one at the cavity.
    """
    flipped = False
    flip = reg.flip2[node]
    for op in ops:
        if op == "sx2":
            flipped = not flipped
            if flipped and node in window:
                exc = reg.excitations[node][flip]
                factors = np.exp(1j * window[node] * exc)
                for table in tables:
                    for k in table:
                        table[k] = table[k] * factors
        elif op == "scatter":
            mask = reg.both[node][flip] if flipped else reg.both[node]
            arrivals = tables[-1]
            if cavity_key in arrivals:
                vec = arrivals[cavity_key]
                arrivals[cavity_key] = np.where(mask, vec * scatter_factor, vec)
        else:
            raise ScheduleError(f"unknown hook operation {op!r}")
    if flipped:
        for table in tables:
            for k in table:
                table[k] = table[k][..., flip]