"""Optical element catalog and per-port polarization transfer rules.

Elements are pure data. :func:`transfer` says where an amplitude entering
an element on ``(in_port, pol)`` goes and with which complex factor. All
passive routing factors are +1; the only polarization-mixing elements are
the half-wave plates.

Port names by kind
------------------
PBS          in: in1, in2          out: thru, refl
             (in1, H) -> thru   (in1, V) -> refl
             (in2, H) -> refl   (in2, V) -> thru
HWP          in: in                out: out
CIRC         ports "1".."k"; entering port j leaves by port j+1 (cyclic)
TR           in: a, b              out: x, y
             Transmit: a -> x, b -> y;   Reflect: a -> y, b -> x
STR          in: port0, port1, ret out: cav, port2
             Port0Entry:  port0 -> cav, ret -> port2
             Port1Entry:  port1 -> cav, ret -> port2
             ExitToPort2: ret -> port2
             Bypass1to2:  port1 -> port2
P45          in: in                out: out (projection done by the engine)
DET          any input port, no outputs (sink)
MIRROR, CAVITY, DELAY   in: in     out: out
COMBINER     in: in0..in{k-1}      out: out (ideal) or out, loss1..loss{k-1} (balanced)
SOURCE       no inputs             out: out

The entry configurations of an STR also carry the exit leg (``ret -> port2``):
the photon enters the node and later leaves it through the same router
within one protocol run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np

from .qstate import Pol

KINDS = (
    "PBS",
    "HWP",
    "CIRC",
    "TR",
    "STR",
    "P45",
    "DET",
    "MIRROR",
    "COMBINER",
    "CAVITY",
    "SOURCE",
    "DELAY",
)

CONFIGURABLE = frozenset({"TR", "STR"})


class TRState(str, enum.Enum):
    TRANSMIT = "Transmit"
    REFLECT = "Reflect"


class STRConfig(str, enum.Enum):
    PORT0_ENTRY = "Port0Entry"
    PORT1_ENTRY = "Port1Entry"
    EXIT_TO_PORT2 = "ExitToPort2"
    BYPASS_1TO2 = "Bypass1to2"


Setting = Union[TRState, STRConfig, int]


class PortError(ValueError):
    """An amplitude arrived on a port the element does not accept."""


class ConfigError(ValueError):
    """A configurable element was used without (or with a wrong) setting."""


@dataclass(frozen=True)
class Element:
    """One placed optical element.

    ``theta`` is the HWP angle in degrees, ``length`` the delay of a DELAY
    element in ticks, ``ports`` the circulator port count or combiner fan-in,
    ``name`` the detector name of a DET sink, ``node`` the owning node (if any).
    A DELAY with ``adjustable=True`` takes its length from the switch schedule.
    ``balanced`` turns a COMBINER into a lossy but unitary multiport.
    """

    id: str
    kind: str
    theta: float | None = None
    length: int = 0
    ports: int = 0
    name: str | None = None
    node: int | None = None
    adjustable: bool = False
    balanced: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if self.kind == "HWP" and self.theta is None:
            raise ValueError("HWP needs an angle")
        if self.kind == "DELAY" and self.length < 0:
            raise ValueError("delay length must be non-negative")

    @property
    def configurable(self) -> bool:
        return self.kind in CONFIGURABLE or (self.kind == "DELAY" and self.adjustable)

    @property
    def is_sink(self) -> bool:
        return self.kind == "DET"

    def delay(self, setting: Setting | None = None) -> int:
        """Ticks spent inside the element."""
        if self.kind != "DELAY":
            return 0
        if self.adjustable:
            if not isinstance(setting, int) or isinstance(setting, bool) or setting < 0:
                raise ConfigError(f"adjustable delay {self.id} needs a non-negative integer setting")
            return setting
        return self.length

    def in_ports(self) -> tuple[str, ...]:
        return _in_ports(self)

    def out_ports(self) -> tuple[str, ...]:
        return _out_ports(self)


def _in_ports(el: Element) -> tuple[str, ...]:
    k = el.kind
    if k == "PBS":
        return ("in1", "in2")
    if k == "TR":
        return ("a", "b")
    if k == "STR":
        return ("port0", "port1", "ret")
    if k == "CIRC":
        return tuple(str(i + 1) for i in range(el.ports or 3))
    if k == "COMBINER":
        return tuple(f"in{i}" for i in range(el.ports))
    if k == "SOURCE":
        return ()
    if k == "DET":
        return ("*",)
    return ("in",)


def _out_ports(el: Element) -> tuple[str, ...]:
    k = el.kind
    if k == "PBS":
        return ("thru", "refl")
    if k == "TR":
        return ("x", "y")
    if k == "STR":
        return ("cav", "port2")
    if k == "CIRC":
        return tuple(str(i + 1) for i in range(el.ports or 3))
    if k == "COMBINER":
        if el.balanced:
            return ("out",) + tuple(f"loss{i}" for i in range(1, el.ports))
        return ("out",)
    if k == "DET":
        return ()
    return ("out",)


def hwp_matrix(theta_degrees: float) -> np.ndarray:
    """Half-wave plate Jones matrix in the (H, V) basis.

    >>> np.round(hwp_matrix(45.0).real, 12) + 0.0
    array([[0., 1.],
           [1., 0.]])
    """
    t = np.deg2rad(2 * theta_degrees)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, s], [s, -c]], dtype=complex)


def polarizer_ray() -> np.ndarray:
    """Jones vector transmitted by the +45 degree polarizer."""
    return np.array([1, 1], dtype=complex) / np.sqrt(2)


Transfer = list[tuple[str, Pol, complex]]

_STR_MAPS = {
    STRConfig.PORT0_ENTRY: {"port0": "cav", "ret": "port2"},
    STRConfig.PORT1_ENTRY: {"port1": "cav", "ret": "port2"},
    STRConfig.EXIT_TO_PORT2: {"ret": "port2"},
    STRConfig.BYPASS_1TO2: {"port1": "port2"},
}


def transfer(el: Element, config: Setting | None, in_port: str, pol: Pol) -> Transfer:
    """Outputs ``(out_port, pol, factor)`` for an amplitude entering ``el`` on ``(in_port, pol)``.

    Detectors return an empty list; the engine moves the amplitude to a sink.
    The polarizer returns only its transmitted component, which is not
    norm-preserving on its own; the engine routes the rejected ray to loss.
    """
    pol = Pol(pol)
    k = el.kind
    if k == "DET":
        return []
    if in_port not in el.in_ports():
        raise PortError(f"{el.id} ({k}) has no input port {in_port!r}")
    if k == "PBS":
        if in_port == "in1":
            return [("thru" if pol is Pol.H else "refl", pol, 1)]
        return [("refl" if pol is Pol.H else "thru", pol, 1)]
    if k == "HWP":
        m = hwp_matrix(el.theta)
        col = 0 if pol is Pol.H else 1
        return [("out", p, complex(m[row, col])) for row, p in enumerate((Pol.H, Pol.V)) if m[row, col] != 0]
    if k == "CIRC":
        n = el.ports or 3
        return [(str(int(in_port) % n + 1), pol, 1)]
    if k == "TR":
        if not isinstance(config, TRState):
            raise ConfigError(f"{el.id} needs a TRState, got {config!r}")
        straight = config is TRState.TRANSMIT
        out = {"a": "x", "b": "y"} if straight else {"a": "y", "b": "x"}
        return [(out[in_port], pol, 1)]
    if k == "STR":
        if not isinstance(config, STRConfig):
            raise ConfigError(f"{el.id} needs an STRConfig, got {config!r}")
        routes = _STR_MAPS[config]
        if in_port not in routes:
            raise PortError(f"{el.id} in {config.value} does not route port {in_port!r}")
        return [(routes[in_port], pol, 1)]
    if k == "P45":
        ray = polarizer_ray()
        return [("out", Pol.H, complex(ray[0 if pol is Pol.H else 1]))]
    if k == "COMBINER":
        j = int(in_port[2:])
        if not el.balanced:
            return [("out", pol, 1)]
        m = el.ports
        outs = el.out_ports()
        return [(outs[r], pol, complex(np.exp(2j * np.pi * r * j / m) / np.sqrt(m))) for r in range(m)]
    if k == "SOURCE":
        raise PortError("a source has no inputs")
    return [("out", pol, 1)]


def transfer_matrix(el: Element, config: Setting | None = None) -> tuple[list[tuple[str, Pol]], list[tuple[str, Pol]], np.ndarray]:
    """Dense transfer matrix over all legal ``(port, pol)`` inputs of ``el``.

    Returns ``(inputs, outputs, M)`` with ``M[out, in]``. Inputs that the
    current configuration does not route are skipped.
    """
    inputs: list[tuple[str, Pol]] = []
    columns: list[Transfer] = []
    for port in el.in_ports():
        for pol in (Pol.H, Pol.V):
            try:
                columns.append(transfer(el, config, port, pol))
            except PortError:
                continue
            inputs.append((port, pol))
    outputs = sorted({(o, p) for col in columns for o, p, _ in col}, key=lambda t: (t[0], t[1].value))
    index = {o: i for i, o in enumerate(outputs)}
    mat = np.zeros((len(outputs), len(inputs)), dtype=complex)
    for c, col in enumerate(columns):
        for o, p, f in col:
            mat[index[(o, p)], c] += f
    return inputs, outputs, mat
