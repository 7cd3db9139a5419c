"""Gate durations from cavity parameters, regime checks, and dark-count penalty."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass


@dataclass(frozen=True)
class TimingParams:
    """Cavity QED rates (as ordinary frequencies, Hz) and the pulse-length figure of merit."""

    kappa_over_2pi: float = 4e6
    g_over_2pi: float = 30e6
    gamma_over_2pi: float = 2.6e6
    kappa_T: float = 100.0

    def __post_init__(self) -> None:
        for name in ("kappa_over_2pi", "g_over_2pi", "gamma_over_2pi", "kappa_T"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def pulse_duration(timing: TimingParams) -> float:
    """Photon pulse duration ``T`` in seconds, from ``kappa * T = kappa_T``."""
    return timing.kappa_T / (2 * math.pi * timing.kappa_over_2pi)


def gate_time(kind: str, timing: TimingParams | None = None, n: int | None = None) -> float:
    """Duration of a gate in seconds.

    ``"CPF"`` takes one pulse, ``"Hadamard"`` two, ``"CPN"`` one per
    participating node (give ``n`` or write ``"CPN(5)"``).
    """
    timing = TimingParams() if timing is None else timing
    t = pulse_duration(timing)
    m = re.fullmatch(r"CPN\((\d+)\)", kind)
    if m:
        kind, n = "CPN", int(m.group(1))
    if kind == "CPF":
        return t
    if kind == "Hadamard":
        return 2 * t
    if kind == "CPN":
        if n is None or n < 1:
            raise ValueError("CPN needs the number of logical qubits")
        return n * t
    raise ValueError(f"unknown gate kind {kind!r}")


def validate_regime(timing: TimingParams) -> list[str]:
    """Warnings for parameters outside the long-pulse, strong-coupling regime."""
    warnings = []
    if timing.kappa_T < 10:
        warnings.append(f"kappa*T = {timing.kappa_T:g} is not >> 1 (need at least 10)")
    dissipative = max(timing.kappa_over_2pi, timing.gamma_over_2pi)
    if timing.g_over_2pi < 3 * dissipative:
        warnings.append(
            f"g/2pi = {timing.g_over_2pi:g} Hz is below 3x the largest dissipative rate ({dissipative:g} Hz)"
        )
    return warnings


def dark_count_penalty(rate: float, window: float) -> float:
    """Probability of at least one dark count in ``window`` seconds at ``rate`` Hz."""
    if rate < 0 or window < 0:
        raise ValueError("rate and window must be non-negative")
    return -math.expm1(-rate * window)


def default_detection_window(timing: TimingParams | None = None) -> float:
    """A quarter of the single-pulse gate time (about 1 us for the default cavity)."""
    return gate_time("CPF", timing) / 4


def timing_table(timing: TimingParams | None = None) -> dict[str, float]:
    timing = TimingParams() if timing is None else timing
    table = {"T": pulse_duration(timing), "CPF": gate_time("CPF", timing), "Hadamard": gate_time("Hadamard", timing)}
    for n in (3, 4, 5):
        table[f"CP{n}"] = gate_time("CPN", timing, n)
    return table
