import math

import pytest

from dfsnet.timing import (
    TimingParams,
    dark_count_penalty,
    default_detection_window,
    gate_time,
    pulse_duration,
    timing_table,
    validate_regime,
)


def test_default_pulse():
    assert pulse_duration(TimingParams()) == pytest.approx(100 / (2 * math.pi * 4e6))


def test_gate_times():
    assert 3e-6 <= gate_time("CPF") <= 5e-6
    assert gate_time("CPF") == pytest.approx(3.979e-6, rel=1e-3)
    assert 6e-6 <= gate_time("Hadamard") <= 10e-6
    assert gate_time("CPN(5)") == pytest.approx(19.89e-6, rel=1e-3)
    assert gate_time("CPN", n=3) == pytest.approx(3 * gate_time("CPF"))


def test_gate_time_errors():
    with pytest.raises(ValueError):
        gate_time("CPN")
    with pytest.raises(ValueError):
        gate_time("SWAP")
    with pytest.raises(ValueError):
        TimingParams(kappa_T=0)
    with pytest.raises(ValueError):
        TimingParams(g_over_2pi=-1)


def test_regime_warnings():
    assert validate_regime(TimingParams()) == []
    (w,) = validate_regime(TimingParams(kappa_T=1))
    assert "kappa*T" in w
    (w,) = validate_regime(TimingParams(g_over_2pi=5e6))
    assert "g/2pi" in w


@pytest.mark.parametrize(
    "rate, window, expected",
    [(100, 1e-6, 1e-4), (0, 5.0, 0.0), (100, 0, 0.0)],
)
def test_dark_count_penalty(rate, window, expected):
    assert dark_count_penalty(rate, window) == pytest.approx(expected, rel=1e-3, abs=1e-15)


def test_dark_count_penalty_rejects_negatives():
    with pytest.raises(ValueError):
        dark_count_penalty(-1, 1)


def test_default_window_reproduces_small_penalty():
    w = default_detection_window()
    assert w == pytest.approx(gate_time("CPF") / 4)
    assert dark_count_penalty(100, w) == pytest.approx(1e-4, rel=0.01)


def test_table_keys():
    table = timing_table()
    assert list(table) == ["T", "CPF", "Hadamard", "CP3", "CP4", "CP5"]
    assert table["CP4"] == pytest.approx(4 * table["T"])
