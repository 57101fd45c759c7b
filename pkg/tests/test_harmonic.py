import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dssid.errors import DegenerateInputError, InstabilityError, ResonanceError, WindowError
from dssid.harmonic import (
    AnalysisWindow,
    FrequencyResponsePoint,
    eval_transfer,
    harmonic_coefficient,
    measured_gain,
    settle_window,
    sweep_frequency_response,
)
from dssid.model import LinearParams, Nonlinearity, PlantModel
from dssid.sim import SimOptions, TimeSeries

LINEAR = PlantModel.second_order(1.0, 2.0, 1.0)
OMEGA = 1.3


def sampled(fn, omega=OMEGA, periods=4, n_per=200):
    dt = 2 * math.pi / omega / n_per
    t = dt * np.arange(periods * n_per + 1)
    return TimeSeries(0.0, dt, fn(t))


WINDOW = AnalysisWindow(0.0, 4)


def test_sine_coefficient():
    x = sampled(lambda t: np.sin(OMEGA * t))
    assert abs(harmonic_coefficient(x, OMEGA, 1, WINDOW).value - (-0.5j)) < 1e-6


def test_constant_is_orthogonal():
    x = sampled(lambda t: np.full_like(t, 3.7))
    assert abs(harmonic_coefficient(x, OMEGA, 1, WINDOW).value) < 1e-10


def test_cos_second_harmonic_vanishes():
    x = sampled(lambda t: np.cos(OMEGA * t))
    assert abs(harmonic_coefficient(x, OMEGA, 2, WINDOW).value) < 1e-10


def test_non_integer_period_grid_uses_interpolated_endpoint():
    dt = 2 * math.pi / OMEGA / 200.37
    t = dt * np.arange(2000)
    x = TimeSeries(0.0, dt, np.sin(OMEGA * t))
    assert abs(harmonic_coefficient(x, OMEGA, 1, WINDOW).value + 0.5j) < 1e-4


def test_window_errors():
    x = sampled(lambda t: np.sin(OMEGA * t), periods=2)
    with pytest.raises(WindowError, match="duration"):
        harmonic_coefficient(x, OMEGA, 1, AnalysisWindow(0.0, 4))
    coarse = sampled(lambda t: np.sin(OMEGA * t), n_per=16)
    with pytest.raises(WindowError):
        harmonic_coefficient(coarse, OMEGA, 1, WINDOW)


amps = st.floats(0.1, 2.0)
phases = st.floats(-math.pi, math.pi)


@settings(max_examples=40)
@given(amps, amps, amps, phases, phases, phases)
def test_reconstruction_of_three_harmonics(a1, a2, a3, p1, p2, p3):
    a, p = (a1, a2, a3), (p1, p2, p3)
    x = sampled(lambda t: sum(a[k] * np.sin((k + 1) * OMEGA * t + p[k]) for k in range(3)))
    for k in range(3):
        expected = a[k] * np.exp(1j * (p[k] - math.pi / 2)) / 2
        assert abs(harmonic_coefficient(x, OMEGA, k + 1, WINDOW).value - expected) < 1e-6


def test_measured_gain_at_unit_frequency():
    point = sweep_frequency_response(LINEAR, [1.0], SimOptions(0.01, 1.0))[0]
    assert abs(point.gain + 0.5j) < 1e-3
    assert point.amplitude == pytest.approx(0.5, abs=1e-3)
    assert point.phase == pytest.approx(-math.pi / 2, abs=1e-3)


def test_measured_gain_low_frequency():
    point = sweep_frequency_response(LINEAR, [0.01], SimOptions(0.01, 1.0))[0]
    assert point.amplitude == pytest.approx(1.0, rel=0.01)


def test_measured_gain_self_ratio():
    u = sampled(lambda t: np.sin(OMEGA * t) + 0.2)
    assert abs(measured_gain(u, u, OMEGA, WINDOW).gain - 1) < 1e-10


def test_measured_gain_degenerate_input():
    u = sampled(lambda t: np.zeros_like(t))
    with pytest.raises(DegenerateInputError):
        measured_gain(u, u, OMEGA, WINDOW)


@pytest.mark.parametrize(
    "params, omega, expected",
    [((1, 2, 1), 0.0, 1.0), ((1, 2, 1), 1.0, -0.5j), ((1, 2, 2), 0.0, 0.5)],
)
def test_eval_transfer(params, omega, expected):
    assert abs(eval_transfer(LinearParams(*params), omega) - expected) < 1e-15


def test_eval_transfer_resonance():
    with pytest.raises(ResonanceError):
        eval_transfer(LinearParams(1, 0, 1), 1.0)


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.01, 10), st.floats(-100, 100))
def test_conjugate_symmetry(A, B, C, w):
    p = LinearParams(A, B, C)
    assert eval_transfer(p, -w) == eval_transfer(p, w).conjugate()


def test_settle_window_examples():
    assert settle_window(LinearParams(1, 2, 1), 1.0).settle_time == pytest.approx(4 * math.pi)
    assert settle_window(LinearParams(1, 2, 1), 0.1).settle_time == pytest.approx(40 * math.pi)
    slow = (-20 + math.sqrt(396)) / 2
    assert settle_window(LinearParams(1, 20, 1), 10.0).settle_time == pytest.approx(8 / abs(slow))
    assert settle_window(LinearParams(1, 20, 1), 10.0).settle_time == pytest.approx(159.6, abs=0.1)


def test_settle_window_unstable():
    with pytest.raises(InstabilityError):
        settle_window(LinearParams(1, -1, 1), 1.0)


def test_sweep_matches_transfer():
    omegas = [0.5, 1.0, 2.0]
    points = sweep_frequency_response(LINEAR, omegas, SimOptions(0.01, 1.0))
    assert [p.omega for p in points] == omegas
    for p in points:
        assert abs(p.gain - eval_transfer(LINEAR.linear, p.omega)) < 1e-3


def test_sweep_empty():
    assert sweep_frequency_response(LINEAR, [], SimOptions(0.01, 1.0)) == []


def test_sweep_small_amplitude_linearizes():
    plant = PlantModel.second_order(1.0, 2.0, Nonlinearity((1.0, 0.1)))
    lin = LinearParams(1.0, 2.0, 1.0)
    for p in sweep_frequency_response(plant, [0.5, 1.0, 2.0], SimOptions(0.01, 1.0), amplitude=0.01):
        g = eval_transfer(lin, p.omega)
        assert abs(p.gain - g) / abs(g) < 0.01


def test_linear_consistency_over_band():
    omegas = np.geomspace(0.1, 10, 12)
    for p in sweep_frequency_response(LINEAR, omegas, SimOptions(0.01, 1.0)):
        g = eval_transfer(LINEAR.linear, p.omega)
        assert abs(p.gain - g) / abs(g) < 1e-3


def test_more_periods_never_worse():
    omega = 1.0
    errors = []
    for periods in (1, 2, 4, 8):
        policy = lambda plant, w, n=periods: AnalysisWindow(settle_window(plant.linear, w).settle_time, n)
        p = sweep_frequency_response(LINEAR, [omega], SimOptions(0.01, 1.0), window_policy=policy)[0]
        errors.append(abs(p.gain - eval_transfer(LINEAR.linear, omega)))
    assert all(b <= a for a, b in zip(errors, errors[1:])), errors


def test_frequency_response_point_fields():
    p = FrequencyResponsePoint(2.0, complex(0, -1))
    assert p.amplitude == 1 and p.phase == pytest.approx(-math.pi / 2)
