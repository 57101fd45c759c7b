import functools
import math

import numpy as np
import pytest

from dssid.dss import identification_signal, signal_duration
from dssid.harmonic import sweep_frequency_response
from dssid.model import Nonlinearity, PlantModel
from dssid.sim import SimOptions, generate_signal, simulate

TRUTH = PlantModel.second_order(1.0, 2.0, Nonlinearity((1.0, 0.1)))

BATTERY = (
    TRUTH,
    PlantModel.second_order(1.0, 1.0, Nonlinearity((1.0, 0.2))),
    PlantModel.second_order(0.5, 1.5, Nonlinearity((2.0, 0.3))),
    PlantModel.second_order(2.0, 3.0, Nonlinearity((1.0, 0.05, 0.02))),
    PlantModel.second_order(1.0, 2.5, Nonlinearity((1.5, 0.1))),
)


def freq_points(plant, noise_sigma=0.0, seed=0):
    wn = plant.natural_frequency
    opts = SimOptions(0.01, 1.0, noise_sigma=noise_sigma, seed=seed)
    amp = 0.5 * float(plant.f(plant.f.x_max))
    return sweep_frequency_response(plant, wn * np.array([0.5, 1.0, 2.0]), opts, amplitude=amp)


def identification_record(plant, noise_sigma=0.0, seed=0):
    """Staircase + harmonic experiment on the plant; returns (u, x)."""
    spec = identification_signal(plant)
    dt = min(0.01, plant.char_time() / 100)
    opts = SimOptions(dt, signal_duration(spec), rk_step=dt, noise_sigma=noise_sigma, seed=seed)
    return generate_signal(spec, opts), simulate(plant, spec, opts)


@functools.lru_cache(maxsize=None)
def cached_experiment(index):
    plant = BATTERY[index]
    u, x = identification_record(plant)
    return plant, u, x, freq_points(plant)


@pytest.fixture(scope="session")
def truth_experiment():
    return cached_experiment(0)


def harmonic_record(plant, omega, periods, samples_per_period=1000, amplitude=None):
    from dssid.sim import HARMONIC, SignalSpec

    amp = float(plant.f(plant.f.x_max)) if amplitude is None else amplitude
    period = 2 * math.pi / omega
    dt = period / samples_per_period
    m = max(1, math.ceil(dt / (plant.char_time() / 50)))
    spec = SignalSpec(HARMONIC, amplitude=amp, frequency=omega / (2 * math.pi))
    opts = SimOptions(dt, periods * period, rk_step=dt / m)
    return generate_signal(spec, opts), simulate(plant, spec, opts), m


ACCEPTANCE_LINES: list[str] = []


def report(number: int, title: str, ok: bool, detail: str) -> None:
    """Print and record one acceptance line, then fail the test if needed."""
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
