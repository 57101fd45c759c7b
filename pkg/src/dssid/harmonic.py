"""Harmonic analysis of periodic responses and linear transfer functions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInputError, IdentError, InstabilityError, ResonanceError, ValidationError, WindowError
from .model import LinearParams, PlantModel, characteristic_roots, check_stability
from .sim import HARMONIC, SignalSpec, SimOptions, TimeSeries, simulate

MIN_SAMPLES_PER_PERIOD = 32
DEFAULT_PERIODS = 4
SWEEP_SUBSTEPS = 4
SWEEP_SETTLE_FACTOR = 16.0


@dataclass(frozen=True)
class HarmonicCoefficient:
    omega: float
    k: int
    value: complex


@dataclass(frozen=True)
class FrequencyResponsePoint:
    omega: float
    gain: complex

    @property
    def amplitude(self) -> float:
        return abs(self.gain)

    @property
    def phase(self) -> float:
        return math.atan2(self.gain.imag, self.gain.real)


@dataclass(frozen=True)
class AnalysisWindow:
    """Integrate ``periods`` whole periods starting at ``settle_time``."""

    settle_time: float
    periods: int = DEFAULT_PERIODS

    def __post_init__(self):
        if self.settle_time < 0:
            raise ValidationError("settle_time must be non-negative")
        if int(self.periods) != self.periods or self.periods < 1:
            raise ValidationError("periods must be a positive integer")

    def span(self, omega: float) -> tuple[float, float]:
        return self.settle_time, self.settle_time + self.periods * 2 * math.pi / omega


def _sample_at(x: TimeSeries, t: float) -> float:
    pos = (t - x.t0) / x.dt
    i = int(math.floor(pos))
    frac = pos - i
    if abs(frac) < 1e-9 or i >= len(x) - 1:
        return float(x.values[min(max(int(round(pos)), 0), len(x) - 1)])
    if abs(frac - 1) < 1e-9:
        return float(x.values[i + 1])
    return float((1 - frac) * x.values[i] + frac * x.values[i + 1])


def harmonic_coefficient(x: TimeSeries, omega: float, k: int, window: AnalysisWindow) -> HarmonicCoefficient:
    """``(ω/2π) ∫ x(t) e^{-ikωt} dt`` over one period, averaged over ``window.periods``.

    Trapezoidal rule on the sample grid; window endpoints that fall between
    samples are linearly interpolated.
    """
    if not omega > 0:
        raise ValidationError("omega must be positive")
    if k < 0:
        raise ValidationError("harmonic index must be non-negative")
    period = 2 * math.pi / omega
    if period / x.dt < MIN_SAMPLES_PER_PERIOD - 1e-9:
        raise WindowError(
            f"{period / x.dt:.1f} samples per period at omega={omega:g}; "
            f"need dt <= {period / MIN_SAMPLES_PER_PERIOD:.6g}"
        )
    a, b = window.span(omega)
    tol = 1e-9 * x.dt
    if a < x.t0 - tol or b > x.t_end + tol:
        raise WindowError(
            f"record covers [{x.t0:g}, {x.t_end:g}] but the window needs [{a:g}, {b:g}] "
            f"(duration >= {b:g})"
        )
    # a whole-period integral of a periodic integrand is shift invariant, so
    # start on the first sample at or after the settle time
    a = x.t0 + math.ceil((a - x.t0) / x.dt - 1e-9) * x.dt
    b = a + window.periods * period
    if b > x.t_end + tol:
        raise WindowError(
            f"record covers [{x.t0:g}, {x.t_end:g}] but the window needs [{a:g}, {b:g}] "
            f"(duration >= {b:g})"
        )
    t = x.t
    inside = (t > a + tol) & (t < b - tol)
    nodes = np.concatenate([[a], t[inside], [b]])
    vals = np.concatenate([[_sample_at(x, a)], x.values[inside], [_sample_at(x, b)]])
    integrand = vals * np.exp(-1j * k * omega * nodes)
    integral = np.trapezoid(integrand, nodes)
    value = complex(integral * omega / (2 * math.pi) / window.periods)
    return HarmonicCoefficient(omega, k, value)


def measured_gain(u: TimeSeries, x: TimeSeries, omega: float, window: AnalysisWindow) -> FrequencyResponsePoint:
    """First-harmonic gain ``K1[x] / K1[u]``.

    The ratio cancels the ``1/(2i)`` factor that the raw coefficient of a
    sine carries, so on a linear plant it equals ``1/(A s² + B s + C)`` at
    ``s = iω``.
    """
    u.check_grid(x)
    ku = harmonic_coefficient(u, omega, 1, window).value
    if abs(ku) < 1e-12:
        raise DegenerateInputError(f"input has no first harmonic at omega={omega:g}")
    kx = harmonic_coefficient(x, omega, 1, window).value
    return FrequencyResponsePoint(omega, kx / ku)


def eval_transfer(params: LinearParams | Sequence[float], omega: float) -> complex:
    """``1 / (A s² + B s + C)`` at ``s = iω``.

    Also accepts a descending coefficient sequence of any length, e.g. the
    four coefficients of a third-order plant.
    """
    poly = params.as_tuple() if isinstance(params, LinearParams) else tuple(params)
    s = 1j * omega
    den = 0j
    for c in poly:
        den = den * s + c
    if abs(den) < 1e-300:
        raise ResonanceError(f"transfer function singular at omega={omega:g}")
    return 1 / den


def _settle_from_roots(roots, omega: float, factor: float = 8.0) -> AnalysisWindow:
    slow = max(r.real for r in roots)
    if slow >= 0:
        raise InstabilityError(f"cannot settle an unstable system (root real part {slow:g})")
    return AnalysisWindow(max(factor / abs(slow), 2 * 2 * math.pi / omega), DEFAULT_PERIODS)


def settle_window(params: LinearParams, omega: float) -> AnalysisWindow:
    """Transient allowance ``max(8/|Re λ_slow|, two periods)`` and four analysis periods."""
    roots, stable = check_stability(params)
    if not stable:
        raise InstabilityError(f"unstable parameters {params}")
    return _settle_from_roots(roots, omega)


def plant_window(plant: PlantModel, omega: float, factor: float = SWEEP_SETTLE_FACTOR) -> AnalysisWindow:
    """Default sweep window for a plant's linearization.

    Uses twice the decay allowance of :func:`settle_window`: with repeated
    roots the transient decays like ``t e^{λt}`` and eight time constants
    leave about 1e-3 of it in the measured gain at high frequency.
    """
    return _settle_from_roots(characteristic_roots(plant.char_poly), omega, factor)


def default_frequency_grid(plant: PlantModel, n: int = 24) -> np.ndarray:
    wn = plant.natural_frequency
    return wn * np.logspace(math.log10(0.05), math.log10(20), n)


def sweep_options(plant: PlantModel, omega: float, opts: SimOptions, window: AnalysisWindow) -> SimOptions:
    """Options for one harmonic sub-test: enough record and resolution for ``window``.

    The sample step divides the period exactly so the analysis needs no
    interpolation.  The input is sampled four times finer than the
    resolution limit so its piecewise-linear hold stays close to the sine.
    """
    period = 2 * math.pi / omega
    dt_max = min(opts.sample_dt, period / 64, plant.char_time() / 50)
    dt = period / math.ceil(period / dt_max - 1e-9) / SWEEP_SUBSTEPS
    _, end = window.span(omega)
    return SimOptions(
        sample_dt=dt,
        duration=end + 2 * dt,
        rk_step=dt,
        noise_sigma=opts.noise_sigma,
        seed=opts.seed,
    )


def response_point(
    plant: PlantModel,
    omega: float,
    opts: SimOptions,
    amplitude: float = 1.0,
    window: AnalysisWindow | None = None,
) -> FrequencyResponsePoint:
    window = plant_window(plant, omega) if window is None else window
    sub = sweep_options(plant, omega, opts, window)
    spec = SignalSpec(HARMONIC, amplitude=amplitude, frequency=omega / (2 * math.pi))
    u = TimeSeries(0.0, sub.sample_dt, spec(sub.sample_dt * np.arange(sub.n_samples)))
    x = simulate(plant, spec, sub)
    return measured_gain(u, x, omega, window)


def sweep_frequency_response(
    plant: PlantModel,
    omegas: Sequence[float],
    opts: SimOptions,
    window_policy: Callable[[PlantModel, float], AnalysisWindow] | None = None,
    amplitude: float = 1.0,
) -> list[FrequencyResponsePoint]:
    """Simulate one harmonic sub-test per frequency and measure the gain.

    Results follow the input order.  Errors are re-raised with the failing
    frequency in the message.
    """
    omegas = [float(w) for w in omegas]
    if any(not w > 0 for w in omegas):
        raise ValidationError("sweep frequencies must be positive")
    if len(set(omegas)) != len(omegas):
        raise ValidationError("sweep frequencies must be distinct")
    policy = window_policy or plant_window
    points = []
    for w in omegas:
        try:
            points.append(response_point(plant, w, opts, amplitude, policy(plant, w)))
        except IdentError as exc:
            raise type(exc)(f"at omega={w:g}: {exc}") from exc
    return points
