"""DSS identification loop.

Start from the linear frequency-domain fit (f_0(x) = C* x), then alternate:

1. rebuild f from the corrected scatter ``(x(t_k), f_n(x_n(t_k)))``, where
   ``x_n`` is the model's own simulated response.  By the model equation
   ``f_n(x_n) = u - A_n x_n'' - B_n x_n'``, so this is the Lissajous figure
   with its dynamic part removed, and no derivative of the measured record
   is ever taken;
2. refit the derivative coefficients by output-error least squares with the
   new f frozen.

The same loop runs for third-order plants with three derivative
coefficients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, StagnationError, ValidationError
from .fit import FitWindow, fit_linear_freq, fit_linear_freq3, fit_monotone, refit_linear
from .harmonic import FrequencyResponsePoint
from .model import LinearParams, Nonlinearity, PlantModel
from .sim import HARMONIC, SignalSpec, SimOptions, TimeSeries, integrate, simulate

logger = logging.getLogger(__name__)

LISSAJOUS = "LISSAJOUS"
DSS_CORRECTED = "DSS_CORRECTED"


@dataclass(frozen=True)
class DssConfig:
    """Knobs of the DSS loop.

    ``start`` optionally replaces the frequency fit: (A, B, C) for second
    order (C is the initial linear stiffness) and (A, B, C, D) for third
    order.  ``x_max`` defaults to the largest measured ``|x|``.
    """

    order: int = 2
    max_iter: int = 20
    param_tol: float = 1e-4
    f_tol: float = 1e-3
    degree: int = 7
    x_max: float | None = None
    window: FitWindow | None = None
    substeps: int = 1
    start: tuple[float, ...] | None = None
    reject_ratio: float = 1.1

    def __post_init__(self):
        if self.order not in (2, 3):
            raise ConfigurationError(f"dss order must be 2 or 3, got {self.order}")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be at least 1")
        if self.start is not None and len(self.start) != self.order + 1:
            names = "(A, B, C)" if self.order == 2 else "(A, B, C, D)"
            raise ConfigurationError(
                f"order-{self.order} start needs {names}, got {len(self.start)} values"
            )


@dataclass(frozen=True)
class HistoryEntry:
    n: int
    linear: tuple[float, ...]
    residual: float


@dataclass(frozen=True)
class DssState:
    n: int
    linear: tuple[float, ...]
    f: Nonlinearity
    residual: float
    history: tuple[HistoryEntry, ...] = ()
    converged: bool = False

    def __post_init__(self):
        if any(c <= 0 for c in self.linear):
            raise ValidationError(f"DSS coefficients must be positive, got {self.linear}")
        if self.residual < 0:
            raise ValidationError("residual must be non-negative")

    @property
    def order(self) -> int:
        return len(self.linear)

    @property
    def A(self) -> float:
        return self.linear[0]

    @property
    def B(self) -> float:
        return self.linear[1]

    @property
    def C(self) -> float | None:
        return self.linear[2] if self.order == 3 else None

    def plant(self) -> PlantModel:
        if self.order == 2:
            return PlantModel(2, LinearParams(self.A, self.B, self.f.slope0), self.f)
        return PlantModel(3, LinearParams(*self.linear), self.f)


@dataclass(frozen=True)
class StaticCurve:
    """Static characteristic as ordered ``(x, u)`` points."""

    points: tuple[tuple[float, float], ...]
    source: str

    @property
    def x(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def u(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def sorted(self) -> "StaticCurve":
        return StaticCurve(tuple(sorted(self.points)), self.source)

    def is_monotone(self, eps: float = 0.0) -> bool:
        s = self.sorted()
        x, u = s.x, s.u
        return bool(np.all(np.diff(u) >= -eps * np.diff(x) - 1e-12 * max(1.0, np.abs(u).max())))


class DssOutcome(NamedTuple):
    plant: PlantModel
    curve: StaticCurve
    state: DssState


# --- helpers ---------------------------------------------------------------------


def _residual(u: TimeSeries, x: TimeSeries, linear, f: Nonlinearity, window: FitWindow | None, substeps: int) -> float:
    window = FitWindow.full(x) if window is None else window
    mask = window.mask(x)
    xn = integrate(linear, f.coeffs, u.values, u.dt, substeps, u.t0)[:, 0]
    r = xn[mask] - x.values[mask]
    return float(r @ r)


def _x_max(x: TimeSeries, config: DssConfig) -> float:
    return config.x_max if config.x_max is not None else float(np.max(np.abs(x.values)))


def _range_mismatch(f: Nonlinearity, g: Nonlinearity) -> float:
    grid = f.grid()
    return float(np.max(np.abs(f(grid) - g(grid))))


# --- operations ------------------------------------------------------------------


def dss_init(
    u: TimeSeries,
    x: TimeSeries,
    freq_points: Sequence[FrequencyResponsePoint] | None,
    config: DssConfig = DssConfig(),
) -> DssState:
    """State n = 0: linear fit, ``f_0(x) = C* x``."""
    u.check_grid(x)
    x_max = _x_max(x, config)
    if config.start is not None:
        coeffs = tuple(float(c) for c in config.start)
    elif freq_points is None:
        raise ConfigurationError("DSS needs frequency-response points or an explicit start")
    elif config.order == 2:
        coeffs = fit_linear_freq(freq_points).as_tuple()
    else:
        coeffs = fit_linear_freq3(freq_points)
    linear, stiffness = coeffs[:-1], coeffs[-1]
    f0 = Nonlinearity.linear(stiffness, x_max)
    residual = _residual(u, x, linear, f0, config.window, config.substeps)
    return DssState(0, linear, f0, residual, (HistoryEntry(0, linear, residual),))


def dynamic_correction(state: DssState, u: TimeSeries, x: TimeSeries, substeps: int = 1) -> np.ndarray:
    """Corrected static scatter, one ``(x_measured, f_n(x_n))`` row per sample."""
    u.check_grid(x)
    xn = integrate(state.linear, state.f.coeffs, u.values, u.dt, substeps, u.t0)[:, 0]
    return np.column_stack([x.values, state.f(xn)])


def dss_step(state: DssState, u: TimeSeries, x: TimeSeries, config: DssConfig = DssConfig()) -> DssState:
    """One DSS iteration; raises :class:`StagnationError` if the residual grows past the margin."""
    u.check_grid(x)
    pairs = dynamic_correction(state, u, x, config.substeps)
    f_next = fit_monotone(pairs, degree=config.degree, x_max=state.f.x_max)
    fit = refit_linear(u, x, f_next, config.window, state.linear, config.substeps)
    linear = tuple(float(c) for c in fit.x)
    n = state.n + 1
    new = DssState(n, linear, f_next, fit.objective, state.history + (HistoryEntry(n, linear, fit.objective),))
    # residuals at the roundoff floor carry no information about progress
    floor = 1e-12 * max(1.0, float(x.values @ x.values))
    if new.residual > config.reject_ratio * state.residual + floor:
        raise StagnationError(
            f"DSS step {n} raised the residual from {state.residual:.6g} to {new.residual:.6g}",
            previous=state,
            rejected=new,
        )
    return new


def static_curve(state: DssState, u: TimeSeries, x: TimeSeries) -> StaticCurve:
    """The identified characteristic tabulated at the measured ``x`` samples.

    Samples outside the identified range are dropped, so the curve is
    monotone by construction.  The raw corrected scatter is available from
    :func:`dynamic_correction`.
    """
    u.check_grid(x)
    xs = x.values[np.abs(x.values) <= state.f.x_max]
    return StaticCurve(tuple(zip(xs.tolist(), state.f(xs).tolist())), DSS_CORRECTED)


def dss_run(
    u: TimeSeries,
    x: TimeSeries,
    freq_points: Sequence[FrequencyResponsePoint] | None,
    config: DssConfig = DssConfig(),
) -> DssOutcome:
    """Iterate DSS steps until parameters and f stop moving.

    Stops when the summed relative change of the derivative coefficients is
    below ``param_tol`` and f moves less than ``f_tol`` of full scale, or
    after ``max_iter`` steps.  A non-converged run returns the lowest
    residual state seen with ``converged=False``.
    """
    state = dss_init(u, x, freq_points, config)
    best = state
    converged = False
    for _ in range(config.max_iter):
        try:
            new = dss_step(state, u, x, config)
        except StagnationError as exc:
            logger.info("%s", exc)
            break
        dparam = sum(abs(a - b) / b for a, b in zip(new.linear, state.linear))
        df = _range_mismatch(new.f, state.f)
        full_scale = abs(float(new.f(new.f.x_max)))
        logger.debug("dss n=%d linear=%s residual=%.6g dparam=%.3g df=%.3g", new.n, new.linear, new.residual, dparam, df)
        state = new
        if state.residual <= best.residual:
            best = state
        if dparam < config.param_tol and df < config.f_tol * full_scale:
            converged = True
            break
    final = replace(state, converged=True) if converged else replace(best, history=state.history, converged=False)
    return DssOutcome(final.plant(), static_curve(final, u, x), final)


def dss_run_third_order(
    u: TimeSeries,
    x: TimeSeries,
    config: DssConfig,
    freq_points: Sequence[FrequencyResponsePoint] | None = None,
) -> DssOutcome:
    if config.order != 3:
        raise ConfigurationError("dss_run_third_order needs a config with order = 3")
    return dss_run(u, x, freq_points, config)


def lissajous_baseline(
    plant_or_data,
    omega: float | None = None,
    amplitude: float | None = None,
    periods: int = 1,
    samples_per_period: int = 2000,
) -> StaticCurve:
    """Raw ``(x, u)`` curve under a harmonic input: the uncorrected comparator.

    ``plant_or_data`` is a :class:`PlantModel` (simulated at angular
    frequency ``omega`` for ``periods`` periods; ``amplitude`` defaults to
    ``f(x_max)``) or a ``(u, x)`` pair of recorded series.
    """
    if isinstance(plant_or_data, PlantModel):
        plant = plant_or_data
        if omega is None or not omega > 0:
            raise ValidationError("lissajous_baseline needs a positive omega for a plant")
        amp = float(plant.f(plant.f.x_max)) if amplitude is None else float(amplitude)
        period = 2 * math.pi / omega
        dt = period / samples_per_period
        opts = SimOptions(sample_dt=dt, duration=periods * period)
        spec = SignalSpec(HARMONIC, amplitude=amp, frequency=omega / (2 * math.pi))
        u_vals = spec(dt * np.arange(opts.n_samples))
        x_vals = simulate(plant, spec, opts).values
    else:
        u, x = plant_or_data
        u.check_grid(x)
        u_vals, x_vals = u.values, x.values
    pts = np.column_stack([x_vals, u_vals])
    keep = np.ones(len(pts), bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    return StaticCurve(tuple(map(tuple, pts[keep].tolist())), LISSAJOUS)


# --- error measures --------------------------------------------------------------


def _monotone_inverse(f: Nonlinearity, u: np.ndarray, bound: float, n: int = 20001) -> np.ndarray:
    """Invert f by interpolation on the monotone stretch of [-bound, bound] around 0.

    Values beyond that stretch clamp to its ends.
    """
    grid = np.linspace(-bound, bound, n)
    vals = f(grid)
    rising = np.diff(vals) > 0
    mid = n // 2
    lo = mid
    while lo > 0 and rising[lo - 1]:
        lo -= 1
    hi = mid
    while hi < n - 1 and rising[hi]:
        hi += 1
    return np.interp(u, vals[lo : hi + 1], grid[lo : hi + 1])


def curve_sup_error(curve: StaticCurve, f_true: Nonlinearity, full_scale: float | None = None) -> float:
    """``max |x_k - f_true^-1(u_k)|`` over the curve, relative to full scale."""
    fs = f_true.x_max if full_scale is None else full_scale
    x_true = _monotone_inverse(f_true, curve.u, 4 * f_true.x_max)
    return float(np.max(np.abs(curve.x - x_true))) / fs


def function_sup_error(f_hat: Nonlinearity, f_true: Nonlinearity, x_max: float | None = None, n: int = 401) -> float:
    """Sup distance between the static characteristics ``x = f^-1(u)`` for ``|x| <= x_max``."""
    x_max = f_true.x_max if x_max is None else x_max
    xs = np.linspace(-x_max, x_max, n)
    x_hat = _monotone_inverse(f_hat, f_true(xs), 4 * x_max)
    return float(np.max(np.abs(x_hat - xs))) / x_max


def identification_signal(
    plant: PlantModel,
    levels: int = 9,
    dwell: float = 10.0,
    harmonic_fraction: float = 0.05,
) -> SignalSpec:
    """Staircase through the static range plus a small harmonic at ``ω_nat``.

    Each of ``levels`` steps lasts ``dwell`` slow time constants of the
    plant, so the response spends most of the record near equilibrium (where
    the corrected scatter is exact) while the step edges and the harmonic
    excite the dynamics.
    """
    f = plant.f
    slow = float(np.max(plant.roots().real))
    step_time = dwell / abs(slow)
    x_levels = np.linspace(-f.x_max, f.x_max, levels)
    steps = tuple((i * step_time, float(f(xl))) for i, xl in enumerate(x_levels))
    return SignalSpec(
        "MULTISTEP",
        amplitude=harmonic_fraction * float(f(f.x_max)),
        frequency=plant.natural_frequency / (2 * math.pi),
        step_levels=steps,
    )


def signal_duration(spec: SignalSpec) -> float:
    """Record length covering every step of a staircase for one dwell."""
    times = [t for t, _ in spec.step_levels]
    if len(times) < 2:
        return times[0] if times else 0.0
    return times[-1] + (times[-1] - times[-2])
