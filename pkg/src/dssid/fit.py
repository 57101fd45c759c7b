"""Parameter estimation.

* :func:`fit_linear_freq` -- A, B, C from measured complex gains.
* :func:`fit_time_domain` -- A, B and the nonlinearity from a time record.
* :func:`refit_linear` / :func:`refit_AB` -- linear coefficients with f frozen.
* :func:`fit_monotone` -- odd polynomial through an (x, f(x)) scatter.
* :func:`minimize` -- the Nelder-Mead engine behind the nonlinear fits.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    InstabilityError,
    InsufficientDataError,
    NonConvergenceError,
    NumericalError,
    ObjectiveError,
    ValidationError,
)
from .harmonic import FrequencyResponsePoint
from .model import MAX_COEFFS, MONOTONE_GRID, LinearParams, Nonlinearity, characteristic_roots, check_stability
from .sim import TimeSeries, integrate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitWindow:
    """Samples with ``tau1 <= t_k <= tau2`` enter the objective."""

    tau1: float
    tau2: float

    def __post_init__(self):
        if not (self.tau1 >= 0 and self.tau2 > self.tau1):
            raise ValidationError(f"fit window needs 0 <= tau1 < tau2, got ({self.tau1}, {self.tau2})")

    @classmethod
    def full(cls, x: TimeSeries) -> "FitWindow":
        return cls(max(x.t0, 0.0), x.t_end)

    def mask(self, x: TimeSeries) -> np.ndarray:
        t = x.t
        tol = 1e-9 * x.dt
        return (t >= self.tau1 - tol) & (t <= self.tau2 + tol)


@dataclass
class FitResult:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool
    evaluations: int = 0
    names: tuple[str, ...] = ()
    nonlinearity: Nonlinearity | None = field(default=None, repr=False)

    @property
    def params(self) -> dict[str, float]:
        names = self.names or tuple(f"p{i}" for i in range(len(self.x)))
        return {n: float(v) for n, v in zip(names, self.x)}


# --- Nelder-Mead -----------------------------------------------------------------


def minimize(
    objective: Callable[[np.ndarray], float],
    start: Sequence[float],
    positive: Sequence[bool] | None = None,
    step: Sequence[float] | None = None,
    xtol: float = 1e-9,
    ftol: float = 1e-14,
    max_iterations: int = 2000,
    ftarget: float | None = None,
    restarts: int = 3,
    names: tuple[str, ...] = (),
) -> FitResult:
    """Nelder-Mead simplex descent.

    Coordinates flagged ``positive`` are searched in log space.  The search
    stops when the simplex diameter (max-norm, search coordinates) drops below
    ``xtol``, when the objective spread drops below ``ftol`` on a simplex
    already narrower than ``100 * xtol``, or after ``max_iterations``.  Converged searches are restarted from the best
    vertex up to ``restarts`` times while that keeps improving.  If the
    objective at ``start`` is already ``<= ftarget`` the start is returned
    without iterating.
    """
    x0 = np.asarray(start, dtype=float)
    dim = x0.size
    pos = np.zeros(dim, bool) if positive is None else np.asarray(positive, bool)
    if np.any(x0[pos] <= 0):
        raise ValidationError("log-parameterized start values must be positive")
    z0 = np.where(pos, np.log(np.where(pos, x0, 1.0)), x0)

    def to_x(z):
        return np.where(pos, np.exp(z), z)

    evals = 0

    def fz(z):
        nonlocal evals
        evals += 1
        val = float(objective(to_x(z)))
        if not math.isfinite(val):
            raise ObjectiveError(f"objective is {val} at {to_x(z).tolist()}", point=to_x(z))
        return val

    f0 = fz(z0)
    if ftarget is not None and f0 <= ftarget:
        return FitResult(x0.copy(), f0, 0, True, evals, names)

    if step is None:
        step = np.where(pos, 0.1, np.where(z0 != 0, 0.05 * np.abs(z0), 0.01))
    step = np.broadcast_to(np.asarray(step, float), (dim,))

    best_z, best_f = z0, f0
    iterations = 0
    converged = False
    for attempt in range(restarts + 1):
        simplex = np.vstack([best_z] + [best_z + step[i] * np.eye(dim)[i] for i in range(dim)])
        fvals = np.array([best_f] + [fz(v) for v in simplex[1:]])
        converged = False
        while iterations < max_iterations:
            order = np.argsort(fvals, kind="stable")
            simplex, fvals = simplex[order], fvals[order]
            diameter = np.max(np.abs(simplex[1:] - simplex[0]))
            # a flat spread alone also happens on a simplex straddling the minimum
            if (
                diameter < xtol
                or (fvals[-1] - fvals[0] < ftol and diameter < 100 * xtol)
                or (ftarget is not None and fvals[0] <= ftarget)
            ):
                converged = True
                break
            iterations += 1
            centroid = simplex[:-1].mean(axis=0)
            xr = centroid + (centroid - simplex[-1])
            fr = fz(xr)
            if fr < fvals[0]:
                xe = centroid + 2.0 * (centroid - simplex[-1])
                fe = fz(xe)
                simplex[-1], fvals[-1] = (xe, fe) if fe < fr else (xr, fr)
            elif fr < fvals[-2]:
                simplex[-1], fvals[-1] = xr, fr
            else:
                if fr < fvals[-1]:
                    xc = centroid + 0.5 * (xr - centroid)
                else:
                    xc = centroid + 0.5 * (simplex[-1] - centroid)
                fc = fz(xc)
                if fc < min(fr, fvals[-1]):
                    simplex[-1], fvals[-1] = xc, fc
                else:
                    simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
                    fvals[1:] = [fz(v) for v in simplex[1:]]
        i = int(np.argmin(fvals))
        improved = best_f - fvals[i]
        if fvals[i] <= best_f:
            best_z, best_f = simplex[i].copy(), float(fvals[i])
        if not converged or improved <= ftol or (ftarget is not None and best_f <= ftarget):
            break
        step = np.maximum(np.abs(step) * 0.1, 100 * xtol)
    return FitResult(to_x(best_z), best_f, iterations, converged, evals, names)


# --- frequency-domain fit --------------------------------------------------------


def _freq_design(omegas: np.ndarray, n_coef: int) -> np.ndarray:
    # columns: (iω)^(n-1), ..., (iω)^0 as a real system [Re; Im]
    s = 1j * omegas
    cols = np.stack([s ** (n_coef - 1 - j) for j in range(n_coef)], axis=1)
    return np.vstack([cols.real, cols.imag])


def _freq_objective(poly: np.ndarray, omegas: np.ndarray, gains: np.ndarray) -> float:
    s = 1j * omegas
    den = np.zeros_like(s)
    for c in poly:
        den = den * s + c
    return float(np.sum(np.abs(1 / den - gains) ** 2))


def fit_transfer_poly(points: Sequence[FrequencyResponsePoint], order: int = 2) -> FitResult:
    """Coefficients of ``1/(a_n s^n + ... + a_0)`` closest to the measured gains.

    Stage one solves the inverted-gain problem as linear least squares;
    stage two minimizes the squared gain mismatch from there.
    """
    pts = list(points)
    omegas = np.array([p.omega for p in pts], dtype=float)
    gains = np.array([p.gain for p in pts], dtype=complex)
    if len(pts) < 2 or np.unique(omegas).size < 2:
        raise InsufficientDataError(f"need at least 2 distinct frequencies, got {np.unique(omegas).size}")
    if not np.all(np.isfinite(gains)) or np.any(gains == 0):
        raise ValidationError("gains must be finite and nonzero")
    n_coef = order + 1
    inv = 1 / gains
    design = _freq_design(omegas, n_coef)
    rhs = np.concatenate([inv.real, inv.imag])
    coef, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    names = ("A", "B", "C") if order == 2 else ("A", "B", "C", "D")

    scale = np.max(np.abs(coef))
    start = np.maximum(coef, 1e-6 * scale)
    target = 1e-20 * float(np.sum(np.abs(gains) ** 2))
    result = minimize(
        lambda p: _freq_objective(p, omegas, gains),
        start,
        positive=[True] * n_coef,
        ftarget=target,
        names=names,
    )
    if np.all(coef > 0) and _freq_objective(coef, omegas, gains) <= result.objective:
        result = FitResult(coef, _freq_objective(coef, omegas, gains), result.iterations, True, result.evaluations, names)
    return result


def fit_linear_freq(points: Sequence[FrequencyResponsePoint]) -> LinearParams:
    """A, B, C of ``1/(A s² + B s + C)`` from at least two measured gains."""
    result = fit_transfer_poly(points, order=2)
    params = LinearParams(*map(float, result.x))
    _, stable = check_stability(params)
    if not stable:
        raise InstabilityError(f"frequency fit produced unstable parameters {params}", raw=params)
    return params


def fit_linear_freq3(points: Sequence[FrequencyResponsePoint]) -> tuple[float, float, float, float]:
    """Third-order analogue: ``1/(A s³ + B s² + C s + D)``."""
    result = fit_transfer_poly(points, order=3)
    coeffs = tuple(map(float, result.x))
    roots = characteristic_roots(coeffs)
    if np.max(roots.real) >= 0:
        raise InstabilityError(f"third-order frequency fit is unstable: {coeffs}", raw=coeffs)
    return coeffs


# --- time-domain fits ------------------------------------------------------------


def _window_data(u: TimeSeries, x: TimeSeries, window: FitWindow | None):
    u.check_grid(x)
    window = FitWindow.full(x) if window is None else window
    mask = window.mask(x)
    if not mask.any():
        raise InsufficientDataError(f"fit window [{window.tau1:g}, {window.tau2:g}] contains no samples")
    return mask, x.values[mask]


def _sse_factory(u: TimeSeries, x: TimeSeries, window: FitWindow | None, substeps: int):
    mask, target = _window_data(u, x, window)
    bad = 1e6 * (float(np.sum(target**2)) + 1.0)
    uv = np.ascontiguousarray(u.values)

    def sse(lin, fc) -> float:
        try:
            states = integrate(lin, fc, uv, u.dt, substeps, u.t0)
        except NumericalError:
            return bad
        r = states[mask, 0] - target
        return float(r @ r)

    return sse, target, bad


def _exact_target(target: np.ndarray) -> float:
    return 1e-12 * max(1.0, float(target @ target))


def fit_time_domain(
    u: TimeSeries,
    x_measured: TimeSeries,
    template: Nonlinearity,
    window: FitWindow | None = None,
    start: tuple[float, float] = (1.0, 1.0),
    substeps: int = 1,
    max_iterations: int = 4000,
) -> FitResult:
    """Least-squares output-error fit of A, B and every coefficient of ``template``.

    ``template`` fixes the polynomial degree and range and provides the
    starting coefficients.  Returns a :class:`FitResult` whose ``params`` are
    named A, B, c1, c3, ... and whose ``nonlinearity`` is the fitted f.
    """
    sse, target, bad = _sse_factory(u, x_measured, window, substeps)
    n_c = len(template.coeffs)
    grid = template.grid()
    powers = np.stack([(2 * j + 1) * grid ** (2 * j) for j in range(n_c)], axis=1)
    eps = template.epsilon

    def objective(p):
        fc = p[2:]
        slope = powers @ fc
        if slope.min() < eps:
            return bad * (1.0 + eps - slope.min())
        return sse(p[:2], fc)

    names = ("A", "B") + tuple(f"c{2 * j + 1}" for j in range(n_c))
    p0 = np.array([*start, *template.coeffs], dtype=float)
    positive = [True, True, True] + [False] * (n_c - 1)
    result = minimize(
        objective,
        p0,
        positive=positive,
        ftarget=_exact_target(target),
        max_iterations=max_iterations,
        names=names,
    )
    if not result.converged:
        raise NonConvergenceError(f"time-domain fit did not converge in {max_iterations} iterations", best=result)
    result.nonlinearity = Nonlinearity(tuple(result.x[2:]), x_max=template.x_max, eps_mono=template.eps_mono)
    return result


def refit_linear(
    u: TimeSeries,
    x_measured: TimeSeries,
    f_fixed: Nonlinearity,
    window: FitWindow | None = None,
    start: Sequence[float] = (1.0, 1.0),
    substeps: int = 1,
    max_iterations: int = 2000,
) -> FitResult:
    """Output-error fit of the derivative coefficients with ``f`` frozen.

    ``len(start)`` selects the order: (A, B) for second order, (A, B, C)
    for third order.
    """
    sse, target, _ = _sse_factory(u, x_measured, window, substeps)
    fc = np.array(f_fixed.coeffs)
    names = ("A", "B", "C")[: len(start)]
    result = minimize(
        lambda p: sse(p, fc),
        np.asarray(start, float),
        positive=[True] * len(start),
        ftarget=_exact_target(target),
        max_iterations=max_iterations,
        names=names,
    )
    if not result.converged:
        raise NonConvergenceError(f"linear refit did not converge in {max_iterations} iterations", best=result)
    result.nonlinearity = f_fixed
    return result


def refit_AB(
    u: TimeSeries,
    x_measured: TimeSeries,
    f_fixed: Nonlinearity,
    window: FitWindow | None = None,
    start: tuple[float, float] = (1.0, 1.0),
    substeps: int = 1,
) -> FitResult:
    if len(start) != 2:
        raise ValidationError("refit_AB takes a two-element start (A, B)")
    return refit_linear(u, x_measured, f_fixed, window, start, substeps)


# --- monotone scatter fit --------------------------------------------------------


def fit_monotone(
    pairs,
    degree: int = 7,
    x_max: float | None = None,
    eps_mono: float | None = None,
    penalty: float = 1e6,
) -> Nonlinearity:
    """Odd polynomial least-squares fit to ``(x, y)`` pairs, kept increasing.

    The unconstrained fit is returned as is when ``f' >= eps`` on the
    256-point range grid.  Otherwise violated grid points get a quadratic
    penalty (weight ``penalty`` times the number of pairs) until the active
    set settles, and any leftover violation is removed by raising c1.
    """
    data = np.asarray(pairs, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != 2:
        raise InsufficientDataError("fit_monotone needs a non-empty list of (x, y) pairs")
    if degree % 2 == 0 or not 1 <= degree <= 2 * MAX_COEFFS - 1:
        raise ValidationError(f"degree must be odd and at most {2 * MAX_COEFFS - 1}")
    xs, ys = data[:, 0], data[:, 1]
    n_c = degree // 2 + 1
    if not np.all(np.isfinite(data)):
        raise ValidationError("pairs must be finite")
    x_max = float(np.max(np.abs(xs))) if x_max is None else float(x_max)
    if not x_max > 0:
        raise InsufficientDataError("all x values are zero")
    span = xs.max() - xs.min()
    if xs.size < n_c or span < 0.1 * x_max:
        raise InsufficientDataError(
            f"{xs.size} pairs spanning {span:.3g}; need >= {n_c} pairs spanning >= 10% of x_max={x_max:.3g}"
        )

    s = xs / x_max
    V = np.stack([s ** (2 * j + 1) for j in range(n_c)], axis=1)
    coef, _, rank, _ = np.linalg.lstsq(V, ys, rcond=None)
    if rank < n_c:
        raise InsufficientDataError(f"scatter is rank deficient ({rank} < {n_c})")

    g = np.append(np.linspace(-1.0, 1.0, MONOTONE_GRID), 0.0)
    # slope in normalized units: d f / d s = x_max * f'(x)
    D = np.stack([(2 * j + 1) * g ** (2 * j) for j in range(n_c)], axis=1)
    c1 = coef[0] / x_max
    eps = (1e-6 * c1 if c1 > 0 else 1e-6 * np.ptp(ys) / max(span, 1e-300)) if eps_mono is None else eps_mono
    eps_s = eps * x_max

    slope = D @ coef
    if slope.min() < eps_s:
        w = math.sqrt(penalty * xs.size)
        active = slope < eps_s
        for _ in range(50):
            A_aug = np.vstack([V, w * D[active]])
            b_aug = np.concatenate([ys, w * np.full(active.sum(), eps_s)])
            coef, *_ = np.linalg.lstsq(A_aug, b_aug, rcond=None)
            slope = D @ coef
            grown = active | (slope < eps_s)
            if np.array_equal(grown, active):
                break
            active = grown
        # margin covers the rounding of re-evaluating f' from the final coefficients
        margin = 1e-9 * eps_s + 1e-12 * float(np.abs(coef) @ np.arange(1, 2 * n_c, 2))
        shortfall = eps_s - slope.min()
        if shortfall > 0:
            coef[0] += shortfall + margin
    coeffs = tuple(float(c / x_max ** (2 * j + 1)) for j, c in enumerate(coef))
    return Nonlinearity(coeffs, x_max=x_max, eps_mono=eps)
