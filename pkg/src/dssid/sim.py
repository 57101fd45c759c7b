"""Virtual test bench: test signals, RK4 integration, sampling and noise.

The input between samples is the piecewise-linear interpolant of its
samples.  ``simulate`` evaluates the signal on the integrator grid, so a run
with ``sample_dt == rk_step`` is reproduced bit for bit by
:func:`simulate_response` fed with the recorded input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DivergenceError, GridMismatchError, ValidationError
from .model import PlantModel

STEP = "STEP"
HARMONIC = "HARMONIC"
MULTISTEP = "MULTISTEP"
SIGNAL_KINDS = (STEP, HARMONIC, MULTISTEP)


@dataclass(frozen=True)
class SignalSpec:
    """Test signal description.

    ``frequency`` is in Hz.  A MULTISTEP signal may carry a harmonic on top
    of the staircase when ``frequency > 0`` (``amplitude`` then scales the
    harmonic); this is the usual identification input.
    """

    kind: str
    amplitude: float = 1.0
    frequency: float = 0.0
    step_levels: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValidationError(f"unknown signal kind {self.kind!r}")
        levels = tuple((float(t), float(v)) for t, v in self.step_levels)
        object.__setattr__(self, "step_levels", levels)
        if self.kind == HARMONIC and not self.frequency > 0:
            raise ValidationError("HARMONIC signal needs frequency > 0")
        if self.frequency < 0:
            raise ValidationError("frequency must be non-negative")
        if self.kind == MULTISTEP:
            if not levels:
                raise ValidationError("MULTISTEP signal needs at least one step level")
            times = [t for t, _ in levels]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValidationError("MULTISTEP step times must be strictly increasing")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == STEP:
            return np.where(t >= 0, self.amplitude, 0.0)
        harmonic = self.amplitude * np.sin(2 * math.pi * self.frequency * t)
        if self.kind == HARMONIC:
            return harmonic
        times = np.array([s for s, _ in self.step_levels])
        values = np.concatenate([[0.0], [v for _, v in self.step_levels]])
        stair = values[np.searchsorted(times, t, side="right")]
        return stair + harmonic if self.frequency > 0 else stair


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled record ``values[k]`` at ``t0 + k*dt``."""

    t0: float
    dt: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValidationError("time series needs a non-empty 1-D value array")
        if not self.dt > 0:
            raise ValidationError("time series dt must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.values.size - 1)

    def same_grid(self, other: "TimeSeries") -> bool:
        return (
            len(self) == len(other)
            and math.isclose(self.t0, other.t0, rel_tol=0, abs_tol=1e-12 * max(1.0, abs(self.t0)))
            and math.isclose(self.dt, other.dt, rel_tol=1e-12)
        )

    def check_grid(self, other: "TimeSeries") -> None:
        if not self.same_grid(other):
            raise GridMismatchError(
                f"time grids differ: (t0={self.t0}, dt={self.dt}, n={len(self)}) vs "
                f"(t0={other.t0}, dt={other.dt}, n={len(other)})"
            )

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(self.t0, self.dt, values)


@dataclass(frozen=True)
class SimOptions:
    """Integrator and sampling settings.

    ``rk_step=None`` picks ``min(sample_dt, T_char/50)`` rounded down so that
    ``sample_dt`` is an integer multiple of the step.
    """

    sample_dt: float
    duration: float
    rk_step: float | None = None
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sample_dt > 0:
            raise ValidationError("sample_dt must be positive")
        if not self.duration >= self.sample_dt:
            raise ValidationError("duration must be at least one sample interval")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative")
        if self.rk_step is not None:
            if not self.rk_step > 0:
                raise ValidationError("rk_step must be positive")
            ratio = self.sample_dt / self.rk_step
            if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
                raise ValidationError(
                    f"sample_dt={self.sample_dt} is not an integer multiple of rk_step={self.rk_step}"
                )

    @property
    def n_samples(self) -> int:
        return int(math.floor(self.duration / self.sample_dt + 1e-9)) + 1

    def substeps(self, plant: PlantModel | None = None) -> int:
        if self.rk_step is not None:
            return int(round(self.sample_dt / self.rk_step))
        if plant is None:
            return 1
        h_max = plant.char_time() / 50
        return max(1, int(math.ceil(self.sample_dt / h_max - 1e-9)))


# --- integration kernel -------------------------------------------------------


@numba.njit(cache=True)
def _poly(fc, x):
    x2 = x * x
    acc = 0.0
    for j in range(fc.size - 1, -1, -1):
        acc = acc * x2 + fc[j]
    return x * acc


@numba.njit(cache=True)
def _deriv(coeffs, fc, state, u, out):
    # state = (x, x', ..., x^(n-1)); coeffs = (a_n, ..., a_1) multiply x^(n), ..., x'
    n = state.size
    acc = u - _poly(fc, state[0])
    for j in range(1, n):
        out[j - 1] = state[j]
        acc -= coeffs[n - j] * state[j]
    out[n - 1] = acc / coeffs[0]


@numba.njit(cache=True)
def _rk4(coeffs, fc, u, dt, substeps):
    n = coeffs.size
    m = u.size
    states = np.zeros((m, n))
    state = np.zeros(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    h = dt / substeps
    for i in range(m - 1):
        u0 = u[i]
        du = u[i + 1] - u[i]
        for s in range(substeps):
            ua = u0 + du * (s / substeps)
            um = u0 + du * ((s + 0.5) / substeps)
            ub = u0 + du * ((s + 1.0) / substeps)
            _deriv(coeffs, fc, state, ua, k1)
            for j in range(n):
                tmp[j] = state[j] + 0.5 * h * k1[j]
            _deriv(coeffs, fc, tmp, um, k2)
            for j in range(n):
                tmp[j] = state[j] + 0.5 * h * k2[j]
            _deriv(coeffs, fc, tmp, um, k3)
            for j in range(n):
                tmp[j] = state[j] + h * k3[j]
            _deriv(coeffs, fc, tmp, ub, k4)
            for j in range(n):
                state[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        for j in range(n):
            if not np.isfinite(state[j]) or abs(state[j]) > 1e150:
                return states, i + 1
            states[i + 1, j] = state[j]
    return states, -1


def integrate(coeffs, f_coeffs, u: np.ndarray, dt: float, substeps: int = 1, t0: float = 0.0) -> np.ndarray:
    """RK4 from rest; returns the state (x, x', ...) at every input sample.

    Raises :class:`DivergenceError` naming the first sample time at which the
    state left the finite range.
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    fc = np.ascontiguousarray(f_coeffs, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    states, fail = _rk4(coeffs, fc, u, float(dt), int(substeps))
    if fail >= 0:
        t_fail = t0 + fail * dt
        raise DivergenceError(f"simulation diverged at t = {t_fail:.6g}", time=t_fail)
    return states


def simulate_response(
    plant: PlantModel, u: TimeSeries, substeps: int = 1, full_state: bool = False
):
    """Noise-free response of ``plant`` to a recorded input."""
    states = integrate(plant.coeffs, plant.f.coeffs, u.values, u.dt, substeps, u.t0)
    if full_state:
        return states
    return u.with_values(states[:, 0])


# --- public operations --------------------------------------------------------


def generate_signal(spec: SignalSpec, opts: SimOptions) -> TimeSeries:
    t = opts.sample_dt * np.arange(opts.n_samples)
    return TimeSeries(0.0, opts.sample_dt, spec(t))


def add_noise(x: TimeSeries, sigma: float, seed: int) -> TimeSeries:
    if sigma == 0:
        return x
    rng = np.random.default_rng(seed)
    return x.with_values(x.values + rng.normal(0.0, sigma, len(x)))


def simulate(plant: PlantModel, spec: SignalSpec, opts: SimOptions) -> TimeSeries:
    """Sampled output of ``plant`` driven by ``spec`` from rest.

    The plant sees the piecewise-linear interpolant of the sampled input, the
    same signal a recorded ``u`` describes, so ``rk_step`` only refines the
    integration.  Noise, if requested, is added to the samples only.
    """
    u = generate_signal(spec, opts)
    x = simulate_response(plant, u, substeps=opts.substeps(plant))
    return add_noise(x, opts.noise_sigma, opts.seed)


def lissajous(u: TimeSeries, x: TimeSeries) -> list[tuple[float, float]]:
    """Pointwise (u_k, x_k) pairs."""
    u.check_grid(x)
    return list(zip(u.values.tolist(), x.values.tolist()))


def staircase_levels(f, x_levels, step_time: float, t_start: float = 0.0) -> tuple[tuple[float, float], ...]:
    """Step levels whose static responses are ``x_levels`` under nonlinearity ``f``."""
    return tuple((t_start + i * step_time, float(f(x))) for i, x in enumerate(x_levels))
