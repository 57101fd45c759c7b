"""Plant and nonlinearity types.

The plant is the quasilinear ODE

    A x'' + B x' + f(x) = u(t),          x(0) = x'(0) = 0

or its third-order sibling ``A x''' + B x'' + C x' + f(x) = u``.  ``f`` is an
odd polynomial ``c1 x + c3 x^3 + c5 x^5 + c7 x^7`` that must be monotone on its
operating range, which makes the static characteristic ``x = f^-1(u)``
well defined.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateOrderError, InstabilityError, OutOfRangeError, ValidationError

logger = logging.getLogger(__name__)

ODD_POLY = "ODD_POLY"
MAX_COEFFS = 4  # c1, c3, c5, c7
MONOTONE_GRID = 256


@dataclass(frozen=True)
class LinearParams:
    """Coefficients of ``A s^2 + B s + C``.

    Construction does not enforce stability; use :func:`check_stability`.
    In a third-order :class:`PlantModel` the same three numbers multiply
    x''', x'' and x'.
    """

    A: float
    B: float
    C: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.A, self.B, self.C)


def _quadratic_roots(a: float, b: float, c: float) -> tuple[complex, complex]:
    # cancellation-free form: q = -(b + sign(b) sqrt(disc)) / 2
    disc = cmath.sqrt(b * b - 4.0 * a * c)
    if b.real >= 0:
        q = -0.5 * (b + disc)
    else:
        q = -0.5 * (b - disc)
    if q == 0:
        # b == 0 and c == 0
        return 0j, 0j
    r1 = q / a
    r2 = c / q if c != 0 else complex(-b / a) - r1
    return complex(r1), complex(r2)


def check_stability(params: LinearParams) -> tuple[list[complex], bool]:
    """Roots of ``A λ² + B λ + C`` and whether both lie in the open left half plane."""
    if params.A == 0:
        raise DegenerateOrderError("A = 0: characteristic equation is not of second order")
    r1, r2 = _quadratic_roots(float(params.A), float(params.B), float(params.C))
    roots = [r1, r2]
    return roots, all(r.real < 0 for r in roots)


def characteristic_roots(poly: tuple[float, ...]) -> np.ndarray:
    """Roots of a polynomial given by descending coefficients."""
    if poly[0] == 0:
        raise DegenerateOrderError("leading coefficient is zero")
    if len(poly) == 3:
        return np.array(_quadratic_roots(*poly))
    return np.roots(poly)


@dataclass(frozen=True)
class Nonlinearity:
    """Odd polynomial ``f(x) = c1 x + c3 x^3 + c5 x^5 + c7 x^7`` on ``[-x_max, x_max]``.

    ``coeffs`` holds (c1, c3, ...) with trailing terms optional.  The
    constructor rejects c1 <= 0 and any f that is not increasing on a
    256-point grid over the range (``f' >= eps_mono``).
    """

    coeffs: tuple[float, ...]
    x_max: float = 1.0
    eps_mono: float | None = None
    family: str = ODD_POLY
    _eps: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if self.family != ODD_POLY:
            raise ValidationError(f"unsupported nonlinearity family {self.family!r}")
        if not 1 <= len(coeffs) <= MAX_COEFFS:
            raise ValidationError(f"expected 1..{MAX_COEFFS} odd coefficients, got {len(coeffs)}")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValidationError("nonlinearity coefficients must be finite")
        if not (self.x_max > 0 and math.isfinite(self.x_max)):
            raise ValidationError("x_max must be positive and finite")
        if coeffs[0] <= 0:
            raise ValidationError(f"c1 must be positive, got {coeffs[0]}")
        eps = 1e-6 * coeffs[0] if self.eps_mono is None else float(self.eps_mono)
        object.__setattr__(self, "_eps", eps)
        slope = self.derivative(self.grid())
        if slope.min() < eps:
            bad = self.grid()[int(np.argmin(slope))]
            raise ValidationError(
                f"nonlinearity is not monotone on its range: f'({bad:.6g}) = {slope.min():.6g} < {eps:.3g}"
            )

    @classmethod
    def linear(cls, c: float, x_max: float = 1.0) -> "Nonlinearity":
        return cls((float(c),), x_max=x_max)

    @property
    def degree(self) -> int:
        return 2 * len(self.coeffs) - 1

    @property
    def epsilon(self) -> float:
        return self._eps

    @property
    def slope0(self) -> float:
        """f'(0) = c1."""
        return self.coeffs[0]

    def padded(self) -> np.ndarray:
        out = np.zeros(MAX_COEFFS)
        out[: len(self.coeffs)] = self.coeffs
        return out

    def grid(self, n: int = MONOTONE_GRID) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, n)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        x2 = x * x
        acc = np.zeros_like(x)
        for c in reversed(self.coeffs):
            acc = acc * x2 + c
        return x * acc

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        x2 = x * x
        acc = np.zeros_like(x)
        for j in reversed(range(len(self.coeffs))):
            acc = acc * x2 + (2 * j + 1) * self.coeffs[j]
        return acc

    def inverse(self, u, bound: float | None = None):
        """Solve ``f(x) = u`` for x in ``[-bound, bound]`` (default: the range)."""
        bound = self.x_max if bound is None else float(bound)
        u = np.asarray(u, dtype=float)
        lo_u, hi_u = float(self(-bound)), float(self(bound))
        slack = 1e-12 * max(abs(lo_u), abs(hi_u))
        if np.any(u < lo_u - slack) or np.any(u > hi_u + slack):
            raise OutOfRangeError(
                f"u outside the image [{lo_u:.6g}, {hi_u:.6g}] of [-{bound:.6g}, {bound:.6g}]"
            )
        lo = np.full(u.shape, -bound)
        hi = np.full(u.shape, bound)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            above = self(mid) > u
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        x = 0.5 * (lo + hi)
        for _ in range(2):
            slope = self.derivative(x)
            step = np.where(slope > 0, (self(x) - u) / np.where(slope > 0, slope, 1.0), 0.0)
            x = np.clip(x - step, -bound, bound)
        return x

    def with_range(self, x_max: float) -> "Nonlinearity":
        return Nonlinearity(self.coeffs, x_max=x_max, eps_mono=self.eps_mono)


def eval_nonlinearity(f: Nonlinearity, x: float) -> float:
    """``f(x)``; evaluation outside the range is allowed but logged."""
    if abs(x) > f.x_max:
        logger.debug("nonlinearity evaluated outside its range: x=%g, x_max=%g", x, f.x_max)
    return float(f(x))


def invert_nonlinearity(f: Nonlinearity, u: float) -> float:
    return float(f.inverse(u))


@dataclass(frozen=True)
class PlantModel:
    """Second- or third-order quasilinear plant.

    Stability of the linearization at the origin is checked on construction.
    """

    order: int
    linear: LinearParams
    f: Nonlinearity

    def __post_init__(self):
        if self.order not in (2, 3):
            raise ValidationError(f"plant order must be 2 or 3, got {self.order}")
        A, B, C = self.linear.as_tuple()
        k = self.f.slope0
        if self.order == 2:
            _, stable = check_stability(LinearParams(A, B, k))
            if not (stable and A > 0 and B > 0):
                raise InstabilityError(f"unstable second-order plant A={A}, B={B}, f'(0)={k}", raw=self)
        else:
            if not (A > 0 and B > 0 and C > 0):
                raise InstabilityError("third-order plant needs A, B, C > 0", raw=self)
            if not B * C > A * k:
                raise InstabilityError(
                    f"Routh-Hurwitz violated: B*C = {B * C:.6g} <= A*f'(0) = {A * k:.6g}", raw=self
                )

    @classmethod
    def second_order(cls, A: float, B: float, f: Nonlinearity | float) -> "PlantModel":
        if not isinstance(f, Nonlinearity):
            f = Nonlinearity.linear(f)
        return cls(2, LinearParams(A, B, f.slope0), f)

    @classmethod
    def third_order(cls, A: float, B: float, C: float, f: Nonlinearity | float) -> "PlantModel":
        if not isinstance(f, Nonlinearity):
            f = Nonlinearity.linear(f)
        return cls(3, LinearParams(A, B, C), f)

    @property
    def coeffs(self) -> tuple[float, ...]:
        """Derivative coefficients, highest derivative first (f excluded)."""
        if self.order == 2:
            return (self.linear.A, self.linear.B)
        return self.linear.as_tuple()

    @property
    def char_poly(self) -> tuple[float, ...]:
        """Characteristic polynomial of the linearization at x = 0."""
        return (*self.coeffs, self.f.slope0)

    def roots(self) -> np.ndarray:
        return characteristic_roots(self.char_poly)

    @property
    def natural_frequency(self) -> float:
        if self.order == 2:
            return math.sqrt(self.f.slope0 / self.linear.A)
        return float(np.max(np.abs(self.roots())))

    def char_time(self) -> float:
        """Shortest characteristic period ``2π / max|λ|``."""
        return 2 * math.pi / float(np.max(np.abs(self.roots())))

    def with_f(self, f: Nonlinearity) -> "PlantModel":
        lin = self.linear if self.order == 3 else LinearParams(self.linear.A, self.linear.B, f.slope0)
        return PlantModel(self.order, lin, f)
