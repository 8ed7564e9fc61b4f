"""Two-point modulus functions on the upper half-space.

The half-space is the set of points of R^n whose last coordinate (the
"height") is strictly positive.  This module evaluates the piecewise
modulus functions that bound |u(x) - u(y)| for functions with finite
weighted p-energy, together with the hyperbolic distance of the Poincare
half-space model and the matching hyperbolic moduli.

All evaluators come in two flavours: scalar functions taking
:class:`HalfSpacePoint` arguments, and vectorized ``*_values`` functions
taking ``(..., n)`` coordinate arrays.  Everything is a pure function of
its arguments and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Params",
    "ThetaParams",
    "HalfSpacePoint",
    "theta_params",
    "theta",
    "theta_values",
    "theta0",
    "theta0_values",
    "theta_mid_range_values",
    "theta_high_range_values",
    "hyperbolic_distance",
    "hyperbolic_distance_values",
    "hyperbolic_modulus",
    "conf_square_bounds",
    "conf_square_values",
]


@dataclass(frozen=True)
class Params:
    """Problem parameters: dimension ``n``, weight exponent ``gamma``,
    integrability exponent ``p`` with ``p > n``."""

    n: int
    gamma: float
    p: float

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"dimension n must be a positive integer, got {self.n!r}")
        if not math.isfinite(self.p) or self.p <= self.n:
            raise ValueError(f"need n < p < inf, got n={self.n}, p={self.p}")
        if not math.isfinite(self.gamma):
            raise ValueError(f"gamma must be finite, got {self.gamma}")


@dataclass(frozen=True)
class ThetaParams:
    """Exponent triple (alpha, beta, kappa) of the piecewise modulus."""

    alpha: float
    beta: float
    kappa: float

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class HalfSpacePoint:
    """A point of the open half-space: horizontal part plus height > 0."""

    horizontal: tuple[float, ...]
    height: float

    def __post_init__(self):
        object.__setattr__(self, "horizontal", tuple(float(c) for c in self.horizontal))
        object.__setattr__(self, "height", float(self.height))
        if not (self.height > 0) or not math.isfinite(self.height):
            raise ValueError(f"height must be positive and finite, got {self.height}")

    @classmethod
    def of(cls, *coords: float) -> "HalfSpacePoint":
        """Build a point from full coordinates; the last one is the height."""
        if not coords:
            raise ValueError("need at least one coordinate")
        return cls(tuple(coords[:-1]), coords[-1])

    @classmethod
    def from_coords(cls, coords: Sequence[float]) -> "HalfSpacePoint":
        return cls.of(*coords)

    @property
    def dim(self) -> int:
        return len(self.horizontal) + 1

    @property
    def coords(self) -> np.ndarray:
        return np.array(self.horizontal + (self.height,), dtype=float)

    def scaled(self, t: float) -> "HalfSpacePoint":
        return HalfSpacePoint(tuple(t * c for c in self.horizontal), t * self.height)

    def translated(self, shift: Sequence[float]) -> "HalfSpacePoint":
        """Translate horizontally; ``shift`` has n-1 entries."""
        if len(shift) != len(self.horizontal):
            raise ValueError("horizontal shift has wrong dimension")
        return HalfSpacePoint(
            tuple(c + s for c, s in zip(self.horizontal, shift)), self.height
        )


def theta_params(params: Params) -> ThetaParams:
    """Exponent triple induced by (n, gamma, p):
    alpha = 1 - 1/p, beta = 1 - n/p, kappa = 1 - (n + gamma)/p."""
    p = params.p
    return ThetaParams(1.0 - 1.0 / p, 1.0 - params.n / p, 1.0 - (params.n + params.gamma) / p)


def _check_heights(X: np.ndarray, Y: np.ndarray) -> None:
    if np.any(X[..., -1] <= 0) or np.any(Y[..., -1] <= 0):
        raise ValueError("points must lie in the open half-space (height > 0)")


def _pair_geometry(X, Y):
    """Separation, min height, and max(heights, separation) for point arrays."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    _check_heights(X, Y)
    r = np.linalg.norm(X - Y, axis=-1)
    xn = X[..., -1]
    yn = Y[..., -1]
    mn = np.minimum(xn, yn)
    mxh = np.maximum(xn, yn)
    mx = np.maximum(mxh, r)
    return r, mn, mxh, mx


def theta_values(tp: ThetaParams, X, Y) -> np.ndarray:
    """Vectorized four-case modulus on ``(..., n)`` coordinate arrays.

    Case selection follows the defining piecewise formula: kappa < 0,
    kappa = 0 (logarithmic branch), 0 < kappa < 1 + beta - alpha, and
    kappa >= 1 + beta - alpha.  Coincident pairs return 0 without
    evaluating powers of zero.
    """
    r, mn, mxh, mx = _pair_geometry(X, Y)
    a, b, k = tp.alpha, tp.beta, tp.kappa
    zero = r == 0
    rs = np.where(zero, 1.0, r)  # placeholder, masked out below
    if k < 0:
        out = rs**b / (mn ** (-k) * mx**b)
    elif k == 0:
        out = np.log1p((rs / mn) ** (b / a)) ** a
    elif k < 1.0 + b - a:
        out = rs**b * mx ** (k - b)
    else:
        out = mxh**k * rs**b / mx**b
    return np.where(zero, 0.0, out)


def theta(tp: ThetaParams, x: HalfSpacePoint, y: HalfSpacePoint) -> float:
    """Four-case modulus for a single pair of half-space points."""
    return float(theta_values(tp, x.coords, y.coords))


def theta0_values(beta: float, kappa: float, X, Y) -> np.ndarray:
    """Vectorized two-case compact-support modulus."""
    r, mn, mxh, mx = _pair_geometry(X, Y)
    zero = r == 0
    rs = np.where(zero, 1.0, r)
    if kappa < 0:
        out = rs**beta / (mn ** (-kappa) * mx**beta)
    else:
        out = mxh**kappa * rs**beta / mx**beta
    return np.where(zero, 0.0, out)


def theta0(beta: float, kappa: float, x: HalfSpacePoint, y: HalfSpacePoint) -> float:
    """Two-case compact-support modulus for a single pair."""
    return float(theta0_values(beta, kappa, x.coords, y.coords))


def theta_mid_range_values(beta: float, kappa: float, X, Y) -> np.ndarray:
    """The 0 < kappa < 1 + beta - alpha case formula, regardless of kappa."""
    r, _, _, mx = _pair_geometry(X, Y)
    zero = r == 0
    rs = np.where(zero, 1.0, r)
    return np.where(zero, 0.0, rs**beta * mx ** (kappa - beta))


def theta_high_range_values(beta: float, kappa: float, X, Y) -> np.ndarray:
    """The kappa >= 1 + beta - alpha case formula, regardless of kappa."""
    r, _, mxh, mx = _pair_geometry(X, Y)
    zero = r == 0
    rs = np.where(zero, 1.0, r)
    return np.where(zero, 0.0, mxh**kappa * rs**beta / mx**beta)


def hyperbolic_distance_values(X, Y) -> np.ndarray:
    """Distance of the Poincare half-space model, vectorized."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    _check_heights(X, Y)
    r = np.linalg.norm(X - Y, axis=-1)
    return 2.0 * np.arcsinh(r / (2.0 * np.sqrt(X[..., -1] * Y[..., -1])))


def hyperbolic_distance(x: HalfSpacePoint, y: HalfSpacePoint) -> float:
    """2 * arsinh(|x - y| / (2 sqrt(x_n y_n)))."""
    return float(hyperbolic_distance_values(x.coords, y.coords))


def hyperbolic_modulus(params: Params, d, compact: bool = False):
    """Modulus as a function of hyperbolic distance.

    Non-compact: max(d^(1-n/p), d^(1-1/p)).  Compact support:
    min(d^(1-n/p), 1).
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be nonnegative")
    en = 1.0 - params.n / params.p
    e1 = 1.0 - 1.0 / params.p
    if compact:
        out = np.minimum(d**en, 1.0)
    else:
        out = np.maximum(d**en, d**e1)
    return float(out) if out.ndim == 0 else out


def conf_square_values(X, Y):
    """Vectorized chain (lhs, mid, rhs) comparing the conformal ratio
    |x-y|/sqrt(x_n y_n) with |x-y|/min(x_n, y_n)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    _check_heights(X, Y)
    r = np.linalg.norm(X - Y, axis=-1)
    lhs = r / np.sqrt(X[..., -1] * Y[..., -1])
    mid = r / np.minimum(X[..., -1], Y[..., -1])
    rhs = np.maximum(math.sqrt(2.0) * lhs, 2.0 * lhs**2)
    return lhs, mid, rhs


def conf_square_bounds(x: HalfSpacePoint, y: HalfSpacePoint) -> tuple[float, float, float]:
    """Chain lhs <= mid <= rhs for a single pair."""
    lhs, mid, rhs = conf_square_values(x.coords, y.coords)
    return float(lhs), float(mid), float(rhs)
