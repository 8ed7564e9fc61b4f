"""Test-function families with exact gradients.

These are the radial bumps, logarithmic annulus bumps, and 1-D clamped
profiles whose ratios |u(x) - u(y)| / energy^(1/p) certify lower bounds
on any admissible modulus.  All constructors return immutable
:class:`~halfmod.quadrature.ScalarField` objects whose value/gradient
callables are vectorized over ``(..., dim)`` coordinate arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .modulus import HalfSpacePoint, Params
from .quadrature import Box, ScalarField

__all__ = [
    "BumpProfile",
    "QUINTIC_PROFILE",
    "bump",
    "bump_energy_envelope",
    "log_bump",
    "oned_log_bump",
    "oned_sharp_profile",
    "lift_vertical",
    "lift_horizontal",
]


@dataclass(frozen=True)
class BumpProfile:
    """Radial transition profile: 1 on [0, 1/2], 0 on [1, inf), monotone
    and continuously differentiable in between."""

    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    sup_derivative: float


def _quintic_value(t):
    t = np.asarray(t, dtype=float)
    tau = np.clip(2.0 * t - 1.0, 0.0, 1.0)
    return 1.0 - tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


def _quintic_derivative(t):
    t = np.asarray(t, dtype=float)
    tau = 2.0 * t - 1.0
    inside = (tau > 0.0) & (tau < 1.0)
    tau = np.where(inside, tau, 0.0)
    return np.where(inside, -60.0 * tau**2 * (1.0 - tau) ** 2, 0.0)


# Quintic polynomial smoothstep on [1/2, 1]; C^2 at both ends, cheap exact
# derivative with sup 60/16.
QUINTIC_PROFILE = BumpProfile(_quintic_value, _quintic_derivative, 3.75)


def _cube_around(center: np.ndarray, half_width: float) -> Box:
    lo = center - half_width
    hi = center + half_width
    return Box(tuple(lo), tuple(hi)).clipped_to_halfspace()


def bump(y: HalfSpacePoint, R: float, profile: BumpProfile = QUINTIC_PROFILE) -> ScalarField:
    """Radial bump centered at ``y``: value 1 at the center, 0 beyond
    distance ``R``, gradient supported on the shell R/2 <= |z-y| <= R."""
    if not (R > 0):
        raise ValueError("R must be positive")
    center = y.coords
    dim = y.dim

    def value(pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts - center, axis=-1)
        return profile.value(r / R)

    def gradient(pts):
        pts = np.asarray(pts, dtype=float)
        d = pts - center
        r = np.linalg.norm(d, axis=-1)
        rs = np.where(r == 0, 1.0, r)
        coef = profile.derivative(r / R) / (R * rs)
        return coef[..., None] * d

    return ScalarField(
        dim=dim,
        value=value,
        gradient=gradient,
        support_box=_cube_around(center, R),
        name=f"bump(y={tuple(center)}, R={R})",
    )


def bump_energy_envelope(params: Params, y: HalfSpacePoint, R: float) -> float:
    """Scaling envelope R^(n-p) * max(y_n, R)^gamma of the bump energy.

    This is the pure scaling factor without the profile-dependent
    multiplicative constant; constants are measured, never assumed.
    """
    if not (R > 0):
        raise ValueError("R must be positive")
    return R ** (params.n - params.p) * max(y.height, R) ** params.gamma


def log_bump(y: HalfSpacePoint, R: float, profile: BumpProfile = QUINTIC_PROFILE) -> ScalarField:
    """Logarithmic annulus bump: 1 on |z-y| <= y_n, 0 beyond |z-y| >= R,
    gradient supported on the annulus y_n <= |z-y| <= R.  Requires
    R > y_n."""
    yn = y.height
    if not (R > yn):
        raise ValueError(f"log bump needs R > y_n, got R={R}, y_n={yn}")
    center = y.coords
    dim = y.dim
    L = math.log(R / yn)

    # theta(s) = profile((s+1)/2) is 1 for s <= 0 and 0 for s >= 1.
    def value(pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts - center, axis=-1)
        rs = np.where(r == 0, yn, r)
        s = np.log(rs / yn) / L
        return profile.value((s + 1.0) / 2.0)

    def gradient(pts):
        pts = np.asarray(pts, dtype=float)
        d = pts - center
        r = np.linalg.norm(d, axis=-1)
        rs = np.where(r == 0, yn, r)
        s = np.log(rs / yn) / L
        coef = profile.derivative((s + 1.0) / 2.0) / (2.0 * L * rs**2)
        return coef[..., None] * d

    return ScalarField(
        dim=dim,
        value=value,
        gradient=gradient,
        support_box=_cube_around(center, R),
        name=f"log_bump(y={tuple(center)}, R={R})",
    )


def oned_log_bump(x: float, y: float, profile: BumpProfile = QUINTIC_PROFILE) -> ScalarField:
    """1-D logarithmic bump on the half-line with value 1 at ``y`` and 0
    at ``x``, vanishing outside the interval between y^2/x and x."""
    if not (x > 0 and y > 0):
        raise ValueError("x and y must be positive")
    if x == y:
        raise ValueError("x and y must differ")
    L = math.log(x / y)

    # psi(t) = profile((|t|+1)/2): psi(0) = 1, psi = 0 outside (-1, 1).
    def value(pts):
        pts = np.asarray(pts, dtype=float)
        z = pts[..., 0]
        zs = np.where(z > 0, z, y)
        t = np.log(zs / y) / L
        out = profile.value((np.abs(t) + 1.0) / 2.0)
        return np.where(z > 0, out, 0.0)

    def gradient(pts):
        pts = np.asarray(pts, dtype=float)
        z = pts[..., 0]
        zs = np.where(z > 0, z, y)
        t = np.log(zs / y) / L
        dpsi = np.sign(t) * profile.derivative((np.abs(t) + 1.0) / 2.0) / 2.0
        out = np.where(z > 0, dpsi / (zs * L), 0.0)
        return out[..., None]

    lo, hi = sorted((y * y / x, x))
    return ScalarField(
        dim=1,
        value=value,
        gradient=gradient,
        support_box=Box((lo,), (hi,)),
        name=f"oned_log_bump(x={x}, y={y})",
    )


def oned_sharp_profile(params: Params, x: float, y: float) -> ScalarField:
    """1-D profile attaining equality in the Hoelder step: derivative
    z^(-gamma/(p-1)) between x and y, clamped constant outside.

    Its value is a running integral, so it is not compactly supported;
    ``support_box`` covers the gradient support only (use it as the
    integration domain for energies).
    """
    if params.n != 1:
        raise ValueError("the sharp profile is a 1-D construction")
    if not (x > 0 and y > 0):
        raise ValueError("x and y must be positive")
    if x == y:
        # Degenerate pair: the zero field.
        zero = lambda pts: np.zeros(np.asarray(pts, float).shape[:-1])
        zero_grad = lambda pts: np.zeros(np.asarray(pts, float).shape)
        return ScalarField(1, zero, zero_grad, Box((min(x, 1.0),), (max(x, 1.0),)), "zero")
    a, b = sorted((x, y))
    e = -params.gamma / (params.p - 1.0)

    if e == -1.0:
        def antideriv(z):
            return np.log(z)
    else:
        def antideriv(z):
            return z ** (e + 1.0) / (e + 1.0)

    fa = antideriv(np.array(a))

    def value(pts):
        pts = np.asarray(pts, dtype=float)
        z = np.clip(pts[..., 0], a, b)
        return antideriv(z) - fa

    def gradient(pts):
        pts = np.asarray(pts, dtype=float)
        z = pts[..., 0]
        inside = (z > a) & (z < b)
        zs = np.where(inside, z, a)
        out = np.where(inside, zs**e, 0.0)
        return out[..., None]

    return ScalarField(
        dim=1,
        value=value,
        gradient=gradient,
        support_box=Box((a,), (b,)),
        name=f"oned_sharp(x={x}, y={y}, gamma={params.gamma}, p={params.p})",
    )


def lift_vertical(field1d: ScalarField, dim: int) -> ScalarField:
    """Extend a 1-D field constantly in the horizontal directions:
    u(z) = f(z_n).  The lift has unbounded support."""
    if field1d.dim != 1:
        raise ValueError("can only lift 1-D fields")

    def value(pts):
        pts = np.asarray(pts, dtype=float)
        return field1d.value(pts[..., -1:])

    def gradient(pts):
        pts = np.asarray(pts, dtype=float)
        g = np.zeros(pts.shape)
        g[..., -1] = field1d.gradient(pts[..., -1:])[..., 0]
        return g

    return ScalarField(dim, value, gradient, None, f"vlift[{field1d.name}]")


def lift_horizontal(field1d: ScalarField, dim: int) -> ScalarField:
    """Extend a 1-D field constantly in all directions but the first:
    u(z) = f(z_1).  The 1-D field's value must accept arbitrary reals
    (clamped profiles do).  The lift has unbounded support."""
    if field1d.dim != 1:
        raise ValueError("can only lift 1-D fields")
    if dim < 2:
        raise ValueError("horizontal lift needs dim >= 2")

    def value(pts):
        pts = np.asarray(pts, dtype=float)
        return field1d.value(pts[..., :1])

    def gradient(pts):
        pts = np.asarray(pts, dtype=float)
        g = np.zeros(pts.shape)
        g[..., 0] = field1d.gradient(pts[..., :1])[..., 0]
        return g

    return ScalarField(dim, value, gradient, None, f"hlift[{field1d.name}]")
