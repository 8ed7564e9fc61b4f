"""Weighted p-energy quadrature on the half-space.

Midpoint rule on tensor-product meshes, with the last coordinate graded
toward the boundary so that the weight z_n^gamma is never sampled at
z_n = 0 and the singular part converges at second order.  The error
estimate is a plain two-resolution (dyadic) self-convergence check; no
extrapolation is performed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .modulus import Params

__all__ = [
    "Box",
    "ScalarField",
    "GridSpec",
    "EnergyReport",
    "SeminormReport",
    "NonIntegrableError",
    "SeminormDivergenceError",
    "default_grading",
    "midpoint_integrate",
    "weighted_energy",
    "cone_volume",
    "cone_volume_check",
    "gagliardo_seminorm",
    "gagliardo_seminorm_report",
    "finite_difference_gradient_check",
]

# Cap on points evaluated per vectorized integrand call.
_BLOCK_POINTS = 1 << 20


class NonIntegrableError(RuntimeError):
    """Raised when the weighted energy diverges under refinement."""


class SeminormDivergenceError(RuntimeError):
    """Raised when the double-integral seminorm blows up under refinement."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by lower and upper corners."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(c) for c in self.lo))
        object.__setattr__(self, "hi", tuple(float(c) for c in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("corner dimensions differ")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> np.ndarray:
        return np.array(self.hi) - np.array(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def is_empty(self) -> bool:
        return bool(np.any(self.widths <= 0))

    def intersect(self, other: "Box") -> "Box":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        return Box(lo, hi)

    def clipped_to_halfspace(self) -> "Box":
        lo = self.lo[:-1] + (max(0.0, self.lo[-1]),)
        return Box(lo, self.hi)

    def scaled(self, t: float) -> "Box":
        return Box(tuple(t * c for c in self.lo), tuple(t * c for c in self.hi))

    def contains(self, coords, margin: float = 0.0) -> bool:
        c = np.asarray(coords, dtype=float)
        return bool(np.all(c >= np.array(self.lo) + margin) and np.all(c <= np.array(self.hi) - margin))


@dataclass(frozen=True)
class ScalarField:
    """A differentiable test function on the half-space.

    ``value`` maps ``(..., dim)`` coordinate arrays to ``(...)`` values and
    ``gradient`` to ``(..., dim)`` gradients; both must be safe for
    concurrent calls.  ``support_box`` (when set) bounds the set where
    value and gradient are nonzero.
    """

    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    support_box: Optional[Box] = None
    name: str = "field"

    def value_at(self, point) -> float:
        coords = point.coords if hasattr(point, "coords") else np.asarray(point, float)
        return float(self.value(coords))

    def gradient_at(self, point) -> np.ndarray:
        coords = point.coords if hasattr(point, "coords") else np.asarray(point, float)
        return np.asarray(self.gradient(coords), dtype=float)


def default_grading(gamma: float) -> float:
    """Mesh grading exponent toward the boundary: max(1, 2/(1+gamma)) for
    -1 < gamma < 0, otherwise 1 (grading cannot fix gamma <= -1)."""
    if -1.0 < gamma < 0.0:
        return max(1.0, 2.0 / (1.0 + gamma))
    return 1.0


@dataclass(frozen=True)
class GridSpec:
    """Tensor-product mesh: box, cells per axis, and grading of the last
    coordinate (cell edges at lo + (hi-lo) * (j/J)^q)."""

    box: Box
    cells_per_axis: tuple[int, ...]
    grading_exponent: float = 1.0

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells_per_axis)
        object.__setattr__(self, "cells_per_axis", cells)
        if len(cells) != self.box.dim:
            raise ValueError("cells_per_axis length must match box dimension")
        if any(c < 1 for c in cells):
            raise ValueError("cells_per_axis entries must be positive")
        if self.box.is_empty():
            raise ValueError("grid box must have positive volume")
        if self.box.lo[-1] < 0:
            raise ValueError("grid box must lie in the closed half-space")
        if not (self.grading_exponent >= 1.0):
            raise ValueError("grading exponent must be >= 1")

    @classmethod
    def uniform(cls, box: Box, cells: int, grading_exponent: float = 1.0) -> "GridSpec":
        return cls(box, (cells,) * box.dim, grading_exponent)

    def refined(self, factor: int = 2) -> "GridSpec":
        return replace(self, cells_per_axis=tuple(factor * c for c in self.cells_per_axis))

    def with_box(self, box: Box) -> "GridSpec":
        return replace(self, box=box)

    def last_axis_edges(self, cells: Optional[int] = None) -> np.ndarray:
        j = np.arange((cells or self.cells_per_axis[-1]) + 1, dtype=float)
        frac = (j / j[-1]) ** self.grading_exponent
        return self.box.lo[-1] + (self.box.hi[-1] - self.box.lo[-1]) * frac


@dataclass(frozen=True)
class EnergyReport:
    """Quadrature result: value at the finer of two dyadic meshes,
    cell count used, and the relative gap between the two meshes."""

    value: float
    cells_used: int
    refinement_delta: float


def _midpoint_sum(integrand, box: Box, cells: tuple[int, ...], grading: float) -> float:
    """Tensor midpoint rule, chunked so no call exceeds the block budget."""
    dim = box.dim
    lo = np.array(box.lo)
    hi = np.array(box.hi)
    # Uniform axes (all but the last).
    other_centers = []
    vol_other = 1.0
    for k in range(dim - 1):
        w = (hi[k] - lo[k]) / cells[k]
        other_centers.append(lo[k] + (np.arange(cells[k]) + 0.5) * w)
        vol_other *= w
    if dim > 1:
        mesh = np.meshgrid(*other_centers, indexing="ij")
        flat_other = np.stack([m.ravel() for m in mesh], axis=-1)
    else:
        flat_other = np.zeros((1, 0))
    n_other = flat_other.shape[0]
    # Graded last axis.
    j = np.arange(cells[-1] + 1, dtype=float)
    edges = lo[-1] + (hi[-1] - lo[-1]) * (j / cells[-1]) ** grading
    last_centers = 0.5 * (edges[:-1] + edges[1:])
    last_widths = np.diff(edges)

    block = max(1, _BLOCK_POINTS // n_other)
    total = 0.0
    for start in range(0, cells[-1], block):
        stop = min(start + block, cells[-1])
        nb = stop - start
        pts = np.empty((nb * n_other, dim))
        pts[:, :-1] = np.tile(flat_other, (nb, 1))
        pts[:, -1] = np.repeat(last_centers[start:stop], n_other)
        vals = np.asarray(integrand(pts), dtype=float).reshape(nb, n_other)
        total += float(np.dot(last_widths[start:stop], vals.sum(axis=1)))
    return total * vol_other


def midpoint_integrate(integrand, grid: GridSpec, cells: Optional[tuple[int, ...]] = None) -> float:
    """Integrate ``integrand`` (mapping ``(m, dim)`` points to ``(m,)``
    values) over the grid box with the grid's grading."""
    return _midpoint_sum(integrand, grid.box, cells or grid.cells_per_axis, grid.grading_exponent)


def weighted_energy(f: ScalarField, params: Params, grid: GridSpec) -> EnergyReport:
    """Approximate the weighted p-energy of ``f`` over the grid box.

    The integrand |Df|^p z_n^gamma is summed by the midpoint rule at the
    grid resolution and at its dyadic refinement; the finer value is
    returned with the relative gap as ``refinement_delta``.  For
    gamma <= -1 an extra coarse level is evaluated and failure of the
    gaps to contract signals a non-integrable configuration.
    """
    gamma, p = params.gamma, params.p
    box = grid.box
    if f.support_box is not None:
        box = box.intersect(f.support_box).clipped_to_halfspace()
        if box.is_empty():
            return EnergyReport(0.0, 0, 0.0)

    def integrand(pts):
        g = np.asarray(f.gradient(pts), dtype=float)
        mag = np.sqrt(np.sum(g * g, axis=-1))
        return mag**p * pts[:, -1] ** gamma

    cells = grid.cells_per_axis
    fine = tuple(2 * c for c in cells)
    e1 = _midpoint_sum(integrand, box, cells, grid.grading_exponent)
    e2 = _midpoint_sum(integrand, box, fine, grid.grading_exponent)
    delta = abs(e2 - e1) / max(abs(e2), 1e-300)
    if gamma <= -1.0:
        coarse = tuple(max(1, c // 2) for c in cells)
        e0 = _midpoint_sum(integrand, box, coarse, grid.grading_exponent)
        inc_prev = e1 - e0
        inc_next = e2 - e1
        diverging = (
            e2 > e1 > e0 > 0
            and inc_next > 0.6 * inc_prev
            and delta > 1e-6
        )
        if diverging:
            raise NonIntegrableError(
                f"energy of {f.name!r} diverges under refinement for gamma={gamma} "
                f"(levels {e0:.6g}, {e1:.6g}, {e2:.6g})"
            )
    return EnergyReport(float(e2), int(np.prod(fine)), float(delta))


def _unit_ball_volume(m: int) -> float:
    # Lebesgue volume of the unit ball of R^m; the m = 0 convention is 1.
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


def cone_volume(n: int, R: float) -> float:
    """Closed-form volume of the upward cone {|z'| < z_n < R}: the
    (n-1)-ball volume times R^n / n.  Degenerates to a segment for n=1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (R > 0):
        raise ValueError("R must be positive")
    return _unit_ball_volume(n - 1) * R**n / n


def cone_volume_check(n: int, R: float, cells: int = 256) -> float:
    """Integrate the cone indicator on a grid and return the relative
    error against the closed form."""
    exact = cone_volume(n, R)
    lo = (-R,) * (n - 1) + (0.0,)
    hi = (R,) * n
    box = Box(lo, hi)

    def indicator(pts):
        zn = pts[:, -1]
        horiz = np.linalg.norm(pts[:, :-1], axis=-1) if n > 1 else np.zeros(len(pts))
        return ((horiz < zn) & (zn < R)).astype(float)

    approx = _midpoint_sum(indicator, box, (cells,) * n, 1.0)
    return abs(approx - exact) / exact


@dataclass(frozen=True)
class SeminormReport:
    """Two-resolution double-sum seminorm with the excluded diagonal
    band's crude upper bound."""

    value: float
    coarse_value: float
    growth_factor: float
    diagonal_band_bound: float


def _double_sum(trace, s: float, p: float, a: float, b: float, cells: int):
    h = (b - a) / cells
    x = a + (np.arange(cells) + 0.5) * h
    v = np.asarray(trace(x), dtype=float)
    if v.shape != x.shape:
        raise ValueError("trace must map a sample array to an equally shaped array")
    total = 0.0
    block = max(1, _BLOCK_POINTS // cells)
    for start in range(0, cells, block):
        stop = min(start + block, cells)
        dv = np.abs(v[start:stop, None] - v[None, :])
        dx = np.abs(x[start:stop, None] - x[None, :])
        np.fill_diagonal(dx[:, start:stop], 1.0)  # diagonal excluded below
        kern = dv**p / dx ** (1.0 + s * p)
        idx = np.arange(start, stop)
        kern[np.arange(stop - start), idx] = 0.0
        total += float(kern.sum())
    lip = float(np.max(np.abs(np.diff(v)))) / h if cells > 1 else 0.0
    band = 2.0 * (b - a) * lip**p * h ** (p - s * p) / (p - s * p)
    return total * h * h, band


def gagliardo_seminorm_report(
    trace,
    s: float,
    p: float,
    interval: tuple[float, float],
    cells: int,
    divergence_factor: float = 1.05,
) -> SeminormReport:
    """Double-sum midpoint approximation of the fractional seminorm
    integral over interval^2, diagonal band of one cell excluded.

    The sum is evaluated at ``cells`` and ``2 * cells`` resolutions; a
    growth factor beyond ``divergence_factor`` signals divergence (the
    trace is too rough for the requested smoothness s).  The default
    factor discriminates Lipschitz traces (growth ~ 1 + O(h^(p-sp)))
    from jump discontinuities (growth ~ 1 + log 2 / log(1/h)) at a few
    hundred cells.
    """
    if not (0.0 < s < 1.0):
        raise ValueError(f"need 0 < s < 1, got {s}")
    if not (p > 1.0):
        raise ValueError(f"need p > 1, got {p}")
    a, b = float(interval[0]), float(interval[1])
    if not (b > a):
        raise ValueError("interval must have positive length")
    coarse, _ = _double_sum(trace, s, p, a, b, cells)
    fine, band = _double_sum(trace, s, p, a, b, 2 * cells)
    growth = fine / coarse if coarse > 0 else 1.0
    if growth > divergence_factor:
        raise SeminormDivergenceError(
            f"seminorm grows by {growth:.3f} under refinement (limit {divergence_factor}); "
            f"trace too rough for s={s}"
        )
    return SeminormReport(float(fine), float(coarse), float(growth), float(band))


def gagliardo_seminorm(trace, s, p, interval, cells, divergence_factor: float = 1.05) -> float:
    """Value-only wrapper around :func:`gagliardo_seminorm_report`."""
    return gagliardo_seminorm_report(trace, s, p, interval, cells, divergence_factor).value


def finite_difference_gradient_check(
    f: ScalarField,
    samples: int = 200,
    step: float = 1e-5,
    seed: int = 0,
    box: Optional[Box] = None,
) -> float:
    """Compare ``f.gradient`` against central differences at random
    interior points; returns the maximum discrepancy relative to the
    largest sampled gradient magnitude."""
    box = box or f.support_box
    if box is None:
        raise ValueError("field has no support box; pass one explicitly")
    lo = np.array(box.lo)
    hi = np.array(box.hi)
    width = hi - lo
    inset = np.minimum(0.45 * width, np.maximum(2.0 * step, 1e-3 * width))
    lo_s = lo + inset
    hi_s = hi - inset
    lo_s[-1] = max(lo_s[-1], 2.0 * step)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo_s, hi_s, size=(samples, box.dim))
    analytic = np.asarray(f.gradient(pts), dtype=float)
    fd = np.empty_like(analytic)
    for k in range(box.dim):
        shift = np.zeros(box.dim)
        shift[k] = step
        fd[:, k] = (np.asarray(f.value(pts + shift), float) - np.asarray(f.value(pts - shift), float)) / (2 * step)
    scale = float(np.max(np.linalg.norm(analytic, axis=-1)))
    if scale == 0.0:
        scale = float(np.max(np.linalg.norm(fd, axis=-1)))
        if scale == 0.0:
            return 0.0
    return float(np.max(np.linalg.norm(fd - analytic, axis=-1))) / scale
