"""Batch verification of the two-point inequalities on field corpora.

Each certification record measures the ratio
|u(x) - u(y)| / (modulus * energy^(1/p)) for one field and one pair; the
sup over a corpus is the measured constant of the inequality under test.
Measured constants are reported, never asserted against absolute
thresholds: the checks are finiteness, refinement stability, and the
structural fact that a positive difference never meets a vanishing
modulus.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .extremals import bump, lift_vertical, log_bump, oned_log_bump, oned_sharp_profile
from .modulus import (
    HalfSpacePoint,
    Params,
    ThetaParams,
    hyperbolic_distance_values,
    hyperbolic_modulus,
    theta_high_range_values,
    theta_mid_range_values,
    theta_params,
    theta_values,
    theta0_values,
)
from .quadrature import (
    Box,
    GridSpec,
    NonIntegrableError,
    ScalarField,
    default_grading,
    weighted_energy,
)

__all__ = [
    "CertRecord",
    "CertReport",
    "StructuralViolationError",
    "VARIANTS",
    "run_certification",
    "lower_bound_omega",
    "check_pointwise_bound",
    "case_ordering_audit",
    "sample_pairs",
    "standard_corpus",
    "affine_times",
]

VARIANTS = ("full", "compact", "hyperbolic", "hyperbolic_compact")

Pair = tuple[HalfSpacePoint, HalfSpacePoint]


class StructuralViolationError(RuntimeError):
    """A record with positive difference but vanishing modulus or energy:
    this would falsify the inequality and aborts the run."""


@dataclass(frozen=True)
class CertRecord:
    x: HalfSpacePoint
    y: HalfSpacePoint
    field_id: str
    modulus: float
    energy: float
    difference: float
    ratio: float


@dataclass
class CertReport:
    records: list[CertRecord]
    sup_ratio: float
    argmax: int
    grid_stability: float
    variant: str


def _pair_arrays(pairs: Sequence[Pair]):
    X = np.array([p[0].coords for p in pairs], dtype=float)
    Y = np.array([p[1].coords for p in pairs], dtype=float)
    return X, Y


def _variant_modulus(variant: str, params: Params, X, Y) -> np.ndarray:
    tp = theta_params(params)
    if variant == "full":
        return theta_values(tp, X, Y)
    if variant == "compact":
        return theta0_values(tp.beta, tp.kappa, X, Y)
    if variant in ("hyperbolic", "hyperbolic_compact"):
        d = hyperbolic_distance_values(X, Y)
        return np.asarray(hyperbolic_modulus(params, d, compact=variant.endswith("compact")))
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def _is_compactly_supported(f: ScalarField) -> bool:
    return f.support_box is not None and f.support_box.lo[-1] > 0.0


def run_certification(
    corpus: Sequence[ScalarField],
    pairs: Sequence[Pair],
    params: Params,
    variant: str,
    grid: GridSpec,
) -> CertReport:
    """Measure every (field, pair) ratio for one inequality variant.

    Hyperbolic variants evaluate energies at the weight exponent p - n
    (the half-space model identity: the hyperbolic Dirichlet p-energy
    equals the weighted energy at gamma = p - n).  Compact variants
    require every field's support to sit strictly inside the open
    half-space.  The sup ratio is recomputed on the dyadically refined
    grid; the relative change is reported as ``grid_stability``.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if variant in ("compact", "hyperbolic_compact"):
        for f in corpus:
            if not _is_compactly_supported(f):
                raise ValueError(
                    f"field {f.name!r} is not compactly supported in the open half-space; "
                    f"variant {variant!r} requires it"
                )
    energy_params = params
    if variant in ("hyperbolic", "hyperbolic_compact"):
        energy_params = Params(params.n, params.p - params.n, params.p)

    if pairs:
        X, Y = _pair_arrays(pairs)
        moduli = np.atleast_1d(_variant_modulus(variant, params, X, Y))
    else:
        moduli = np.zeros(0)

    invp = 1.0 / params.p
    records: list[CertRecord] = []
    ratios_fine: list[float] = []
    ratios_coarse: list[float] = []
    for f in corpus:
        e_coarse = weighted_energy(f, energy_params, grid)
        e_fine = weighted_energy(f, energy_params, grid.refined(2))
        if pairs:
            diffs = np.abs(np.asarray(f.value(X), float) - np.asarray(f.value(Y), float))
        else:
            diffs = np.zeros(0)
        for i, (x, y) in enumerate(pairs):
            diff = float(diffs[i])
            mod = float(moduli[i])
            for energy, sink in ((e_fine.value, ratios_fine), (e_coarse.value, ratios_coarse)):
                denom = mod * energy**invp
                if denom <= 0.0:
                    if diff > 0.0:
                        raise StructuralViolationError(
                            f"field {f.name!r} at pair ({x}, {y}): difference {diff:.3g} "
                            f"with modulus {mod:.3g} and energy {energy:.3g}"
                        )
                    sink.append(0.0)
                else:
                    sink.append(diff / denom)
            records.append(
                CertRecord(x, y, f.name, mod, e_fine.value, diff, ratios_fine[-1])
            )

    if records:
        sup_fine = max(ratios_fine)
        argmax = ratios_fine.index(sup_fine)
        sup_coarse = max(ratios_coarse)
        stability = abs(sup_fine - sup_coarse) / max(sup_fine, 1e-300)
    else:
        sup_fine, argmax, stability = 0.0, -1, 0.0
    return CertReport(records, sup_fine, argmax, stability, variant)


def _construction_grid(f: ScalarField, template: GridSpec, gamma: float) -> GridSpec:
    box = f.support_box.clipped_to_halfspace()
    grading = default_grading(gamma) if box.lo[-1] == 0.0 else 1.0
    return GridSpec(box, template.cells_per_axis, grading)


def lower_bound_omega(
    x: HalfSpacePoint,
    y: HalfSpacePoint,
    params: Params,
    compact: bool = False,
    grid: Optional[GridSpec] = None,
) -> float:
    """Certified lower bound for any admissible modulus at (x, y).

    Evaluates |u(x) - u(y)| / energy^(1/p) for each applicable
    construction (interior bump with R = min(center height, |x-y|)/2,
    separation bump with R = |x-y|, logarithmic bump when gamma = p - n
    and the pair separates beyond the center height, and the 1-D
    constructions), symmetrized over swapping x and y, using quadrature
    energies.  With ``compact`` set, only compactly supported
    constructions are used.
    """
    if x == y:
        raise ValueError("the two points must differ")
    n, gamma, p = params.n, params.gamma, params.p
    dist = float(np.linalg.norm(x.coords - y.coords))
    if grid is None:
        cells = {1: 2048, 2: 96}.get(n, 16)
        grid = GridSpec(Box((0.0,) * n, (1.0,) * n), (cells,) * n)

    candidates: list[ScalarField] = []
    for center in (x, y):
        candidates.append(bump(center, min(center.height, dist) / 2.0))
        if not compact and gamma > -1.0:
            candidates.append(bump(center, dist))
        if not compact and gamma == p - n and dist > center.height:
            candidates.append(log_bump(center, dist))
    if n == 1:
        a, b = x.height, y.height
        candidates.append(oned_log_bump(a, b))
        if not compact:
            candidates.append(oned_sharp_profile(params, a, b))

    best = 0.0
    for f in candidates:
        try:
            energy = weighted_energy(f, params, _construction_grid(f, grid, gamma)).value
        except NonIntegrableError:
            continue
        if energy <= 0.0:
            continue
        diff = abs(f.value_at(x) - f.value_at(y))
        best = max(best, diff / energy ** (1.0 / p))
    return best


def check_pointwise_bound(
    f: ScalarField,
    params: Params,
    samples: Sequence[HalfSpacePoint],
    grid: GridSpec,
) -> float:
    """Max over samples of |f(x)| / (x_n^(1-(n+gamma)/p) * energy^(1/p)),
    the scaled distance-to-boundary bound for compactly supported fields.
    Requires gamma < p - 1."""
    if not (params.gamma < params.p - 1.0):
        raise ValueError(f"the bound needs gamma < p - 1, got gamma={params.gamma}, p={params.p}")
    if not _is_compactly_supported(f):
        raise ValueError(f"field {f.name!r} must be compactly supported in the open half-space")
    energy = weighted_energy(f, params, grid).value
    coords = np.array([s.coords for s in samples], dtype=float)
    vals = np.abs(np.asarray(f.value(coords), float))
    if energy <= 0.0:
        if np.any(vals > 0):
            raise StructuralViolationError(f"field {f.name!r} has zero energy but nonzero values")
        return 0.0
    exponent = 1.0 - (params.n + params.gamma) / params.p
    scaled = vals / (coords[:, -1] ** exponent * energy ** (1.0 / params.p))
    return float(np.max(scaled))


def case_ordering_audit(tp: ThetaParams, pairs: Sequence[Pair]) -> float:
    """Worst ratio of the high-range case formula over the mid-range one;
    at most 1 for kappa > 0 (the prevailing case is the stronger bound).
    Coincident pairs are skipped."""
    if not (tp.kappa > 0):
        raise ValueError("the ordering statement needs kappa > 0")
    if not (tp.beta > 0):
        raise ValueError("the ordering statement needs beta > 0")
    X, Y = _pair_arrays(pairs)
    keep = np.linalg.norm(X - Y, axis=-1) > 0
    if not np.any(keep):
        return 0.0
    mid = theta_mid_range_values(tp.beta, tp.kappa, X[keep], Y[keep])
    high = theta_high_range_values(tp.beta, tp.kappa, X[keep], Y[keep])
    return float(np.max(high / mid))


def sample_pairs(box: Box, count: int, seed: int) -> list[Pair]:
    """Deterministic low-discrepancy point pairs in a box of the open
    half-space (scrambled Halton, fixed by the seed)."""
    if box.lo[-1] <= 0.0:
        raise ValueError("sampling box must have positive lower height")
    n = box.dim
    sampler = qmc.Halton(d=2 * n, scramble=True, seed=seed)
    u = sampler.random(count)
    lo = np.array(box.lo)
    hi = np.array(box.hi)
    X = lo + u[:, :n] * (hi - lo)
    Y = lo + u[:, n:] * (hi - lo)
    return [
        (HalfSpacePoint.from_coords(X[i]), HalfSpacePoint.from_coords(Y[i]))
        for i in range(count)
    ]


def affine_times(f: ScalarField, const: float, lin: Sequence[float]) -> ScalarField:
    """Multiply a field by the affine function const + lin . z (product
    rule gradient, same support)."""
    lin = np.asarray(lin, dtype=float)
    if lin.shape != (f.dim,):
        raise ValueError("linear coefficient dimension mismatch")

    def value(pts):
        pts = np.asarray(pts, dtype=float)
        return (const + pts @ lin) * np.asarray(f.value(pts), float)

    def gradient(pts):
        pts = np.asarray(pts, dtype=float)
        fv = np.asarray(f.value(pts), float)
        fg = np.asarray(f.gradient(pts), float)
        return lin * fv[..., None] + (const + pts @ lin)[..., None] * fg

    return ScalarField(f.dim, value, gradient, f.support_box, f"affine*{f.name}")


def standard_corpus(params: Params) -> list[ScalarField]:
    """Reference corpus: two interior bumps at different heights, a
    boundary-crossing logarithmic bump (replaced by a third interior bump
    when gamma <= -1 makes its energy diverge), the 1-D sharp profile
    lifted constantly in the horizontal directions, and a
    polynomial-times-bump."""
    n = params.n
    if n < 2:
        raise ValueError("the standard corpus is built for n >= 2")
    up = lambda h, *horiz: HalfSpacePoint(tuple(horiz) + (0.0,) * (n - 1 - len(horiz)), h)
    fields = [
        replace(bump(up(2.0), 0.5), name="bump_high"),
        replace(bump(up(0.4, 1.0), 0.3), name="bump_low"),
    ]
    if params.gamma > -1.0:
        fields.append(replace(log_bump(up(0.5), 2.0), name="log_bump"))
    else:
        fields.append(replace(bump(up(1.0, -1.0), 0.4), name="bump_mid"))
    sharp = oned_sharp_profile(Params(1, params.gamma, params.p), 0.5, 2.0)
    fields.append(replace(lift_vertical(sharp, n), name="sharp_lift"))
    poly_bump = affine_times(bump(up(2.0), 0.5), 1.0, (0.5,) + (0.0,) * (n - 2) + (0.25,))
    fields.append(replace(poly_bump, name="poly_bump"))
    return fields
