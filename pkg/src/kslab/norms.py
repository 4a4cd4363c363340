"""Lebesgue and uniformly local norms, plus the explicit smooth cutoffs.

Two cutoff families are provided:

* ``cutoff_phi`` -- the compactly supported radial weight
  exp(4/3 + 4R^2/(r^2 - 4R^2)) on r < 2R, zero outside, used to localize
  all moment functionals.  Its gradient, Laplacian and Hessian are
  evaluated analytically from the closed form: the field is smooth but
  compactly supported, and spectral differentiation of it rings.
* ``cutoff_psi`` -- a smooth plateau equal to 1 on B_M(0) and 0 outside
  B_{2M}(0), used to truncate initial data to compact support.

The uniformly local norm sup_x ||f||_{L^p(B_R(x))} is evaluated by scanning
ball integrals over grid-point centers; the scan is a circular convolution
with the ball indicator, computed via the FFT for all centers at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import (
    Grid,
    ScalarField,
    VectorField,
    _irfft,
    _rfft,
    gradient,
    integrate,
    magnitude,
)

__all__ = [
    "CutoffSpec",
    "UlocNormParams",
    "lp_norm",
    "w1inf_norm",
    "cutoff_phi",
    "cutoff_phi_gradient",
    "cutoff_phi_laplacian",
    "cutoff_phi_hessian_norm",
    "cutoff_psi",
    "uloc_norm",
    "uloc_covering_check",
    "ball_indicator",
]

# Exponent underflows exp() far before this; used to silence 0*inf in the
# rational prefactors of the cutoff derivatives near the support edge.
_EXP_FLOOR = -700.0


@dataclass(frozen=True)
class CutoffSpec:
    """Center and radius of the compactly supported weight (support B_{2R})."""

    center: tuple[float, ...]
    radius: float

    def validate(self, grid: Grid) -> "CutoffSpec":
        if len(self.center) != grid.d:
            raise ValueError("cutoff center dimension mismatch")
        if not self.radius > 0:
            raise ValueError("cutoff radius must be positive")
        if not 2.0 * self.radius < grid.box_len / 2.0:
            raise ValueError(
                "cutoff support must fit in the box: need 2R < box_len/2"
            )
        return self


@dataclass(frozen=True)
class UlocNormParams:
    """Exponent, ball radius and center stride for the sliding-sup scan."""

    p: float
    ball_radius: float = 1.0
    center_stride: int = 1

    def validate(self, grid: Grid) -> "UlocNormParams":
        if not self.p >= 1:
            raise ValueError("exponent p must be >= 1")
        if not self.ball_radius > 0:
            raise ValueError("ball radius must be positive")
        if self.center_stride < 1:
            raise ValueError("stride must be >= 1")
        if self.center_stride * grid.spacing > self.ball_radius / 2.0:
            raise ValueError(
                "stride too coarse: need stride*spacing <= R/2 so the scan "
                "resolves the ball scale"
            )
        return self

    @staticmethod
    def defaults_for(grid: Grid, p: float, ball_radius: float = 1.0) -> "UlocNormParams":
        """Every grid point for d=1,2; stride 2 in 3D when the radius allows it."""
        stride = 2 if grid.d == 3 else 1
        while stride > 1 and stride * grid.spacing > ball_radius / 2.0:
            stride -= 1
        return UlocNormParams(p=p, ball_radius=ball_radius, center_stride=stride)


def lp_norm(f: ScalarField, p: float) -> float:
    """(integral of |f|^p)^(1/p); p = inf gives the max sample magnitude."""
    if p == math.inf or p == np.inf:
        return f.max_abs()
    if not p >= 1:
        raise ValueError(f"exponent must be >= 1 or inf, got {p}")
    return float(integrate(ScalarField(f.grid, np.abs(f.values) ** p)) ** (1.0 / p))


def w1inf_norm(c: ScalarField) -> float:
    """Sup norm of the field plus the sup of the Euclidean gradient norm."""
    return c.max_abs() + magnitude(gradient(c)).max_abs()


def _phi_exponent(r: np.ndarray, R: float) -> tuple[np.ndarray, np.ndarray]:
    """Exponent 4/3 + 4R^2/(r^2 - 4R^2) and the interior mask where it applies."""
    inside = r < 2.0 * R
    denom = np.where(inside, r * r - 4.0 * R * R, -1.0)
    g = 4.0 / 3.0 + 4.0 * R * R / denom
    return g, inside


def cutoff_phi(grid: Grid, spec: CutoffSpec) -> ScalarField:
    """The compact radial weight, equal to e^{1/3} at the center and 1 at r=R."""
    spec.validate(grid)
    r = grid.radius(spec.center)
    g, inside = _phi_exponent(r, spec.radius)
    vals = np.where(inside, np.exp(np.maximum(g, _EXP_FLOOR)), 0.0)
    vals = np.where(inside & (g <= _EXP_FLOOR), 0.0, vals)
    return ScalarField(grid, vals)


def _phi_radial_parts(grid: Grid, spec: CutoffSpec):
    """Shared pieces for the analytic derivatives: r, phi, g'(r), g''(r), mask."""
    R = spec.radius
    r = grid.radius(spec.center)
    g, inside = _phi_exponent(r, R)
    live = inside & (g > _EXP_FLOOR)
    denom = np.where(live, r * r - 4.0 * R * R, -1.0)
    phi = np.where(live, np.exp(np.where(live, g, 0.0)), 0.0)
    gp = np.where(live, -8.0 * R * R * r / denom**2, 0.0)
    gpp = np.where(
        live,
        -8.0 * R * R / denom**2 + 32.0 * R * R * r * r / denom**3,
        0.0,
    )
    # g'(r)/r has a finite limit -1/(2R^2) at the center.
    gp_over_r = np.where(
        live & (r > 0), gp / np.where(r > 0, r, 1.0), -1.0 / (2.0 * R * R)
    )
    gp_over_r = np.where(live, gp_over_r, 0.0)
    return r, phi, gp, gpp, gp_over_r, live


def cutoff_phi_gradient(grid: Grid, spec: CutoffSpec) -> VectorField:
    """Analytic gradient of the compact weight (phi * g'(r) * x/r)."""
    spec.validate(grid)
    _, phi, _, _, gp_over_r, _ = _phi_radial_parts(grid, spec)
    deltas = grid.wrapped_delta(spec.center)
    comps = tuple(ScalarField(grid, phi * gp_over_r * dx) for dx in deltas)
    return VectorField(grid, comps)


def cutoff_phi_laplacian(grid: Grid, spec: CutoffSpec) -> ScalarField:
    """Analytic Laplacian: phi * (g'' + g'^2 + (d-1) g'/r)."""
    spec.validate(grid)
    d = grid.d
    _, phi, gp, gpp, gp_over_r, _ = _phi_radial_parts(grid, spec)
    return ScalarField(grid, phi * (gpp + gp * gp + (d - 1) * gp_over_r))


def cutoff_phi_hessian_norm(grid: Grid, spec: CutoffSpec) -> ScalarField:
    """Pointwise Frobenius norm of the analytic Hessian of the compact weight.

    For a radial e^{g(r)} the Hessian splits into the radial direction with
    eigenvalue phi*(g'' + g'^2) and d-1 tangential directions with phi*g'/r.
    """
    spec.validate(grid)
    d = grid.d
    _, phi, gp, gpp, gp_over_r, live = _phi_radial_parts(grid, spec)
    radial = phi * (gpp + gp * gp)
    tangential = phi * gp_over_r
    frob = np.sqrt(radial**2 + (d - 1) * tangential**2)
    return ScalarField(grid, np.where(live, frob, 0.0))


def _smooth_ramp(s: np.ndarray) -> np.ndarray:
    """exp(-1/s) for s > 0, 0 otherwise (the standard smooth ramp)."""
    out = np.zeros_like(s, dtype=np.float64)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def cutoff_psi(grid: Grid, M: float) -> ScalarField:
    """Smooth plateau: 1 on B_M(0), 0 outside B_{2M}(0), monotone radial between.

    Realized as the partition ratio g(2 - r/M) / (g(2 - r/M) + g(r/M - 1))
    with g(s) = exp(-1/s) on s > 0, the canonical smooth interpolant.
    """
    if not M > 0:
        raise ValueError("truncation radius M must be positive")
    if not 2.0 * M < grid.box_len / 2.0:
        raise ValueError("truncation support must fit in the box: need 2M < box_len/2")
    s = grid.radius() / M
    a = _smooth_ramp(2.0 - s)
    b = _smooth_ramp(s - 1.0)
    vals = np.where(s <= 1.0, 1.0, np.where(s >= 2.0, 0.0, a / np.where(a + b > 0, a + b, 1.0)))
    return ScalarField(grid, vals)


def ball_indicator(grid: Grid, radius: float) -> np.ndarray:
    """Boolean mask of samples with wrapped distance to the origin below radius."""
    return grid.radius() < radius


def _index_offset_ball(grid: Grid, radius: float) -> np.ndarray:
    """Ball membership kernel indexed by sample offset (offset 0 at index 0)."""
    n, h = grid.n_axis, grid.spacing
    offsets = ((np.arange(n) + n // 2) % n - n // 2) * h
    dist_sq = np.zeros(grid.shape)
    for ax in range(grid.d):
        shape = [1] * grid.d
        shape[ax] = n
        dist_sq = dist_sq + offsets.reshape(shape) ** 2
    return (dist_sq < radius * radius).astype(np.float64)


def _ball_integrals(f_pow: np.ndarray, grid: Grid, radius: float) -> np.ndarray:
    """Integral of ``f_pow`` over B_radius(x) for every grid center x at once.

    Circular convolution with the offset-indexed ball kernel via the
    convolution theorem; computes exactly the sample-in-ball sums of the
    direct center scan, up to FFT roundoff.
    """
    kernel = _index_offset_ball(grid, radius)
    conv = _irfft(_rfft(f_pow) * _rfft(kernel), grid)
    return np.maximum(conv, 0.0) * grid.spacing**grid.d


def uloc_norm(f: ScalarField, params: UlocNormParams) -> float:
    """Sup over scanned centers of the local L^p norm on wrapped balls."""
    params.validate(f.grid)
    f_pow = np.abs(f.values) ** params.p
    integrals = _ball_integrals(f_pow, f.grid, params.ball_radius)
    s = params.center_stride
    sub = integrals[(slice(None, None, s),) * f.grid.d]
    return float(np.max(sub) ** (1.0 / params.p))


def uloc_covering_check(f: ScalarField, p: float, R: float) -> float:
    """Ratio ||f||_{p,R}^p / (R^d ||f||_{p,1}^p); bounded uniformly by covering."""
    if not R >= 1:
        raise ValueError("covering check requires R >= 1")
    base = uloc_norm(f, UlocNormParams.defaults_for(f.grid, p, 1.0))
    if base == 0.0:
        return 0.0
    wide = uloc_norm(f, UlocNormParams.defaults_for(f.grid, p, R))
    return float(wide**p / (R**f.grid.d * base**p))
