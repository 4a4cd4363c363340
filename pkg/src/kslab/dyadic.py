"""Homogeneous dyadic frequency blocks and low-frequency cut-offs.

The low-pass profile is the textbook smooth radial bump: identically 1 for
|xi| <= (3/4) 2^j, identically 0 for |xi| >= (4/3) 2^j.  Block j is the
difference of consecutive low-passes, hence supported in the annulus
[3/4, 8/3] * 2^j, and the family telescopes exactly:

    S_{j_min} + sum_{j=j_min}^{j_max} B_j = S_{j_max+1} = identity

once 2^{j_max+1} * 3/4 clears the largest grid wavenumber.  On a finite grid
the decomposition truncates at j_min set by the box size (2^{j_min} ~ 2*pi/L)
and at the Nyquist-touching j_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import Grid, ScalarField, _irfft, _k_squared_r, _rfft
from .norms import UlocNormParams, uloc_norm

__all__ = [
    "DyadicConfig",
    "dyadic_block",
    "low_freq",
    "reconstruct",
    "generalized_young_check",
]

_LOW_EDGE = 0.75
_HIGH_EDGE = 4.0 / 3.0


def _smoothstep_down(t: np.ndarray) -> np.ndarray:
    """C-infinity transition from 1 (t <= 0) to 0 (t >= 1)."""
    t = np.asarray(t, dtype=np.float64)
    a = np.zeros_like(t)
    b = np.zeros_like(t)
    up = t < 1.0
    dn = t > 0.0
    a[up] = np.exp(-1.0 / (1.0 - t[up]))
    b[dn] = np.exp(-1.0 / t[dn])
    out = np.where(t <= 0.0, 1.0, np.where(t >= 1.0, 0.0, a / np.where(a + b > 0, a + b, 1.0)))
    return out


def lowpass_profile(r: np.ndarray) -> np.ndarray:
    """Radial low-pass: 1 for r <= 3/4, 0 for r >= 4/3, smooth monotone between."""
    return _smoothstep_down((np.asarray(r) - _LOW_EDGE) / (_HIGH_EDGE - _LOW_EDGE))


def block_profile(r: np.ndarray) -> np.ndarray:
    """Annular bump supported in [3/4, 8/3]: lowpass(r/2) - lowpass(r)."""
    r = np.asarray(r)
    return lowpass_profile(r / 2.0) - lowpass_profile(r)


@lru_cache(maxsize=64)
def _k_radial(grid: Grid) -> np.ndarray:
    return np.sqrt(_k_squared_r(grid))


@dataclass(frozen=True)
class DyadicConfig:
    """Resolvable block range for a grid."""

    j_min: int
    j_max: int

    @staticmethod
    def for_grid(grid: Grid) -> "DyadicConfig":
        k_min = 2.0 * np.pi / grid.box_len
        k_max = float(np.max(_k_radial(grid)))
        j_min = math.floor(math.log2(k_min))
        # Smallest j with (3/4) * 2^(j+1) >= k_max, so S_{j_max+1} == identity.
        j_max = math.ceil(math.log2(k_max / (2.0 * _LOW_EDGE)))
        return DyadicConfig(j_min=j_min, j_max=j_max)

    def block_range(self) -> range:
        return range(self.j_min, self.j_max + 1)


def dyadic_block(f: ScalarField, j: int) -> ScalarField:
    """Filter f through the annular bump at scale 2^j (zero out of range)."""
    grid = f.grid
    cfg = DyadicConfig.for_grid(grid)
    # Out-of-range blocks are identically zero on the grid; the lower guard
    # also keeps 2**j away from floating underflow in the profile argument.
    if j > cfg.j_max + 1 or j < cfg.j_min - 40:
        return ScalarField(grid, np.zeros(grid.shape))
    mult = block_profile(_k_radial(grid) / 2.0**j)
    return ScalarField(grid, _irfft(_rfft(f.values) * mult, grid))


def low_freq(f: ScalarField, j: int) -> ScalarField:
    """Smooth low-pass keeping |xi| below ~(4/3) 2^j; the DC mode always passes."""
    grid = f.grid
    mult = lowpass_profile(_k_radial(grid) / 2.0**j)
    return ScalarField(grid, _irfft(_rfft(f.values) * mult, grid))


def reconstruct(f: ScalarField, cfg: DyadicConfig | None = None) -> ScalarField:
    """Low-pass at j_min plus all blocks; equals f up to roundoff."""
    cfg = cfg or DyadicConfig.for_grid(f.grid)
    total = low_freq(f, cfg.j_min)
    for j in cfg.block_range():
        total = total + dyadic_block(f, j)
    return total


def generalized_young_check(f: ScalarField, p: float, j: int) -> float:
    """Ratio (||B_j f||_inf + ||S_j f||_inf) / (2^{(d/p) j} ||f||_{p,1}).

    The scaling bound holds for j >= 0 with a constant independent of j and f;
    the returned ratio is the empirical constant for this field and scale.
    """
    if j < 0:
        raise ValueError("the scaling bound is stated for j >= 0")
    base = uloc_norm(f, UlocNormParams.defaults_for(f.grid, p, 1.0))
    if base == 0.0:
        return 0.0
    numer = dyadic_block(f, j).max_abs() + low_freq(f, j).max_abs()
    return float(numer / (2.0 ** (f.grid.d / p * j) * base))
