"""Mixed driver M = w_bm * B + w_fbm * B^H and grid-coupled views of it.

The two components are independent; each gets its own substream of the
path seed, so the Brownian part of a path does not change when the
fractional part is switched off (and vice versa).  ``derive_coupled``
produces coarse-grid restrictions of one fine realization by exact block
summation, which is what a self-convergence study needs: every grid sees
the same underlying driver.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .noise import (
    CHOLESKY_MAX_STEPS,
    GridSpec,
    NoisePath,
    _check_hurst,
    sample_brownian_increments,
    sample_fbm_cholesky,
    sample_fbm_davies_harte,
    substream_seed,
)

__all__ = ["CoupledNoise", "MixedSpec", "build_mixed", "derive_coupled"]

# Fixed substream indices of a path seed; part of the seeding contract.
_BM_STREAM = 0
_FBM_STREAM = 1


@dataclass(frozen=True)
class MixedSpec:
    """Configuration of the mixed driver.

    ``hurst`` must exceed 1/2: the model's pathwise analysis relies on the
    fractional component being smoother than Brownian motion, so smaller
    values are rejected here, at configuration time.  Setting a weight to
    zero drops that component exactly (the other one keeps its seed).
    """

    hurst: float = 0.75
    weight_bm: float = 1.0
    weight_fbm: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hurst", float(self.hurst))
        object.__setattr__(self, "weight_bm", float(self.weight_bm))
        object.__setattr__(self, "weight_fbm", float(self.weight_fbm))
        _check_hurst(self.hurst)
        if self.hurst <= 0.5:
            raise ValueError(
                f"mixed driver requires hurst > 1/2, got {self.hurst}"
            )
        if not np.isfinite(self.weight_bm) or not np.isfinite(self.weight_fbm):
            raise ValueError("component weights must be finite")


def build_mixed(spec: MixedSpec, grid: GridSpec, seed: int) -> NoisePath:
    """Sample one mixed-driver path on ``grid`` from a path seed.

    The Brownian and fractional components are generated from substreams
    0 and 1 of ``seed``.  The fractional component uses the Cholesky
    generator up to ``CHOLESKY_MAX_STEPS`` steps and the circulant FFT
    generator beyond that.
    """
    inc = np.zeros(grid.steps_n)
    if spec.weight_bm != 0.0:
        bm = sample_brownian_increments(grid, substream_seed(seed, _BM_STREAM))
        inc = inc + spec.weight_bm * bm.increments
    if spec.weight_fbm != 0.0:
        sampler = (
            sample_fbm_cholesky
            if grid.steps_n <= CHOLESKY_MAX_STEPS
            else sample_fbm_davies_harte
        )
        fbm = sampler(spec.hurst, grid, substream_seed(seed, _FBM_STREAM))
        inc = inc + spec.weight_fbm * fbm.increments
    return NoisePath(grid=grid, increments=inc, kind="mixed", seed=seed, hurst=spec.hurst)


@dataclass(frozen=True, eq=False)
class CoupledNoise:
    """One fine driver realization plus coarse restrictions of it.

    ``coarse_views[n]`` lives on an n-step grid over the same horizon and
    its k-th increment is the sum of the fine increments it covers, so all
    views share terminal value and, at common grid points, path values.
    """

    fine: NoisePath
    coarse_views: Mapping[int, NoisePath]


def derive_coupled(
    spec: MixedSpec,
    horizon_t: float,
    n_fine: int,
    coarse_list: Sequence[int],
    seed: int,
) -> CoupledNoise:
    """Build a fine mixed path and block-sum it onto coarser grids.

    Every entry of ``coarse_list`` must divide ``n_fine`` exactly;
    otherwise the offending value is named in the error.
    """
    fine_grid = GridSpec(horizon_t=horizon_t, steps_n=n_fine)
    for n_coarse in coarse_list:
        if n_coarse < 1:
            raise ValueError(f"coarse step count must be >= 1, got {n_coarse}")
        if n_fine % n_coarse != 0:
            raise ValueError(
                f"coarse step count {n_coarse} does not divide n_fine {n_fine}"
            )
    fine = build_mixed(spec, fine_grid, seed)
    views = {}
    for n_coarse in coarse_list:
        ratio = n_fine // n_coarse
        inc = fine.increments.reshape(n_coarse, ratio).sum(axis=1)
        views[int(n_coarse)] = NoisePath(
            grid=GridSpec(horizon_t=horizon_t, steps_n=int(n_coarse)),
            increments=inc,
            kind="mixed",
            seed=seed,
            hurst=spec.hurst,
        )
    return CoupledNoise(fine=fine, coarse_views=MappingProxyType(views))
