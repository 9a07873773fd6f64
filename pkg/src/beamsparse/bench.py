"""Timing harness for the structured operator's complexity claim.

Builds Nyquist-sampled operators of growing box count on synthetic unit-spaced
grids (delay axis carries ``size / 64`` boxes, the two spatial axes 8 each)
and times the fast forward product against the chunked dense per-atom path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .channels import ArrayGeometry, OfdmGrid
from .kernels import DelayBeamGrid
from .operators import build_operator

__all__ = ["BenchRow", "bench_operator", "fit_loglog_slope"]

_SPATIAL = 8  # boxes per spatial axis in the bench grids


@dataclass
class BenchRow:
    path: str        # "fast" | "dense"
    n_boxes: int
    mean_s: float
    std_s: float
    repeats: int

    def to_dict(self) -> dict:
        return {"path": self.path, "n_boxes": self.n_boxes, "mean_s": self.mean_s,
                "std_s": self.std_s, "repeats": self.repeats}


def _bench_setup(size_log2: int, rank: int, seed: int):
    n_boxes = 1 << size_log2
    n1 = n_boxes // (_SPATIAL * _SPATIAL)
    if n1 < 1:
        raise ValueError(f"size 2^{size_log2} too small for the bench grid layout")
    ofdm = OfdmGrid(n_subcarriers=n1, subcarrier_spacing_hz=1.0,
                    carrier_frequency_hz=0.0, pilot_stride=1)
    geometry = ArrayGeometry(_SPATIAL, _SPATIAL, 1.0, 1.0)
    grid = DelayBeamGrid(1.0, 1.0, 1.0, n1, _SPATIAL, _SPATIAL)
    op = build_operator(ofdm, geometry, grid, rank)
    rng = np.random.default_rng(seed)
    shape = (grid.n_boxes, rank ** 3)
    a = op.zero_state()
    a.values[:] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return op, a


def _time(fn, repeats: int, warmup: int = 2):
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    samples = np.asarray(samples)
    return float(samples.mean()), float(samples.std())


def bench_operator(sizes_log2, rank: int = 2, repeats: int = 5,
                   dense_sizes_log2=None, seed: int = 0) -> list[BenchRow]:
    """Time fast applies at each size, plus the dense path on its own sizes.

    The dense range defaults to empty; pass e.g. ``range(10, 14)`` to include
    it (larger dense sizes are excluded by memory, the slope contrast does not
    need them).
    """
    rows: list[BenchRow] = []
    for s in sizes_log2:
        op, a = _bench_setup(int(s), rank, seed)
        mean, std = _time(lambda: op.apply(a), repeats)
        rows.append(BenchRow("fast", op.grid.n_boxes, mean, std, repeats))
    for s in dense_sizes_log2 or ():
        op, a = _bench_setup(int(s), rank, seed)
        mean, std = _time(lambda: op._apply_dense(a, max_entries=None), max(2, repeats // 2))
        rows.append(BenchRow("dense", op.grid.n_boxes, mean, std, max(2, repeats // 2)))
    return rows


def fit_loglog_slope(sizes, times) -> float:
    """Least-squares slope of log(time) against log(size)."""
    sizes = np.asarray(sizes, dtype=float)
    times = np.asarray(times, dtype=float)
    if len(sizes) < 2:
        raise ValueError("need at least two sizes to fit a slope")
    coeffs = np.polyfit(np.log(sizes), np.log(times), 1)
    return float(coeffs[0])
