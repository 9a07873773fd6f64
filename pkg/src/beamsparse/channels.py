"""Synthetic band-sparse multipath channels and noisy pilot-grid sampling.

The physical setup is an OFDM downlink observed at a 2-D base-station array:
the channel over (frequency, row position, column position) is a sum of
discrete paths, each contributing a complex gain times three complex
exponentials (one per axis).  Delays are causal in ``[0, T]``; the two
spatial frequencies live in ``[-span/2, span/2]`` of their axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArrayGeometry",
    "OfdmGrid",
    "PathSet",
    "ChannelTensor",
    "MeasurementSet",
    "generate_paths",
    "synthesize_channel",
    "sample_measurements",
    "generate_channel",
]


@dataclass
class ArrayGeometry:
    """Planar antenna array: ``n_rows`` x ``n_cols`` with per-axis spacings.

    Positions are 1-D coordinates along the array's row/column orientation
    vectors (already projected, so the rest of the code never sees 3-D
    geometry).
    """

    n_rows: int
    n_cols: int
    row_spacing_m: float
    col_spacing_m: float
    positions_row: np.ndarray = field(default=None)  # type: ignore[assignment]
    positions_col: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("array must have at least one row and one column")
        if self.positions_row is None:
            self.positions_row = np.arange(self.n_rows) * float(self.row_spacing_m)
        if self.positions_col is None:
            self.positions_col = np.arange(self.n_cols) * float(self.col_spacing_m)
        self.positions_row = np.asarray(self.positions_row, dtype=float)
        self.positions_col = np.asarray(self.positions_col, dtype=float)
        if len(self.positions_row) != self.n_rows:
            raise ValueError("positions_row length does not match n_rows")
        if len(self.positions_col) != self.n_cols:
            raise ValueError("positions_col length does not match n_cols")
        for name, pos in (("positions_row", self.positions_row), ("positions_col", self.positions_col)):
            if len(pos) > 1 and not np.all(np.diff(pos) > 0):
                raise ValueError(f"{name} must be strictly increasing")

    @property
    def n_antennas(self) -> int:
        return self.n_rows * self.n_cols


@dataclass
class OfdmGrid:
    """OFDM subcarrier grid with a regular pilot comb.

    Frequencies are baseband-relative (first subcarrier at 0 Hz); the carrier
    frequency is metadata only.  Pilots sit on every ``pilot_stride``-th
    subcarrier starting at index 0.
    """

    n_subcarriers: int
    subcarrier_spacing_hz: float
    carrier_frequency_hz: float
    pilot_stride: int

    def __post_init__(self):
        if self.n_subcarriers < 1:
            raise ValueError("n_subcarriers must be >= 1")
        if self.subcarrier_spacing_hz <= 0:
            raise ValueError("subcarrier_spacing_hz must be positive")
        if self.pilot_stride < 1:
            raise ValueError("pilot_stride must be >= 1")

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.n_subcarriers) * self.subcarrier_spacing_hz

    @property
    def pilot_indices(self) -> np.ndarray:
        return np.arange(0, self.n_subcarriers, self.pilot_stride)

    @property
    def pilot_frequencies(self) -> np.ndarray:
        return self.frequencies[self.pilot_indices]

    @property
    def n_pilots(self) -> int:
        return int(math.ceil(self.n_subcarriers / self.pilot_stride))

    @property
    def pilot_spacing_hz(self) -> float:
        return self.pilot_stride * self.subcarrier_spacing_hz

    @property
    def symbol_duration_s(self) -> float:
        # cyclic prefix neglected
        return 1.0 / self.subcarrier_spacing_hz


@dataclass
class PathSet:
    """Discrete multipath parameters: gains, delays and per-axis spatial frequencies."""

    gains: np.ndarray
    delays: np.ndarray
    spatial_freq_row: np.ndarray
    spatial_freq_col: np.ndarray

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=complex)
        self.delays = np.asarray(self.delays, dtype=float)
        self.spatial_freq_row = np.asarray(self.spatial_freq_row, dtype=float)
        self.spatial_freq_col = np.asarray(self.spatial_freq_col, dtype=float)
        n = len(self.gains)
        if n < 1:
            raise ValueError("a PathSet needs at least one path")
        for name in ("delays", "spatial_freq_row", "spatial_freq_col"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length does not match the number of gains")

    @property
    def n_paths(self) -> int:
        return len(self.gains)

    def scaled(self, factor: complex) -> "PathSet":
        return PathSet(self.gains * factor, self.delays.copy(),
                       self.spatial_freq_row.copy(), self.spatial_freq_col.copy())


@dataclass
class ChannelTensor:
    """Complex channel values over all subcarriers x rows x columns.

    The project-wide vectorization order is frequency slowest, row middle,
    column fastest (C-order ravel of the value array).
    """

    values: np.ndarray
    grid: OfdmGrid
    geometry: ArrayGeometry

    def __post_init__(self):
        self.values = np.asarray(self.values)
        expected = (self.grid.n_subcarriers, self.geometry.n_rows, self.geometry.n_cols)
        if self.values.shape != expected:
            raise ValueError(f"channel tensor shape {self.values.shape} does not match grid {expected}")

    @property
    def vector(self) -> np.ndarray:
        return self.values.reshape(-1)

    def mean_square(self) -> float:
        return float(np.mean(np.abs(self.values) ** 2))


@dataclass
class MeasurementSet:
    """Noisy pilot-grid samples ``y = h + n`` with per-entry noise variance."""

    values: np.ndarray
    noise_variance: float
    grid: OfdmGrid
    geometry: ArrayGeometry

    def __post_init__(self):
        self.values = np.asarray(self.values)
        expected = (self.grid.n_pilots, self.geometry.n_rows, self.geometry.n_cols)
        if self.values.shape != expected:
            raise ValueError(f"measurement shape {self.values.shape} does not match pilot grid {expected}")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")

    @property
    def vector(self) -> np.ndarray:
        return self.values.reshape(-1)


def generate_paths(rng: np.random.Generator, cluster_count: int, paths_per_cluster: int,
                   spreads, grid_bounds, center_fractions=(1.0, 1.0, 1.0)) -> PathSet:
    """Draw a clustered multipath profile inside the delay/beam domain.

    Cluster centers are uniform over the delay/beam domain (optionally only
    over the central ``center_fractions`` of each axis, e.g. to keep
    elevations near the horizon); per-path offsets are Gaussian with the given
    per-axis ``spreads`` (a scalar is broadcast to all three axes) and clipped
    back into the domain.  Cluster powers decay exponentially with the
    cluster's delay and per-path gains are complex Gaussian.  Gains are
    normalized to unit total power (``sum |a_l|^2 = 1``), which gives unit
    mean-square channel entries in expectation; the per-realization
    automatic-gain-control rescale happens in :func:`generate_channel` where
    the sampling grid is known.
    """
    if cluster_count < 1:
        raise ValueError("cluster_count must be >= 1")
    if paths_per_cluster < 1:
        raise ValueError("paths_per_cluster must be >= 1")
    spreads = np.broadcast_to(np.asarray(spreads, dtype=float), (3,)).copy()
    if np.any(spreads < 0):
        raise ValueError("spreads must be nonnegative")
    delay_span, span_h, span_v = (float(b) for b in grid_bounds)
    if delay_span <= 0 or span_h <= 0 or span_v <= 0:
        raise ValueError("grid_bounds must be positive")
    fractions = np.broadcast_to(np.asarray(center_fractions, dtype=float), (3,))
    if np.any(fractions <= 0) or np.any(fractions > 1):
        raise ValueError("center_fractions must lie in (0, 1]")

    n_paths = cluster_count * paths_per_cluster
    centers_tau = rng.uniform(0.0, delay_span * fractions[0], cluster_count)
    centers_h = rng.uniform(-span_h / 2 * fractions[1], span_h / 2 * fractions[1], cluster_count)
    centers_v = rng.uniform(-span_v / 2 * fractions[2], span_v / 2 * fractions[2], cluster_count)

    # exponential power-delay profile over the clusters, ~13 dB decay across the span
    cluster_power = np.exp(-3.0 * centers_tau / delay_span)
    cluster_power /= cluster_power.sum()

    delays = np.repeat(centers_tau, paths_per_cluster)
    nu_row = np.repeat(centers_h, paths_per_cluster)
    nu_col = np.repeat(centers_v, paths_per_cluster)
    if np.any(spreads > 0):
        delays = delays + rng.normal(0.0, spreads[0], n_paths) if spreads[0] > 0 else delays
        nu_row = nu_row + rng.normal(0.0, spreads[1], n_paths) if spreads[1] > 0 else nu_row
        nu_col = nu_col + rng.normal(0.0, spreads[2], n_paths) if spreads[2] > 0 else nu_col
    delays = np.clip(delays, 0.0, delay_span)
    nu_row = np.clip(nu_row, -span_h / 2, span_h / 2)
    nu_col = np.clip(nu_col, -span_v / 2, span_v / 2)

    sigma = np.sqrt(np.repeat(cluster_power, paths_per_cluster) / paths_per_cluster)
    gains = sigma * (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2.0)
    total = np.sum(np.abs(gains) ** 2)
    if total <= 0:  # astronomically unlikely; keep a defined result
        gains = np.full(n_paths, 1.0 / np.sqrt(n_paths), dtype=complex)
    else:
        gains = gains / np.sqrt(total)
    return PathSet(gains, delays, nu_row, nu_col)


def synthesize_channel(paths: PathSet, grid: OfdmGrid, geometry: ArrayGeometry) -> ChannelTensor:
    """Evaluate the multipath sum ``h(f, xr, xc)`` on the full sampling grid.

    Each entry is exactly ``sum_l a_l exp(-2i pi (f tau_l + xr nu_row_l
    + xc nu_col_l))``; gains, delays and spatial frequencies are treated as
    constants over the grid.
    """
    ef = np.exp(-2j * np.pi * np.outer(grid.frequencies, paths.delays))
    er = np.exp(-2j * np.pi * np.outer(geometry.positions_row, paths.spatial_freq_row))
    ec = np.exp(-2j * np.pi * np.outer(geometry.positions_col, paths.spatial_freq_col))
    values = np.einsum("l,fl,rl,cl->frc", paths.gains, ef, er, ec, optimize=True)
    return ChannelTensor(values, grid, geometry)


def sample_measurements(channel: ChannelTensor, grid: OfdmGrid, noise_variance: float,
                        rng: np.random.Generator) -> MeasurementSet:
    """Restrict the channel to the pilot comb and add circular complex noise."""
    if noise_variance < 0:
        raise ValueError("noise_variance must be nonnegative")
    pilots = channel.values[grid.pilot_indices].astype(complex)
    if noise_variance > 0:
        shape = pilots.shape
        noise = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(noise_variance / 2.0)
        pilots = pilots + noise
    return MeasurementSet(pilots, float(noise_variance), grid, channel.geometry)


def generate_channel(rng: np.random.Generator, grid: OfdmGrid, geometry: ArrayGeometry,
                     cluster_count: int, paths_per_cluster: int, spreads, grid_bounds,
                     center_fractions=(1.0, 1.0, 1.0)):
    """Draw paths and synthesize an AGC-normalized channel.

    Returns ``(paths, tensor)`` where both have been rescaled by a common real
    factor so that the tensor's mean-square entry is exactly 1 (the unit-gain
    convention; receive SNR is then ``1 / noise_variance``).
    """
    paths = generate_paths(rng, cluster_count, paths_per_cluster, spreads, grid_bounds,
                           center_fractions)
    tensor = synthesize_channel(paths, grid, geometry)
    ms = tensor.mean_square()
    if ms <= 0:
        raise RuntimeError("degenerate zero channel; cannot normalize")
    scale = 1.0 / np.sqrt(ms)
    paths = paths.scaled(scale)
    tensor = ChannelTensor(tensor.values * scale, grid, geometry)
    return paths, tensor
