"""Structured forward operator, its adjoint, and full-grid reconstruction.

The stacked operator maps per-box coefficient rows (|N| x R^3) to the
measurement vector through three separable steps: a per-axis modulation
transform (box axis -> sample axis, one independent transform per factor
column), an elementwise multiply with the precomputed index-free factor stack
``S``, and a row sum over the R^3 columns.  The adjoint runs the same chain in
reverse with conjugates.

On uniform sample grids whose spacing, span and box count satisfy the
centered-DFT relation the per-axis transforms run as zero-padded FFTs with
pre/post phase ramps; otherwise they fall back to explicit modulation-matrix
multiplies.  Both paths are exact, so every oracle comparison holds to
floating-point accuracy.

The operator is built on span-scaled (dimensionless) axis coordinates
``z * span`` with unit span parameters, which makes the stacked operator
approximately unit-norm at Nyquist sampling; step sizes and regularization
weights are therefore scale-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ArrayGeometry, ChannelTensor, OfdmGrid
from .kernels import (
    DELAY,
    HORIZONTAL,
    VERTICAL,
    AxisKernel,
    DelayBeamGrid,
    LowRankFactors,
    ModulationVectors,
    _kron3_columns,
    build_modulation_vectors,
    low_rank_factors,
)

__all__ = ["CoefficientState", "FastForwardOperator", "build_operator", "DENSE_GUARD"]

DENSE_GUARD = 1 << 30  # max M * R^3 * |N| entries touched by the dense oracle


@dataclass
class CoefficientState:
    """Atom coefficients for all boxes: an |N| x R^3 complex matrix.

    Row order is the flat box index (n1 slowest, n3 fastest), matching the
    project-wide vectorization order.
    """

    values: np.ndarray
    grid: DelayBeamGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 2 or self.values.shape[0] != self.grid.n_boxes:
            raise ValueError(
                f"coefficient matrix shape {self.values.shape} does not match |N|={self.grid.n_boxes}")

    @classmethod
    def zeros(cls, grid: DelayBeamGrid, rank: int) -> "CoefficientState":
        return cls(np.zeros((grid.n_boxes, rank ** 3), dtype=complex), grid)

    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    def copy(self) -> "CoefficientState":
        return CoefficientState(self.values.copy(), self.grid)


class _AxisMap:
    """Linear map from the box axis to a sample axis: f[m, j] = exp(2i pi z_m w_j).

    Factors as diag(pm) . E . diag(pn) with E[m, j] = exp(2i pi m j / K) when
    the sample grid is uniform and K = n_boxes / (spacing * span) is an
    integer >= max(n_samples, n_boxes); then E is a zero-padded inverse FFT.
    """

    def __init__(self, points: np.ndarray, span: float, n_boxes: int, offset: float):
        points = np.asarray(points, dtype=float)
        self.n_samples = len(points)
        self.n_boxes = n_boxes
        boxes = np.arange(1, n_boxes + 1)
        freqs = (boxes - (n_boxes + 1) / 2.0) * span / n_boxes + offset
        self._fft_k = None
        if self.n_samples > 1:
            deltas = np.diff(points)
            spacing = deltas[0]
            uniform = spacing != 0 and np.allclose(deltas, spacing, rtol=1e-12, atol=1e-12 * abs(spacing))
        else:
            spacing = 1.0
            uniform = True
        if uniform:
            beta = spacing * span / n_boxes
            k_float = 1.0 / abs(beta) if beta != 0 else 0.0
            k = int(round(k_float))
            if k >= max(self.n_samples, n_boxes) and abs(k_float - k) <= 1e-9 * max(k, 1):
                self._fft_k = k
                self._fft_sign = 1 if beta > 0 else -1
                m = np.arange(self.n_samples)
                z0 = points[0]
                # E carries exp(2i pi sign m j / K) with 0-based j; the box
                # offset and the first box's frequency land in the ramps
                self._pm = np.exp(2j * np.pi * m * spacing * (offset - (n_boxes - 1) / 2.0 * span / n_boxes))
                self._pn = np.exp(2j * np.pi * z0 * freqs)
        if self._fft_k is None:
            self._dense = np.exp(2j * np.pi * np.outer(points, freqs))

    @property
    def uses_fft(self) -> bool:
        return self._fft_k is not None

    def forward(self, x: np.ndarray, axis: int) -> np.ndarray:
        """Apply f along ``axis`` of x (length n_boxes -> n_samples)."""
        if self._fft_k is None:
            return np.moveaxis(np.tensordot(self._dense, x, axes=([1], [axis])), 0, axis)
        k = self._fft_k
        shape = [1] * x.ndim
        shape[axis] = self.n_boxes
        y = x * self._pn.reshape(shape)
        if self._fft_sign > 0:
            y = np.fft.ifft(y, n=k, axis=axis) * k
        else:
            y = np.fft.fft(y, n=k, axis=axis)
        idx = [slice(None)] * x.ndim
        idx[axis] = slice(0, self.n_samples)
        y = y[tuple(idx)]
        shape[axis] = self.n_samples
        return y * self._pm.reshape(shape)

    def adjoint(self, x: np.ndarray, axis: int) -> np.ndarray:
        """Apply f^H along ``axis`` of x (length n_samples -> n_boxes)."""
        if self._fft_k is None:
            return np.moveaxis(np.tensordot(self._dense.conj().T, x, axes=([1], [axis])), 0, axis)
        k = self._fft_k
        shape = [1] * x.ndim
        shape[axis] = self.n_samples
        y = x * np.conj(self._pm).reshape(shape)
        pad = [(0, 0)] * x.ndim
        pad[axis] = (0, k - self.n_samples)
        y = np.pad(y, pad)
        if self._fft_sign > 0:
            y = np.fft.fft(y, axis=axis)
        else:
            y = np.fft.ifft(y, axis=axis) * k
        idx = [slice(None)] * x.ndim
        idx[axis] = slice(0, self.n_boxes)
        y = y[tuple(idx)]
        shape[axis] = self.n_boxes
        return y * np.conj(self._pn).reshape(shape)


@dataclass
class FastForwardOperator:
    """Precomputed factor stacks and per-axis transforms for one grid setup."""

    grid: DelayBeamGrid
    ofdm: OfdmGrid
    geometry: ArrayGeometry
    rank: int
    factors: LowRankFactors
    mods: ModulationVectors
    s_pilot: np.ndarray     # (N_pil * n_rows * n_cols, R^3) index-free stack
    s_full: np.ndarray      # (|F| * n_rows * n_cols, R^3)
    _maps_pilot: tuple[_AxisMap, _AxisMap, _AxisMap]
    _maps_full: tuple[_AxisMap, _AxisMap, _AxisMap]
    _norm: float | None = field(default=None, repr=False)

    @property
    def r3(self) -> int:
        return self.rank ** 3

    @property
    def measurement_size(self) -> int:
        return self.s_pilot.shape[0]

    @property
    def pilot_shape(self) -> tuple[int, int, int]:
        return (self.ofdm.n_pilots, self.geometry.n_rows, self.geometry.n_cols)

    @property
    def full_shape(self) -> tuple[int, int, int]:
        return (self.ofdm.n_subcarriers, self.geometry.n_rows, self.geometry.n_cols)

    def zero_state(self) -> CoefficientState:
        return CoefficientState.zeros(self.grid, self.rank)

    def _check_state(self, a: CoefficientState) -> None:
        if a.values.shape != (self.grid.n_boxes, self.r3):
            raise ValueError(
                f"coefficient shape {a.values.shape} does not match operator ({self.grid.n_boxes}, {self.r3})")

    def _transform(self, a: CoefficientState, maps, stack: np.ndarray) -> np.ndarray:
        g = a.values.reshape(self.grid.shape + (self.r3,))
        for axis, amap in enumerate(maps):
            g = amap.forward(g, axis)
        g = g.reshape(stack.shape)
        return np.sum(stack * g, axis=1)

    def apply(self, a: CoefficientState) -> np.ndarray:
        """Forward map: measurement-space vector ``sum_n S_n a_n``."""
        self._check_state(a)
        return self._transform(a, self._maps_pilot, self.s_pilot)

    def adjoint(self, e: np.ndarray) -> CoefficientState:
        """Adjoint map: stacked ``S_n^H e`` as a coefficient state."""
        e = np.asarray(e).reshape(-1)
        if e.shape[0] != self.measurement_size:
            raise ValueError(f"measurement length {e.shape[0]} does not match {self.measurement_size}")
        w = np.conj(self.s_pilot) * e[:, None]
        w = w.reshape(self.pilot_shape + (self.r3,))
        for axis, amap in enumerate(self._maps_pilot):
            w = amap.adjoint(w, axis)
        return CoefficientState(w.reshape(self.grid.n_boxes, self.r3), self.grid)

    def reconstruct(self, a: CoefficientState) -> ChannelTensor:
        """Full-grid channel ``sum_n S_n(F) a_n``; pilot rows match ``apply``."""
        self._check_state(a)
        values = self._transform(a, self._maps_full, self.s_full)
        return ChannelTensor(values.reshape(self.full_shape), self.ofdm, self.geometry)

    # dense paths -----------------------------------------------------------

    def _modulation_columns(self, flat_boxes: np.ndarray, pilot: bool) -> np.ndarray:
        n2, n3 = self.grid.n2, self.grid.n3
        i1 = flat_boxes // (n2 * n3)
        i2 = (flat_boxes // n3) % n2
        i3 = flat_boxes % n3
        ft = self.mods.f_t_pilot if pilot else self.mods.f_t_full
        cols = (ft[:, i1][:, None, None, :] *
                self.mods.f_h[:, i2][None, :, None, :] *
                self.mods.f_v[:, i3][None, None, :, :])
        m = ft.shape[0] * self.mods.f_h.shape[0] * self.mods.f_v.shape[0]
        return cols.reshape(m, len(flat_boxes))

    def _apply_dense(self, a: CoefficientState, pilot: bool = True, chunk: int = 256,
                     max_entries: int | None = DENSE_GUARD) -> np.ndarray:
        stack = self.s_pilot if pilot else self.s_full
        m = stack.shape[0]
        total = m * self.r3 * self.grid.n_boxes
        if max_entries is not None and total > max_entries:
            raise ValueError(f"dense operator of {total} entries exceeds the size guard")
        out = np.zeros(m, dtype=complex)
        for start in range(0, self.grid.n_boxes, chunk):
            boxes = np.arange(start, min(start + chunk, self.grid.n_boxes))
            cols = self._modulation_columns(boxes, pilot)
            block = stack[:, None, :] * cols[:, :, None]       # (M, chunk, R^3)
            out += block.reshape(m, -1) @ a.values[boxes].reshape(-1)
        return out

    def apply_dense_oracle(self, a: CoefficientState) -> np.ndarray:
        """Reference forward product assembled from explicit atom blocks."""
        self._check_state(a)
        return self._apply_dense(a, pilot=True)

    def reconstruct_dense_oracle(self, a: CoefficientState) -> np.ndarray:
        self._check_state(a)
        return self._apply_dense(a, pilot=False)

    def adjoint_dense_oracle(self, e: np.ndarray) -> CoefficientState:
        e = np.asarray(e).reshape(-1)
        total = self.measurement_size * self.r3 * self.grid.n_boxes
        if total > DENSE_GUARD:
            raise ValueError(f"dense operator of {total} entries exceeds the size guard")
        out = np.empty((self.grid.n_boxes, self.r3), dtype=complex)
        chunk = 256
        for start in range(0, self.grid.n_boxes, chunk):
            boxes = np.arange(start, min(start + chunk, self.grid.n_boxes))
            cols = self._modulation_columns(boxes, pilot=True)
            block = self.s_pilot[:, None, :] * cols[:, :, None]
            out[boxes] = np.tensordot(block.conj(), e, axes=([0], [0]))
        return CoefficientState(out, self.grid)

    def dense_matrix(self, full: bool = False) -> np.ndarray:
        """Explicit stacked matrix (M x R^3 |N|); oracle-size instances only."""
        stack = self.s_full if full else self.s_pilot
        m = stack.shape[0]
        total = m * self.r3 * self.grid.n_boxes
        if total > DENSE_GUARD // 8:
            raise ValueError("dense matrix exceeds the size guard")
        cols = self._modulation_columns(np.arange(self.grid.n_boxes), pilot=not full)
        return (stack[:, None, :] * cols[:, :, None]).reshape(m, -1)

    def norm_estimate(self, iterations: int = 80, seed: int = 0) -> float:
        """Spectral norm of the stacked operator via power iteration (cached)."""
        if self._norm is None:
            rng = np.random.default_rng(seed)
            v = rng.standard_normal((self.grid.n_boxes, self.r3)) \
                + 1j * rng.standard_normal((self.grid.n_boxes, self.r3))
            v /= np.linalg.norm(v)
            sigma2 = 0.0
            state = CoefficientState(v, self.grid)
            for _ in range(iterations):
                w = self.adjoint(self.apply(state)).values
                nrm = np.linalg.norm(w)
                if nrm == 0:
                    break
                sigma2 = nrm
                state = CoefficientState(w / nrm, self.grid)
            self._norm = float(np.sqrt(sigma2))
        return self._norm


def build_operator(ofdm: OfdmGrid, geometry: ArrayGeometry, grid: DelayBeamGrid,
                   rank: int) -> FastForwardOperator:
    """Construct factors, modulation vectors and transforms for a grid setup.

    Axis coordinates are scaled by their spans (frequency times delay span,
    positions times beam spans) so that every axis kernel has unit span; this
    leaves all kernel phases untouched and fixes the operator's overall scale
    independently of physical units.
    """
    max_rank = min(ofdm.n_subcarriers, geometry.n_rows, geometry.n_cols)
    if not (1 <= rank <= max_rank):
        raise ValueError(f"rank must be in [1, {max_rank}] for this geometry, got {rank}")
    # Coordinates are negated so the atoms of box n span tones
    # exp(-2i pi z w_n) matching the channel's sign convention; the index-free
    # sinc Gram is even in the coordinates, so the factors are unaffected.
    u_full = -ofdm.frequencies * grid.delay_span_s
    pilot_rows = ofdm.pilot_indices
    xh = -geometry.positions_row * grid.beam_span_h_cpm
    xv = -geometry.positions_col * grid.beam_span_v_cpm
    # causal delays live in [0, span]: shift the delay box centers by +span/2
    kt = AxisKernel(DELAY, 1.0, grid.n1, center_offset=0.5)
    kh = AxisKernel(HORIZONTAL, 1.0, grid.n2)
    kv = AxisKernel(VERTICAL, 1.0, grid.n3)
    factors = low_rank_factors(kt, kh, kv, u_full, pilot_rows, xh, xv, rank)
    mods = build_modulation_vectors(kt, kh, kv, u_full, pilot_rows, xh, xv)
    maps_full = (
        _AxisMap(u_full, 1.0, grid.n1, 0.5),
        _AxisMap(xh, 1.0, grid.n2, 0.0),
        _AxisMap(xv, 1.0, grid.n3, 0.0),
    )
    maps_pilot = (
        _AxisMap(u_full[pilot_rows], 1.0, grid.n1, 0.5),
        maps_full[1],
        maps_full[2],
    )
    s_pilot = _kron3_columns(factors.s_t_pilot, factors.s_h, factors.s_v)
    s_full = _kron3_columns(factors.s_t_full, factors.s_h, factors.s_v)
    return FastForwardOperator(
        grid=grid,
        ofdm=ofdm,
        geometry=geometry,
        rank=rank,
        factors=factors,
        mods=mods,
        s_pilot=s_pilot,
        s_full=s_full,
        _maps_pilot=maps_pilot,
        _maps_full=maps_full,
    )
