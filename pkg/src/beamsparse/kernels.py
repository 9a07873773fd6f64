"""Delay-beamspace box grid, per-axis sinc kernels, low-rank factors, modulation.

Each axis (delay, horizontal, vertical) partitions its span into ``n_boxes``
equal boxes.  The kernel of the function space supported on box ``n`` is a
modulated sinc,

    K_n(z, z') = (span / N) * exp(2i pi (z - z') w_n) * sinc((z - z') span / N)

with modulation frequency ``w_n = (n - (N+1)/2) span / N + center_offset`` and
``sinc(x) = sin(pi x)/(pi x)``.  Dropping the exponential gives the real,
index-free kernel shared by all boxes of the axis; the per-box Gram matrices
are unit-modulus modulations of the index-free one, so a single
eigendecomposition per axis yields every per-box factor.

``center_offset`` shifts all box centers by a constant; the delay axis uses
``+span/2`` so that causal delays in ``[0, span]`` are covered while the
spatial axes keep the symmetric ``[-span/2, span/2]`` layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DELAY = "delay"
HORIZONTAL = "horizontal"
VERTICAL = "vertical"

__all__ = [
    "DELAY",
    "HORIZONTAL",
    "VERTICAL",
    "DelayBeamGrid",
    "AxisKernel",
    "LowRankFactors",
    "ModulationVectors",
    "kernel_value",
    "build_kernel_matrix",
    "eigendecompose_and_truncate",
    "modulation_vector",
    "modulation_matrix",
    "low_rank_factors",
    "build_modulation_vectors",
    "dense_atom_operator",
]


@dataclass(frozen=True)
class DelayBeamGrid:
    """Box partition of the delay/beam domain: spans and per-axis box counts."""

    delay_span_s: float      # T
    beam_span_h_cpm: float   # horizontal axis span, cycles/meter (row coordinate)
    beam_span_v_cpm: float   # vertical axis span, cycles/meter (column coordinate)
    n1: int
    n2: int
    n3: int

    def __post_init__(self):
        if min(self.delay_span_s, self.beam_span_h_cpm, self.beam_span_v_cpm) <= 0:
            raise ValueError("all spans must be positive")
        if min(self.n1, self.n2, self.n3) < 1:
            raise ValueError("all box counts must be >= 1")

    @property
    def n_boxes(self) -> int:
        return self.n1 * self.n2 * self.n3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)

    @classmethod
    def nyquist(cls, ofdm, geometry, oversampling: int = 1) -> "DelayBeamGrid":
        """Grid matched to the sampling: N1 = n_pilots, N2 = n_rows, N3 = n_cols.

        Spans are the unambiguous ranges of the sampling combs (reciprocal
        pilot spacing / antenna spacings); integer ``oversampling`` multiplies
        every box count.
        """
        if oversampling < 1:
            raise ValueError("oversampling must be a positive integer")
        return cls(
            delay_span_s=1.0 / ofdm.pilot_spacing_hz,
            beam_span_h_cpm=1.0 / geometry.row_spacing_m,
            beam_span_v_cpm=1.0 / geometry.col_spacing_m,
            n1=ofdm.n_pilots * oversampling,
            n2=geometry.n_rows * oversampling,
            n3=geometry.n_cols * oversampling,
        )

    def flat_index(self, n1: int, n2: int, n3: int) -> int:
        """Flat box index with n1 slowest and n3 fastest (1-based box indices)."""
        return ((n1 - 1) * self.n2 + (n2 - 1)) * self.n3 + (n3 - 1)

    def box_tuple(self, flat: int) -> tuple[int, int, int]:
        n3 = flat % self.n3
        n2 = (flat // self.n3) % self.n2
        n1 = flat // (self.n2 * self.n3)
        return (n1 + 1, n2 + 1, n3 + 1)


@dataclass(frozen=True)
class AxisKernel:
    """One axis of the separable kernel; ``box_index=None`` is the index-free form."""

    axis: str
    span: float
    n_boxes: int
    box_index: int | None = None   # 1-based
    center_offset: float = 0.0

    def __post_init__(self):
        if self.span <= 0:
            raise ValueError("span must be positive")
        if self.n_boxes < 1:
            raise ValueError("n_boxes must be >= 1")
        if self.box_index is not None and not (1 <= self.box_index <= self.n_boxes):
            raise ValueError(f"box_index {self.box_index} outside [1, {self.n_boxes}]")

    def with_box(self, box_index: int | None) -> "AxisKernel":
        return AxisKernel(self.axis, self.span, self.n_boxes, box_index, self.center_offset)

    def modulation_frequency(self, box_index: int | None = None) -> float:
        n = self.box_index if box_index is None else box_index
        if n is None:
            raise ValueError("modulation frequency needs a box index")
        return (n - (self.n_boxes + 1) / 2.0) * self.span / self.n_boxes + self.center_offset


def kernel_value(kernel: AxisKernel, z, zp):
    """Evaluate the axis kernel at ``(z, z')``; broadcasts over array inputs.

    The index-free form (``box_index=None``) is the bare real sinc; the
    ``center_offset`` acts only through the modulation frequency of box
    kernels and wave vectors.
    """
    d = np.asarray(z, dtype=float) - np.asarray(zp, dtype=float)
    base = (kernel.span / kernel.n_boxes) * np.sinc(d * kernel.span / kernel.n_boxes)
    if kernel.box_index is None:
        return base
    return base * np.exp(2j * np.pi * d * kernel.modulation_frequency())


def build_kernel_matrix(kernel: AxisKernel, sample_points, sample_points_cols=None) -> np.ndarray:
    """Sampled kernel matrix ``M[i, j] = K(points[i], cols[j])``.

    With a single point set this is the Hermitian PSD Gram matrix; passing a
    second set gives the cross (reconstruction) matrix whose rows are output
    points and columns input points.
    """
    pts = np.asarray(sample_points, dtype=float)
    cols = pts if sample_points_cols is None else np.asarray(sample_points_cols, dtype=float)
    if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(cols))):
        raise ValueError("sample points must be finite")
    return np.asarray(kernel_value(kernel, pts[:, None], cols[None, :]))


def eigendecompose_and_truncate(matrix: np.ndarray, rank: int):
    """Rank-``R`` factor of a Hermitian PSD matrix: ``S = V_R sqrt(L_R)``.

    Returns ``(factor, eigenvalues)`` where ``eigenvalues`` is the full
    spectrum sorted descending (stable ties by original index) and ``factor``
    has columns ``sqrt(l_r) v_r`` for the ``R`` dominant eigenpairs.  Small
    negative eigenvalues from roundoff are clipped to zero before the square
    root.
    """
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise ValueError("matrix must be square")
    if not (1 <= rank <= n):
        raise ValueError(f"rank must be in [1, {n}], got {rank}")
    w, v = np.linalg.eigh(matrix)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    top = np.clip(w[:rank], 0.0, None)
    return v[:, :rank] * np.sqrt(top)[None, :], w


def modulation_vector(kernel: AxisKernel, box_index: int, sample_points) -> np.ndarray:
    """Unit-modulus complex wave vector ``f_n[m] = exp(2i pi z_m w_n)``."""
    if not (1 <= box_index <= kernel.n_boxes):
        raise ValueError(f"box_index {box_index} outside [1, {kernel.n_boxes}]")
    pts = np.asarray(sample_points, dtype=float)
    return np.exp(2j * np.pi * pts * kernel.modulation_frequency(box_index))


def modulation_matrix(kernel: AxisKernel, sample_points) -> np.ndarray:
    """All wave vectors stacked as columns: shape (samples, n_boxes)."""
    pts = np.asarray(sample_points, dtype=float)
    boxes = np.arange(1, kernel.n_boxes + 1)
    freqs = (boxes - (kernel.n_boxes + 1) / 2.0) * kernel.span / kernel.n_boxes + kernel.center_offset
    return np.exp(2j * np.pi * np.outer(pts, freqs))


@dataclass
class LowRankFactors:
    """Per-axis rank-R eigen-factors of the index-free kernel matrices.

    ``s_t_pilot`` is the pilot-row restriction of ``s_t_full`` (one
    eigendecomposition on the full frequency grid serves both), and the
    spatial factors are shared by every box through modulation.
    """

    rank: int
    s_t_full: np.ndarray     # (|F|, R)
    s_t_pilot: np.ndarray    # (N_pil, R)
    s_h: np.ndarray          # (n_rows, R)
    s_v: np.ndarray          # (n_cols, R)
    eig_t: np.ndarray        # full sorted spectra of the index-free matrices
    eig_h: np.ndarray
    eig_v: np.ndarray


def low_rank_factors(kernel_t: AxisKernel, kernel_h: AxisKernel, kernel_v: AxisKernel,
                     delay_points_full, pilot_rows, h_points, v_points, rank: int) -> LowRankFactors:
    """Eigendecompose the three index-free kernels and truncate to rank ``R``."""
    s_t_full, eig_t = eigendecompose_and_truncate(build_kernel_matrix(kernel_t.with_box(None), delay_points_full), rank)
    s_h, eig_h = eigendecompose_and_truncate(build_kernel_matrix(kernel_h.with_box(None), h_points), rank)
    s_v, eig_v = eigendecompose_and_truncate(build_kernel_matrix(kernel_v.with_box(None), v_points), rank)
    pilot_rows = np.asarray(pilot_rows, dtype=int)
    return LowRankFactors(
        rank=rank,
        s_t_full=s_t_full.astype(complex),
        s_t_pilot=s_t_full[pilot_rows].astype(complex),
        s_h=s_h.astype(complex),
        s_v=s_v.astype(complex),
        eig_t=eig_t,
        eig_h=eig_h,
        eig_v=eig_v,
    )


@dataclass
class ModulationVectors:
    """Per-axis wave-vector matrices for every box index (columns are boxes)."""

    f_t_full: np.ndarray    # (|F|, N1)
    f_t_pilot: np.ndarray   # (N_pil, N1)
    f_h: np.ndarray         # (n_rows, N2)
    f_v: np.ndarray         # (n_cols, N3)


def build_modulation_vectors(kernel_t: AxisKernel, kernel_h: AxisKernel, kernel_v: AxisKernel,
                             delay_points_full, pilot_rows, h_points, v_points) -> ModulationVectors:
    f_t_full = modulation_matrix(kernel_t, delay_points_full)
    pilot_rows = np.asarray(pilot_rows, dtype=int)
    return ModulationVectors(
        f_t_full=f_t_full,
        f_t_pilot=f_t_full[pilot_rows],
        f_h=modulation_matrix(kernel_h, h_points),
        f_v=modulation_matrix(kernel_v, v_points),
    )


def _kron3_columns(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Column-wise triple Kronecker product matching ``np.kron(np.kron(a, b), c)``."""
    out = np.einsum("ip,jq,kr->ijkpqr", a, b, c, optimize=True)
    return out.reshape(a.shape[0] * b.shape[0] * c.shape[0], a.shape[1] * b.shape[1] * c.shape[1])


DENSE_ATOM_GUARD = 1 << 22  # entries per assembled atom block


def dense_atom_operator(box: tuple[int, int, int], factors: LowRankFactors,
                        mods: ModulationVectors, pilot: bool = True,
                        max_entries: int = DENSE_ATOM_GUARD) -> np.ndarray:
    """Explicit per-box factor ``S_n`` (oracle use; small dimensions only).

    Assembles the Kronecker product of the modulated per-axis factors and
    cross-checks it against the index-free stack multiplied by the box wave
    vector; the two constructions must agree to machine precision.
    """
    n1, n2, n3 = box
    st = factors.s_t_pilot if pilot else factors.s_t_full
    ft = mods.f_t_pilot if pilot else mods.f_t_full
    rows = st.shape[0] * factors.s_h.shape[0] * factors.s_v.shape[0]
    cols = factors.rank ** 3
    if rows * cols > max_entries:
        raise ValueError(f"dense atom of {rows}x{cols} exceeds the oracle size guard")
    st_n = st * ft[:, n1 - 1][:, None]
    sh_n = factors.s_h * mods.f_h[:, n2 - 1][:, None]
    sv_n = factors.s_v * mods.f_v[:, n3 - 1][:, None]
    s_n = _kron3_columns(st_n, sh_n, sv_n)
    # factored identity: S_n = S o (f_n 1^T)
    s0 = _kron3_columns(st, factors.s_h, factors.s_v)
    f_n = np.kron(np.kron(ft[:, n1 - 1], mods.f_h[:, n2 - 1]), mods.f_v[:, n3 - 1])
    alt = s0 * f_n[:, None]
    dev = np.max(np.abs(s_n - alt))
    scale = max(np.max(np.abs(s_n)), 1e-300)
    if dev > 1e-10 * scale:
        raise AssertionError(f"atom factorization identity violated: deviation {dev:.3e}")
    return s_n
