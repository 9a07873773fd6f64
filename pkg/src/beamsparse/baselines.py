"""Baseline estimators (LS, empirical LMMSE, genie LMMSE) and metrics.

The empirical LMMSE models the channel covariance as a Kronecker product of a
spectral and two spatial factors estimated from sample channels, and applies
the joint Wiener filter exactly by working in the product of the per-axis
eigenbases.  The genie variant gets the ground-truth per-realization
covariance, which under gain-phase re-randomization is the rank-L matrix
``sum_l |a_l|^2 s_l s_l^H`` over the path steering vectors; the filter then
reduces to small L x L solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ArrayGeometry, ChannelTensor, MeasurementSet, OfdmGrid, PathSet

__all__ = [
    "CovarianceModel",
    "RateParams",
    "ls_estimate",
    "estimate_empirical_covariance",
    "empirical_lmmse",
    "genie_lmmse",
    "nmse",
    "achievable_rate",
]

PINV_RTOL = 1e-12          # noiseless-limit pseudo-inverse cutoff
GENIE_SIZE_GUARD = 1 << 26  # max full-grid-entries * paths handled by the genie


@dataclass
class CovarianceModel:
    """Kronecker-factored channel covariance: spectral x row x column."""

    spectral: np.ndarray      # (|F|, |F|)
    spatial_row: np.ndarray   # (n_rows, n_rows)
    spatial_col: np.ndarray   # (n_cols, n_cols)
    source: tuple = ("genie",)

    def __post_init__(self):
        for name in ("spectral", "spatial_row", "spatial_col"):
            m = np.asarray(getattr(self, name), dtype=complex)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be square")
            setattr(self, name, m)


def ls_estimate(measurements: MeasurementSet, grid: OfdmGrid) -> ChannelTensor:
    """Copy pilot samples and nearest-neighbor interpolate along frequency.

    Ties between two equidistant pilots go to the lower subcarrier index.
    """
    pilots = grid.pilot_indices
    idx = np.arange(grid.n_subcarriers)
    pos = np.searchsorted(pilots, idx)
    left = np.clip(pos - 1, 0, len(pilots) - 1)
    right = np.clip(pos, 0, len(pilots) - 1)
    d_left = np.abs(idx - pilots[left])
    d_right = np.abs(pilots[right] - idx)
    nearest = np.where(d_left <= d_right, left, right)
    return ChannelTensor(measurements.values[nearest], grid, measurements.geometry)


def estimate_empirical_covariance(tensors, sample_count: int) -> CovarianceModel:
    """Empirical spectral and per-axis spatial correlation matrices.

    Averages ``h h^H`` profiles over realizations and the complementary axes,
    Hermitian-symmetrizes each factor, and rescales so the Kronecker product's
    trace matches the mean sample energy (the factor scales are otherwise
    undetermined).
    """
    tensors = np.asarray(tensors)
    if tensors.ndim != 4 or tensors.shape[0] == 0:
        raise ValueError("need a nonempty (count, F, rows, cols) channel stack")
    if not (1 <= sample_count <= tensors.shape[0]):
        raise ValueError(f"sample_count must be in [1, {tensors.shape[0]}]")
    h = tensors[:sample_count].astype(np.complex128)
    s, nf, nr, nc = h.shape

    # E[x x^H] profiles: rows of the flattened views are profile draws
    hf = np.moveaxis(h, 1, 3).reshape(-1, nf)          # (s*nr*nc, F)
    c_f = hf.T @ hf.conj() / hf.shape[0]
    hr = np.moveaxis(h, 2, 3).reshape(-1, nr)
    c_r = hr.T @ hr.conj() / hr.shape[0]
    hc = h.reshape(-1, nc)
    c_c = hc.T @ hc.conj() / hc.shape[0]

    c_f = 0.5 * (c_f + c_f.conj().T)
    c_r = 0.5 * (c_r + c_r.conj().T)
    c_c = 0.5 * (c_c + c_c.conj().T)

    target = float(np.mean(np.sum(np.abs(h) ** 2, axis=(1, 2, 3))))
    product_trace = float(np.trace(c_f).real * np.trace(c_r).real * np.trace(c_c).real)
    if product_trace > 0:
        c_f = c_f * (target / product_trace)
    return CovarianceModel(c_f, c_r, c_c, source=("empirical", sample_count))


def _eigh_desc(matrix: np.ndarray):
    w, v = np.linalg.eigh(matrix)
    return w[::-1], v[:, ::-1]


def empirical_lmmse(measurements: MeasurementSet, cov: CovarianceModel,
                    noise_variance: float) -> ChannelTensor:
    """Joint Kronecker LMMSE: frequency interpolation and spatial smoothing.

    Computes ``C_cross (C_pil + N0 I)^-1 y`` exactly via per-axis
    eigendecompositions of the pilot spectral block and the two spatial
    factors.  For ``N0 = 0`` the inverse becomes a pseudo-inverse with
    relative cutoff ``PINV_RTOL``.
    """
    grid, geometry = measurements.grid, measurements.geometry
    if cov.spectral.shape[0] != grid.n_subcarriers:
        raise ValueError("spectral covariance does not match the subcarrier count")
    if cov.spatial_row.shape[0] != geometry.n_rows or cov.spatial_col.shape[0] != geometry.n_cols:
        raise ValueError("spatial covariance does not match the array geometry")
    pil = grid.pilot_indices
    c_pil = cov.spectral[np.ix_(pil, pil)]
    lam_f, u = _eigh_desc(c_pil)
    mu_r, wr = _eigh_desc(cov.spatial_row)
    mu_c, wc = _eigh_desc(cov.spatial_col)

    # rotate into the product eigenbasis
    z = np.einsum("ij,jrc->irc", u.conj().T, measurements.values.astype(complex), optimize=True)
    z = np.einsum("pr,irc->ipc", wr.conj().T, z, optimize=True)
    z = np.einsum("qc,ipc->ipq", wc.conj().T, z, optimize=True)

    d = lam_f[:, None, None] * mu_r[None, :, None] * mu_c[None, None, :]
    d = np.clip(d.real, 0.0, None)
    if noise_variance > 0:
        gain = 1.0 / (d + noise_variance)
    else:
        gain = np.zeros_like(d)
        keep = d > PINV_RTOL * d.max() if d.max() > 0 else np.zeros_like(d, dtype=bool)
        gain[keep] = 1.0 / d[keep]
    z = z * gain

    # cross covariance times the rotated-back vector, axis by axis
    a_f = cov.spectral[:, pil] @ u
    a_r = wr * mu_r[None, :]
    a_c = wc * mu_c[None, :]
    out = np.einsum("fi,ipq->fpq", a_f, z, optimize=True)
    out = np.einsum("rp,fpq->frq", a_r, out, optimize=True)
    out = np.einsum("cq,frq->frc", a_c, out, optimize=True)
    return ChannelTensor(out, grid, geometry)


def _steering_stack(paths: PathSet, frequencies: np.ndarray, geometry: ArrayGeometry) -> np.ndarray:
    ef = np.exp(-2j * np.pi * np.outer(frequencies, paths.delays))
    er = np.exp(-2j * np.pi * np.outer(geometry.positions_row, paths.spatial_freq_row))
    ec = np.exp(-2j * np.pi * np.outer(geometry.positions_col, paths.spatial_freq_col))
    s = np.einsum("fl,rl,cl->frcl", ef, er, ec, optimize=True)
    return s.reshape(-1, paths.n_paths)


def genie_lmmse(measurements: MeasurementSet, paths: PathSet,
                noise_variance: float) -> ChannelTensor:
    """LMMSE with the ground-truth per-realization covariance.

    Re-randomizing the path gain phases over the fixed geometry leaves the
    covariance ``sum_l |a_l|^2 s_l s_l^H`` (cross terms average out), so the
    joint Wiener filter is applied in the rank-L path subspace.
    """
    grid, geometry = measurements.grid, measurements.geometry
    m_full = grid.n_subcarriers * geometry.n_rows * geometry.n_cols
    if m_full * paths.n_paths > GENIE_SIZE_GUARD:
        raise ValueError("genie covariance assembly exceeds the size guard")
    b_full = _steering_stack(paths, grid.frequencies, geometry) * np.abs(paths.gains)[None, :]
    b_pil = b_full.reshape((grid.n_subcarriers, geometry.n_rows, geometry.n_cols, -1))[
        grid.pilot_indices].reshape(-1, paths.n_paths)
    y = measurements.vector.astype(complex)
    if noise_variance > 0:
        gram = b_pil.conj().T @ b_pil + noise_variance * np.eye(paths.n_paths)
        w = (y - b_pil @ np.linalg.solve(gram, b_pil.conj().T @ y)) / noise_variance
        coeff = b_pil.conj().T @ w
    else:
        coeff = np.linalg.pinv(b_pil, rcond=PINV_RTOL) @ y
    values = (b_full @ coeff).reshape(grid.n_subcarriers, geometry.n_rows, geometry.n_cols)
    return ChannelTensor(values, grid, geometry)


def nmse(truth: ChannelTensor, estimate: ChannelTensor) -> float:
    """Single-realization normalized squared error ``||h - h_hat||^2 / ||h||^2``."""
    h = truth.vector
    denom = float(np.vdot(h, h).real)
    if denom <= 0:
        raise ValueError("NMSE is undefined for a zero ground-truth channel")
    e = estimate.vector - h
    return float(np.vdot(e, e).real) / denom


@dataclass(frozen=True)
class RateParams:
    """Downlink rate constants: BS transmit power, UE noise power, symbol time."""

    bs_power_dbm: float = 49.0
    ue_noise_dbm: float = -85.0
    symbol_duration_s: float = 1.0 / 30e3

    @property
    def power_over_noise(self) -> float:
        return 10.0 ** ((self.bs_power_dbm - self.ue_noise_dbm) / 10.0)


def achievable_rate(truth: ChannelTensor, estimate: ChannelTensor, params: RateParams) -> float:
    """MRC downlink rate: equal power across subcarriers, beamforming on the estimate.

    The per-subcarrier beamforming gain is ``|h_hat_f^H h_f|^2 / ||h_hat_f||^2``;
    subcarriers with a zero estimate contribute zero rate.
    """
    nf = truth.grid.n_subcarriers
    h = truth.values.reshape(nf, -1)
    e = estimate.values.reshape(nf, -1)
    num = np.abs(np.sum(e.conj() * h, axis=1)) ** 2
    den = np.sum(np.abs(e) ** 2, axis=1)
    gain = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(np.sum(np.log2(1.0 + gain * params.power_over_noise)) / params.symbol_duration_s)
