import numpy as np
import pytest

from beamsparse.kernels import (
    DELAY,
    HORIZONTAL,
    VERTICAL,
    AxisKernel,
    DelayBeamGrid,
    build_kernel_matrix,
    build_modulation_vectors,
    dense_atom_operator,
    eigendecompose_and_truncate,
    kernel_value,
    low_rank_factors,
    modulation_matrix,
    modulation_vector,
)


def test_kernel_value_at_equal_points():
    k = AxisKernel(DELAY, span=2.5, n_boxes=7, box_index=3)
    assert kernel_value(k, 1.234, 1.234) == pytest.approx(2.5 / 7, abs=0)


def test_indexless_sinc_zero():
    # (z - z') * span / N = 1 hits the first sinc zero
    k = AxisKernel(HORIZONTAL, span=3.0, n_boxes=6)
    z = 4.0
    zp = z - 6.0 / 3.0
    assert abs(kernel_value(k, z, zp)) < 1e-15


def test_modulated_over_indexless_ratio():
    rng = np.random.default_rng(0)
    k0 = AxisKernel(VERTICAL, span=1.7, n_boxes=5)
    for n in range(1, 6):
        kn = k0.with_box(n)
        for _ in range(20):
            z, zp = rng.uniform(-3, 3, 2)
            base = kernel_value(k0, z, zp)
            if abs(base) < 1e-12:
                continue
            ratio = kernel_value(kn, z, zp) / base
            expected = np.exp(2j * np.pi * (z - zp) * (n - 3.0) * 1.7 / 5)
            assert ratio == pytest.approx(expected, rel=1e-12)


def test_kernel_hermitian():
    rng = np.random.default_rng(1)
    k = AxisKernel(DELAY, span=1.0, n_boxes=8, box_index=2, center_offset=0.5)
    z, zp = rng.uniform(0, 10, 2)
    assert kernel_value(k, z, zp) == pytest.approx(np.conj(kernel_value(k, zp, z)), rel=1e-14)


def test_kernel_matrix_single_point():
    k = AxisKernel(DELAY, span=4.0, n_boxes=2, box_index=1)
    m = build_kernel_matrix(k, np.array([0.3]))
    assert m.shape == (1, 1)
    assert m[0, 0] == pytest.approx(2.0)


def test_kernel_matrix_psd_on_random_grid():
    rng = np.random.default_rng(2)
    pts = np.sort(rng.uniform(0, 4, 8))
    for box in (None, 1, 5):
        k = AxisKernel(HORIZONTAL, span=2.0, n_boxes=5, box_index=box)
        m = build_kernel_matrix(k, pts)
        assert np.allclose(m, m.conj().T)
        if box is None:
            assert np.isrealobj(m) or np.allclose(m.imag, 0)
        w = np.linalg.eigvalsh(m)
        assert w.min() >= -1e-10 * np.trace(m).real


def test_pilot_matrix_is_restriction_of_full():
    k = AxisKernel(DELAY, span=1.0, n_boxes=8, box_index=4, center_offset=0.5)
    full = np.arange(32) / 4.0
    pil = np.arange(0, 32, 4)
    m_full = build_kernel_matrix(k, full)
    m_pil = build_kernel_matrix(k, full[pil])
    assert np.allclose(m_full[np.ix_(pil, pil)], m_pil, rtol=0, atol=0)
    # cross matrix: rows = outputs, columns = inputs
    cross = build_kernel_matrix(k, full, full[pil])
    assert cross.shape == (32, 8)
    assert np.allclose(cross[pil], m_pil)


def test_three_axis_kernel_is_product():
    # entries of the Kronecker Gram equal products of per-axis kernel values
    rng = np.random.default_rng(3)
    kt = AxisKernel(DELAY, 1.0, 4, box_index=2, center_offset=0.5)
    kh = AxisKernel(HORIZONTAL, 1.0, 3, box_index=1)
    kv = AxisKernel(VERTICAL, 1.0, 3, box_index=3)
    pt, ph, pv = rng.uniform(0, 3, 3), rng.uniform(0, 2, 2), rng.uniform(0, 2, 2)
    kron = np.kron(np.kron(build_kernel_matrix(kt, pt), build_kernel_matrix(kh, ph)),
                   build_kernel_matrix(kv, pv))
    for i in range(12):
        for j in range(12):
            i1, i2, i3 = i // 4, (i // 2) % 2, i % 2
            j1, j2, j3 = j // 4, (j // 2) % 2, j % 2
            prod = (kernel_value(kt, pt[i1], pt[j1]) * kernel_value(kh, ph[i2], ph[j2])
                    * kernel_value(kv, pv[i3], pv[j3]))
            assert kron[i, j] == pytest.approx(prod, rel=1e-12, abs=1e-15)


def test_eigendecompose_full_rank_exact():
    rng = np.random.default_rng(4)
    pts = np.sort(rng.uniform(0, 5, 6))
    k = build_kernel_matrix(AxisKernel(DELAY, 1.3, 4, box_index=2), pts)
    s, w = eigendecompose_and_truncate(k, 6)
    assert np.linalg.norm(k - s @ s.conj().T) <= 1e-10 * np.linalg.norm(k)
    assert np.all(np.diff(w) <= 1e-12)  # sorted descending


def test_eigendecompose_rank_one():
    v = np.array([1.0, 2.0, -1.0]) + 1j * np.array([0.5, 0.0, 1.0])
    k = np.outer(v, v.conj())
    s, _ = eigendecompose_and_truncate(k, 1)
    assert np.linalg.norm(k - s @ s.conj().T) <= 1e-12 * np.linalg.norm(k)


def test_eigendecompose_residual_matches_tail():
    # delay-axis kernel on a 32-point pilot grid, R = 3: Frobenius residual
    # equals the root-sum-square of the discarded eigenvalues
    pts = np.arange(32.0)
    k = build_kernel_matrix(AxisKernel(DELAY, 1.0, 32), pts)
    s, w = eigendecompose_and_truncate(k, 3)
    resid = np.linalg.norm(k - s @ s.conj().T)
    expected = np.sqrt(np.sum(np.clip(w[3:], 0, None) ** 2))
    assert resid == pytest.approx(expected, rel=1e-8, abs=1e-12)


def test_eigendecompose_rejects_bad_rank():
    k = np.eye(3)
    with pytest.raises(ValueError):
        eigendecompose_and_truncate(k, 4)
    with pytest.raises(ValueError):
        eigendecompose_and_truncate(k, 0)


def test_modulation_vector_center_box_all_ones():
    k = AxisKernel(HORIZONTAL, span=2.0, n_boxes=5)
    pts = np.linspace(-1, 1, 7)
    f = modulation_vector(k, 3, pts)  # (N+1)/2 = 3 with zero offset
    assert np.allclose(f, 1.0)


def test_modulation_vector_unit_modulus():
    rng = np.random.default_rng(5)
    k = AxisKernel(DELAY, span=1.0, n_boxes=6, center_offset=0.5)
    for n in range(1, 7):
        f = modulation_vector(k, n, rng.uniform(-4, 4, 9))
        assert np.allclose(np.abs(f), 1.0)


def test_modulation_vector_geometric_ratio():
    delta = 0.37
    pts = np.arange(8) * delta
    k = AxisKernel(VERTICAL, span=1.9, n_boxes=7)
    f3 = modulation_vector(k, 3, pts)
    f4 = modulation_vector(k, 4, pts)
    ratio = f4 / f3
    expected = np.exp(2j * np.pi * pts * 1.9 / 7)
    assert np.allclose(ratio, expected, rtol=1e-12)


def test_lemma_modulated_eigenpairs():
    # eigenpairs of the index-free Gram map to eigenpairs of every box Gram
    # through the wave vector, with identical eigenvalues
    rng = np.random.default_rng(6)
    pts = np.sort(rng.uniform(0, 4, 8))
    for axis, offset in ((DELAY, 0.5), (HORIZONTAL, 0.0), (VERTICAL, 0.0)):
        k0 = AxisKernel(axis, span=1.6, n_boxes=6, center_offset=offset)
        gram = build_kernel_matrix(k0, pts)
        scale = np.linalg.norm(gram, 2)
        w, v = np.linalg.eigh(gram)
        for n in range(1, 7):
            kn = build_kernel_matrix(k0.with_box(n), pts)
            fn = modulation_vector(k0, n, pts)
            for i in range(len(pts)):
                vec = fn * v[:, i]
                resid = np.linalg.norm(kn @ vec - w[i] * vec)
                assert resid <= 1e-10 * scale * np.linalg.norm(vec)


def test_box_gram_eigenvalues_invariant():
    rng = np.random.default_rng(7)
    pts = np.sort(rng.uniform(0, 3, 7))
    k0 = AxisKernel(DELAY, span=2.2, n_boxes=5, center_offset=0.5)
    w0 = np.sort(np.linalg.eigvalsh(build_kernel_matrix(k0, pts)))
    for n in range(1, 6):
        wn = np.sort(np.linalg.eigvalsh(build_kernel_matrix(k0.with_box(n), pts)))
        assert np.allclose(wn, w0, rtol=1e-10, atol=1e-12)


def _tiny_factor_setup(rng, n_full=8, stride=2, boxes=(2, 2, 2), rank=2):
    kt = AxisKernel(DELAY, 1.0, boxes[0], center_offset=0.5)
    kh = AxisKernel(HORIZONTAL, 1.0, boxes[1])
    kv = AxisKernel(VERTICAL, 1.0, boxes[2])
    pts_t = np.arange(n_full) / stride
    pil = np.arange(0, n_full, stride)
    pts_h = np.arange(3.0)
    pts_v = np.arange(3.0)
    factors = low_rank_factors(kt, kh, kv, pts_t, pil, pts_h, pts_v, rank)
    mods = build_modulation_vectors(kt, kh, kv, pts_t, pil, pts_h, pts_v)
    return (kt, kh, kv), (pts_t, pil, pts_h, pts_v), factors, mods


def test_pilot_factor_is_row_restriction():
    rng = np.random.default_rng(8)
    _, (pts_t, pil, _, _), factors, _ = _tiny_factor_setup(rng)
    assert np.allclose(factors.s_t_pilot, factors.s_t_full[pil])


def test_dense_atom_identity_and_kron():
    # S_n equals the index-free stack modulated by the box wave vector, and
    # at full rank S_n S_n^H reproduces the Kronecker Gram exactly
    rng = np.random.default_rng(9)
    kernels, points, factors, mods = _tiny_factor_setup(rng, n_full=3, stride=1, rank=3)
    kt, kh, kv = kernels
    pts_t, pil, pts_h, pts_v = points
    for box in ((1, 1, 1), (2, 1, 2), (2, 2, 2)):
        s_n = dense_atom_operator(box, factors, mods, pilot=True)
        k_n = np.kron(np.kron(
            build_kernel_matrix(kt.with_box(box[0]), pts_t[pil]),
            build_kernel_matrix(kh.with_box(box[1]), pts_h)),
            build_kernel_matrix(kv.with_box(box[2]), pts_v))
        err = np.linalg.norm(k_n - s_n @ s_n.conj().T) / np.linalg.norm(k_n)
        assert err <= 1e-10


def test_dense_atom_center_box_unmodulated():
    rng = np.random.default_rng(10)
    kh = AxisKernel(HORIZONTAL, 1.0, 3)
    kv = AxisKernel(VERTICAL, 1.0, 3)
    kt = AxisKernel(DELAY, 1.0, 3)  # odd counts, no offset: center box is unmodulated
    pts = np.arange(4.0)
    factors = low_rank_factors(kt, kh, kv, pts, np.arange(4), pts, pts, 2)
    mods = build_modulation_vectors(kt, kh, kv, pts, np.arange(4), pts, pts)
    s_center = dense_atom_operator((2, 2, 2), factors, mods)
    s0 = np.kron(np.kron(factors.s_t_pilot, factors.s_h), factors.s_v)
    assert np.allclose(s_center, s0, rtol=0, atol=1e-14)


def test_dense_atom_guard():
    rng = np.random.default_rng(11)
    _, _, factors, mods = _tiny_factor_setup(rng)
    with pytest.raises(ValueError):
        dense_atom_operator((1, 1, 1), factors, mods, max_entries=4)


def test_grid_nyquist_counts(tiny_ofdm, geom4x4):
    grid = DelayBeamGrid.nyquist(tiny_ofdm, geom4x4)
    assert grid.shape == (tiny_ofdm.n_pilots, geom4x4.n_rows, geom4x4.n_cols)
    grid2 = DelayBeamGrid.nyquist(tiny_ofdm, geom4x4, oversampling=2)
    assert grid2.shape == (2 * tiny_ofdm.n_pilots, 8, 8)
    assert grid.delay_span_s == pytest.approx(1.0 / tiny_ofdm.pilot_spacing_hz)


def test_grid_flat_index_roundtrip():
    grid = DelayBeamGrid(1.0, 1.0, 1.0, 3, 4, 5)
    flat = [grid.flat_index(*grid.box_tuple(i)) for i in range(grid.n_boxes)]
    assert flat == list(range(grid.n_boxes))


def test_modulation_matrix_matches_vectors():
    k = AxisKernel(DELAY, 1.0, 5, center_offset=0.5)
    pts = np.linspace(0, 3, 6)
    m = modulation_matrix(k, pts)
    for n in range(1, 6):
        assert np.allclose(m[:, n - 1], modulation_vector(k, n, pts))
