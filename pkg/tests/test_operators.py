import numpy as np
import pytest

from beamsparse.channels import ArrayGeometry, OfdmGrid
from beamsparse.kernels import DelayBeamGrid
from beamsparse.operators import CoefficientState, build_operator

from conftest import random_state


def dense_stack(op, full=False):
    """Independent dense assembly of the stacked operator from per-box atoms."""
    st = op.factors.s_t_full if full else op.factors.s_t_pilot
    ft = op.mods.f_t_full if full else op.mods.f_t_pilot
    cols = []
    for n1 in range(op.grid.n1):
        st_n = st * ft[:, n1][:, None]
        for n2 in range(op.grid.n2):
            sh_n = op.factors.s_h * op.mods.f_h[:, n2][:, None]
            for n3 in range(op.grid.n3):
                sv_n = op.factors.s_v * op.mods.f_v[:, n3][:, None]
                cols.append(np.kron(np.kron(st_n, sh_n), sv_n))
    return np.hstack(cols)


@pytest.fixture
def small_op():
    ofdm = OfdmGrid(16, 30e3, 3.5e9, 4)
    geom = ArrayGeometry(4, 4, 0.0857, 0.0428)
    grid = DelayBeamGrid.nyquist(ofdm, geom)
    return build_operator(ofdm, geom, grid, rank=2)


def test_apply_zero(small_op):
    assert np.all(small_op.apply(small_op.zero_state()) == 0)


def test_adjoint_zero(small_op):
    out = small_op.adjoint(np.zeros(small_op.measurement_size))
    assert np.all(out.values == 0)


def test_reconstruct_zero(small_op):
    assert np.all(small_op.reconstruct(small_op.zero_state()).values == 0)


def test_single_atom_column(small_op):
    # unit coefficient in one box reproduces a column of the dense atom block
    rng = np.random.default_rng(0)
    dense = dense_stack(small_op)
    r3 = small_op.r3
    for flat in (0, 17, small_op.grid.n_boxes - 1):
        for col in (0, r3 - 1):
            a = small_op.zero_state()
            a.values[flat, col] = 1.0
            y = small_op.apply(a)
            ref = dense[:, flat * r3 + col]
            assert np.linalg.norm(y - ref) <= 1e-10 * np.linalg.norm(ref)


def test_apply_matches_dense(small_op):
    rng = np.random.default_rng(1)
    dense = dense_stack(small_op)
    for _ in range(10):
        a = random_state(small_op, rng)
        ref = dense @ a.values.reshape(-1)
        assert np.linalg.norm(small_op.apply(a) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_adjoint_matches_dense(small_op):
    rng = np.random.default_rng(2)
    dense = dense_stack(small_op)
    for _ in range(10):
        e = rng.standard_normal(small_op.measurement_size) + 1j * rng.standard_normal(small_op.measurement_size)
        ref = (dense.conj().T @ e).reshape(small_op.grid.n_boxes, small_op.r3)
        out = small_op.adjoint(e).values
        assert np.linalg.norm(out - ref) <= 1e-10 * np.linalg.norm(ref)


def test_reconstruct_matches_dense(small_op):
    rng = np.random.default_rng(3)
    dense_full = dense_stack(small_op, full=True)
    for _ in range(5):
        a = random_state(small_op, rng)
        ref = dense_full @ a.values.reshape(-1)
        out = small_op.reconstruct(a).vector
        assert np.linalg.norm(out - ref) <= 1e-10 * np.linalg.norm(ref)


def test_adjoint_identity(small_op):
    rng = np.random.default_rng(4)
    for _ in range(100):
        a = random_state(small_op, rng)
        e = rng.standard_normal(small_op.measurement_size) + 1j * rng.standard_normal(small_op.measurement_size)
        lhs = np.vdot(e, small_op.apply(a))
        rhs = np.vdot(small_op.adjoint(e).values, a.values)
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))


def test_linearity(small_op):
    rng = np.random.default_rng(5)
    a = random_state(small_op, rng)
    b = random_state(small_op, rng)
    al, be = 1.7 - 0.3j, -0.4 + 2.1j
    mixed = CoefficientState(al * a.values + be * b.values, small_op.grid)
    lhs = small_op.apply(mixed)
    rhs = al * small_op.apply(a) + be * small_op.apply(b)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_pilot_rows_of_reconstruction(small_op):
    rng = np.random.default_rng(6)
    a = random_state(small_op, rng)
    rec = small_op.reconstruct(a)
    pil = small_op.ofdm.pilot_indices
    assert np.allclose(rec.values[pil].reshape(-1), small_op.apply(a), rtol=1e-12, atol=1e-12)


def test_oracle_methods_match_dense(small_op):
    rng = np.random.default_rng(7)
    dense = dense_stack(small_op)
    a = random_state(small_op, rng)
    e = rng.standard_normal(small_op.measurement_size) + 1j * rng.standard_normal(small_op.measurement_size)
    assert np.allclose(small_op.apply_dense_oracle(a), dense @ a.values.reshape(-1))
    assert np.allclose(small_op.adjoint_dense_oracle(e).values.reshape(-1), dense.conj().T @ e)
    assert np.allclose(small_op.dense_matrix(), dense)


def test_dense_guard():
    ofdm = OfdmGrid(64, 1.0, 0.0, 1)
    geom = ArrayGeometry(8, 8, 1.0, 1.0)
    grid = DelayBeamGrid.nyquist(ofdm, geom)
    op = build_operator(ofdm, geom, grid, rank=3)
    a = op.zero_state()
    with pytest.raises(ValueError):
        op._apply_dense(a, max_entries=1000)


def test_shape_mismatch_errors(small_op):
    bad = CoefficientState(np.zeros((small_op.grid.n_boxes, 1)), small_op.grid)
    with pytest.raises(ValueError):
        small_op.apply(bad)
    with pytest.raises(ValueError):
        small_op.adjoint(np.zeros(3))


def test_rank_sweep_matches_dense():
    # acceptance-style: N1=N2=N3=4, R in {1,2,3}
    ofdm = OfdmGrid(16, 30e3, 3.5e9, 4)
    geom = ArrayGeometry(4, 4, 0.0857, 0.0428)
    grid = DelayBeamGrid.nyquist(ofdm, geom)
    rng = np.random.default_rng(8)
    for rank in (1, 2, 3):
        op = build_operator(ofdm, geom, grid, rank=rank)
        dense = dense_stack(op)
        a = random_state(op, rng)
        ref = dense @ a.values.reshape(-1)
        assert np.linalg.norm(op.apply(a) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_dense_fallback_on_nonuniform_grid():
    # irregular antenna positions exclude the FFT path but stay exact
    ofdm = OfdmGrid(16, 30e3, 3.5e9, 4)
    geom = ArrayGeometry(4, 4, 0.0857, 0.0428,
                         positions_row=np.array([0.0, 0.08, 0.21, 0.33]),
                         positions_col=np.array([0.0, 0.05, 0.09, 0.16]))
    grid = DelayBeamGrid.nyquist(ofdm, geom)
    op = build_operator(ofdm, geom, grid, rank=2)
    assert not op._maps_pilot[1].uses_fft
    rng = np.random.default_rng(9)
    dense = dense_stack(op)
    a = random_state(op, rng)
    ref = dense @ a.values.reshape(-1)
    assert np.linalg.norm(op.apply(a) - ref) <= 1e-10 * np.linalg.norm(ref)
    e = rng.standard_normal(op.measurement_size) + 1j * rng.standard_normal(op.measurement_size)
    lhs = np.vdot(e, op.apply(a))
    rhs = np.vdot(op.adjoint(e).values, a.values)
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_oversampled_grid_matches_dense(tiny_ofdm, geom4x4):
    grid = DelayBeamGrid.nyquist(tiny_ofdm, geom4x4, oversampling=2)
    op = build_operator(tiny_ofdm, geom4x4, grid, rank=2)
    assert all(m.uses_fft for m in op._maps_pilot)
    rng = np.random.default_rng(10)
    dense = dense_stack(op)
    a = random_state(op, rng)
    ref = dense @ a.values.reshape(-1)
    assert np.linalg.norm(op.apply(a) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_operator_norm_close_to_dense(small_op):
    # top singular values cluster, so power iteration lands slightly below
    dense = dense_stack(small_op)
    exact = np.linalg.norm(dense, 2)
    est = small_op.norm_estimate()
    assert est <= exact * (1 + 1e-9)
    assert est >= exact * 0.98
