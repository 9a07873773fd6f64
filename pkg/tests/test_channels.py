import numpy as np
import pytest

from beamsparse.channels import (
    ArrayGeometry,
    ChannelTensor,
    OfdmGrid,
    PathSet,
    generate_channel,
    generate_paths,
    sample_measurements,
    synthesize_channel,
)

BOUNDS = (1e-5, 10.0, 20.0)


def test_degenerate_single_path():
    rng = np.random.default_rng(0)
    paths = generate_paths(rng, 1, 1, 0.0, BOUNDS)
    assert paths.n_paths == 1
    assert abs(paths.gains[0]) == pytest.approx(1.0)


def test_bounds_clipping():
    rng = np.random.default_rng(1)
    paths = generate_paths(rng, 3, 10, (5e-6, 5.0, 8.0), BOUNDS)
    assert paths.n_paths == 30
    assert np.all(paths.delays >= 0) and np.all(paths.delays <= BOUNDS[0])
    assert np.all(np.abs(paths.spatial_freq_row) <= BOUNDS[1] / 2)
    assert np.all(np.abs(paths.spatial_freq_col) <= BOUNDS[2] / 2)


def test_generation_deterministic():
    a = generate_paths(np.random.default_rng(42), 2, 5, (1e-7, 0.1, 0.1), BOUNDS)
    b = generate_paths(np.random.default_rng(42), 2, 5, (1e-7, 0.1, 0.1), BOUNDS)
    assert np.array_equal(a.gains, b.gains)
    assert np.array_equal(a.delays, b.delays)
    assert np.array_equal(a.spatial_freq_row, b.spatial_freq_row)
    assert np.array_equal(a.spatial_freq_col, b.spatial_freq_col)


def test_generation_rejects_bad_args():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        generate_paths(rng, 0, 1, 0.0, BOUNDS)
    with pytest.raises(ValueError):
        generate_paths(rng, 1, 1, -1.0, BOUNDS)
    with pytest.raises(ValueError):
        generate_paths(rng, 1, 1, 0.0, BOUNDS, center_fractions=(0.0, 1.0, 1.0))


def test_constant_channel(tiny_ofdm, geom4x4):
    paths = PathSet([1.0], [0.0], [0.0], [0.0])
    chan = synthesize_channel(paths, tiny_ofdm, geom4x4)
    assert np.allclose(chan.values, 1.0)


def test_single_delay_phase(tiny_ofdm, geom4x4):
    # entry at frequency f equals exp(-2i pi f tau)
    tau = 3.7e-6
    paths = PathSet([1.0], [tau], [0.0], [0.0])
    chan = synthesize_channel(paths, tiny_ofdm, geom4x4)
    expected = np.exp(-2j * np.pi * tiny_ofdm.frequencies * tau)
    assert np.allclose(chan.values[:, 0, 0], expected, rtol=1e-12)
    assert np.allclose(chan.values[:, 2, 3], expected, rtol=1e-12)


def test_two_path_brute_force(tiny_ofdm, geom4x4):
    rng = np.random.default_rng(3)
    paths = PathSet(rng.standard_normal(2) + 1j * rng.standard_normal(2),
                    rng.uniform(0, 1e-5, 2), rng.uniform(-3, 3, 2), rng.uniform(-5, 5, 2))
    chan = synthesize_channel(paths, tiny_ofdm, geom4x4)
    f = tiny_ofdm.frequencies[5]
    xr = geom4x4.positions_row[2]
    xc = geom4x4.positions_col[1]
    expected = sum(
        paths.gains[l] * np.exp(-2j * np.pi * (f * paths.delays[l]
                                               + xr * paths.spatial_freq_row[l]
                                               + xc * paths.spatial_freq_col[l]))
        for l in range(2))
    assert chan.values[5, 2, 1] == pytest.approx(expected, rel=1e-12)


def test_conjugate_symmetry(tiny_ofdm, geom4x4):
    # real gains with negated delays/beams give the conjugate tensor
    rng = np.random.default_rng(4)
    gains = rng.standard_normal(4)
    delays = rng.uniform(0, 1e-5, 4)
    nr = rng.uniform(-2, 2, 4)
    nc = rng.uniform(-2, 2, 4)
    a = synthesize_channel(PathSet(gains, delays, nr, nc), tiny_ofdm, geom4x4)
    b = synthesize_channel(PathSet(gains, -delays, -nr, -nc), tiny_ofdm, geom4x4)
    assert np.allclose(b.values, np.conj(a.values), rtol=1e-12)


def test_noiseless_measurements(tiny_ofdm, geom4x4):
    rng = np.random.default_rng(5)
    paths = generate_paths(rng, 2, 3, (1e-7, 0.1, 0.1), BOUNDS)
    chan = synthesize_channel(paths, tiny_ofdm, geom4x4)
    m = sample_measurements(chan, tiny_ofdm, 0.0, rng)
    assert np.array_equal(m.values, chan.values[tiny_ofdm.pilot_indices])


def test_full_grid_measurements(geom4x4):
    grid = OfdmGrid(16, 30e3, 3.5e9, 1)
    paths = PathSet([1.0], [1e-6], [0.5], [0.5])
    chan = synthesize_channel(paths, grid, geom4x4)
    m = sample_measurements(chan, grid, 0.0, np.random.default_rng(6))
    assert m.values.shape == (16, 4, 4)
    assert np.array_equal(m.values, chan.values)


def test_noise_moment():
    # large-sample noise power matches the configured variance within 5%
    grid = OfdmGrid(4096, 30e3, 3.5e9, 1)
    geom = ArrayGeometry(5, 5, 0.1, 0.1)
    paths = PathSet([1.0], [0.0], [0.0], [0.0])
    chan = synthesize_channel(paths, grid, geom)
    n0 = 0.37
    m = sample_measurements(chan, grid, n0, np.random.default_rng(7))
    noise = m.values - chan.values
    assert noise.size >= 10 ** 5
    est = np.mean(np.abs(noise) ** 2)
    assert est == pytest.approx(n0, rel=0.05)


def test_unit_gain_normalization(desk_ofdm, geom4x4):
    for seed in range(5):
        rng = np.random.default_rng(seed)
        _, chan = generate_channel(rng, desk_ofdm, geom4x4, 3, 8,
                                   (1e-7, 0.1, 0.2), (8.33e-6, 11.7, 23.3))
        assert chan.mean_square() == pytest.approx(1.0, rel=0.02)


def test_channel_determinism(desk_ofdm, geom4x4):
    a = generate_channel(np.random.default_rng(9), desk_ofdm, geom4x4, 2, 4,
                         (1e-7, 0.1, 0.1), (8.33e-6, 11.7, 23.3))[1]
    b = generate_channel(np.random.default_rng(9), desk_ofdm, geom4x4, 2, 4,
                         (1e-7, 0.1, 0.1), (8.33e-6, 11.7, 23.3))[1]
    assert np.array_equal(a.values, b.values)


def test_vectorization_order(tiny_ofdm, geom4x4):
    rng = np.random.default_rng(10)
    paths = generate_paths(rng, 1, 2, (1e-7, 0.1, 0.1), BOUNDS)
    chan = synthesize_channel(paths, tiny_ofdm, geom4x4)
    vec = chan.vector
    # frequency slowest, row middle, column fastest
    assert vec[0] == chan.values[0, 0, 0]
    assert vec[1] == chan.values[0, 0, 1]
    assert vec[geom4x4.n_cols] == chan.values[0, 1, 0]
    assert vec[geom4x4.n_rows * geom4x4.n_cols] == chan.values[1, 0, 0]


def test_grid_invariants():
    grid = OfdmGrid(10, 15e3, 3.5e9, 3)
    assert grid.n_pilots == 4
    assert np.array_equal(grid.pilot_indices, [0, 3, 6, 9])
    assert np.all(np.diff(grid.frequencies) > 0)
    with pytest.raises(ValueError):
        OfdmGrid(0, 15e3, 3.5e9, 1)
    with pytest.raises(ValueError):
        ArrayGeometry(2, 2, 0.1, 0.1, positions_row=np.array([0.1, 0.0]))
