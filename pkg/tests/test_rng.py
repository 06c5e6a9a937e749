import numpy as np

from fracperc.rng import (cell_keys, cell_uniforms, derive_seed,
                          derive_seeds, uniform_matrix)


def test_identical_inputs_identical_outputs():
    flats = np.arange(64, dtype=np.int64)
    a = cell_uniforms(123, 3, flats, 1)
    b = cell_uniforms(123, 3, flats, 1)
    assert np.array_equal(a, b)


def test_mean_is_near_half():
    flats = np.arange(100_000, dtype=np.int64)
    u = cell_uniforms(2024, 5, flats, 0)
    assert np.all((0.0 <= u) & (u < 1.0))
    assert abs(u.mean() - 0.5) < 0.01


def test_streams_decorrelate():
    flats = np.arange(100_000, dtype=np.int64)
    u0 = cell_uniforms(7, 2, flats, 0)
    u1 = cell_uniforms(7, 2, flats, 1)
    collisions = int(np.count_nonzero(u0 == u1))
    assert collisions <= 5


def test_levels_and_seeds_decorrelate():
    flats = np.arange(50_000, dtype=np.int64)
    assert np.count_nonzero(cell_uniforms(7, 2, flats, 0)
                            == cell_uniforms(7, 3, flats, 0)) <= 5
    assert np.count_nonzero(cell_uniforms(7, 2, flats, 0)
                            == cell_uniforms(8, 2, flats, 0)) <= 5


def test_uniform_matrix_matches_columns():
    flats = np.arange(500, dtype=np.int64)
    mat = uniform_matrix(11, 4, flats, range(1, 5))
    for t in range(1, 5):
        assert np.array_equal(mat[:, t - 1], cell_uniforms(11, 4, flats, t))


def test_derive_seed_unique_and_vectorized():
    singles = [derive_seed(99, i) for i in range(2000)]
    assert len(set(singles)) == 2000
    vec = derive_seeds(99, 2000)
    assert [int(v) for v in vec] == singles
    tail = derive_seeds(99, 10, start=5)
    assert [int(v) for v in tail] == singles[5:15]


def test_key_bits_well_spread():
    keys = cell_keys(1, 1, np.arange(4096, dtype=np.int64), 0)
    ones = sum(int(k) .bit_count() for k in keys)
    assert abs(ones / (4096 * 64) - 0.5) < 0.01
