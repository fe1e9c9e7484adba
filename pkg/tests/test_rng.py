import numpy as np

from sembridge import rng


def test_same_coordinates_same_stream():
    a = rng.stream(1, rng.KIND_INIT_RANDOM, 5).standard_normal(16)
    b = rng.stream(1, rng.KIND_INIT_RANDOM, 5).standard_normal(16)
    np.testing.assert_array_equal(a, b)


def test_coordinates_separate_streams():
    base = rng.stream(1, rng.KIND_INIT_RANDOM, 5).standard_normal(16)
    other_entity = rng.stream(1, rng.KIND_INIT_RANDOM, 6).standard_normal(16)
    other_kind = rng.stream(1, rng.KIND_INIT_UNIVARIATE, 5).standard_normal(16)
    other_seed = rng.stream(2, rng.KIND_INIT_RANDOM, 5).standard_normal(16)
    assert not np.array_equal(base, other_entity)
    assert not np.array_equal(base, other_kind)
    assert not np.array_equal(base, other_seed)


def test_draw_order_does_not_matter():
    # entity 3 gets the same values whether or not entity 5 was drawn first
    first = rng.normal_rows(9, rng.KIND_DOC, [3], 8)
    both = rng.normal_rows(9, rng.KIND_DOC, [5, 3], 8)
    np.testing.assert_array_equal(first[0], both[1])


def test_normal_rows_shape_and_determinism():
    rows = rng.normal_rows(0, rng.KIND_INIT_RANDOM, range(7), 4)
    assert rows.shape == (7, 4)
    np.testing.assert_array_equal(rows, rng.normal_rows(0, rng.KIND_INIT_RANDOM, range(7), 4))


def test_unit_sphere_rows():
    rows = rng.unit_sphere_rows(3, rng.KIND_BRIDGE_SOURCE, range(50), 16)
    np.testing.assert_allclose(np.linalg.norm(rows.astype(np.float64), axis=1), 1.0, atol=1e-6)


def test_permutation_is_a_permutation():
    p = rng.permutation(4, rng.KIND_ALIGNMENT, 0, 100)
    assert sorted(p.tolist()) == list(range(100))
    np.testing.assert_array_equal(p, rng.permutation(4, rng.KIND_ALIGNMENT, 0, 100))


def test_large_seeds_and_entities_wrap():
    big = rng.stream(2**70 + 3, rng.KIND_QUERY, 2**66 + 1).standard_normal(4)
    small = rng.stream((2**70 + 3) % 2**64, rng.KIND_QUERY, (2**66 + 1) % 2**64).standard_normal(4)
    np.testing.assert_array_equal(big, small)
