import numpy as np
import pytest

from rlprobe.rng import INIT_STATE, REWARD_RAND, RandomStream, rng_stream


def test_identical_key_pairs_replay_identically():
    a = rng_stream(7, 0)
    b = rng_stream(7, 0)
    assert [a.u64() for _ in range(1000)] == [b.u64() for _ in range(1000)]


def test_distinct_purpose_tags_differ():
    a = rng_stream(7, 0)
    b = rng_stream(7, 2)
    assert [a.u64() for _ in range(10)] != [b.u64() for _ in range(10)]


def test_distinct_seeds_differ():
    a = rng_stream(7, 0)
    b = rng_stream(8, 0)
    assert [a.u64() for _ in range(10)] != [b.u64() for _ in range(10)]


def test_golden_sequence_frozen():
    # guards against accidental changes to the mixing constants
    s = rng_stream(7, 0)
    assert [s.u64() for _ in range(4)] == [
        2554050240282131404,
        17528680039736108566,
        13638656583626697143,
        8071631112267928129,
    ]


def test_zero_variance_gaussian_is_exact():
    assert rng_stream(1, 0).gaussian(3.25, 0.0) == 3.25


def test_degenerate_uniform_is_exact():
    assert rng_stream(1, 0).uniform(1.0, 1.0) == 1.0


def test_negative_variance_rejected():
    with pytest.raises(ValueError):
        rng_stream(1, 0).gaussian(0.0, -1e-9)
    with pytest.raises(ValueError):
        rng_stream(1, 0).gaussian_vec(0.0, -1.0, 3)


def test_uniform_mean_monte_carlo():
    draws = rng_stream(3, 0).uniform_vec(-1.0, 1.0, 1_000_000)
    # 3 sigma / sqrt(n) = 3 * 0.577 / 1000 = 0.0017 < 0.005
    assert abs(draws.mean()) < 0.005
    assert draws.min() >= -1.0 and draws.max() <= 1.0


def test_gaussian_moments_monte_carlo():
    draws = rng_stream(5, 1).gaussian_vec(2.0, 3.0, 200_000)
    assert abs(draws.mean() - 2.0) < 0.02
    assert abs(draws.var() - 3.0) / 3.0 < 0.02


def test_vector_matches_scalar_path():
    vec = rng_stream(11, 4).uniform_vec(-2.0, 5.0, 64)
    scalar_stream = rng_stream(11, 4)
    scalars = [scalar_stream.uniform(-2.0, 5.0) for _ in range(64)]
    np.testing.assert_array_equal(vec, np.array(scalars))

    vec = rng_stream(11, 5).gaussian_vec(1.0, 2.0, 16)
    scalar_stream = rng_stream(11, 5)
    scalars = [scalar_stream.gaussian(1.0, 2.0) for _ in range(16)]
    np.testing.assert_allclose(vec, np.array(scalars), rtol=1e-12)


def test_stream_independence_under_interleaving():
    # INIT_STATE draws must not move when REWARD_RAND draws are interleaved
    plain = rng_stream(7, INIT_STATE)
    golden = [plain.u64() for _ in range(20)]

    init = rng_stream(7, INIT_STATE)
    other = rng_stream(7, REWARD_RAND)
    interleaved = []
    for _ in range(20):
        other.u64()
        interleaved.append(init.u64())
        other.u64()
    assert interleaved == golden


def test_integer_bounds():
    s = rng_stream(2, 3)
    draws = [s.integer(7) for _ in range(500)]
    assert min(draws) >= 0 and max(draws) <= 6
    assert len(set(draws)) == 7
    with pytest.raises(ValueError):
        s.integer(0)


def test_permutation_is_valid():
    perm = rng_stream(9, 9).permutation(50)
    assert sorted(perm.tolist()) == list(range(50))


def test_index_vec_in_range():
    idx = rng_stream(4, 4).index_vec(13, 1000)
    assert idx.min() >= 0 and idx.max() < 13


def test_uniform_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        rng_stream(0, 0).uniform(2.0, 1.0)
