import numpy as np
import pytest

from rlprobe.core import (
    TEST_SEED_OFFSET,
    Continuous,
    Discrete,
    EnvSpec,
    Flat,
    Image,
    Observation,
    SeedProtocol,
    make_protocol,
)
from rlprobe.rng import rng_stream


def test_default_protocol_has_100_test_seeds():
    proto = make_protocol(1)
    assert proto.train_seeds == (0,)
    assert proto.m_test == 100


def test_hundred_train_seeds_disjoint():
    proto = make_protocol(100, 100)
    assert proto.n_train == 100
    assert not set(proto.train_seeds) & set(proto.test_seeds)


def test_small_protocol_by_construction():
    proto = make_protocol(5, 2)
    assert proto.train_seeds == (0, 1, 2, 3, 4)
    assert proto.test_seeds == (1_000_000, 1_000_001)


def test_protocol_rejects_bad_sizes():
    with pytest.raises(ValueError):
        make_protocol(0)
    with pytest.raises(ValueError):
        make_protocol(TEST_SEED_OFFSET)
    with pytest.raises(ValueError):
        make_protocol(1, 0)


def test_disjointness_property_over_random_sizes():
    sizes = list(rng_stream(123, 0).index_vec(20_000, 200) + 1)
    sizes.append(TEST_SEED_OFFSET - 1)  # boundary: largest legal n_train
    for n in sizes:
        proto = make_protocol(int(n), 3)
        assert not set(proto.train_seeds) & set(proto.test_seeds)
        assert len(set(proto.train_seeds)) == n


def test_protocol_validation():
    with pytest.raises(ValueError):
        SeedProtocol(train_seeds=(0, 0), test_seeds=(5,))
    with pytest.raises(ValueError):
        SeedProtocol(train_seeds=(0, 1), test_seeds=(1,))
    with pytest.raises(ValueError):
        SeedProtocol(train_seeds=(), test_seeds=(1,))


def test_round_robin_schedule_gives_equal_exposure():
    proto = make_protocol(3, 2)
    seeds = [proto.train_seed_for_episode(ep) for ep in range(9)]
    assert seeds == [0, 1, 2, 0, 1, 2, 0, 1, 2]


def test_observation_validation():
    obs = Observation(np.zeros(4, dtype=np.float32), Flat(4))
    assert obs.data.dtype == np.float32
    with pytest.raises(ValueError):
        Observation(np.zeros(3), Flat(4))
    with pytest.raises(ValueError):
        Observation(np.array([1.0, np.nan]), Flat(2))
    img = Observation(np.zeros(2 * 3 * 3), Image(2, 3, 3))
    assert img.data.size == 18


def test_action_spec_validation():
    assert Discrete(4).n == 4
    with pytest.raises(ValueError):
        Discrete(0)
    spec = Continuous(2, (-1.0, -1.0), (1.0, 1.0))
    assert spec.dim == 2
    with pytest.raises(ValueError):
        Continuous(2, (-1.0, 2.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        Continuous(2, (-1.0,), (1.0, 1.0))


def test_env_spec_validation():
    with pytest.raises(ValueError):
        EnvSpec(Flat(2), Discrete(2), max_steps=0, discount=0.9)
    with pytest.raises(ValueError):
        EnvSpec(Flat(2), Discrete(2), max_steps=10, discount=1.0)
