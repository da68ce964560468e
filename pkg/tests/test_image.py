import numpy as np
import pytest

from rlprobe.core import TEST_SEED_OFFSET
from rlprobe.envs.image import (
    BadMagicError,
    CountMismatchError,
    ExploreConfig,
    ExploreEnv,
    ImageDataset,
    LabelNoiseConfig,
    TruncatedFileError,
    apply_label_noise,
    load_cifar10,
    load_idx_images,
    load_idx_labels,
    load_mnist,
    train_baseline_classifier,
    write_idx_images,
    write_idx_labels,
)
from rlprobe.rng import rng_stream


def test_idx_roundtrip_bit_exact(tmp_path):
    stream = rng_stream(0, 30)
    images = (stream.uniform_vec(0, 255, 7 * 28 * 28).reshape(7, 1, 28, 28)).astype(np.uint8)
    labels = stream.index_vec(10, 7).astype(np.uint8)
    write_idx_images(tmp_path / "imgs", images)
    write_idx_labels(tmp_path / "labs", labels)
    np.testing.assert_array_equal(load_idx_images(tmp_path / "imgs"), images)
    np.testing.assert_array_equal(load_idx_labels(tmp_path / "labs"), labels)


def test_idx_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(b"\x00\x00\x08\x04" + b"\x00" * 12)
    with pytest.raises(BadMagicError):
        load_idx_images(path)
    with pytest.raises(BadMagicError):
        load_idx_labels(path)


def test_idx_truncation_rejected(tmp_path):
    import struct
    path = tmp_path / "trunc"
    path.write_bytes(struct.pack(">IIII", 0x803, 10, 28, 28) + b"\x00" * 100)
    with pytest.raises(TruncatedFileError):
        load_idx_images(path)


def test_count_mismatch_rejected(tmp_path):
    write_idx_images(tmp_path / "train-images-idx3-ubyte",
                     np.zeros((4, 1, 8, 8), dtype=np.uint8))
    write_idx_labels(tmp_path / "train-labels-idx1-ubyte",
                     np.zeros(5, dtype=np.uint8))
    with pytest.raises(CountMismatchError):
        load_mnist(tmp_path, "train")


def test_official_shape_counts(tmp_path):
    # header-driven counts at the official sizes: 60000 train, 10000 test
    write_idx_images(tmp_path / "train-images-idx3-ubyte",
                     np.zeros((60_000, 1, 28, 28), dtype=np.uint8))
    write_idx_labels(tmp_path / "train-labels-idx1-ubyte",
                     np.zeros(60_000, dtype=np.uint8))
    write_idx_images(tmp_path / "t10k-images-idx3-ubyte",
                     np.zeros((10_000, 1, 28, 28), dtype=np.uint8))
    write_idx_labels(tmp_path / "t10k-labels-idx1-ubyte",
                     np.zeros(10_000, dtype=np.uint8))
    assert len(load_mnist(tmp_path, "train")) == 60_000
    assert len(load_mnist(tmp_path, "test")) == 10_000


def _write_cifar_batch(path, n, seed=0):
    stream = rng_stream(seed, 31)
    labels = stream.index_vec(10, n).astype(np.uint8)[:, None]
    pixels = stream.index_vec(256, n * 3072).astype(np.uint8).reshape(n, 3072)
    path.write_bytes(np.hstack([labels, pixels]).tobytes())


def test_cifar_record_arithmetic(tmp_path):
    for i in range(1, 6):
        _write_cifar_batch(tmp_path / f"data_batch_{i}.bin", 5, seed=i)
    _write_cifar_batch(tmp_path / "test_batch.bin", 5, seed=9)
    assert (tmp_path / "data_batch_1.bin").stat().st_size == 3073 * 5
    train = load_cifar10(tmp_path, "train")
    assert len(train) == 25
    assert train.shape == (3, 32, 32)
    assert len(load_cifar10(tmp_path, "test")) == 5


def test_cifar_bad_size_rejected(tmp_path):
    (tmp_path / "test_batch.bin").write_bytes(b"\x00" * 1000)
    with pytest.raises(TruncatedFileError):
        load_cifar10(tmp_path, "test")


def _tiny_dataset(n_train=6, n_test=4, side=12):
    stream = rng_stream(1, 32)
    imgs = stream.index_vec(256, (n_train + n_test) * side * side).astype(np.uint8)
    imgs = imgs.reshape(-1, 1, side, side)
    labels = stream.index_vec(10, n_train + n_test)
    train = ImageDataset(imgs[:n_train], labels[:n_train], "mnist", "train")
    test = ImageDataset(imgs[n_train:], labels[n_train:], "mnist", "test")
    return train, test


def test_explore_reset_deterministic():
    train, test = _tiny_dataset()
    env = ExploreEnv(train, test, ExploreConfig(window=5))
    a = env.reset(0)
    b = env.reset(0)
    np.testing.assert_array_equal(a.data, b.data)


def test_full_window_reveals_entire_image():
    train, test = _tiny_dataset(side=12)
    env = ExploreEnv(train, test, ExploreConfig(window=12))
    env.reset(0)
    assert env.reveal_mask.all()


def test_initial_mask_covers_one_window():
    train, test = _tiny_dataset(side=12)
    env = ExploreEnv(train, test, ExploreConfig(window=5))
    env.reset(0)
    assert env.reveal_mask.sum() == 25


def test_reward_one_on_correct_guess():
    train, test = _tiny_dataset()
    env = ExploreEnv(train, test, ExploreConfig(window=5))
    env.reset(2)
    label = env.true_label
    _, reward, done = env.step(label)  # move left + guess correct label
    assert reward == 1.0 and done


def test_hundred_wrong_guesses_fail():
    train, test = _tiny_dataset()
    env = ExploreEnv(train, test, ExploreConfig(window=5))
    env.reset(0)
    wrong = (env.true_label + 1) % 10
    total = 0.0
    steps = 0
    while not env.done:
        _, r, _ = env.step(wrong)
        total += r
        steps += 1
    assert steps == 100
    assert total == 0.0


def test_move_at_edge_keeps_position_and_mask():
    train, test = _tiny_dataset(side=12)
    env = ExploreEnv(train, test, ExploreConfig(window=3))
    env.reset(0)
    wrong = (env.true_label + 1) % 10
    for _ in range(10):  # drive to column 0 (left moves, wrong guesses)
        env.step(wrong)
    mask_before = env.reveal_mask
    pos_before = env._pos
    env.step(wrong)  # one more left move at the boundary
    assert env._pos == pos_before
    np.testing.assert_array_equal(env.reveal_mask, mask_before)


def test_mask_monotone_and_consistent():
    train, test = _tiny_dataset(side=12)
    env = ExploreEnv(train, test, ExploreConfig(window=3))
    stream = rng_stream(3, 33)
    obs = env.reset(1)
    prev = env.reveal_mask
    img = env._image
    side = 12
    for _ in range(40):
        if env.done:
            break
        obs, _, _ = env.step(stream.integer(40))
        mask = env.reveal_mask
        assert (mask | prev == mask).all()  # monotone reveal
        masked = obs.data[2:2 + side * side].reshape(side, side)
        np.testing.assert_array_equal(masked[mask], img[0][mask])
        assert (masked[~mask] == 0).all()
        prev = mask


def test_image_choice_depends_only_on_seed():
    train, test = _tiny_dataset()
    env = ExploreEnv(train, test, ExploreConfig(window=5))
    env.reset(3)
    first = env._image.copy()
    stream = rng_stream(5, 34)
    for _ in range(30):
        if env.done:
            break
        env.step(stream.integer(40))
    env.reset(3)
    np.testing.assert_array_equal(env._image, first)


def test_test_seeds_map_to_test_split():
    train, test = _tiny_dataset(n_train=6, n_test=4)
    env = ExploreEnv(train, test, ExploreConfig(window=5))
    env.reset(TEST_SEED_OFFSET + 2)
    np.testing.assert_array_equal(
        env._image, test.images[2].astype(np.float32) / 255.0)
    with pytest.raises(IndexError):
        env.reset(TEST_SEED_OFFSET + 4)
    with pytest.raises(IndexError):
        env.reset(6)


def test_episode_return_is_zero_or_one():
    train, test = _tiny_dataset()
    env = ExploreEnv(train, test, ExploreConfig(window=5))
    stream = rng_stream(9, 35)
    for seed in range(6):
        env.reset(seed)
        total = 0.0
        while not env.done:
            _, r, _ = env.step(stream.integer(40))
            total += r
        assert total in (0.0, 1.0)


def test_label_noise_p_zero_is_noop():
    train, _ = _tiny_dataset()
    assert apply_label_noise(train, LabelNoiseConfig(0.0), 7) is train


def test_label_noise_full_corruption_statistics():
    labels = rng_stream(2, 36).index_vec(10, 10_000)
    imgs = np.zeros((10_000, 1, 4, 4), dtype=np.uint8)
    data = ImageDataset(imgs, labels, "mnist", "train")
    noisy = apply_label_noise(data, LabelNoiseConfig(1.0), run_seed=5)
    frac_changed = float(np.mean(noisy.labels != labels))
    # uniform redraw keeps the old label with probability 1/10
    assert abs(frac_changed - 0.9) < 0.01


def test_label_noise_deterministic_per_run_seed():
    train, _ = _tiny_dataset(n_train=50)
    a = apply_label_noise(train, LabelNoiseConfig(0.5), run_seed=3)
    b = apply_label_noise(train, LabelNoiseConfig(0.5), run_seed=3)
    np.testing.assert_array_equal(a.labels, b.labels)
    c = apply_label_noise(train, LabelNoiseConfig(0.5), run_seed=4)
    assert not np.array_equal(a.labels, c.labels)


def test_baseline_memorizes_single_image(digits_data_dir):
    train = load_mnist(digits_data_dir, "train")
    test = load_mnist(digits_data_dir, "test")
    train_acc, _ = train_baseline_classifier(train, 1, epochs=60, test_split=test)
    assert train_acc == 1.0


def test_baseline_train_accuracy_dominates_test(digits_data_dir):
    train = load_mnist(digits_data_dir, "train")
    test = load_mnist(digits_data_dir, "test")
    train_acc, test_acc = train_baseline_classifier(train, 64, epochs=60,
                                                    test_split=test)
    assert train_acc >= test_acc
    assert train_acc > 0.9


def test_baseline_random_labels_score_at_chance(digits_data_dir):
    train = load_mnist(digits_data_dir, "train")
    test = load_mnist(digits_data_dir, "test")
    corrupted = apply_label_noise(train, LabelNoiseConfig(1.0), run_seed=0)
    _, test_acc = train_baseline_classifier(corrupted, 100, epochs=60,
                                            test_split=test)
    assert abs(test_acc - 0.1) < 0.05
