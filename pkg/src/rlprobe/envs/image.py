"""Natural-image exploration MDP plus dataset ingestion.

The agent starts at the center of a masked image; each composite action moves
the reveal window and guesses a class.  A correct guess pays reward 1 and ends
the episode; otherwise the episode fails after 100 steps.  Train seeds index
images of the train split, test seeds index the held-out test split.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..core import TEST_SEED_OFFSET, Discrete, Env, EnvSpec, Flat, Observation
from ..rng import LABEL_NOISE, rng_stream

MNIST_IMAGE_MAGIC = 0x00000803
MNIST_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_FILES = {
    "train": tuple(f"data_batch_{i}.bin" for i in range(1, 6)),
    "test": ("test_batch.bin",),
}


class DatasetError(ValueError):
    """Base class for dataset ingestion failures."""


class BadMagicError(DatasetError):
    pass


class TruncatedFileError(DatasetError):
    pass


class CountMismatchError(DatasetError):
    pass


@dataclass
class ImageDataset:
    """Byte image tensors (N, C, H, W) with integer labels in [0, n_classes)."""

    images: np.ndarray
    labels: np.ndarray
    name: str
    split: str
    n_classes: int = 10

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise CountMismatchError(
                f"{self.name}/{self.split}: {len(self.images)} images vs {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.images)

    @property
    def shape(self):
        return self.images.shape[1:]


def load_idx_images(path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 16:
        raise TruncatedFileError(f"{path}: too short for an IDX image header")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != MNIST_IMAGE_MAGIC:
        raise BadMagicError(f"{path}: image magic {magic:#010x} != {MNIST_IMAGE_MAGIC:#010x}")
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise TruncatedFileError(f"{path}: {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype=np.uint8, offset=16).reshape(count, 1, rows, cols)


def load_idx_labels(path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 8:
        raise TruncatedFileError(f"{path}: too short for an IDX label header")
    magic, count = struct.unpack(">II", data[:8])
    if magic != MNIST_LABEL_MAGIC:
        raise BadMagicError(f"{path}: label magic {magic:#010x} != {MNIST_LABEL_MAGIC:#010x}")
    if len(data) != 8 + count:
        raise TruncatedFileError(f"{path}: {len(data)} bytes, expected {8 + count}")
    return np.frombuffer(data, dtype=np.uint8, offset=8).astype(np.int64)


def write_idx_images(path, images: np.ndarray) -> None:
    """Inverse of :func:`load_idx_images`; round-trips bit-exactly."""
    images = np.asarray(images, dtype=np.uint8)
    n, _, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", MNIST_IMAGE_MAGIC, n, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", MNIST_LABEL_MAGIC, labels.size))
        fh.write(labels.tobytes())


def load_mnist(data_dir, split: str = "train") -> ImageDataset:
    image_file, label_file = MNIST_FILES[split]
    images = load_idx_images(Path(data_dir) / image_file)
    labels = load_idx_labels(Path(data_dir) / label_file)
    return ImageDataset(images, labels, "mnist", split)


def load_cifar10(data_dir, split: str = "train") -> ImageDataset:
    """Parse the CIFAR-10 binary batches: 1 label byte + 3072 pixel bytes."""
    images = []
    labels = []
    for name in CIFAR_FILES[split]:
        path = Path(data_dir) / name
        data = path.read_bytes()
        if len(data) == 0 or len(data) % CIFAR_RECORD_BYTES != 0:
            raise TruncatedFileError(
                f"{path}: {len(data)} bytes is not a multiple of {CIFAR_RECORD_BYTES}"
            )
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        batch_labels = records[:, 0]
        if batch_labels.max(initial=0) > 9:
            raise BadMagicError(f"{path}: label byte out of range, not a CIFAR-10 batch")
        labels.append(batch_labels.astype(np.int64))
        images.append(records[:, 1:].reshape(-1, 3, 32, 32))
    return ImageDataset(np.concatenate(images), np.concatenate(labels), "cifar10", split)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class LabelNoiseConfig:
    p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("label corruption probability must lie in [0, 1]")


def apply_label_noise(dataset: ImageDataset, config: LabelNoiseConfig,
                      run_seed: int) -> ImageDataset:
    """Randomize labels with probability p, fixed per (run_seed, image index).

    The replacement is a uniform redraw over all classes, so a corrupted label
    coincides with the original with probability 1/C.
    """
    if config.p == 0.0:
        return dataset
    stream = rng_stream(run_seed, LABEL_NOISE)
    n = len(dataset)
    corrupt = stream.uniform_vec(0.0, 1.0, n) < config.p
    redraws = stream.index_vec(dataset.n_classes, n)
    labels = np.where(corrupt, redraws, dataset.labels)
    return ImageDataset(dataset.images, labels, dataset.name, dataset.split,
                        dataset.n_classes)


@dataclass(frozen=True)
class ExploreConfig:
    window: int = 5
    max_steps: int = 100
    move_step: Optional[int] = None  # defaults to window: windows tile

    def step_size(self) -> int:
        return self.window if self.move_step is None else self.move_step


class ExploreEnv(Env):
    """Window-reveal classification MDP over an image dataset pair.

    Observation layout: [row, col normalized (2), masked image (C*H*W),
    reveal mask (H*W)], all in [0, 1].  Action space is Discrete(4*C): action
    a moves in direction a // C (left, right, up, down) and guesses class
    a % C.
    """

    MOVES = ((0, -1), (0, 1), (-1, 0), (1, 0))  # left, right, up, down

    def __init__(self, train_split: ImageDataset, test_split: ImageDataset,
                 config: ExploreConfig = ExploreConfig()):
        super().__init__()
        if len(train_split) == 0 or len(test_split) == 0:
            raise ValueError("explore env needs non-empty dataset splits")
        if train_split.shape != test_split.shape:
            raise ValueError("train/test splits must share an image shape")
        c, h, w = train_split.shape
        if not 1 <= config.window <= min(h, w):
            raise ValueError(f"window {config.window} does not fit {h}x{w} images")
        self.train_split = train_split
        self.test_split = test_split
        self.config = config
        self.n_classes = train_split.n_classes
        self.name = f"{train_split.name}-explore"
        obs_dim = 2 + c * h * w + h * w
        self.spec = EnvSpec(
            obs_layout=Flat(obs_dim),
            action_spec=Discrete(4 * self.n_classes),
            max_steps=config.max_steps,
            discount=0.99,
        )
        self._image = None
        self._label = 0
        self._mask = np.zeros((h, w), dtype=bool)
        self._pos = (0, 0)

    def _split_for_seed(self, seed: int):
        if seed >= TEST_SEED_OFFSET:
            return self.test_split, seed - TEST_SEED_OFFSET
        return self.train_split, seed

    def _reset_state(self, seed: int) -> None:
        split, index = self._split_for_seed(seed)
        if index >= len(split):
            raise IndexError(
                f"seed {seed} indexes image {index} beyond the {split.split} split "
                f"of size {len(split)}"
            )
        self._image = split.images[index].astype(np.float32) / 255.0
        self._label = int(split.labels[index])
        _, h, w = split.shape
        self._mask = np.zeros((h, w), dtype=bool)
        self._pos = (h // 2, w // 2)
        self._reveal()

    def _reveal(self) -> None:
        r, c = self._pos
        half = self.config.window // 2
        _, h, w = self.train_split.shape
        r0 = min(max(r - half, 0), h - self.config.window)
        c0 = min(max(c - half, 0), w - self.config.window)
        self._mask[r0:r0 + self.config.window, c0:c0 + self.config.window] = True

    def _step_state(self, action):
        action = int(action)
        if not 0 <= action < 4 * self.n_classes:
            raise ValueError(f"explore action {action} out of range")
        direction = self.MOVES[action // self.n_classes]
        guess = action % self.n_classes
        _, h, w = self.train_split.shape
        step = self.config.step_size()
        r = min(max(self._pos[0] + direction[0] * step, 0), h - 1)
        c = min(max(self._pos[1] + direction[1] * step, 0), w - 1)
        self._pos = (r, c)
        self._reveal()
        if guess == self._label:
            return 1.0, True
        return 0.0, False

    def _observe(self) -> Observation:
        _, h, w = self.train_split.shape
        masked = self._image * self._mask[None, :, :]
        data = np.concatenate([
            np.array([self._pos[0] / (h - 1), self._pos[1] / (w - 1)], dtype=np.float32),
            masked.ravel(),
            self._mask.astype(np.float32).ravel(),
        ])
        return Observation(data, self.spec.obs_layout)

    @property
    def reveal_mask(self) -> np.ndarray:
        return self._mask.copy()

    @property
    def true_label(self) -> int:
        return self._label


# ---------------------------------------------------------------------------
# supervised full-image baseline


def make_classifier(shape, n_classes: int, stream, hidden_dim: int = 64):
    """Small 2-conv + dense classifier over (C, H, W) byte images."""
    from .. import nn

    c, h, w = shape
    spec = ((8, 5, 2), (16, 3, 2))
    return nn.conv_net((c, h, w), hidden_dim, n_classes, stream, conv_spec=spec)


def train_baseline_classifier(dataset: ImageDataset, train_seed_count: int,
                              epochs: int, *, test_split: Optional[ImageDataset] = None,
                              master_seed: int = 0, batch_size: int = 32,
                              lr: float = 1e-3):
    """Train on the first ``train_seed_count`` images; report both accuracies.

    This is the supervised analog of the explore task: the whole image is
    visible and the 0-1 loss on held-out data measures the generalization gap
    directly.
    """
    from .. import nn
    from ..rng import PARAM_INIT, SHUFFLE

    if train_seed_count > len(dataset):
        raise ValueError("train_seed_count exceeds the split size")
    images = dataset.images[:train_seed_count].astype(np.float32) / 255.0
    labels = dataset.labels[:train_seed_count]
    net = make_classifier(dataset.shape, dataset.n_classes,
                          rng_stream(master_seed, PARAM_INIT))
    opt = nn.Adam(net.params(), lr=lr)
    shuffle = rng_stream(master_seed, SHUFFLE)
    n = len(images)
    for _ in range(epochs):
        order = shuffle.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            logits, cache = net.forward(images[idx])
            _, dlogits = nn.softmax_cross_entropy(logits, labels[idx])
            grads, _ = net.backward(cache, dlogits)
            opt.step(grads)

    def accuracy(imgs, labs):
        correct = 0
        for start in range(0, len(imgs), 256):
            batch = imgs[start:start + 256].astype(np.float32) / 255.0
            logits, _ = net.forward(batch)
            correct += int((logits.argmax(axis=1) == labs[start:start + 256]).sum())
        return correct / len(imgs)

    train_acc = accuracy(dataset.images[:train_seed_count], labels)
    if test_split is None:
        raise ValueError("baseline needs the held-out test split")
    test_acc = accuracy(test_split.images, test_split.labels)
    return train_acc, test_acc
