import numpy as np
import pytest

from rlprobe.envs.image import write_idx_images, write_idx_labels


def digits_as_mnist():
    """Offline handwritten-digit images upscaled to MNIST geometry (28x28).

    Returns (images, labels) with images shaped (N, 1, 28, 28) uint8; real
    natural variation, no network access required.
    """
    from sklearn.datasets import load_digits

    raw = load_digits()
    imgs = np.kron(raw.images, np.ones((4, 4)))[:, 2:30, 2:30]  # 32x32 -> center 28x28
    imgs = np.clip(imgs * (255.0 / 16.0), 0, 255).astype(np.uint8)
    return imgs[:, None, :, :], raw.target.astype(np.int64)


@pytest.fixture(scope="session")
def digits_data_dir(tmp_path_factory):
    """MNIST-format IDX files built from the offline digits corpus.

    Train split: first 1297 images; test split: remaining 500.  Written
    through the package's own IDX writer so the production loaders parse them.
    """
    images, labels = digits_as_mnist()
    root = tmp_path_factory.mktemp("digits-idx")
    write_idx_images(root / "train-images-idx3-ubyte", images[:1297])
    write_idx_labels(root / "train-labels-idx1-ubyte", labels[:1297])
    write_idx_images(root / "t10k-images-idx3-ubyte", images[1297:])
    write_idx_labels(root / "t10k-labels-idx1-ubyte", labels[1297:])
    return root
