"""Environment implementations and the name registry used by the harness."""

from __future__ import annotations

from .arm import ReacherEnv, ThrowerEnv, ThrowerMultiEnv
from .classic import (
    AcrobotEnv,
    CartpoleEnv,
    PixelAcrobotEnv,
    PixelCartpoleEnv,
    RenderConfig,
    frame_stack,
    render_acrobot,
    render_cartpole,
    write_pgm,
)
from .image import (
    ExploreConfig,
    ExploreEnv,
    ImageDataset,
    LabelNoiseConfig,
    apply_label_noise,
    load_cifar10,
    load_mnist,
    train_baseline_classifier,
)

_SIMPLE_ENVS = {
    "cartpole": CartpoleEnv,
    "acrobot": AcrobotEnv,
    "cartpole-pixels": PixelCartpoleEnv,
    "acrobot-pixels": PixelAcrobotEnv,
    "reacher": ReacherEnv,
    "thrower": ThrowerEnv,
    "thrower-multi": ThrowerMultiEnv,
}

ENV_NAMES = tuple(_SIMPLE_ENVS) + ("mnist-explore", "cifar10-explore")


def make_env(name: str, *, data_dir=None, explore_config: ExploreConfig = None,
             label_noise_p: float = 0.0, label_noise_seed: int = 0):
    """Instantiate a registered environment by name.

    Image envs read their dataset from ``data_dir`` and apply optional label
    corruption to the train split only.
    """
    if name in _SIMPLE_ENVS:
        return _SIMPLE_ENVS[name]()
    if name in ("mnist-explore", "cifar10-explore"):
        if data_dir is None:
            raise ValueError(f"{name} requires a data directory")
        loader = load_mnist if name.startswith("mnist") else load_cifar10
        train = loader(data_dir, "train")
        test = loader(data_dir, "test")
        if label_noise_p > 0.0:
            train = apply_label_noise(train, LabelNoiseConfig(label_noise_p), label_noise_seed)
        return ExploreEnv(train, test, explore_config or ExploreConfig())
    raise ValueError(f"unknown environment {name!r}; known: {', '.join(ENV_NAMES)}")
