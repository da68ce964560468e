"""Value-based, policy-based, and model-based agents plus evaluation."""

from .dqn import DQNConfig, dqn_train, double_dqn_targets, pixel_dqn_config
from .evaluate import EvalWrappers, evaluate
from .policies import (
    CategoricalPolicy,
    GaussianPolicy,
    QPolicy,
    RandomPolicy,
    load_policy,
    save_policy,
)
from .ppo import PPOConfig, gae_advantages, ppo_train
from .replay import ReplayBuffer

AGENT_KINDS = ("dqn", "dqn-mb", "ppo", "ppo-mb")
