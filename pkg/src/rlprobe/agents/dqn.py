"""Double DQN with optional model-based auxiliary heads.

The Q network is a trunk (MLP for flat observations, conv stack for pixels)
with a ``q`` head; the model-based variant adds ``s`` (next state) and ``r``
(reward) prediction heads whose MSE losses join the Huber TD loss.  Action
selection never reads the auxiliary heads, and zero-weight heads are skipped
entirely so the model-free training trace is reproduced bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .. import nn
from ..core import Discrete, Env, Image, SeedProtocol
from ..metrics import MetricsLog, MetricsRecord
from ..rng import ACTION, PARAM_INIT, REPLAY, rng_stream
from .evaluate import evaluate
from .policies import QPolicy
from .replay import ReplayBuffer


@dataclass
class DQNConfig:
    lr: float = 3e-3                    # 3e-4 is the pixel-input default
    gamma: float = 0.995
    hidden_dim: int = 512
    batch_size: int = 32
    target_update_interval: int = 1000  # environment steps between hard copies
    replay_capacity: int = 1_000_000    # 100_000 for pixel inputs
    min_replay: int = 64
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.1           # linear decay over this lead fraction
    eval_interval: int = 50             # episodes between evaluation passes
    model_based: bool = False
    lambda_s: float = 1.0
    lambda_r: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")

    def epsilon(self, episode: int, total_episodes: int) -> float:
        lead = max(1, int(self.eps_fraction * total_episodes))
        frac = max(0.0, 1.0 - episode / lead)
        return self.eps_end + (self.eps_start - self.eps_end) * frac


def pixel_dqn_config(**overrides) -> DQNConfig:
    base = dict(lr=3e-4, replay_capacity=100_000)
    base.update(overrides)
    return DQNConfig(**base)


def _build_q_net(obs_layout, obs_dim: int, n_actions: int, config: DQNConfig,
                 stream) -> nn.HeadedNetwork:
    # Trunk first, q head second: the model-based heads are appended after, so
    # the shared parameter initialization draws match the model-free build.
    if isinstance(obs_layout, Image):
        shape = (obs_layout.channels, obs_layout.height, obs_layout.width)
        c, h, w = shape
        layers = []
        for out_c, kernel, stride in nn.CONV_HEAD:
            layers.append(nn.init_conv(c, out_c, kernel, stride, stream))
            c = out_c
            h = (h - kernel) // stride + 1
            w = (w - kernel) // stride + 1
        layers.append(nn.Flatten())
        layers.append(nn.init_dense(c * h * w, config.hidden_dim, stream, "relu"))
        feat_dim = config.hidden_dim
        trunk = nn.Network(layers)
    else:
        trunk = nn.Network([
            nn.init_dense(obs_dim, config.hidden_dim, stream, "relu"),
            nn.init_dense(config.hidden_dim, config.hidden_dim, stream, "relu"),
        ])
        feat_dim = config.hidden_dim
    heads = {"q": nn.Network([nn.init_dense(feat_dim, n_actions, stream, "linear")])}
    if config.model_based:
        heads["s"] = nn.Network([nn.init_dense(feat_dim, obs_dim, stream, "linear")])
        heads["r"] = nn.Network([nn.init_dense(feat_dim, 1, stream, "linear")])
    return nn.HeadedNetwork(trunk, heads)


def _batch_input(flat: np.ndarray, obs_layout) -> np.ndarray:
    if isinstance(obs_layout, Image):
        return flat.reshape(-1, obs_layout.channels, obs_layout.height, obs_layout.width)
    return flat


def double_dqn_targets(net: nn.HeadedNetwork, target_net: nn.HeadedNetwork,
                       next_obs: np.ndarray, rewards: np.ndarray, dones: np.ndarray,
                       gamma: float) -> np.ndarray:
    """y = r + gamma * Q_target(s', argmax_a Q_online(s', a)), zero at terminal."""
    online_next, _ = net.forward(next_obs)
    best = np.argmax(online_next["q"], axis=1)
    target_next, _ = target_net.forward(next_obs)
    bootstrap = target_next["q"][np.arange(len(best)), best]
    return rewards + gamma * bootstrap * (1.0 - dones)


def dqn_train(
    env_factory: Callable[[], Env],
    protocol: SeedProtocol,
    config: DQNConfig,
    episodes: int,
    *,
    master_seed: int = 0,
    run_id: str = "dqn",
    metrics: Optional[MetricsLog] = None,
    eval_env_factory: Optional[Callable[[], Env]] = None,
    train_snapshot: Optional[dict] = None,
    eval_snapshot: Optional[dict] = None,
):
    """Train over round-robin train seeds; log as-seen and evaluation returns.

    ``env_factory`` builds the (possibly wrapped) training env; evaluation
    uses ``eval_env_factory`` (default: the same factory) with the greedy
    policy on both seed sets.
    """
    env = env_factory()
    if not isinstance(env.spec.action_spec, Discrete):
        raise ValueError(f"DQN requires a discrete action space, got {env.spec.action_spec}")
    n_actions = env.spec.action_spec.n
    obs_layout = env.spec.obs_layout
    probe = env.reset(protocol.train_seeds[0])
    obs_dim = probe.data.size

    init_stream = rng_stream(master_seed, PARAM_INIT)
    net = _build_q_net(obs_layout, obs_dim, n_actions, config, init_stream)
    target_net = _build_q_net(obs_layout, obs_dim, n_actions, config,
                              rng_stream(master_seed, PARAM_INIT))
    for tp, p in zip(target_net.params(), net.params()):
        np.copyto(tp, p)
    opt = nn.Adam(net.params(), lr=config.lr)
    buffer = ReplayBuffer(config.replay_capacity, obs_dim)
    action_stream = rng_stream(master_seed, ACTION)
    replay_stream = rng_stream(master_seed, REPLAY)
    policy = QPolicy(net, obs_layout, n_actions)
    metrics = metrics if metrics is not None else MetricsLog()
    train_snapshot = dict(train_snapshot or {})
    eval_snapshot = dict(eval_snapshot or {})
    eval_factory = eval_env_factory or env_factory

    use_aux = config.model_based and (config.lambda_s > 0.0 or config.lambda_r > 0.0)
    min_fill = max(config.min_replay, config.batch_size)
    wall_step = 0

    def run_eval(episode: int) -> None:
        for role, seeds in (("train", protocol.train_seeds), ("test", protocol.test_seeds)):
            returns = evaluate(policy, eval_factory, seeds)
            for seed, ret in zip(seeds, returns):
                metrics.append(MetricsRecord(
                    run_id, wall_step, episode, seed, role, ret,
                    {**eval_snapshot, "phase": "eval"},
                ))

    for episode in range(episodes):
        seed = protocol.train_seed_for_episode(episode)
        obs = env.reset(seed)
        eps = config.epsilon(episode, episodes)
        ep_return = 0.0
        while True:
            if action_stream.unit() < eps:
                action = action_stream.integer(n_actions)
            else:
                action = policy.act(obs)
            next_obs, reward, done = env.step(action)
            buffer.push(obs.data, action, reward, next_obs.data, done)
            ep_return += reward
            obs = next_obs
            wall_step += 1
            if len(buffer) >= min_fill:
                batch = buffer.sample(config.batch_size, replay_stream)
                s, a, r, s2, d = batch
                s_in = _batch_input(s, obs_layout)
                s2_in = _batch_input(s2, obs_layout)
                targets = double_dqn_targets(net, target_net, s2_in, r, d, config.gamma)
                outs, cache = net.forward(s_in)
                selected = outs["q"][np.arange(len(a)), a]
                _, dpred = nn.huber_loss(selected, targets)
                dq = np.zeros_like(outs["q"])
                dq[np.arange(len(a)), a] = dpred
                gouts = {"q": dq}
                if use_aux:
                    if config.lambda_s > 0.0:
                        _, ds = nn.mse_loss(outs["s"], s2)
                        gouts["s"] = config.lambda_s * ds
                    if config.lambda_r > 0.0:
                        _, dr = nn.mse_loss(outs["r"].ravel(), r)
                        gouts["r"] = (config.lambda_r * dr).reshape(-1, 1)
                grads = net.backward(cache, gouts)
                opt.step(grads)
            if wall_step % config.target_update_interval == 0:
                for tp, p in zip(target_net.params(), net.params()):
                    np.copyto(tp, p)
            if done:
                break
        metrics.append(MetricsRecord(
            run_id, wall_step, episode, seed, "train", ep_return,
            {**train_snapshot, "phase": "rollout"},
        ))
        if (episode + 1) % config.eval_interval == 0 or episode == episodes - 1:
            run_eval(episode)

    return policy, metrics
