"""PPO with clipped surrogate, GAE advantages, and minibatch epochs.

Handles discrete (softmax) and continuous (diagonal Gaussian with a learned
state-independent log-std) action spaces.  The model-based variant gives the
critic next-state and reward heads trained as auxiliary MSE losses; they are
representation shapers only and never influence action selection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .. import nn
from ..core import Continuous, Discrete, Env, SeedProtocol
from ..metrics import MetricsLog, MetricsRecord
from ..rng import ACTION, PARAM_INIT, SHUFFLE, rng_stream
from .evaluate import evaluate
from .policies import CategoricalPolicy, GaussianPolicy


@dataclass
class PPOConfig:
    lr: float = 3e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 10
    minibatch: int = 32
    rollout: int = 2048
    hidden_dim: int = 512
    entropy_coef: float = 0.0
    log_std_init: float = -0.5
    eval_every_rollouts: int = 1
    model_based: bool = False
    lambda_s: float = 1.0
    lambda_r: float = 1.0

    def __post_init__(self):
        if self.rollout % self.minibatch != 0:
            raise ValueError("rollout length must be divisible by the minibatch size")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")


def gae_advantages(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                   bootstrap: float, gamma: float, lam: float) -> np.ndarray:
    """Backward-recursive GAE; episodes inside the rollout stay separated."""
    n = len(rewards)
    adv = np.zeros(n, dtype=np.float64)
    next_value = bootstrap
    running = 0.0
    for t in range(n - 1, -1, -1):
        mask = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * mask - values[t]
        running = delta + gamma * lam * mask * running
        adv[t] = running
        next_value = values[t]
    return adv


def ppo_train(
    env_factory: Callable[[], Env],
    protocol: SeedProtocol,
    config: PPOConfig,
    total_steps: int,
    *,
    master_seed: int = 0,
    run_id: str = "ppo",
    metrics: Optional[MetricsLog] = None,
    eval_env_factory: Optional[Callable[[], Env]] = None,
    train_snapshot: Optional[dict] = None,
    eval_snapshot: Optional[dict] = None,
):
    """Collect fixed-length rollouts over round-robin train seeds and update.

    Evaluation (deterministic policy: argmax / mean action) runs on both seed
    sets every ``eval_every_rollouts`` rollouts and after the final one.
    """
    env = env_factory()
    spec = env.spec.action_spec
    discrete = isinstance(spec, Discrete)
    obs_layout = env.spec.obs_layout
    probe = env.reset(protocol.train_seeds[0])
    obs_dim = probe.data.size

    init_stream = rng_stream(master_seed, PARAM_INIT)
    if discrete:
        policy_net = nn.mlp(obs_dim, config.hidden_dim, spec.n, init_stream)
        policy = CategoricalPolicy(policy_net, obs_layout, spec.n)
        action_dim = None
        policy_params = policy_net.params()
    else:
        policy_net = nn.mlp(obs_dim, config.hidden_dim, spec.dim, init_stream)
        log_std = np.full(spec.dim, config.log_std_init, dtype=np.float32)
        policy = GaussianPolicy(policy_net, log_std, obs_layout, spec.dim)
        action_dim = spec.dim
        policy_params = policy_net.params() + [log_std]

    value_trunk = nn.Network([
        nn.init_dense(obs_dim, config.hidden_dim, init_stream, "relu"),
        nn.init_dense(config.hidden_dim, config.hidden_dim, init_stream, "relu"),
    ])
    value_heads = {"v": nn.Network([nn.init_dense(config.hidden_dim, 1, init_stream, "linear")])}
    if config.model_based:
        value_heads["s"] = nn.Network([nn.init_dense(config.hidden_dim, obs_dim, init_stream, "linear")])
        value_heads["r"] = nn.Network([nn.init_dense(config.hidden_dim, 1, init_stream, "linear")])
    value_net = nn.HeadedNetwork(value_trunk, value_heads)

    policy_opt = nn.Adam(policy_params, lr=config.lr)
    value_opt = nn.Adam(value_net.params(), lr=config.lr)
    action_stream = rng_stream(master_seed, ACTION)
    shuffle_stream = rng_stream(master_seed, SHUFFLE)
    metrics = metrics if metrics is not None else MetricsLog()
    train_snapshot = dict(train_snapshot or {})
    eval_snapshot = dict(eval_snapshot or {})
    eval_factory = eval_env_factory or env_factory
    use_aux = config.model_based and (config.lambda_s > 0.0 or config.lambda_r > 0.0)

    def value_of(obs_data: np.ndarray) -> float:
        outs, _ = value_net.forward(obs_data.reshape(1, -1))
        return float(outs["v"][0, 0])

    def run_eval(episode: int, wall_step: int) -> None:
        for role, seeds in (("train", protocol.train_seeds), ("test", protocol.test_seeds)):
            returns = evaluate(policy, eval_factory, seeds)
            for seed, ret in zip(seeds, returns):
                metrics.append(MetricsRecord(
                    run_id, wall_step, episode, seed, role, ret,
                    {**eval_snapshot, "phase": "eval"},
                ))

    episode = 0
    ep_return = 0.0
    obs = env.reset(protocol.train_seed_for_episode(episode))
    steps_done = 0
    rollout_index = 0
    n_rollouts = max(1, total_steps // config.rollout)

    while rollout_index < n_rollouts:
        T = config.rollout
        obs_buf = np.zeros((T, obs_dim), dtype=np.float32)
        act_buf = (np.zeros(T, dtype=np.int64) if discrete
                   else np.zeros((T, action_dim), dtype=np.float64))
        logp_buf = np.zeros(T, dtype=np.float64)
        rew_buf = np.zeros(T, dtype=np.float64)
        done_buf = np.zeros(T, dtype=np.float64)
        val_buf = np.zeros(T, dtype=np.float64)
        next_obs_buf = np.zeros((T, obs_dim), dtype=np.float32)

        for t in range(T):
            obs_buf[t] = obs.data
            val_buf[t] = value_of(obs.data)
            action, logp = policy.sample(obs, action_stream)
            next_obs, reward, done = env.step(action)
            act_buf[t] = action
            logp_buf[t] = logp
            rew_buf[t] = reward
            done_buf[t] = 1.0 if done else 0.0
            next_obs_buf[t] = next_obs.data
            ep_return += reward
            steps_done += 1
            if done:
                metrics.append(MetricsRecord(
                    run_id, steps_done, episode,
                    protocol.train_seed_for_episode(episode), "train", ep_return,
                    {**train_snapshot, "phase": "rollout"},
                ))
                episode += 1
                ep_return = 0.0
                obs = env.reset(protocol.train_seed_for_episode(episode))
            else:
                obs = next_obs

        bootstrap = 0.0 if done_buf[-1] else value_of(obs.data)
        adv = gae_advantages(rew_buf, val_buf, done_buf, bootstrap, config.gamma,
                             config.gae_lambda)
        returns = adv + val_buf
        adv_std = adv.std()
        norm_adv = (adv - adv.mean()) / (adv_std + 1e-8)

        for _ in range(config.epochs):
            order = shuffle_stream.permutation(T)
            for start in range(0, T, config.minibatch):
                idx = order[start:start + config.minibatch]
                mb_obs = obs_buf[idx]

                pol_out, pol_cache = policy_net.forward(mb_obs)
                if discrete:
                    logp_new = nn.categorical_logprob(pol_out.astype(np.float64), act_buf[idx])
                else:
                    logp_new = nn.gaussian_logprob(pol_out, policy.log_std, act_buf[idx])

                val_out, val_cache = value_net.forward(mb_obs)
                values_new = val_out["v"].ravel().astype(np.float64)

                _, dlogp, dvalues = nn.ppo_loss(
                    logp_new, logp_buf[idx], norm_adv[idx], values_new,
                    returns[idx], config.clip_eps,
                )

                if discrete:
                    dlogits = nn.categorical_logprob_grad(
                        pol_out.astype(np.float64), act_buf[idx], dlogp)
                    if config.entropy_coef > 0.0:
                        dent = np.full(len(idx), -config.entropy_coef / len(idx))
                        dlogits += nn.categorical_entropy_grad(
                            pol_out.astype(np.float64), dent)
                    pol_grads, _ = policy_net.backward(pol_cache, dlogits)
                    policy_opt.step(pol_grads)
                else:
                    dmean, dlog_std = nn.gaussian_logprob_grads(
                        pol_out, policy.log_std, act_buf[idx], dlogp)
                    if config.entropy_coef > 0.0:
                        dlog_std = dlog_std - config.entropy_coef
                    pol_grads, _ = policy_net.backward(pol_cache, dmean)
                    policy_opt.step(pol_grads + [dlog_std.astype(np.float32)])

                gouts = {"v": dvalues.reshape(-1, 1)}
                if use_aux:
                    if config.lambda_s > 0.0:
                        _, ds = nn.mse_loss(val_out["s"], next_obs_buf[idx])
                        gouts["s"] = config.lambda_s * ds
                    if config.lambda_r > 0.0:
                        _, dr = nn.mse_loss(val_out["r"].ravel(), rew_buf[idx])
                        gouts["r"] = (config.lambda_r * dr).reshape(-1, 1)
                val_grads = value_net.backward(val_cache, gouts)
                value_opt.step(val_grads)

        rollout_index += 1
        if rollout_index % config.eval_every_rollouts == 0 or rollout_index == n_rollouts:
            run_eval(episode, steps_done)

    return policy, metrics
