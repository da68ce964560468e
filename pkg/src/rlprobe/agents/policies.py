"""Policy objects: greedy-from-Q, categorical, diagonal Gaussian, random.

A policy maps observations to valid actions under the env's action spec and
can be checkpointed through the nn binary format.  ``begin_episode`` exists so
stochastic baselines can re-key their draws per evaluation seed; trained
policies evaluate deterministically and ignore it.
"""

from __future__ import annotations

import json

import numpy as np

from .. import nn
from ..core import Continuous, Discrete, Flat, Image
from ..rng import BASELINE, RandomStream, rng_stream


def _prepare_input(obs_data: np.ndarray, layout) -> np.ndarray:
    if isinstance(layout, Image):
        return obs_data.reshape(1, layout.channels, layout.height, layout.width)
    return obs_data.reshape(1, -1)


class QPolicy:
    """Greedy argmax over the q head of a (possibly multi-head) network."""

    kind = "q"

    def __init__(self, net: nn.HeadedNetwork, obs_layout, n_actions: int):
        self.net = net
        self.obs_layout = obs_layout
        self.n_actions = n_actions

    def begin_episode(self, seed: int) -> None:
        pass

    def q_values(self, obs_data: np.ndarray) -> np.ndarray:
        outs, _ = self.net.forward(_prepare_input(obs_data, self.obs_layout))
        return outs["q"][0]

    def act(self, obs) -> int:
        return int(np.argmax(self.q_values(obs.data)))


class CategoricalPolicy:
    """Softmax policy over discrete actions; deterministic mode is argmax."""

    kind = "categorical"

    def __init__(self, net: nn.Network, obs_layout, n_actions: int):
        self.net = net
        self.obs_layout = obs_layout
        self.n_actions = n_actions

    def begin_episode(self, seed: int) -> None:
        pass

    def logits(self, obs_data: np.ndarray) -> np.ndarray:
        out, _ = self.net.forward(_prepare_input(obs_data, self.obs_layout))
        return out[0]

    def act(self, obs) -> int:
        return int(np.argmax(self.logits(obs.data)))

    def sample(self, obs, stream: RandomStream):
        logits = self.logits(obs.data)
        action = nn.categorical_sample(logits, stream)
        logp = float(nn.categorical_logprob(logits.astype(np.float64), action))
        return action, logp


class GaussianPolicy:
    """Diagonal Gaussian with a state-independent learned log-std vector."""

    kind = "gaussian"

    def __init__(self, net: nn.Network, log_std: np.ndarray, obs_layout, action_dim: int):
        self.net = net
        self.log_std = log_std
        self.obs_layout = obs_layout
        self.action_dim = action_dim

    def begin_episode(self, seed: int) -> None:
        pass

    def mean(self, obs_data: np.ndarray) -> np.ndarray:
        out, _ = self.net.forward(_prepare_input(obs_data, self.obs_layout))
        return out[0]

    def act(self, obs) -> np.ndarray:
        return self.mean(obs.data)

    def sample(self, obs, stream: RandomStream):
        mean = self.mean(obs.data)
        action = nn.gaussian_sample(mean, self.log_std, stream)
        logp = float(nn.gaussian_logprob(mean[None, :], self.log_std, action[None, :]))
        return action, logp


class RandomPolicy:
    """Uniform random actions, re-keyed per episode seed for repeatability."""

    kind = "random"

    def __init__(self, action_spec):
        self.action_spec = action_spec
        self._stream = rng_stream(0, BASELINE)

    def begin_episode(self, seed: int) -> None:
        self._stream = rng_stream(seed, BASELINE)

    def act(self, obs):
        if isinstance(self.action_spec, Discrete):
            return self._stream.integer(self.action_spec.n)
        lows = np.array(self.action_spec.low)
        highs = np.array(self.action_spec.high)
        units = self._stream.uniform_vec(0.0, 1.0, self.action_spec.dim)
        return lows + (highs - lows) * units


def _layout_meta(layout):
    if isinstance(layout, Image):
        return {"type": "image", "channels": layout.channels,
                "height": layout.height, "width": layout.width}
    return {"type": "flat", "dim": layout.dim}


def _layout_from_meta(meta):
    if meta["type"] == "image":
        return Image(meta["channels"], meta["height"], meta["width"])
    return Flat(meta["dim"])


def save_policy(path, policy) -> None:
    if isinstance(policy, QPolicy):
        meta = {
            "kind": policy.kind,
            "obs_layout": _layout_meta(policy.obs_layout),
            "n_actions": policy.n_actions,
            "arch": policy.net.describe(),
        }
        nn.save_params(path, meta, policy.net.params())
    elif isinstance(policy, CategoricalPolicy):
        meta = {
            "kind": policy.kind,
            "obs_layout": _layout_meta(policy.obs_layout),
            "n_actions": policy.n_actions,
            "arch": policy.net.describe(),
        }
        nn.save_params(path, meta, policy.net.params())
    elif isinstance(policy, GaussianPolicy):
        meta = {
            "kind": policy.kind,
            "obs_layout": _layout_meta(policy.obs_layout),
            "action_dim": policy.action_dim,
            "arch": policy.net.describe(),
        }
        nn.save_params(path, meta, list(policy.net.params()) + [policy.log_std])
    else:
        raise TypeError(f"cannot checkpoint policy of type {type(policy).__name__}")


def _rebuild_headed(arch) -> nn.HeadedNetwork:
    trunk = nn.rebuild(arch["trunk"])
    heads = {name: nn.rebuild(desc) for name, desc in arch["heads"].items()}
    return nn.HeadedNetwork(trunk, heads)


def load_policy(path):
    meta, arrays = nn.load_params(path)
    layout = _layout_from_meta(meta["obs_layout"])
    kind = meta["kind"]
    if kind == "q":
        net = _rebuild_headed(meta["arch"])
        for p, a in zip(net.params(), arrays):
            np.copyto(p, a)
        return QPolicy(net, layout, meta["n_actions"])
    if kind == "categorical":
        net = nn.rebuild(meta["arch"])
        for p, a in zip(net.params(), arrays):
            np.copyto(p, a)
        return CategoricalPolicy(net, layout, meta["n_actions"])
    if kind == "gaussian":
        net = nn.rebuild(meta["arch"])
        for p, a in zip(net.params(), arrays[:-1]):
            np.copyto(p, a)
        return GaussianPolicy(net, arrays[-1].copy(), layout, meta["action_dim"])
    raise nn.CheckpointError(f"unknown policy kind {kind!r}")
