"""Deterministic policy evaluation over seed lists, with optional wrappers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

from ..wrappers import (
    InitialStateMultiplierEnv,
    MultiplierConfig,
    NoiseConfig,
    NoisyObservationEnv,
)


@dataclass(frozen=True)
class EvalWrappers:
    """Evaluation-time perturbations: observation noise and state expansion."""

    sigma2: float = 0.0
    init_mult: float = 1.0

    def snapshot(self) -> dict:
        out = {}
        if self.sigma2 != 0.0:
            out["sigma2"] = self.sigma2
        if self.init_mult != 1.0:
            out["init_mult"] = self.init_mult
        return out


def evaluate(policy, env_factory, seeds: Sequence[int], episodes_per_seed: int = 1,
             eval_wrappers: Optional[EvalWrappers] = None) -> List[float]:
    """Greedy/mean-action rollouts, one score per (seed, repeat), seed order.

    Returns undiscounted episode returns.  With a deterministic policy and
    env, repeats are identical; the knob exists for stochastic baselines.
    """
    env = env_factory()
    if eval_wrappers is not None:
        if eval_wrappers.init_mult != 1.0:
            env = InitialStateMultiplierEnv(env, MultiplierConfig(eval_wrappers.init_mult))
        if eval_wrappers.sigma2 != 0.0:
            env = NoisyObservationEnv(env, NoiseConfig(eval_wrappers.sigma2))
    returns: List[float] = []
    for seed in seeds:
        for _ in range(episodes_per_seed):
            policy.begin_episode(seed)
            obs = env.reset(seed)
            total = 0.0
            while True:
                obs, reward, done = env.step(policy.act(obs))
                total += reward
                if done:
                    break
            returns.append(total)
    return returns
