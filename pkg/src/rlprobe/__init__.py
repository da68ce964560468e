"""rlprobe: seed-separated generalization and memorization probes for deep RL.

A self-contained laboratory for measuring the train/test seed generalization
gap, running randomized-reward memorization tests, and sweeping evaluation
robustness (observation noise, initial-state expansion) over natively
implemented control and image-exploration environments with DQN and PPO
agents built on a minimal numpy network core.
"""

from .core import (
    Continuous,
    Discrete,
    Env,
    EnvSpec,
    Flat,
    Image,
    Observation,
    SeedProtocol,
    Transition,
    make_protocol,
)
from .rng import RandomStream, rng_stream

__version__ = "0.1.0"
