"""Experiment orchestration: gap metric, sweeps, robustness tables, reports.

The generalization gap of a policy is the mean undiscounted return over the
train-seed initial states minus the mean over the test-seed initial states;
positive values indicate overfitting.  Sweeps vary the number of train seeds
or the reward-randomization probability over several independently seeded
runs and log everything to the metrics CSV.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .agents import (
    DQNConfig,
    EvalWrappers,
    PPOConfig,
    dqn_train,
    evaluate,
    ppo_train,
)
from .core import Discrete, SeedProtocol, make_protocol
from .envs import make_env
from .metrics import MetricsLog, MetricsRecord
from .wrappers import RandomizedRewardEnv, reward_config_for


@dataclass(frozen=True)
class GapReport:
    """Eq.-style train-minus-test gap with across-run dispersion."""

    mean_train_return: float
    mean_test_return: float
    gap: float
    train_returns: tuple
    test_returns: tuple
    run_count: int = 1
    stderr: float = 0.0


def generalization_gap(train_returns: Sequence[float],
                       test_returns: Sequence[float]) -> GapReport:
    """Gap = (1/N) sum train returns - (1/M) sum test returns."""
    if len(train_returns) == 0 or len(test_returns) == 0:
        raise ValueError("gap needs non-empty train and test return lists")
    mean_train = sum(train_returns) / len(train_returns)
    mean_test = sum(test_returns) / len(test_returns)
    return GapReport(
        mean_train_return=mean_train,
        mean_test_return=mean_test,
        gap=mean_train - mean_test,
        train_returns=tuple(train_returns),
        test_returns=tuple(test_returns),
    )


def aggregate_gaps(reports: Sequence[GapReport]) -> GapReport:
    """Combine per-run gap reports into a mean +- standard-error summary."""
    if not reports:
        raise ValueError("no gap reports to aggregate")
    gaps = [r.gap for r in reports]
    n = len(gaps)
    mean_gap = sum(gaps) / n
    stderr = (math.sqrt(sum((g - mean_gap) ** 2 for g in gaps) / (n - 1)) / math.sqrt(n)
              if n > 1 else 0.0)
    return GapReport(
        mean_train_return=sum(r.mean_train_return for r in reports) / n,
        mean_test_return=sum(r.mean_test_return for r in reports) / n,
        gap=mean_gap,
        train_returns=tuple(gaps),
        test_returns=(),
        run_count=n,
        stderr=stderr,
    )


def final_eval_gap(log: MetricsLog, run_id: str) -> GapReport:
    """Gap at the last evaluation pass recorded for one run."""
    evals = log.filter(run_id=run_id, phase="eval")
    if len(evals) == 0:
        raise ValueError(f"run {run_id} has no evaluation records")
    last_step = max(rec.wall_step for rec in evals)
    train = [r.ret for r in evals if r.wall_step == last_step and r.role == "train"]
    test = [r.ret for r in evals if r.wall_step == last_step and r.role == "test"]
    return generalization_gap(train, test)


# ---------------------------------------------------------------------------
# sweep plans and drivers


GAMMA_BY_ENV = {
    "cartpole": 0.995,
    "cartpole-pixels": 0.99,
    "acrobot": 0.99,
    "acrobot-pixels": 0.99,
    "reacher": 0.99,
    "thrower": 0.99,
    "thrower-multi": 0.99,
    "mnist-explore": 0.99,
    "cifar10-explore": 0.99,
}

AGENT_KINDS = ("dqn", "dqn-mb", "ppo", "ppo-mb")


@dataclass(frozen=True)
class SweepPlan:
    seed_counts: tuple = (1, 2, 5, 10, 100)
    p_rand_values: tuple = (0.1, 0.2, 0.5, 1.0)
    sigma2_grid: tuple = (0.0, 1e-4, 5e-4, 1e-3, 2e-3)
    mult_grid: tuple = (1.0, 5.0, 10.0, 20.0, 100.0)
    k_bins: int = 3
    runs: int = 5
    m_test: int = 100
    episodes: int = 500         # dqn budget per run (desk scale)
    total_steps: int = 40_960   # ppo budget per run (desk scale)
    hidden_dim: int = 64        # desk-scale width; 512 reproduces the full config

    def __post_init__(self):
        for name in ("seed_counts", "p_rand_values", "sigma2_grid", "mult_grid"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"sweep axis {name} must be non-empty")
        if self.runs < 1:
            raise ValueError("runs per cell must be >= 1")


def check_compatibility(env_name: str, agent_kind: str, *, data_dir=None) -> None:
    if agent_kind not in AGENT_KINDS:
        raise ValueError(f"unknown agent kind {agent_kind!r}; known: {AGENT_KINDS}")
    env = make_env(env_name, data_dir=data_dir)
    if agent_kind.startswith("dqn") and not isinstance(env.spec.action_spec, Discrete):
        raise ValueError(f"{agent_kind} requires discrete actions but {env_name} is continuous")


def _agent_config(env_name: str, agent_kind: str, plan: SweepPlan):
    gamma = GAMMA_BY_ENV[env_name]
    model_based = agent_kind.endswith("-mb")
    if agent_kind.startswith("dqn"):
        lr = 3e-4 if env_name.endswith("pixels") or env_name.endswith("explore") else 3e-3
        capacity = 100_000 if env_name.endswith("pixels") else 1_000_000
        capacity = min(capacity, max(plan.episodes * 220, 10_000))
        return DQNConfig(lr=lr, gamma=gamma, hidden_dim=plan.hidden_dim,
                         replay_capacity=capacity, model_based=model_based)
    return PPOConfig(gamma=gamma, hidden_dim=plan.hidden_dim, model_based=model_based)


def run_training_cell(
    env_name: str,
    agent_kind: str,
    n_train: int,
    master_seed: int,
    plan: SweepPlan,
    *,
    p_rand: Optional[float] = None,
    data_dir=None,
    run_id: Optional[str] = None,
    config_overrides: Optional[dict] = None,
):
    """One (cell, run) job: train, periodically evaluate, return the log.

    With ``p_rand`` set, training sees the randomized reward while evaluation
    always uses the original reward; the as-seen training returns carry the
    wrapper snapshot for memorization analysis.
    """
    check_compatibility(env_name, agent_kind, data_dir=data_dir)
    protocol = make_protocol(n_train, plan.m_test)
    config = _agent_config(env_name, agent_kind, plan)
    if config_overrides:
        valid = {f for f in config.__dataclass_fields__}
        unknown = set(config_overrides) - valid
        if unknown:
            raise ValueError(f"unknown {type(config).__name__} override(s): {sorted(unknown)}")
        config = replace(config, **config_overrides)

    def plain_factory():
        return make_env(env_name, data_dir=data_dir)

    # every row carries enough of the cell config to re-run it in isolation
    cell = {"env": env_name, "agent": agent_kind, "n": n_train, "run": master_seed}
    train_snapshot = dict(cell)
    if p_rand is not None:
        probe = plain_factory()
        reward_cfg = reward_config_for(probe, plan.k_bins, p_rand)

        def train_factory():
            return RandomizedRewardEnv(make_env(env_name, data_dir=data_dir), reward_cfg)

        train_snapshot.update({"k": plan.k_bins, "p_rand": p_rand})
    else:
        train_factory = plain_factory

    if run_id is None:
        tag = f"-p{p_rand}" if p_rand is not None else ""
        run_id = f"{env_name}-{agent_kind}-N{n_train}{tag}-r{master_seed}"

    if agent_kind.startswith("dqn"):
        policy, log = dqn_train(
            train_factory, protocol, config, plan.episodes,
            master_seed=master_seed, run_id=run_id,
            eval_env_factory=plain_factory, train_snapshot=train_snapshot,
            eval_snapshot=cell,
        )
    else:
        policy, log = ppo_train(
            train_factory, protocol, config, plan.total_steps,
            master_seed=master_seed, run_id=run_id,
            eval_env_factory=plain_factory, train_snapshot=train_snapshot,
            eval_snapshot=cell,
        )
    return policy, log


def _cell_job(args) -> List[MetricsRecord]:
    env_name, agent_kind, n_train, master_seed, plan, p_rand, data_dir = args
    _, log = run_training_cell(env_name, agent_kind, n_train, master_seed, plan,
                               p_rand=p_rand, data_dir=data_dir)
    return log.records


def _run_jobs(jobs_args, jobs: int) -> MetricsLog:
    log = MetricsLog()
    if jobs <= 1:
        for args in jobs_args:
            log.records.extend(_cell_job(args))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for records in pool.map(_cell_job, jobs_args):
                log.records.extend(records)
    # deterministic ordered join: serial and parallel logs serialize identically
    log.records.sort(key=MetricsRecord.sort_key)
    return log


def run_seed_sweep(env_name: str, agent_kind: str, plan: SweepPlan, *,
                   jobs: int = 1, data_dir=None) -> MetricsLog:
    """Train-seed-count axis: every cell runs ``plan.runs`` master seeds."""
    args = [
        (env_name, agent_kind, n, run, plan, None, data_dir)
        for n in plan.seed_counts
        for run in range(plan.runs)
    ]
    return _run_jobs(args, jobs)


def run_random_reward_sweep(env_name: str, agent_kind: str, plan: SweepPlan, *,
                            jobs: int = 1, data_dir=None,
                            seed_counts: Optional[tuple] = None) -> MetricsLog:
    """Randomized-reward axis: train on the wrapped reward, evaluate on the
    original one."""
    counts = seed_counts if seed_counts is not None else plan.seed_counts
    args = [
        (env_name, agent_kind, n, run, plan, p_rand, data_dir)
        for n in counts
        for p_rand in plan.p_rand_values
        for run in range(plan.runs)
    ]
    return _run_jobs(args, jobs)


# ---------------------------------------------------------------------------
# robustness evaluation


@dataclass(frozen=True)
class RobustnessTable:
    """Mean test returns per perturbation level, one row per label."""

    kind: str  # "sigma2" or "mult"
    levels: tuple
    rows: tuple  # of (label, tuple_of_means)

    def render(self) -> str:
        width = 12
        header = "".join(f"{self.kind}={lvl:<{width - len(self.kind) - 1}g}"
                         for lvl in self.levels)
        lines = [f"{'row':<16}" + header]
        for label, means in self.rows:
            lines.append(f"{label:<16}" + "".join(f"{m:<{width}.2f}" for m in means))
        return "\n".join(lines)


def run_robustness_eval(policy, env_name: str, sigma2_grid: Sequence[float],
                        mult_grid: Sequence[float], *, protocol: Optional[SeedProtocol] = None,
                        data_dir=None) -> Dict[str, Dict[float, List[float]]]:
    """Evaluate one policy on the test seeds under each perturbation level.

    Returns per-seed test returns keyed by axis kind and level; multiplier
    evaluation raises for image-observation envs.
    """
    protocol = protocol or make_protocol(1)

    def factory():
        return make_env(env_name, data_dir=data_dir)

    out: Dict[str, Dict[float, List[float]]] = {"sigma2": {}, "mult": {}}
    for sigma2 in sigma2_grid:
        returns = evaluate(policy, factory, protocol.test_seeds,
                           eval_wrappers=EvalWrappers(sigma2=sigma2))
        out["sigma2"][float(sigma2)] = returns
    for m in mult_grid:
        returns = evaluate(policy, factory, protocol.test_seeds,
                           eval_wrappers=EvalWrappers(init_mult=m))
        out["mult"][float(m)] = returns
    return out


def robustness_table(kind: str, per_policy: Dict[str, Dict[float, List[float]]]) -> RobustnessTable:
    """Assemble rows (e.g. per train-seed count) into the paper-shaped table."""
    levels = None
    rows = []
    for label, grids in per_policy.items():
        cells = grids[kind]
        if levels is None:
            levels = tuple(sorted(cells))
        rows.append((label, tuple(float(np.mean(cells[lvl])) for lvl in levels)))
    return RobustnessTable(kind=kind, levels=levels or (), rows=tuple(rows))


# ---------------------------------------------------------------------------
# report generation


def _curve(records: List[MetricsRecord]) -> Tuple[List[int], List[float]]:
    by_step: Dict[int, List[float]] = {}
    for rec in records:
        by_step.setdefault(rec.wall_step, []).append(rec.ret)
    steps = sorted(by_step)
    return steps, [float(np.mean(by_step[s])) for s in steps]


def emit_report(log: MetricsLog, out_dir) -> List[Path]:
    """Render per-run train/test/gap curves as SVG plus a text summary table."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    summary_rows = []
    for run_id in log.run_ids():
        evals = log.filter(run_id=run_id, phase="eval")
        if len(evals) == 0:
            continue
        train_steps, train_means = _curve([r for r in evals if r.role == "train"])
        test_steps, test_means = _curve([r for r in evals if r.role == "test"])
        gaps = [tr - te for tr, te in zip(train_means, test_means)]

        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
        ax1.plot(train_steps, train_means, label="train seeds")
        ax1.plot(test_steps, test_means, label="test seeds")
        ax1.set_xlabel("environment steps")
        ax1.set_ylabel("mean return")
        ax1.set_title(run_id)
        ax1.legend(fontsize=8)
        ax2.plot(train_steps, gaps, color="tab:red")
        ax2.axhline(0.0, color="gray", linewidth=0.8)
        ax2.set_xlabel("environment steps")
        ax2.set_ylabel("gap (train - test)")
        fig.tight_layout()
        path = out_dir / f"{run_id}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)

        report = final_eval_gap(log, run_id)
        summary_rows.append((run_id, report.mean_train_return,
                             report.mean_test_return, report.gap))

    lines = [f"{'run_id':<40}{'train':>12}{'test':>12}{'gap':>12}"]
    for run_id, tr, te, gap in summary_rows:
        lines.append(f"{run_id:<40}{tr:>12.2f}{te:>12.2f}{gap:>12.2f}")
    summary = out_dir / "summary.txt"
    summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(summary)
    return written
