"""Command-line front door: train, sweep, eval, report, fetch-data, selftest.

Configuration comes from an optional TOML file merged with command-line flags
(flags win).  Unknown config keys are fatal, and every run writes its fully
resolved configuration beside its outputs so the run can be reproduced
bit-for-bit in serial mode.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_COMPAT = 4
EXIT_DATA = 5
EXIT_RUNTIME = 6
EXIT_INTERRUPTED = 7

DATA_DIR_ENV = "RLPROBE_DATA_DIR"


class CliError(Exception):
    def __init__(self, code: int, category: str, message: str):
        super().__init__(message)
        self.code = code
        self.category = category


@dataclass
class RunConfig:
    """Fully resolved settings for one training run or sweep."""

    env: str = ""
    agent: str = "dqn"
    train_seeds: int = 1
    test_seeds: int = 100
    episodes: int = 500
    steps: int = 40960
    k_bins: int = 3
    p_rand: float = 0.0
    sigma2: str = "0.0,1e-4,5e-4,1e-3,2e-3"
    init_mult: str = "1,5,10,20,100"
    runs: int = 5
    jobs: int = 1
    seed: int = 0
    out: str = "runs/latest"
    data_dir: str = ""
    gamma: float = -1.0       # -1 resolves to the per-env default
    lr: float = -1.0          # -1 resolves to the per-agent default
    hidden_dim: int = 64
    window: int = 5


_FLAG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


def parse_config(path: Optional[str], flag_values: dict) -> RunConfig:
    """TOML file merged with explicit flags; flags win; unknown keys fatal."""
    values: dict = {}
    if path:
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise CliError(EXIT_CONFIG, "config", f"cannot read config file: {exc}")
        try:
            parsed = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise CliError(EXIT_CONFIG, "config", f"{path}: {exc}")
        unknown = set(parsed) - _FLAG_KEYS
        if unknown:
            raise CliError(EXIT_CONFIG, "config",
                           f"{path}: unknown config key(s): {', '.join(sorted(unknown))}")
        values.update(parsed)
    values.update({k: v for k, v in flag_values.items() if v is not None})
    try:
        config = RunConfig(**values)
    except TypeError as exc:
        raise CliError(EXIT_CONFIG, "config", str(exc))
    if not config.data_dir:
        config = dataclasses.replace(config, data_dir=os.environ.get(DATA_DIR_ENV, ""))
    return config


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return '"' + str(value).replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_resolved_config(config: RunConfig, path) -> None:
    lines = [f"{field.name} = {_toml_value(getattr(config, field.name))}"
             for field in dataclasses.fields(config)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_grid(text: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise CliError(EXIT_CONFIG, "config", f"bad numeric grid: {text!r}")


def _resolve(config: RunConfig):
    """Fill per-env/per-agent defaults and validate compatibility."""
    from .harness import GAMMA_BY_ENV, SweepPlan, check_compatibility

    if not config.env:
        raise CliError(EXIT_CONFIG, "config", "no environment selected (--env)")
    if config.env not in GAMMA_BY_ENV:
        raise CliError(EXIT_CONFIG, "config", f"unknown environment {config.env!r}")
    data_dir = config.data_dir or None
    try:
        check_compatibility(config.env, config.agent, data_dir=data_dir)
    except ValueError as exc:
        message = str(exc)
        if "data" in message or isinstance(exc, FileNotFoundError):
            raise CliError(EXIT_DATA, "data", message)
        raise CliError(EXIT_COMPAT, "compat", message)
    except FileNotFoundError as exc:
        raise CliError(EXIT_DATA, "data", str(exc))
    if config.gamma < 0:
        config = dataclasses.replace(config, gamma=GAMMA_BY_ENV[config.env])
    if config.lr < 0:
        pixelish = config.env.endswith("pixels") or config.env.endswith("explore")
        default_lr = (3e-4 if pixelish else 3e-3) if config.agent.startswith("dqn") else 3e-4
        config = dataclasses.replace(config, lr=default_lr)
    plan = SweepPlan(
        seed_counts=(config.train_seeds,),
        k_bins=config.k_bins,
        runs=config.runs,
        m_test=config.test_seeds,
        episodes=config.episodes,
        total_steps=config.steps,
        hidden_dim=config.hidden_dim,
        sigma2_grid=_parse_grid(config.sigma2),
        mult_grid=_parse_grid(config.init_mult),
    )
    return config, plan


def _cmd_train(config: RunConfig) -> int:
    from .agents import save_policy
    from .harness import run_training_cell
    from .metrics import write_metrics

    config, plan = _resolve(config)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(config, out_dir / "config.resolved.toml")
    overrides = {"gamma": config.gamma, "lr": config.lr}
    policy, log = run_training_cell(
        config.env, config.agent, config.train_seeds, config.seed, plan,
        p_rand=config.p_rand if config.p_rand > 0 else None,
        data_dir=config.data_dir or None,
        config_overrides=overrides,
    )
    write_metrics(log, out_dir / "metrics.csv")
    save_policy(out_dir / "policy.ckpt", policy)
    print(f"train: wrote {out_dir / 'metrics.csv'} ({len(log)} records)")
    return EXIT_OK


def _cmd_sweep(config: RunConfig, axis: str) -> int:
    from .harness import run_random_reward_sweep, run_seed_sweep
    from .metrics import write_metrics

    config, plan = _resolve(config)
    plan = dataclasses.replace(plan, seed_counts=_default_seed_axis(config))
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(config, out_dir / "config.resolved.toml")
    csv_path = out_dir / "metrics.csv"
    try:
        if axis == "seeds":
            log = run_seed_sweep(config.env, config.agent, plan, jobs=config.jobs,
                                 data_dir=config.data_dir or None)
        else:
            log = run_random_reward_sweep(config.env, config.agent, plan,
                                          jobs=config.jobs,
                                          data_dir=config.data_dir or None)
    except KeyboardInterrupt:
        (out_dir / "INCOMPLETE").write_text("sweep interrupted\n", encoding="utf-8")
        raise CliError(EXIT_INTERRUPTED, "interrupted", "sweep interrupted; partial outputs kept")
    write_metrics(log, csv_path)
    print(f"sweep: wrote {csv_path} ({len(log)} records)")
    return EXIT_OK


def _default_seed_axis(config: RunConfig) -> tuple:
    if config.train_seeds > 1:
        return (config.train_seeds,)
    return (1, 2, 5, 10, 100)


def _cmd_eval(config: RunConfig, ckpt: str) -> int:
    from .agents import load_policy
    from .core import make_protocol
    from .harness import robustness_table, run_robustness_eval

    config, plan = _resolve(config)
    try:
        policy = load_policy(ckpt)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_DATA, "data", f"cannot load checkpoint {ckpt}: {exc}")
    protocol = make_protocol(max(1, config.train_seeds), config.test_seeds)
    try:
        grids = run_robustness_eval(policy, config.env, plan.sigma2_grid,
                                    plan.mult_grid, protocol=protocol,
                                    data_dir=config.data_dir or None)
    except ValueError as exc:
        raise CliError(EXIT_COMPAT, "compat", str(exc))
    label = f"N={config.train_seeds}"
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    text = []
    for kind in ("sigma2", "mult"):
        table = robustness_table(kind, {label: grids})
        text.append(table.render())
    body = "\n\n".join(text) + "\n"
    (out_dir / "robustness.txt").write_text(body, encoding="utf-8")
    print(body, end="")
    return EXIT_OK


def _cmd_report(csv: str, out: str) -> int:
    from .harness import emit_report
    from .metrics import MetricsFormatError, read_metrics

    try:
        log = read_metrics(csv)
    except (OSError, MetricsFormatError) as exc:
        raise CliError(EXIT_DATA, "data", f"cannot read metrics: {exc}")
    written = emit_report(log, out)
    for path in written:
        print(f"report: wrote {path}")
    return EXIT_OK


def _cmd_fetch_data(config: RunConfig, dataset: str) -> int:
    from .envs.image import CIFAR_FILES, MNIST_FILES, file_sha256

    data_dir = config.data_dir or os.environ.get(DATA_DIR_ENV, "")
    if not data_dir:
        raise CliError(EXIT_DATA, "data",
                       f"no data directory; pass --data-dir or set {DATA_DIR_ENV}")
    wanted = []
    if dataset in ("mnist", "all"):
        for pair in MNIST_FILES.values():
            wanted.extend(pair)
    if dataset in ("cifar10", "all"):
        for names in CIFAR_FILES.values():
            wanted.extend(names)
    missing = []
    for name in wanted:
        path = Path(data_dir) / name
        if path.exists():
            print(f"{name}  sha256={file_sha256(path)}  bytes={path.stat().st_size}  OK")
        else:
            print(f"{name}  MISSING")
            missing.append(name)
    if missing:
        raise CliError(EXIT_DATA, "data",
                       f"{len(missing)} dataset file(s) missing under {data_dir}")
    return EXIT_OK


def _cmd_selftest() -> int:
    import numpy as np

    from . import nn
    from .agents import RandomPolicy
    from .core import make_protocol
    from .envs.arm import ReacherEnv
    from .envs.classic import CartpoleEnv
    from .harness import SweepPlan, final_eval_gap, run_training_cell
    from .metrics import write_metrics
    from .rng import BASELINE, rng_stream
    from .wrappers import (
        InitialStateMultiplierEnv,
        MultiplierConfig,
        NoiseConfig,
        NoisyObservationEnv,
        RandomizedRewardEnv,
        reward_config_for,
    )
    import tempfile

    worst = nn.gradient_check_suite(seed=0, instances=25)
    print(f"selftest: gradient checks worst rel. err = {worst:.3g}")
    if worst >= 1e-5:
        raise CliError(EXIT_RUNTIME, "selftest", f"gradient check failed ({worst:.3g})")

    for env_cls in (CartpoleEnv, ReacherEnv):
        for trial in range(10):
            bare = env_cls()
            wrapped = NoisyObservationEnv(
                InitialStateMultiplierEnv(
                    RandomizedRewardEnv(env_cls(), reward_config_for(env_cls(), 3, 0.0)),
                    MultiplierConfig(1.0),
                ),
                NoiseConfig(0.0),
            )
            policy = RandomPolicy(env_cls.spec.action_spec)
            o1, o2 = bare.reset(trial), wrapped.reset(trial)
            stream = rng_stream(trial, BASELINE)
            while True:
                if not np.array_equal(o1.data, o2.data):
                    raise CliError(EXIT_RUNTIME, "selftest", "wrapper transparency broken")
                policy._stream = stream
                a = policy.act(o1)
                o1, r1, d1 = bare.step(a)
                o2, r2, d2 = wrapped.step(a)
                if r1 != r2 or d1 != d2:
                    raise CliError(EXIT_RUNTIME, "selftest", "wrapper transparency broken")
                if d1:
                    break
    print("selftest: wrapper transparency OK")

    plan = SweepPlan(seed_counts=(2,), runs=1, m_test=5, episodes=10, hidden_dim=16)
    _, log = run_training_cell("cartpole", "dqn", 2, 0, plan)
    with tempfile.TemporaryDirectory() as tmp:
        csv_path = Path(tmp) / "metrics.csv"
        write_metrics(log, csv_path)
        report = final_eval_gap(log, log.run_ids()[0])
        brute = _bruteforce_gap(csv_path, log.run_ids()[0])
        if abs(report.gap - brute) >= 1e-9:
            raise CliError(EXIT_RUNTIME, "selftest",
                           f"gap metric mismatch: {report.gap} vs {brute}")
    print("selftest: generalization-gap oracle OK")
    return EXIT_OK


def _bruteforce_gap(csv_path, run_id: str) -> float:
    """Independent accumulator over the raw CSV bytes (selftest oracle)."""
    rows = []
    with open(csv_path, "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            parts = line.rstrip("\n").split(",", 6)
            if parts[0] == run_id and '"phase":"eval"' in parts[6]:
                rows.append((int(parts[1]), parts[4], float(parts[5])))
    last = max(step for step, _, _ in rows)
    train = [ret for step, role, ret in rows if step == last and role == "train"]
    test = [ret for step, role, ret in rows if step == last and role == "test"]
    return math.fsum(train) / len(train) - math.fsum(test) / len(test)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlprobe",
        description="Seed-separated generalization and memorization probes for deep RL.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--config", help="TOML config file (flags override it)")
        p.add_argument("--env", help="environment name")
        p.add_argument("--agent", choices=("dqn", "dqn-mb", "ppo", "ppo-mb"))
        p.add_argument("--train-seeds", type=int, dest="train_seeds")
        p.add_argument("--test-seeds", type=int, dest="test_seeds")
        p.add_argument("--episodes", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--k-bins", type=int, dest="k_bins")
        p.add_argument("--p-rand", type=float, dest="p_rand")
        p.add_argument("--sigma2", help="comma-separated noise variance grid")
        p.add_argument("--init-mult", dest="init_mult",
                       help="comma-separated initial-state multiplier grid")
        p.add_argument("--runs", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--data-dir", dest="data_dir")
        p.add_argument("--gamma", type=float)
        p.add_argument("--lr", type=float)
        p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
        p.add_argument("--window", type=int)

    add_run_flags(sub.add_parser("train", help="train one cell and checkpoint the policy"))
    sweep = sub.add_parser("sweep", help="run a training-seed or p_rand sweep")
    add_run_flags(sweep)
    sweep.add_argument("--axis", choices=("seeds", "p-rand"), default="seeds")
    ev = sub.add_parser("eval", help="robustness tables from a policy checkpoint")
    add_run_flags(ev)
    ev.add_argument("--ckpt", required=True)
    rep = sub.add_parser("report", help="render CSV metrics to SVG charts and a summary")
    rep.add_argument("--csv", required=True)
    rep.add_argument("--out", default="report")
    fetch = sub.add_parser("fetch-data", help="verify dataset files and print digests")
    fetch.add_argument("--data-dir", dest="data_dir")
    fetch.add_argument("--dataset", choices=("mnist", "cifar10", "all"), default="all")
    sub.add_parser("selftest", help="gradient, wrapper-transparency, and gap oracles")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return _cmd_report(args.csv, args.out)
        if args.command == "selftest":
            return _cmd_selftest()
        if args.command == "fetch-data":
            config = RunConfig(data_dir=args.data_dir or "")
            return _cmd_fetch_data(config, args.dataset)
        flag_values = {k: v for k, v in vars(args).items()
                       if k in _FLAG_KEYS and v is not None}
        config = parse_config(args.config, flag_values)
        if args.command == "train":
            return _cmd_train(config)
        if args.command == "sweep":
            return _cmd_sweep(config, args.axis)
        if args.command == "eval":
            return _cmd_eval(config, args.ckpt)
        raise CliError(EXIT_USAGE, "usage", f"unknown command {args.command!r}")
    except CliError as exc:
        print(f"rlprobe: error: {exc.category}: {exc}", file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        print("rlprobe: error: interrupted: run cancelled", file=sys.stderr)
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
