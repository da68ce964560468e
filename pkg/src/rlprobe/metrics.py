"""Append-only experiment metrics and their CSV serialization.

One record per logged episode return, keyed by run id, cumulative environment
step, episode index, seed, train/test role, and a JSON snapshot of the active
wrapper settings.  The CSV layout puts the JSON snapshot last so the file
needs no quoting: readers split on the first six commas only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional

CSV_HEADER = "run_id,step,episode,seed,role,return,wrapper_json"


@dataclass(frozen=True)
class MetricsRecord:
    run_id: str
    wall_step: int
    episode: int
    seed: int
    role: str  # "train" or "test"
    ret: float
    wrapper: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.role not in ("train", "test"):
            raise ValueError(f"role must be train or test, got {self.role!r}")
        if not math.isfinite(self.ret):
            raise ValueError(f"non-finite return {self.ret!r} in metrics record")
        if "," in self.run_id:
            raise ValueError("run_id must not contain commas")

    def wrapper_json(self) -> str:
        return json.dumps(self.wrapper, sort_keys=True, separators=(",", ":"))

    def sort_key(self):
        return (self.run_id, self.wall_step, self.episode, self.role, self.seed,
                self.wrapper_json())


class MetricsLog:
    """Append-only list of records with deterministic serialization order."""

    def __init__(self, records: Optional[Iterable[MetricsRecord]] = None):
        self.records: List[MetricsRecord] = list(records or [])

    def append(self, record: MetricsRecord) -> None:
        self.records.append(record)

    def extend(self, other: "MetricsLog") -> None:
        self.records.extend(other.records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def filter(self, *, run_id: Optional[str] = None, role: Optional[str] = None,
               phase: Optional[str] = None) -> "MetricsLog":
        out = []
        for rec in self.records:
            if run_id is not None and rec.run_id != run_id:
                continue
            if role is not None and rec.role != role:
                continue
            if phase is not None and rec.wrapper.get("phase") != phase:
                continue
            out.append(rec)
        return MetricsLog(out)

    def run_ids(self):
        seen = []
        for rec in self.records:
            if rec.run_id not in seen:
                seen.append(rec.run_id)
        return seen


def _format_return(value: float) -> str:
    # repr round-trips doubles exactly, keeping serial reruns byte-identical
    return repr(float(value))


def write_metrics(log: MetricsLog, path) -> None:
    """CSV with records sorted by a total key, so any run order serializes
    to identical bytes."""
    lines = [CSV_HEADER]
    for rec in sorted(log.records, key=MetricsRecord.sort_key):
        lines.append(
            f"{rec.run_id},{rec.wall_step},{rec.episode},{rec.seed},{rec.role},"
            f"{_format_return(rec.ret)},{rec.wrapper_json()}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class MetricsFormatError(ValueError):
    pass


def read_metrics(path) -> MetricsLog:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise MetricsFormatError(f"{path}: missing metrics header")
    log = MetricsLog()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",", 6)
        if len(parts) != 7:
            raise MetricsFormatError(f"{path}:{lineno}: expected 7 fields")
        run_id, step, episode, seed, role, ret, wrapper_json = parts
        log.append(MetricsRecord(
            run_id=run_id,
            wall_step=int(step),
            episode=int(episode),
            seed=int(seed),
            role=role,
            ret=float(ret),
            wrapper=json.loads(wrapper_json),
        ))
    return log
