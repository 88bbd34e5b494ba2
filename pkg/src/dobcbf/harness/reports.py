"""Report containers and machine-readable writers.

Metric files are byte-reproducible: floats are written with shortest
round-trip repr, rows are ordered by episode index, and wall-clock numbers
live under a separate ``timing`` key that reproducibility comparisons drop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class BlockStats:
    first_episode: int
    last_episode: int
    episodes: int
    violations: int
    relaxations: int

    @property
    def violation_rate_pct(self) -> float:
        return 100.0 * self.violations / self.episodes if self.episodes else 0.0


@dataclass
class MetricsReport:
    config: dict
    episodes: list            # per-episode row dicts, ordered by index
    blocks: list              # BlockStats
    qp_relaxation_count: int
    violations_total: int
    estimation: dict          # summary stats of per-episode estimation error
    invariants: dict          # accounting checks evaluated on this run
    timing: dict              # wall clock only; excluded from reproducibility

    @property
    def violation_rate_per_block(self) -> list:
        return [b.violation_rate_pct for b in self.blocks]

    @property
    def per_episode_min_h(self) -> list:
        return [row["min_h"] for row in self.episodes]


def make_blocks(rows: list, block_size: int) -> list:
    blocks = []
    for start in range(0, len(rows), block_size):
        chunk = rows[start:start + block_size]
        blocks.append(BlockStats(
            first_episode=start,
            last_episode=start + len(chunk) - 1,
            episodes=len(chunk),
            violations=sum(int(r["violation"]) for r in chunk),
            relaxations=sum(int(r["relaxations"]) for r in chunk),
        ))
    return blocks


def check_invariants(rows: list, blocks: list, sample_period: float) -> dict:
    """Accounting identities reported alongside every run."""
    block_sum = sum(b.violations for b in blocks)
    total = sum(int(r["violation"]) for r in rows)
    unexplained = []
    for r in rows:
        if r["violation"]:
            early = (r["first_violation_t"] is not None
                     and r["first_violation_t"] < sample_period)
            if r["relaxations"] == 0 and not early:
                unexplained.append(r["episode"])
    return {
        "block_sum_equals_total": block_sum == total,
        "violations_explained_by_relaxation_or_first_interval": not unexplained,
        "unexplained_violation_episodes": unexplained,
    }


EPISODE_COLUMNS = ("episode", "seed", "steps", "violation", "min_h",
                   "first_violation_t", "relaxations", "filter_active_steps",
                   "total_reward", "mean_est_err", "max_est_err")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_episodes_csv(rows: list, path: Path) -> None:
    lines = [",".join(EPISODE_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in EPISODE_COLUMNS))
    path.write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_summary_json(report: MetricsReport, path: Path) -> None:
    payload = {
        "config": report.config,
        "blocks": [{
            "episodes": f"{b.first_episode}-{b.last_episode}",
            "count": b.episodes,
            "violations": b.violations,
            "violation_rate_pct": b.violation_rate_pct,
            "relaxations": b.relaxations,
        } for b in report.blocks],
        "violations_total": report.violations_total,
        "qp_relaxation_count": report.qp_relaxation_count,
        "estimation": report.estimation,
        "invariants": report.invariants,
        "timing": report.timing,
    }
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def write_transitions_ndjson(episede_transitions: list, path: Path) -> None:
    """One JSON object per line; schema documented in the README."""
    with path.open("w") as fh:
        for episode, transitions in episede_transitions:
            for step, tr in enumerate(transitions):
                fh.write(json.dumps({
                    "episode": episode,
                    "step": step,
                    "t": tr.t,
                    "x": [float(v) for v in tr.x],
                    "u_rl": [float(v) for v in tr.u_rl],
                    "u_safe": [float(v) for v in tr.u_safe],
                    "x_next": [float(v) for v in tr.x_next],
                    "reward": tr.reward,
                    "filter_active": tr.filter_active,
                    "slack_used": tr.slack_used,
                }, separators=(",", ":")) + "\n")


def write_table_csv(columns: list, rows: list, path: Path) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
