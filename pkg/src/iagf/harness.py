"""Batch experiment engine: scripted operators, episode execution, objective
metrics, and suite aggregation.

Episodes are deterministic given (config, scenario, method, seed); the noise
stream is seeded per (seed, scenario) only, so the three collaboration
methods see identical operator noise and comparisons are paired. All metrics
are pure functions of the persisted log, so results can be recomputed from
disk bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import math
import zlib
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import SimConfig
from .pipeline import METHODS, SharedAutonomySim, TickRecord

LOG_SCHEMA_VERSION = 1


class ProgressTracker:
    """Scenario progress as a pure state machine over end-effector positions.

    The target advances when the position crosses the switching line; the
    first crossing must leave the starting side, later ones alternate. A
    hysteresis band debounces jitter right on the line.
    """

    def __init__(
        self,
        n_targets: int,
        line_point: Sequence[float],
        line_normal: Sequence[float],
        hysteresis: float = 0.01,
    ):
        self.n_targets = n_targets
        self.p = np.asarray(line_point, dtype=float)
        n = np.asarray(line_normal, dtype=float)
        self.n = n / float(np.hypot(n[0], n[1]))
        self.hysteresis = hysteresis
        self.index = 0
        self._from_sign = 0.0
        self._armed = True

    def side(self, x: np.ndarray) -> float:
        return float((np.asarray(x, dtype=float) - self.p) @ self.n)

    def update(self, x: np.ndarray) -> int:
        s = self.side(x)
        if self._from_sign == 0.0:
            self._from_sign = 1.0 if s >= 0.0 else -1.0
        if self.index < self.n_targets - 1:
            if self._armed and s * self._from_sign < 0.0:
                self.index += 1
                self._from_sign = -self._from_sign
                self._armed = False
            elif not self._armed and s * self._from_sign > self.hysteresis:
                self._armed = True
        return self.index


class ScriptedOperator:
    """Noisy proportional operator heading for the current scenario target."""

    def __init__(self, cfg: SimConfig, scenario: str, rng: np.random.Generator):
        self.cfg = cfg
        self.scenario = scenario
        self.sequence = cfg.goal_sequence(scenario)
        self.rng = rng
        ws = cfg.workspace
        self.tracker = ProgressTracker(
            len(self.sequence), ws.line_point, ws.line_normal, ws.line_hysteresis
        )
        self.goals = {g: np.asarray(p, dtype=float) for g, p in ws.goals.items()}
        self.gain = cfg.operator.gain
        self.step_max = cfg.inference.step_max
        self.sigma_rad = math.radians(cfg.operator.noise_bearing_deg)
        self.sigma_m = cfg.operator.noise_additive_m

    @property
    def target_index(self) -> int:
        return self.tracker.index

    @property
    def target_id(self) -> str:
        return self.sequence[self.tracker.index]

    def command(self, x: np.ndarray) -> np.ndarray:
        self.tracker.update(x)
        vec = self.gain * (self.goals[self.target_id] - np.asarray(x, dtype=float))
        n = float(np.hypot(vec[0], vec[1]))
        if n > self.step_max:
            vec = vec * (self.step_max / n)
        # draw both noise terms every tick so the stream stays aligned across
        # configurations that enable either one
        theta = float(self.rng.standard_normal()) * self.sigma_rad
        extra = self.rng.standard_normal(2) * self.sigma_m
        c, s = math.cos(theta), math.sin(theta)
        vec = np.array([c * vec[0] - s * vec[1], s * vec[0] + c * vec[1]]) + extra
        return vec


def episode_rng(seed: int, scenario: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(scenario.encode())])


@dataclass
class EpisodeResult:
    completion_time: float
    disagreement: float
    alignment_time: float
    min_manipulability: float
    success: bool
    meta: dict
    records: list = field(default_factory=list)

    def metrics_dict(self) -> dict:
        return {
            "completion_time": self.completion_time,
            "disagreement": self.disagreement,
            "alignment_time": self.alignment_time,
            "min_manipulability": self.min_manipulability,
            "success": self.success,
        }


def _episode_meta(cfg: SimConfig, scenario: str, method: str, seed: int) -> dict:
    sequence = cfg.goal_sequence(scenario)
    return {
        "kind": "meta",
        "schema": LOG_SCHEMA_VERSION,
        "scenario": scenario,
        "method": method,
        "seed": seed,
        "goal_ids": sorted(cfg.workspace.goals),
        "goal_sequence": sequence,
        "final_goal": list(cfg.workspace.goals[sequence[-1]]),
        "dt": cfg.impedance.dt,
        "config": cfg.to_dict(),
    }


def run_episode(
    cfg: SimConfig,
    scenario: str,
    method: str,
    seed: int,
    log_path: Optional[str | Path] = None,
) -> EpisodeResult:
    """Run one closed-loop episode until grasp success or timeout."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    sim = SharedAutonomySim(cfg, method)
    op = ScriptedOperator(cfg, scenario, episode_rng(seed, scenario))
    ep = cfg.episode
    final_goal = np.asarray(cfg.workspace.goals[op.sequence[-1]], dtype=float)
    hold_needed = max(1, round(ep.t_hold / cfg.impedance.dt))
    max_ticks = round(ep.t_max / cfg.impedance.dt)
    records: list[TickRecord] = []
    hold = 0
    for _ in range(max_ticks):
        a_h = op.command(sim.state.x)
        rec = sim.tick(a_h)
        records.append(rec)
        on_final = op.target_index == len(op.sequence) - 1
        dist = float(np.hypot(rec.x[0] - final_goal[0], rec.x[1] - final_goal[1]))
        hold = hold + 1 if (on_final and dist < ep.r_grasp) else 0
        if hold >= hold_needed:
            break
    meta = _episode_meta(cfg, scenario, method, seed)
    if log_path is not None:
        write_log(log_path, meta, records)
    return episode_result_from_log(meta, records)


# ---------------------------------------------------------------------------
# metrics (pure functions of the log)
# ---------------------------------------------------------------------------

def metric_disagreement(records: Sequence[TickRecord]) -> float:
    """One minus the mean cosine similarity between human and robot commands."""
    if not records:
        raise ValueError("empty log")
    total = 0.0
    count = 0
    for r in records:
        nh = float(np.hypot(r.a_h[0], r.a_h[1]))
        ng = float(np.hypot(r.a_r[0], r.a_r[1]))
        if nh < 1e-9 or ng < 1e-9:
            continue
        total += float(r.a_h @ r.a_r) / (nh * ng)
        count += 1
    if count == 0:
        return 0.0
    return 1.0 - total / count


def metric_alignment_time(
    records: Sequence[TickRecord],
    goal: np.ndarray,
    r_align: float,
    dt: float,
    success_index: Optional[int] = None,
) -> float:
    """Total time spent within r_align of the goal up to the success tick."""
    goal = np.asarray(goal, dtype=float)
    end = len(records) if success_index is None else success_index + 1
    count = 0
    for r in records[:end]:
        if float(np.hypot(r.x[0] - goal[0], r.x[1] - goal[1])) < r_align:
            count += 1
    return count * dt


def metric_min_manipulability(records: Sequence[TickRecord]) -> float:
    if not records:
        raise ValueError("empty log")
    return min(r.m for r in records)


def detect_success(meta: dict, records: Sequence[TickRecord]) -> tuple[bool, Optional[int]]:
    """Re-derive the grasp outcome from the log: scenario progress is replayed
    over the logged positions, then the hold predicate is applied."""
    cfg = SimConfig.from_dict(meta["config"])
    ws = cfg.workspace
    sequence = meta["goal_sequence"]
    tracker = ProgressTracker(
        len(sequence), ws.line_point, ws.line_normal, ws.line_hysteresis
    )
    final_goal = np.asarray(meta["final_goal"], dtype=float)
    hold_needed = max(1, round(cfg.episode.t_hold / meta["dt"]))
    hold = 0
    for i, r in enumerate(records):
        idx = tracker.update(r.x)
        on_final = idx == len(sequence) - 1
        dist = float(np.hypot(r.x[0] - final_goal[0], r.x[1] - final_goal[1]))
        hold = hold + 1 if (on_final and dist < cfg.episode.r_grasp) else 0
        if hold >= hold_needed:
            return True, i
    return False, None


def episode_result_from_log(meta: dict, records: Sequence[TickRecord]) -> EpisodeResult:
    """All objective metrics, recomputed purely from a persisted log."""
    cfg = SimConfig.from_dict(meta["config"])
    dt = meta["dt"]
    success, idx = detect_success(meta, records)
    completion = (idx + 1) * dt if success else len(records) * dt
    return EpisodeResult(
        completion_time=completion,
        disagreement=metric_disagreement(records),
        alignment_time=metric_alignment_time(
            records, meta["final_goal"], cfg.episode.r_align, dt, idx
        ),
        min_manipulability=metric_min_manipulability(records),
        success=success,
        meta=meta,
        records=list(records),
    )


# ---------------------------------------------------------------------------
# log persistence (JSONL, one tick per line after a meta line)
# ---------------------------------------------------------------------------

def write_log(path: str | Path, meta: dict, records: Sequence[TickRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
        for r in records:
            d = {"kind": "tick"}
            d.update(r.to_dict())
            f.write(json.dumps(d, sort_keys=True, separators=(",", ":")) + "\n")


def read_log(path: str | Path) -> tuple[dict, list[TickRecord]]:
    meta = None
    records: list[TickRecord] = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if d.get("kind") == "meta":
                meta = d
            elif d.get("kind") == "tick":
                records.append(TickRecord.from_dict(d))
    if meta is None:
        raise ValueError(f"log {path} has no meta line")
    return meta, records


# ---------------------------------------------------------------------------
# suite execution
# ---------------------------------------------------------------------------

METRIC_NAMES = ("completion_time", "disagreement", "alignment_time", "min_manipulability")


def _run_cell_episode(args) -> dict:
    cfg_dict, scenario, method, seed = args
    cfg = SimConfig.from_dict(cfg_dict)
    try:
        res = run_episode(cfg, scenario, method, seed)
        row = {"scenario": scenario, "method": method, "seed": seed, "error": ""}
        row.update(res.metrics_dict())
        return row
    except Exception as exc:  # noqa: BLE001 - suite must not abort
        return {"scenario": scenario, "method": method, "seed": seed, "error": str(exc)}


def run_suite(
    cfg: SimConfig,
    scenarios: Sequence[str],
    methods: Sequence[str],
    seeds: Sequence[int],
    out_dir: Optional[str | Path] = None,
    jobs: int = 1,
) -> dict:
    """Cross-product execution with per-cell aggregation.

    Returns {"episodes": [...], "aggregates": [...]}; writes results.csv and
    results.json (same numbers) when out_dir is given. Per-episode failures
    are recorded, not raised.
    """
    tasks = [
        (cfg.to_dict(), sc, me, int(se))
        for sc in scenarios
        for me in methods
        for se in seeds
    ]
    if jobs > 1:
        with get_context("spawn").Pool(jobs) as pool:
            episodes = pool.map(_run_cell_episode, tasks)
    else:
        episodes = [_run_cell_episode(t) for t in tasks]

    aggregates = []
    for sc in scenarios:
        for me in methods:
            rows = [
                r for r in episodes
                if r["scenario"] == sc and r["method"] == me and not r["error"]
            ]
            agg = {"scenario": sc, "method": me, "n": len(rows)}
            for name in METRIC_NAMES:
                vals = np.array([r[name] for r in rows]) if rows else np.array([])
                agg[f"{name}_mean"] = float(vals.mean()) if rows else float("nan")
                agg[f"{name}_std"] = float(vals.std()) if rows else float("nan")
            agg["success_rate"] = (
                float(np.mean([1.0 if r["success"] else 0.0 for r in rows])) if rows else float("nan")
            )
            aggregates.append(agg)
    result = {"episodes": episodes, "aggregates": aggregates}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.json", "w") as f:
            json.dump(result, f, sort_keys=True, indent=1)
        with open(out / "results.csv", "w", newline="") as f:
            cols = list(aggregates[0].keys()) if aggregates else []
            w = csv.writer(f)
            w.writerow(cols)
            for agg in aggregates:
                w.writerow([repr(agg[c]) if isinstance(agg[c], float) else agg[c] for c in cols])
    return result
