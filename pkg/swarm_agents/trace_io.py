"""
Trace and Report I/O
====================

Every artifact a run leaves on disk: JSONL step traces and trajectories,
plan files, training curves and summaries as CSV, and the JSON report.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Type, TypeVar, Union

from pydantic import BaseModel

from .hypothesis_engine import Trajectory
from .models import BenchRow, CurveRow, MissionReport, PlanFile, StepLine, TrajectoryLine
from .world_core import StepRecord

PathLike = Union[str, Path]
M = TypeVar("M", bound=BaseModel)


def _ensure_parent(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_jsonl(path: PathLike, lines: Iterable[BaseModel]) -> Path:
    path = _ensure_parent(path)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line.model_dump_json())
            f.write("\n")
    return path


def read_jsonl(path: PathLike, model: Type[M]) -> List[M]:
    with Path(path).open("r", encoding="utf-8") as f:
        return [model.model_validate_json(line) for line in f if line.strip()]


def write_step_trace(path: PathLike, records: Sequence[StepRecord]) -> Path:
    return write_jsonl(path, (record.to_line() for record in records))


def read_step_trace(path: PathLike) -> List[StepLine]:
    return read_jsonl(path, StepLine)


def write_trajectory(path: PathLike, trajectory: Trajectory) -> Path:
    lines = (
        TrajectoryLine(tick=trajectory.start_tick + idx, state=row.tolist())
        for idx, row in enumerate(trajectory.states)
    )
    return write_jsonl(path, lines)


def read_trajectory(path: PathLike) -> Trajectory:
    lines = read_jsonl(path, TrajectoryLine)
    if not lines:
        raise ValueError(f"Empty trajectory file: {path}")
    return Trajectory.from_vectors([line.state for line in lines], start_tick=lines[0].tick)


def collisions_from_trace(lines: Sequence[StepLine]) -> List[Tuple[int, Tuple[int, int]]]:
    """(tick, pair) for every collision in a step trace."""
    return [(line.tick, (pair[0], pair[1])) for line in lines for pair in line.collisions]


def write_plan(path: PathLike, plan: PlanFile) -> Path:
    path = _ensure_parent(path)
    path.write_text(plan.model_dump_json(indent=2), encoding="utf-8")
    return path


def read_plan(path: PathLike) -> PlanFile:
    return PlanFile.model_validate_json(Path(path).read_text(encoding="utf-8"))


def write_csv(path: PathLike, rows: Sequence[BaseModel], footer: Sequence[str] = ()) -> Path:
    path = _ensure_parent(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        if rows:
            fieldnames = list(type(rows[0]).model_fields)
            writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(row.model_dump(mode="json"))
        for line in footer:
            f.write(f"# {line}\n")
    return path


def write_curve(path: PathLike, curve: Sequence[CurveRow]) -> Path:
    return write_csv(path, curve)


def write_bench(path: PathLike, rows: Sequence[BenchRow], slopes: Dict[str, float]) -> Path:
    footer = [f"slope {method} {value:.3f}" for method, value in sorted(slopes.items())]
    return write_csv(path, rows, footer)


def write_report(path: PathLike, report: BaseModel) -> Path:
    path = _ensure_parent(path)
    path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return path


def read_report(path: PathLike) -> MissionReport:
    return MissionReport.model_validate_json(Path(path).read_text(encoding="utf-8"))


def write_summary(path: PathLike, report: MissionReport) -> Path:
    """Single-row CSV digest of a mission report."""
    path = _ensure_parent(path)
    row = {
        "status": report.status,
        "seed": report.seed,
        "verdict": report.verdict.value,
        "distance_a": report.distance_a,
        "distance_s": report.distance_s,
        "divergence_total": report.divergence_total,
        "divergence_max": report.divergence_max,
        "mission_success": report.mission_success,
        "push_only_motion": report.push_only_motion,
        "arrival_ticks": ";".join("" if t is None else str(t) for t in report.arrival_ticks),
        "wall_time_s": f"{report.wall_time_s:.3f}",
    }
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow(row)
    return path
