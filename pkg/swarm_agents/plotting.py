"""
Trajectory plots as deterministic SVG.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .config import PlotSpec  # noqa: E402
from .exceptions import TrajectoryError  # noqa: E402
from .hypothesis_engine import Trajectory  # noqa: E402

LINESTYLES = {"real": "-", "pred_a": "--", "pred_s": ":"}
GOAL_STYLE = dict(marker="s", s=80, facecolors="none", edgecolors="black", linewidths=1.5)
# open dotted circles
COLLISION_STYLE = dict(marker="o", s=140, facecolors="none", edgecolors="black", linestyles="dotted", linewidths=1.2)


def _collision_points(trajectory: Trajectory, collisions) -> np.ndarray:
    """Midpoints of colliding pairs; ticks are world ticks, offset by the trajectory start_tick."""
    points = []
    for tick, (i, j) in collisions:
        row = tick - trajectory.start_tick
        if 0 <= row < len(trajectory):
            points.append((trajectory.agent_path(i)[row] + trajectory.agent_path(j)[row]) / 2.0)
    return np.array(points).reshape(-1, 2)


def emit_plot(
    trajectories: Mapping[str, Trajectory],
    spec: PlotSpec,
    path: Union[str, Path],
    goals=None,
    collisions: Optional[Sequence[Tuple[int, Tuple[int, int]]]] = None,
    arena_size: Optional[float] = None,
) -> Path:
    """Draw every series named in spec.series, one line per agent, and save as SVG."""
    selected = {name: trajectories[name] for name in spec.series if name in trajectories}
    if not selected:
        raise TrajectoryError(f"None of the series {list(spec.series)} were supplied")
    if any(len(traj) == 0 for traj in selected.values()):
        raise TrajectoryError("Cannot plot an empty trajectory")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with plt.rc_context({"svg.hashsalt": "swarm", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 6))
        for name, traj in selected.items():
            color = spec.colors.get(name, "black")
            for agent in range(traj.n_agents):
                xy = traj.agent_path(agent)
                label = name if agent == 0 else None
                if len(traj) == 1:
                    ax.plot(xy[:, 0], xy[:, 1], marker="o", linestyle="none", color=color,
                            label=label, gid=f"{name}-agent{agent}")
                else:
                    ax.plot(xy[:, 0], xy[:, 1], linestyle=LINESTYLES.get(name, "-"), color=color,
                            label=label, gid=f"{name}-agent{agent}")
                    ax.plot(xy[0, 0], xy[0, 1], marker="o", markersize=4, color=color)

        if spec.show_goals and goals is not None:
            goals = np.asarray(goals, dtype=float).reshape(-1, 2)
            ax.scatter(goals[:, 0], goals[:, 1], zorder=3, gid="goals", **GOAL_STYLE)

        if spec.show_collisions and collisions:
            base = next(iter(selected.values()))
            points = _collision_points(base, collisions)
            if len(points):
                ax.scatter(points[:, 0], points[:, 1], zorder=4, gid="collisions", **COLLISION_STYLE)

        if arena_size is not None:
            ax.set_xlim(0.0, arena_size)
            ax.set_ylim(0.0, arena_size)
        ax.set_aspect("equal")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.legend(loc="upper right")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
