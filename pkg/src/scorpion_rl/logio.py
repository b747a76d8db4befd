"""Trajectory CSV and training-metrics JSONL formats.

Both formats are append-only rows with fixed field order so that repeated
runs of the same configuration produce byte-identical files. Floats are
written with repr-level precision; nothing is rounded.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np

TRAJECTORY_COLUMNS = (
    "step", "t_sec", "x", "y", "roll", "pitch", "yaw",
    "m_left", "m_right", "tail", "reward", "wp_x", "wp_y",
)

METRICS_KEYS = (
    "iter", "mean_return", "policy_loss", "value_loss", "entropy",
    "mean_abs_ratio_dev",
)


@dataclass
class TrajectoryLog:
    """One rollout as column arrays keyed by TRAJECTORY_COLUMNS."""

    data: Dict[str, np.ndarray]

    def __post_init__(self):
        if tuple(self.data.keys()) != TRAJECTORY_COLUMNS:
            raise ValueError(f"trajectory columns must be {TRAJECTORY_COLUMNS}")
        lengths = {len(v) for v in self.data.values()}
        if len(lengths) > 1:
            raise ValueError("trajectory columns have mismatched lengths")

    @classmethod
    def from_rows(cls, rows: List[tuple]) -> "TrajectoryLog":
        arr = np.asarray(rows, dtype=float).reshape(-1, len(TRAJECTORY_COLUMNS))
        data = {name: arr[:, i].copy() for i, name in enumerate(TRAJECTORY_COLUMNS)}
        data["step"] = data["step"].astype(int)
        return cls(data)

    def __len__(self) -> int:
        return len(self.data["step"])

    def dist_to_waypoint(self) -> np.ndarray:
        """Per-step planar distance to the waypoint active at that step."""
        return np.hypot(self.data["x"] - self.data["wp_x"],
                        self.data["y"] - self.data["wp_y"])

    def write_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRAJECTORY_COLUMNS)
            step = self.data["step"]
            cols = [self.data[name] for name in TRAJECTORY_COLUMNS[1:]]
            for i in range(len(self)):
                writer.writerow([int(step[i])] + [repr(float(c[i])) for c in cols])


def read_trajectory_csv(path) -> TrajectoryLog:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRAJECTORY_COLUMNS:
            raise ValueError(f"unexpected trajectory header {header}")
        rows = [tuple(float(v) for v in row) for row in reader]
    return TrajectoryLog.from_rows(rows)


def metrics_line(row: dict) -> str:
    """Serialize one training record with the fixed key order."""
    missing = [k for k in METRICS_KEYS if k not in row]
    if missing:
        raise ValueError(f"metrics record missing keys {missing}")
    ordered = {k: row[k] for k in METRICS_KEYS}
    for k, v in ordered.items():
        if isinstance(v, float) and not math.isfinite(v):
            raise ValueError(f"metrics field {k} is not finite")
    return json.dumps(ordered)


def write_metrics(path, rows: List[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(metrics_line(row) + "\n")


def read_metrics(path) -> List[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
