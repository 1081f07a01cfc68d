"""Geometry, state and behavior types shared across the package.

Everything here is immutable value data. Arrays held by these types are marked
read-only on construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

DT = 0.1
HISTORY = 5
N_BEAMS = 72
MAX_RANGE = 10.0
V_MAX = 1.6
OMEGA_MAX = 1.5
PLAN_POINTS = 200


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    if not math.isfinite(theta):
        raise ValueError(f"non-finite angle: {theta!r}")
    a = math.remainder(theta, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    return a


def _frozen_array(values, shape_tail: tuple[int, ...] = ()) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if shape_tail and arr.shape[1:] != shape_tail:
        raise ValueError(f"expected trailing shape {shape_tail}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def sig9(x: float) -> float:
    """Round to 9 significant digits; used for byte-stable serialization."""
    return float(f"{x:.9g}")


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def to_list(self) -> list[float]:
        return [sig9(self.x), sig9(self.y), sig9(self.theta)]

    @classmethod
    def from_list(cls, v: Sequence[float]) -> "Pose2D":
        return cls(v[0], v[1], v[2])


@dataclass(frozen=True)
class Command:
    v: float = 0.0
    omega: float = 0.0

    def clamped(self, v_max: float = V_MAX, omega_max: float = OMEGA_MAX) -> "Command":
        return Command(min(max(self.v, 0.0), v_max), min(max(self.omega, -omega_max), omega_max))

    def to_list(self) -> list[float]:
        return [sig9(self.v), sig9(self.omega)]

    @classmethod
    def from_list(cls, v: Sequence[float]) -> "Command":
        return cls(float(v[0]), float(v[1]))


@dataclass(frozen=True, eq=False)
class RangeScan:
    """Planar range scan; beam 0 along the robot heading, counter-clockwise."""

    ranges: np.ndarray
    max_range: float = MAX_RANGE

    def __post_init__(self):
        r = _frozen_array(self.ranges)
        if r.ndim != 1:
            raise ValueError("ranges must be one-dimensional")
        if np.any(r <= 0.0) or np.any(r > self.max_range):
            raise ValueError("ranges must lie in (0, max_range]")
        object.__setattr__(self, "ranges", r)

    @property
    def n_beams(self) -> int:
        return len(self.ranges)

    def beam_angles(self) -> np.ndarray:
        return beam_angles(self.n_beams)

    def __eq__(self, other):
        return (
            isinstance(other, RangeScan)
            and self.max_range == other.max_range
            and np.array_equal(self.ranges, other.ranges)
        )


def beam_angles(n: int = N_BEAMS) -> np.ndarray:
    """Beam bearings in the robot frame, mirror-exact: angle[k] == -angle[n-k]."""
    step = TWO_PI / n
    k = np.arange(n)
    signed = np.where(k <= n // 2, k, k - n)
    return signed * step


@dataclass(frozen=True, eq=False)
class GlobalPlan:
    """Ordered world-frame waypoints (at least two, consecutive points distinct)."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen_array(self.points)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("plan points must have shape (n, 2)")
        if len(pts) < 2:
            raise ValueError("plan needs at least 2 points")
        steps = np.diff(pts, axis=0)
        if np.any((steps[:, 0] == 0.0) & (steps[:, 1] == 0.0)):
            raise ValueError("consecutive plan points must be distinct")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.points, axis=0).T)))

    def __eq__(self, other):
        return isinstance(other, GlobalPlan) and np.array_equal(self.points, other.points)

    @classmethod
    def from_points(cls, points) -> "GlobalPlan":
        """Build a plan after dropping consecutive duplicates."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if len(pts) == 0:
            raise ValueError("empty plan")
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(np.diff(pts, axis=0) != 0.0, axis=1)
        return cls(pts[keep])


def arc_lengths(points: np.ndarray) -> np.ndarray:
    seg = np.hypot(np.diff(points[:, 0]), np.diff(points[:, 1]))
    return np.concatenate([[0.0], np.cumsum(seg)])


def resample_plan(plan: GlobalPlan, count: int = PLAN_POINTS) -> GlobalPlan:
    """Resample to ``count`` points spaced uniformly by arc length."""
    if count < 2:
        raise ValueError("count must be >= 2")
    pts = plan.points
    s = arc_lengths(pts)
    total = s[-1]
    if not total > 0.0:
        raise ValueError("degenerate plan")
    targets = np.linspace(0.0, total, count)
    out = np.empty((count, 2))
    out[:, 0] = np.interp(targets, s, pts[:, 0])
    out[:, 1] = np.interp(targets, s, pts[:, 1])
    out[0] = pts[0]
    out[-1] = pts[-1]
    if np.any(np.all(np.diff(out, axis=0) == 0.0, axis=1)):
        raise ValueError("degenerate plan: resampled points coincide")
    return GlobalPlan(out)


def to_robot_frame(p, pose: Pose2D):
    """World point(s) -> robot frame. Accepts a pair or an (n, 2) array."""
    arr = np.asarray(p, dtype=np.float64)
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    dx = arr[..., 0] - pose.x
    dy = arr[..., 1] - pose.y
    out = np.stack([c * dx + s * dy, -s * dx + c * dy], axis=-1)
    if arr.ndim == 1:
        return (float(out[0]), float(out[1]))
    return out


def to_world_frame(p, pose: Pose2D):
    """Inverse of :func:`to_robot_frame`."""
    arr = np.asarray(p, dtype=np.float64)
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    x = c * arr[..., 0] - s * arr[..., 1] + pose.x
    y = s * arr[..., 0] + c * arr[..., 1] + pose.y
    out = np.stack([x, y], axis=-1)
    if arr.ndim == 1:
        return (float(out[0]), float(out[1]))
    return out


@dataclass(frozen=True, eq=False)
class Observation:
    scan_history: tuple[RangeScan, ...]
    odom_history: tuple[Pose2D, ...]
    last_command: Command
    goal: Pose2D
    stamp: float

    def __post_init__(self):
        object.__setattr__(self, "scan_history", tuple(self.scan_history))
        object.__setattr__(self, "odom_history", tuple(self.odom_history))
        if len(self.scan_history) != len(self.odom_history) or not self.scan_history:
            raise ValueError("scan and odometry histories must have equal, non-zero length")

    @property
    def pose(self) -> Pose2D:
        return self.odom_history[-1]

    @property
    def scan(self) -> RangeScan:
        return self.scan_history[-1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "scans": [[sig9(r) for r in s.ranges] for s in self.scan_history],
            "max_range": self.scan_history[0].max_range,
            "odom": [p.to_list() for p in self.odom_history],
            "last_command": self.last_command.to_list(),
            "goal": self.goal.to_list(),
            "stamp": sig9(self.stamp),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Observation":
        mr = d.get("max_range", MAX_RANGE)
        return cls(
            scan_history=tuple(RangeScan(np.array(s), mr) for s in d["scans"]),
            odom_history=tuple(Pose2D.from_list(p) for p in d["odom"]),
            last_command=Command.from_list(d["last_command"]),
            goal=Pose2D.from_list(d["goal"]),
            stamp=d["stamp"],
        )

    def __eq__(self, other):
        return isinstance(other, Observation) and self.to_dict() == other.to_dict()


@dataclass(frozen=True, eq=False)
class DemoStep:
    obs: Observation
    demo_plan: GlobalPlan
    demo_command: Command

    def to_dict(self) -> dict[str, Any]:
        return {
            "obs": self.obs.to_dict(),
            "demo_plan": [[sig9(x), sig9(y)] for x, y in self.demo_plan.points],
            "demo_command": self.demo_command.to_list(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DemoStep":
        return cls(
            obs=Observation.from_dict(d["obs"]),
            demo_plan=GlobalPlan.from_points(d["demo_plan"]),
            demo_command=Command.from_list(d["demo_command"]),
        )


@dataclass
class Episode:
    scenario_id: str
    seed: int
    steps: list[DemoStep]
    dt: float = DT
    meta: dict[str, Any] = field(default_factory=dict)

    def header(self) -> dict[str, Any]:
        return {"scenario_id": self.scenario_id, "seed": self.seed, "dt": self.dt, **self.meta}

    def dumps(self) -> str:
        """Serialize as JSON Lines: one header line, then one line per step."""
        lines = [json.dumps(self.header(), sort_keys=True, separators=(",", ":"))]
        lines.extend(
            json.dumps(s.to_dict(), sort_keys=True, separators=(",", ":")) for s in self.steps
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Episode":
        it: Iterator[str] = (ln for ln in text.splitlines() if ln.strip())
        header = json.loads(next(it))
        steps = [DemoStep.from_dict(json.loads(ln)) for ln in it]
        meta = {k: v for k, v in header.items() if k not in ("scenario_id", "seed", "dt")}
        return cls(header["scenario_id"], int(header["seed"]), steps, float(header["dt"]), meta)


def stack_points(plans: Iterable[GlobalPlan]) -> np.ndarray:
    return np.stack([p.points for p in plans])
