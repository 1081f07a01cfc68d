"""Geometric planner: Dijkstra on the costmap, path smoothing, and DWA."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, NamedTuple

import numpy as np

from hybridnav import kernels
from hybridnav.core_types import (
    OMEGA_MAX, PLAN_POINTS, V_MAX, Command, GlobalPlan, Observation, arc_lengths, resample_plan,
)
from hybridnav.costmap import (
    DECAY, INSCRIBED_RADIUS, LETHAL, SOCIAL_AMPLITUDE, SOCIAL_SIGMA, Costmap,
    add_social_layer, detect_pedestrians, static_layer,
)


class PlanningError(ValueError):
    """Raised when no usable global plan exists; ``reason`` is a short tag."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class DwaParams:
    v_samples: int = 11
    w_samples: int = 21
    horizon: float = 2.0
    dt: float = 0.1
    w_path: float = 2.0
    w_heading: float = 0.5
    w_clear: float = 0.3
    w_speed: float = 0.4
    v_max: float = V_MAX
    omega_max: float = OMEGA_MAX
    lookahead: float = 1.5
    check_spacing: float = 0.05

    def __post_init__(self):
        if min(self.w_path, self.w_heading, self.w_clear, self.w_speed) < 0:
            raise ValueError("DWA weights must be non-negative")
        if self.v_samples < 2 or self.w_samples < 2:
            raise ValueError("DWA needs at least 2 samples per axis")
        if not (self.horizon > 0 and self.dt > 0 and self.check_spacing > 0):
            raise ValueError("horizon, dt and check_spacing must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def v_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.v_max, self.v_samples)

    def w_grid(self) -> np.ndarray:
        ws = np.linspace(-self.omega_max, self.omega_max, self.w_samples)
        if self.w_samples % 2 == 1:
            ws[self.w_samples // 2] = 0.0
        return ws

    def weights(self) -> np.ndarray:
        return np.array([self.w_path, self.w_heading, self.w_clear, self.w_speed])


@dataclass(frozen=True)
class PlannerConfig:
    inscribed_radius: float = INSCRIBED_RADIUS
    decay: float = DECAY
    cost_divisor: float = 64.0
    social_layer: bool = False
    social_sigma: float = SOCIAL_SIGMA
    social_amplitude: float = SOCIAL_AMPLITUDE
    smooth_iters: int = 50
    smooth_step: float = 0.1
    snap_radius: float = 0.5
    plan_points: int = PLAN_POINTS
    dwa: DwaParams = field(default_factory=DwaParams)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PlannerConfig":
        d = dict(d)
        dwa = DwaParams(**d.pop("dwa", {}))
        return cls(dwa=dwa, **d)


class PlanResult(NamedTuple):
    plan: GlobalPlan
    cost: float
    cells: np.ndarray
    goal_cell: tuple[int, int]


class DwaResult(NamedTuple):
    command: Command
    recovery: bool
    scores: np.ndarray


@lru_cache(maxsize=16)
def _weights(resolution: float, divisor: float) -> np.ndarray:
    w = kernels.edge_weights(resolution, divisor)
    w.setflags(write=False)
    return w


def _snap_goal(cm: Costmap, goal, radius: float) -> tuple[int, int]:
    r0, c0 = cm.cell_of(*goal)
    if cm.in_bounds(r0, c0) and cm.cells[r0, c0] < LETHAL:
        return r0, c0
    k = int(math.ceil(radius / cm.resolution)) + 1
    best = None
    for r in range(r0 - k, r0 + k + 1):
        for c in range(c0 - k, c0 + k + 1):
            if not cm.in_bounds(r, c) or cm.cells[r, c] >= LETHAL:
                continue
            cx, cy = cm.center_of(r, c)
            d2 = (cx - goal[0]) ** 2 + (cy - goal[1]) ** 2
            if d2 > radius * radius:
                continue
            key = (d2, r * cm.shape[1] + c)
            if best is None or key < best[0]:
                best = (key, (r, c))
    if best is None:
        raise PlanningError("goal in lethal cell")
    return best[1]


def grid_search(cm: Costmap, start_cell, goal_cell, divisor: float = 64.0):
    """Dijkstra over 8-connected cells; returns (cost, flat cell indices)."""
    cols = cm.shape[1]
    s = start_cell[0] * cols + start_cell[1]
    g = goal_cell[0] * cols + goal_cell[1]
    return kernels.dijkstra(cm.cells, s, g, _weights(cm.resolution, divisor))


def densify(points: np.ndarray, spacing: float) -> np.ndarray:
    out = [points[:1]]
    for a, b in zip(points[:-1], points[1:]):
        n = max(1, math.ceil(math.hypot(*(b - a)) / spacing))
        t = np.arange(1, n + 1)[:, None] / n
        out.append(a + t * (b - a))
    return np.concatenate(out)


def _costs_at(cm: Costmap, pts: np.ndarray) -> np.ndarray:
    rows = np.floor((pts[:, 1] - cm.origin[1]) / cm.resolution).astype(np.int64)
    cols = np.floor((pts[:, 0] - cm.origin[0]) / cm.resolution).astype(np.int64)
    inside = (rows >= 0) & (rows < cm.shape[0]) & (cols >= 0) & (cols < cm.shape[1])
    out = np.full(len(pts), LETHAL, dtype=np.int64)
    out[inside] = cm.cells[rows[inside], cols[inside]]
    return out


def smooth_path(cm: Costmap, pts: np.ndarray, iters: int = 50, step: float = 0.1) -> np.ndarray:
    """Line-of-sight shortcutting, then obstacle-respecting gradient smoothing.

    The smoothing step pulls each interior point toward the midpoint of its
    neighbours; moves that land in LETHAL cells, or that raise a point's cost
    into the inscribed band, are rejected. Endpoints never move.
    """
    pts = np.asarray(pts, dtype=np.float64)
    if len(pts) > 2:
        kept = kernels.shortcut(cm.cells, pts, _costs_at(cm, pts), cm.origin[0], cm.origin[1],
                                cm.resolution)
        pts = pts[kept]
    q = np.ascontiguousarray(densify(pts, cm.resolution))
    kernels.relax_path(cm.cells, q, iters, step, cm.origin[0], cm.origin[1], cm.resolution)
    return q


def plan_path(cm: Costmap, start, goal, cfg: PlannerConfig | None = None) -> PlanResult:
    """Dense smoothed path; ``plan`` holds it unresampled."""
    cfg = cfg or PlannerConfig()
    s_cell = cm.cell_of(*start)
    if not cm.in_bounds(*s_cell) or cm.cells[s_cell] >= LETHAL:
        raise PlanningError("start in lethal cell")
    g_cell = _snap_goal(cm, goal, cfg.snap_radius)
    if g_cell == s_cell:
        raise PlanningError("degenerate goal")
    cost, cells = grid_search(cm, s_cell, g_cell, cfg.cost_divisor)
    if not math.isfinite(cost):
        raise PlanningError("no path")
    cols = cm.shape[1]
    rr, cc = np.divmod(cells, cols)
    pts = np.stack([cm.origin[0] + (cc + 0.5) * cm.resolution,
                    cm.origin[1] + (rr + 0.5) * cm.resolution], axis=1)
    pts[0] = start
    if g_cell == cm.cell_of(*goal):
        pts[-1] = goal
    dense = smooth_path(cm, pts, cfg.smooth_iters, cfg.smooth_step)
    try:
        plan = GlobalPlan.from_points(dense)
    except ValueError:
        raise PlanningError("degenerate goal") from None
    return PlanResult(plan, float(cost), cells, g_cell)


def plan_global(cm: Costmap, start, goal, cfg: PlannerConfig | None = None) -> GlobalPlan:
    cfg = cfg or PlannerConfig()
    res = plan_path(cm, start, goal, cfg)
    try:
        return resample_plan(res.plan, cfg.plan_points)
    except ValueError:
        raise PlanningError("degenerate goal") from None


def _pick(scores: np.ndarray, vs: np.ndarray, ws: np.ndarray) -> tuple[int, int] | None:
    best = np.min(scores)
    if not math.isfinite(best):
        return None
    cand = np.argwhere(scores == best)
    # higher v first, then |omega| closest to zero, then lower index
    key = [(-vs[i], abs(ws[j]), i, j) for i, j in cand]
    _, _, i, j = min(key)
    return int(i), int(j)


def dwa_evaluate(obs: Observation, plan: GlobalPlan, cm: Costmap,
                 p: DwaParams | None = None) -> DwaResult:
    p = p or DwaParams()
    pts = plan.points
    if len(pts) < 2 or not arc_lengths(pts)[-1] > 0:
        raise PlanningError("degenerate plan")
    pose = obs.pose
    vs, ws = p.v_grid(), p.w_grid()
    scores = kernels.dwa_scores(pose.x, pose.y, pose.theta, vs, ws, p.n_steps, p.dt, cm.cells,
                                cm.clearance(), cm.origin[0], cm.origin[1], cm.resolution, pts,
                                arc_lengths(pts), p.lookahead, p.weights(), p.v_max,
                                p.check_spacing)
    pick = _pick(scores, vs, ws)
    if pick is None:
        return DwaResult(Command(0.0, p.omega_max / 2.0), True, scores)
    return DwaResult(Command(float(vs[pick[0]]), float(ws[pick[1]])), False, scores)


def dwa_select(obs: Observation, plan: GlobalPlan, cm: Costmap, p: DwaParams | None = None) -> Command:
    return dwa_evaluate(obs, plan, cm, p).command


class ClassicalOutput(NamedTuple):
    plan: GlobalPlan
    command: Command
    recovery: bool
    costmap: Costmap
    detections: list


def planning_costmap(obs: Observation, world_map, cfg: PlannerConfig) -> tuple[Costmap, list]:
    layer = static_layer(world_map, cfg.inscribed_radius, cfg.decay)
    cm = layer.for_scan(obs.scan, obs.pose)
    dets: list = []
    if cfg.social_layer:
        dets = detect_pedestrians(obs.scan_history, obs.odom_history, world_map)
        cm = add_social_layer(cm, dets, cfg.social_sigma, cfg.social_amplitude)
    return cm, dets


def classical_step(obs: Observation, world_map, cfg: PlannerConfig | None = None) -> ClassicalOutput:
    cfg = cfg or PlannerConfig()
    cm, dets = planning_costmap(obs, world_map, cfg)
    plan = plan_global(cm, obs.pose.xy, obs.goal.xy, cfg)
    res = dwa_evaluate(obs, plan, cm, cfg.dwa)
    return ClassicalOutput(plan, res.command, res.recovery, cm, dets)


def classical_behavior(obs: Observation, world_map, cfg: PlannerConfig | None = None):
    out = classical_step(obs, world_map, cfg)
    return out.plan, out.command
