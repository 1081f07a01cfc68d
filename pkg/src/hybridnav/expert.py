"""Rule-augmented path tracker that produces the demonstrations.

The expert follows the static shortest path by pure pursuit. Social rules
adjust either the lateral offset of the tracked point or a speed cap. It reads
privileged simulator state (pedestrian intent, door geometry, queue roles),
which a real planner never sees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from hybridnav.core_types import OMEGA_MAX, V_MAX, Command, Pose2D, arc_lengths, normalize_angle
from hybridnav.world import ROBOT_RADIUS, SimState


@dataclass(frozen=True)
class ExpertParams:
    lookahead: float = 1.0
    k_omega: float = 2.5
    rotate_threshold: float = 0.8
    v_cruise: float = V_MAX
    stop_gain: float = 1.2
    frontal_offset: float = 0.5
    frontal_range: float = 4.0
    overtake_berth: float = 1.2
    slow_speed: float = 0.6
    follow_gap: float = 1.8
    min_gap: float = 1.2
    yield_gap: float = 2.0
    yield_stop: float = 1.5
    door_back: float = 1.0
    door_side: float = 1.2
    queue_back: float = 1.0
    queue_gap: float = 0.8
    guard_dist: float = 0.8


class ExpertDecision(NamedTuple):
    command: Command
    target: tuple[float, float]
    offset: float
    v_cap: float
    mode: str


class RefPath:
    """Dense reference polyline with arc-length projection helpers."""

    def __init__(self, points: np.ndarray):
        self.p = np.asarray(points, dtype=np.float64)
        self.s = arc_lengths(self.p)
        seg = np.diff(self.p, axis=0)
        self.seg = seg
        self.seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.tan = seg / self.seg_len[:, None]
        self.length = float(self.s[-1])

    def project(self, x: float, y: float) -> tuple[float, float]:
        """(arc length, signed lateral offset; left of travel is positive)."""
        a = self.p[:-1]
        rel = np.array([x, y]) - a
        t = np.clip((rel * self.tan).sum(axis=1), 0.0, self.seg_len)
        foot = a + self.tan * t[:, None]
        d2 = ((np.array([x, y]) - foot) ** 2).sum(axis=1)
        i = int(np.argmin(d2))
        cross = self.tan[i, 0] * rel[i, 1] - self.tan[i, 1] * rel[i, 0]
        return float(self.s[i] + t[i]), math.copysign(math.sqrt(d2[i]), cross)

    def _seg_index(self, s: float) -> int:
        return int(min(max(np.searchsorted(self.s, s, side="right") - 1, 0), len(self.seg) - 1))

    def tangent(self, s: float) -> np.ndarray:
        return self.tan[self._seg_index(s)]

    def point(self, s: float, lateral: float = 0.0) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        i = self._seg_index(s)
        base = self.p[i] + self.tan[i] * (s - self.s[i])
        t = self.tan[i]
        return base + lateral * np.array([-t[1], t[0]])

    def ray_crossing(self, origin, direction, s_lo: float, s_hi: float, reach: float = 15.0):
        """First path arc length in [s_lo, s_hi] hit by the ray, with its ray distance."""
        best = None
        lo = self._seg_index(s_lo)
        hi = self._seg_index(s_hi)
        o = np.asarray(origin, dtype=np.float64)
        d = np.asarray(direction, dtype=np.float64)
        for i in range(lo, hi + 1):
            a, e = self.p[i], self.seg[i]
            den = d[0] * e[1] - d[1] * e[0]
            if abs(den) < 1e-12:
                continue
            w = a - o
            lam = (w[0] * e[1] - w[1] * e[0]) / den
            mu = (w[0] * d[1] - w[1] * d[0]) / den
            if 0.0 <= mu <= 1.0 and 0.0 <= lam <= reach:
                s = float(self.s[i] + mu * self.seg_len[i])
                if best is None or s < best[0]:
                    best = (s, float(lam))
        return best


_REF_CACHE: dict = {}


def reference_path(state: SimState, goal: Pose2D) -> RefPath:
    """Static shortest path from the episode start to ``goal`` (memoized)."""
    from hybridnav.classical import PlannerConfig, plan_path
    from hybridnav.costmap import static_layer

    key = (state.map.map_id, id(state.map), state.start.xy, goal.xy)
    hit = _REF_CACHE.get(key)
    if hit is not None and hit[0] is state.map:
        return hit[1]
    cm = static_layer(state.map).costmap
    res = plan_path(cm, state.start.xy, goal.xy, PlannerConfig())
    ref = RefPath(res.plan.points)
    if len(_REF_CACHE) > 512:
        _REF_CACHE.clear()
    _REF_CACHE[key] = (state.map, ref)
    return ref


def _stop_speed(dist: float, gain: float) -> float:
    return 0.0 if dist < 0.05 else gain * dist


def expert_decision(state: SimState, goal: Pose2D, prm: ExpertParams | None = None) -> ExpertDecision:
    prm = prm or ExpertParams()
    ref = reference_path(state, goal)
    rb = state.robot
    s_r, e_r = ref.project(rb.x, rb.y)
    offset = 0.0
    v_cap = prm.v_cruise
    mode = "track"
    target_override = None
    rotate_threshold = prm.rotate_threshold

    info = []
    for p in state.peds:
        s_p, e_p = ref.project(*p.pos)
        tan = ref.tangent(s_p)
        u = p.vel[0] * tan[0] + p.vel[1] * tan[1]
        info.append((p, s_p, e_p, u))

    # frontal approach: keep right
    for p, s_p, e_p, u in info:
        ds = s_p - s_r
        if -1.0 < ds <= prm.frontal_range and u < -0.3 and abs(e_p) < 1.5:
            offset = -prm.frontal_offset
            mode = "frontal"

    # overtaking a slow walker on the left; following a normal-speed leader
    for p, s_p, e_p, u in info:
        ds = s_p - s_r
        if p.role == "queue":
            continue
        if -1.5 < ds < 5.0 and 0.1 < p.speed < prm.slow_speed and u > 0 and abs(e_p) < 1.0:
            offset = e_p + prm.overtake_berth
            mode = "overtake"
        elif 0.0 < ds < 6.0 and abs(e_p) < 0.8 and p.speed >= prm.slow_speed and u > 0:
            gap = math.hypot(p.pos[0] - rb.x, p.pos[1] - rb.y)
            cap = 0.0 if gap < prm.min_gap else max(0.0, u + (gap - prm.follow_gap))
            if cap < v_cap:
                v_cap = cap
                mode = "following"

    # intersection: yield to a crossing pedestrian whose arrival is close to ours
    for p, s_p, e_p, u in info:
        tgt = p.target()
        if tgt is None or p.role == "queue":
            continue
        dx, dy = tgt[0] - p.pos[0], tgt[1] - p.pos[1]
        dn = math.hypot(dx, dy)
        if dn < 0.3:
            continue
        dirn = (dx / dn, dy / dn)
        tan = ref.tangent(s_p)
        if abs(dirn[0] * tan[0] + dirn[1] * tan[1]) >= 0.7:
            continue
        hit = ref.ray_crossing(p.pos, dirn, s_r, s_r + 8.0, reach=dn + 0.5)
        if hit is None:
            continue
        s_c, lam = hit
        if s_c - s_r <= 0.0:
            continue
        t_p = max(0.0, p.delay - state.time) + lam / p.pref_speed
        t_r = (s_c - s_r) / prm.v_cruise
        if abs(t_p - t_r) < prm.yield_gap and s_r < s_c - prm.yield_stop + 0.3:
            cap = _stop_speed(s_c - prm.yield_stop - s_r, prm.stop_gain)
            if cap <= v_cap:
                v_cap = cap
                mode = "yield"

    # narrow doorway: wait aside while someone comes through, then realign
    door = state.map.meta.get("door")
    if door is not None:
        gc = 0.5 * (door["gap_y0"] + door["gap_y1"])
        s_door, _ = ref.project(door["x0"], gc)
        committed = s_r > s_door - 0.7 and abs(e_r) < 0.2
        if s_r < s_door and not committed:
            busy = False
            for p in state.peds:
                tgt = p.target()
                if tgt is None:
                    continue
                in_zone = door["x0"] - 1.6 <= p.pos[0] <= door["x1"] + 4.0 and abs(p.pos[1] - gc) < 1.5
                inbound = tgt[0] < p.pos[0] - 0.3
                if in_zone and inbound:
                    busy = True
            if busy:
                w = ref.point(s_door - prm.door_back, -prm.door_side)
                target_override = (float(w[0]), float(w[1]))
                v_cap = min(v_cap, _stop_speed(math.hypot(w[0] - rb.x, w[1] - rb.y), prm.stop_gain))
                mode = "door_wait"
            elif abs(e_r) > 0.1 and s_r < s_door - 0.5:
                w = ref.point(s_door - 0.6)
                target_override = (float(w[0]), float(w[1]))
                v_cap = min(v_cap, 0.6)
                mode = "door_realign"
        if s_door - 1.5 < s_r < s_door + 0.5:
            # squeeze through slowly and only when lined up
            v_cap = min(v_cap, 0.6)
            rotate_threshold = 0.3

    # waiting line across the path: stop short of it until a gap opens
    queue = [(p, s_p, e_p) for p, s_p, e_p, _ in info if p.role == "queue"]
    if queue:
        s_q = float(np.mean([q[1] for q in queue]))
        if s_r < s_q + 1.0:
            lat = sorted(q[2] for q in queue)
            best = None
            for a, b in zip(lat[:-1], lat[1:]):
                if b - a - 2 * queue[0][0].radius >= prm.queue_gap:
                    mid = 0.5 * (a + b)
                    if abs(mid) < 1.5 and (best is None or abs(mid) < abs(best)):
                        best = mid
            if best is not None:
                if s_r > s_q - 4.0:
                    offset = best
                    v_cap = min(v_cap, 0.8)
                    mode = "queue_pass"
            elif s_r < s_q - 0.3:
                stop = s_q - 2 * queue[0][0].radius - prm.queue_back
                v_cap = min(v_cap, _stop_speed(stop - s_r, prm.stop_gain))
                mode = "queue_wait"

    # generic guard: never drive into someone standing in the swept corridor
    c, sn = math.cos(rb.theta), math.sin(rb.theta)
    for p in state.peds:
        dx, dy = p.pos[0] - rb.x, p.pos[1] - rb.y
        fwd, side = c * dx + sn * dy, -sn * dx + c * dy
        if 0.0 < fwd < prm.guard_dist + ROBOT_RADIUS and abs(side) < ROBOT_RADIUS + p.radius + 0.05:
            v_cap = 0.0
            mode = mode + "+guard"
            break

    d_goal = math.hypot(goal.x - rb.x, goal.y - rb.y)
    v_cap = min(v_cap, max(0.3, prm.stop_gain * d_goal))

    if target_override is not None:
        tx, ty = target_override
    else:
        pt = ref.point(s_r + prm.lookahead, offset)
        tx, ty = float(pt[0]), float(pt[1])
    dist_t = math.hypot(tx - rb.x, ty - rb.y)
    if dist_t < 0.15 or v_cap <= 0.0:
        tan = ref.tangent(s_r)
        bearing = normalize_angle(math.atan2(tan[1], tan[0]) - rb.theta)
        if dist_t < 0.15:
            v_cap = 0.0
    else:
        bearing = normalize_angle(math.atan2(ty - rb.y, tx - rb.x) - rb.theta)
    omega = max(-OMEGA_MAX, min(OMEGA_MAX, prm.k_omega * bearing))
    if abs(bearing) > rotate_threshold:
        v = 0.0
    else:
        v = max(0.0, min(v_cap, V_MAX) * math.cos(bearing))
    return ExpertDecision(Command(v, omega), (tx, ty), offset, v_cap, mode)


def expert_policy(state: SimState, goal: Pose2D, prm: ExpertParams | None = None) -> Command:
    return expert_decision(state, goal, prm).command
