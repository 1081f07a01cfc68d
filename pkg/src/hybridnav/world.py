"""Deterministic 2D world: maps, scripted pedestrians, unicycle robot, range sensing.

Map ids:

* ``room``: empty 20 m x 20 m box.
* ``lab``: fixed L-shaped corridor with a crossing hallway (shipped as PGM).
* ``campus/<seed>``: randomized walkway with crossing alleys and planters.
* ``campus/<seed>/door``: the same walkway cut by a wall with one 0.9 m gap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Any, Sequence

import numpy as np

from hybridnav import kernels
from hybridnav.core_types import (
    DT, MAX_RANGE, N_BEAMS, OMEGA_MAX, V_MAX, Command, Pose2D, RangeScan, beam_angles, sig9,
)

RESOLUTION = 0.1
MAP_SIZE = 20.0
ROBOT_RADIUS = 0.3
PED_RADIUS = 0.3
REPULSION_K = 1.0
REPULSION_SIGMA = 0.4
SPEED_CAP = 1.5
WAYPOINT_TOL = 0.2
MIN_RANGE = 1e-3

SCENARIO_KINDS = ("frontal_approach", "intersection", "narrow_doorway", "following", "overtake",
                  "waiting_line")
OOD_KINDS = ("intersection", "frontal_approach", "following")


class ScenarioError(ValueError):
    pass


# --------------------------------------------------------------------------- maps


@dataclass(frozen=True, eq=False)
class WorldMap:
    """Boolean occupancy grid; ``occupancy[row, col]`` with row along +y."""

    occupancy: np.ndarray
    resolution: float = RESOLUTION
    origin: tuple[float, float] = (0.0, 0.0)
    map_id: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        occ = np.array(self.occupancy, dtype=bool)
        if occ.ndim != 2 or min(occ.shape) < 3:
            raise ValueError("occupancy must be a 2D grid of at least 3x3 cells")
        if not (occ[0].all() and occ[-1].all() and occ[:, 0].all() and occ[:, -1].all()):
            raise ValueError("border cells must be occupied")
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def height(self) -> int:
        return self.occupancy.shape[0]

    @property
    def width(self) -> int:
        return self.occupancy.shape[1]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor((y - self.origin[1]) / self.resolution),
                math.floor((x - self.origin[0]) / self.resolution))

    def occupied_at(self, x: float, y: float) -> bool:
        r, c = self.cell_of(x, y)
        if not (0 <= r < self.height and 0 <= c < self.width):
            return True
        return bool(self.occupancy[r, c])

    def disc_free(self, x: float, y: float, radius: float) -> bool:
        """True when no occupied cell square intersects the open disc."""
        res = self.resolution
        gx, gy = x - self.origin[0], y - self.origin[1]
        c0, c1 = math.floor((gx - radius) / res), math.floor((gx + radius) / res)
        r0, r1 = math.floor((gy - radius) / res), math.floor((gy + radius) / res)
        if r0 < 0 or c0 < 0 or r1 >= self.height or c1 >= self.width:
            return False
        win = self.occupancy[r0:r1 + 1, c0:c1 + 1]
        if not win.any():
            return True
        cx = np.arange(c0, c1 + 1) * res
        cy = np.arange(r0, r1 + 1) * res
        nx = np.clip(gx, cx, cx + res) - gx
        ny = np.clip(gy, cy, cy + res) - gy
        d2 = ny[:, None] ** 2 + nx[None, :] ** 2
        return not bool(np.any(win & (d2 < radius * radius)))

    def to_pgm(self) -> str:
        """ASCII PGM, top row = largest y; 0 marks occupied, 255 free."""
        rows = [" ".join("0" if v else "255" for v in row) for row in self.occupancy[::-1]]
        return f"P2\n# {self.map_id}\n{self.width} {self.height}\n255\n" + "\n".join(rows) + "\n"

    def meta_record(self) -> dict[str, Any]:
        return {"map_id": self.map_id, "resolution": self.resolution, "origin": list(self.origin),
                **self.meta}


def parse_pgm(text: str) -> np.ndarray:
    """Read an ASCII P2 grid into occupancy (pixel < 128 means occupied)."""
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError("not an ASCII PGM (P2) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    vals = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    if vals.size != w * h:
        raise ValueError(f"PGM has {vals.size} pixels, expected {w * h}")
    if np.any(vals < 0) or np.any(vals > maxval):
        raise ValueError("PGM pixel out of range")
    img = vals.reshape(h, w)
    return (img < (maxval + 1) // 2)[::-1].copy()


def _cells_in(lo: float, hi: float, res: float) -> slice:
    """Cells whose centres lie in [lo, hi]."""
    return slice(math.ceil(lo / res - 0.5), math.floor(hi / res - 0.5) + 1)


def _closed_grid(size: float = MAP_SIZE, res: float = RESOLUTION) -> np.ndarray:
    n = int(round(size / res))
    return np.ones((n, n), dtype=bool)


def _carve(occ: np.ndarray, x0, x1, y0, y1, res=RESOLUTION, value=False):
    occ[_cells_in(y0, y1, res), _cells_in(x0, x1, res)] = value


def _seal(occ: np.ndarray) -> np.ndarray:
    occ[0, :] = occ[-1, :] = True
    occ[:, 0] = occ[:, -1] = True
    return occ


def room_map() -> WorldMap:
    occ = _closed_grid()
    _carve(occ, 0.1, 19.9, 0.1, 19.9)
    return WorldMap(_seal(occ), map_id="room")


LAB_FREE = ((1.0, 16.5, 2.5, 5.5), (13.5, 16.5, 2.5, 19.0), (7.5, 9.5, 0.5, 11.0))
LAB_ROUTE = {"start": [2.0, 4.0, 0.0], "corner": [15.0, 4.0], "goal": [15.0, 17.5],
             "cross_x": 8.5}


def lab_occupancy() -> np.ndarray:
    """Reference construction of the shipped lab template."""
    occ = _closed_grid()
    for x0, x1, y0, y1 in LAB_FREE:
        _carve(occ, x0, x1, y0, y1)
    return _seal(occ)


def load_template(name: str) -> WorldMap:
    base = resources.files("hybridnav") / "maps"
    occ = parse_pgm((base / f"{name}.pgm").read_text())
    meta = json.loads((base / f"{name}.json").read_text())
    extra = {k: v for k, v in meta.items() if k not in ("resolution", "origin", "map_id")}
    return WorldMap(occ, meta["resolution"], tuple(meta["origin"]), name, extra)


def campus_layout(seed: int) -> dict[str, Any]:
    """Random parameters of an in-distribution campus walkway."""
    rng = np.random.default_rng([int(seed), 0x6361])
    yc = float(rng.uniform(8.5, 11.5))
    width = float(rng.uniform(4.0, 6.0))
    route_y = yc + float(rng.uniform(-0.3, 0.3))
    n_alleys = int(rng.integers(1, 3))
    alleys = []
    for _ in range(n_alleys):
        alleys.append([float(rng.uniform(5.5, 14.5)), float(rng.uniform(2.0, 3.0))])
    alleys.sort()
    door_x = round(float(rng.uniform(8.0, 12.0)) / RESOLUTION) * RESOLUTION
    planters = []
    for _ in range(int(rng.integers(0, 4))):
        planters.append([float(rng.uniform(3.0, 17.0)), float(rng.uniform(0.4, 0.8)),
                         1 if rng.random() < 0.5 else -1])
    return {"yc": yc, "width": width, "route_y": route_y, "alleys": alleys, "door_x": door_x,
            "planters": planters}


def campus_map(seed: int, door: bool = False) -> WorldMap:
    lay = campus_layout(seed)
    res = RESOLUTION
    yc, w, ry = lay["yc"], lay["width"], lay["route_y"]
    occ = _closed_grid()
    _carve(occ, 0.1, 19.9, yc - w / 2, yc + w / 2)
    for xa, wa in lay["alleys"]:
        _carve(occ, xa - wa / 2, xa + wa / 2, 0.6, 19.4)
    for xp, size, side in lay["planters"]:
        inner = yc + side * (w / 2 - size)
        if abs(inner - ry) < 1.8:
            continue
        if any(abs(xp - xa) < wa / 2 + size / 2 + 0.5 for xa, wa in lay["alleys"]):
            continue
        ys = sorted((yc + side * w / 2, inner))
        _carve(occ, xp - size / 2, xp + size / 2, ys[0], ys[1], value=True)
    meta = {"kind": "campus", "seed": int(seed), "route_y": ry, "yc": yc, "width": w,
            "alleys": lay["alleys"]}
    map_id = f"campus/{seed}"
    if door:
        c0 = int(round(lay["door_x"] / res))
        r_gap = int(round((ry - 0.45) / res))
        occ[:, c0:c0 + 3] = True
        occ[r_gap:r_gap + 9, c0:c0 + 3] = False
        meta["door"] = {"x0": c0 * res, "x1": (c0 + 3) * res, "gap_y0": r_gap * res,
                        "gap_y1": (r_gap + 9) * res}
        map_id += "/door"
    return WorldMap(_seal(occ), res, (0.0, 0.0), map_id, meta)


@lru_cache(maxsize=64)
def make_map(map_id: str) -> WorldMap:
    parts = map_id.split("/")
    if map_id == "room":
        return room_map()
    if map_id == "lab":
        return load_template("lab")
    if parts[0] == "campus" and len(parts) in (2, 3):
        try:
            seed = int(parts[1])
        except ValueError:
            raise ScenarioError(f"bad campus seed in map id {map_id!r}") from None
        if len(parts) == 3 and parts[2] != "door":
            raise ScenarioError(f"unknown map variant {parts[2]!r}")
        return campus_map(seed, door=len(parts) == 3)
    raise ScenarioError(f"unknown map id {map_id!r}")


# --------------------------------------------------------------------------- agents


@dataclass(frozen=True)
class Pedestrian:
    pos: tuple[float, float]
    vel: tuple[float, float] = (0.0, 0.0)
    waypoints: tuple[tuple[float, float], ...] = ()
    pref_speed: float = 1.0
    radius: float = PED_RADIUS
    delay: float = 0.0
    wp_index: int = 0
    role: str = "walker"

    def __post_init__(self):
        object.__setattr__(self, "pos", (float(self.pos[0]), float(self.pos[1])))
        object.__setattr__(self, "vel", (float(self.vel[0]), float(self.vel[1])))
        object.__setattr__(self, "waypoints",
                           tuple((float(a), float(b)) for a, b in self.waypoints))

    @property
    def speed(self) -> float:
        return math.hypot(*self.vel)

    def target(self) -> tuple[float, float] | None:
        if not self.waypoints:
            return None
        return self.waypoints[min(self.wp_index, len(self.waypoints) - 1)]

    def to_dict(self) -> dict[str, Any]:
        return {"pos": [sig9(v) for v in self.pos],
                "waypoints": [[sig9(a), sig9(b)] for a, b in self.waypoints],
                "pref_speed": sig9(self.pref_speed), "radius": sig9(self.radius),
                "delay": sig9(self.delay), "role": self.role}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Pedestrian":
        return cls(pos=tuple(d["pos"]), waypoints=tuple(tuple(w) for w in d.get("waypoints", ())),
                   pref_speed=d.get("pref_speed", 1.0), radius=d.get("radius", PED_RADIUS),
                   delay=d.get("delay", 0.0), role=d.get("role", "walker"))


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    map: str
    seed: int
    peds: tuple[Pedestrian, ...]
    start: Pose2D
    goal: Pose2D

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "map": self.map, "seed": self.seed,
                "peds": [p.to_dict() for p in self.peds],
                "start": self.start.to_list(), "goal": self.goal.to_list()}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScenarioSpec":
        for key in ("kind", "map", "seed", "peds", "start", "goal"):
            if key not in d:
                raise ScenarioError(f"scenario missing field {key!r}")
        goal = d["goal"]
        return cls(d["kind"], d["map"], int(d["seed"]),
                   tuple(Pedestrian.from_dict(p) for p in d["peds"]),
                   Pose2D.from_list(d["start"]),
                   Pose2D(goal[0], goal[1], goal[2] if len(goal) > 2 else 0.0))

    @property
    def scenario_id(self) -> str:
        return f"{self.kind}/{self.map}/{self.seed}"


@dataclass(frozen=True, eq=False)
class SimState:
    time: float
    step_index: int
    robot: Pose2D
    command: Command
    peds: tuple[Pedestrian, ...]
    map: WorldMap
    start: Pose2D
    goal: Pose2D
    seed: int = 0
    collided: bool = False

    def key(self) -> tuple:
        """Hashable snapshot used for bit-exact equality checks."""
        return (self.time, self.step_index, self.robot, self.command, self.peds, self.map.map_id,
                self.start, self.goal, self.seed, self.collided)

    def __eq__(self, other):
        return isinstance(other, SimState) and self.key() == other.key()


# --------------------------------------------------------------------------- dynamics


def unicycle(pose: Pose2D, cmd: Command, dt: float) -> Pose2D:
    """Exact constant-command arc integration."""
    v, w, th = cmd.v, cmd.omega, pose.theta
    if abs(w) < 1e-6:
        return Pose2D(pose.x + v * dt * math.cos(th), pose.y + v * dt * math.sin(th), th + w * dt)
    return Pose2D(pose.x + v / w * (math.sin(th + w * dt) - math.sin(th)),
                  pose.y - v / w * (math.cos(th + w * dt) - math.cos(th)),
                  th + w * dt)


def _ped_update(i: int, peds: Sequence[Pedestrian], robot: Pose2D, wmap: WorldMap, t: float,
                dt: float) -> Pedestrian:
    p = peds[i]
    if t + 1e-9 < p.delay:
        return replace(p, vel=(0.0, 0.0))
    idx = p.wp_index
    while idx < len(p.waypoints) - 1 and math.dist(p.pos, p.waypoints[idx]) < WAYPOINT_TOL:
        idx += 1
    vx = vy = 0.0
    if p.waypoints:
        tx, ty = p.waypoints[idx]
        dx, dy = tx - p.pos[0], ty - p.pos[1]
        dist = math.hypot(dx, dy)
        if dist > 1e-9:
            speed = min(p.pref_speed, dist / dt)
            vx, vy = speed * dx / dist, speed * dy / dist
    others = [(q.pos, q.radius) for j, q in enumerate(peds) if j != i]
    others.append(((robot.x, robot.y), ROBOT_RADIUS))
    for (qx, qy), qr in others:
        ax, ay = p.pos[0] - qx, p.pos[1] - qy
        d = math.hypot(ax, ay)
        if d < 1e-9:
            continue
        f = REPULSION_K * math.exp((p.radius + qr - d) / REPULSION_SIGMA)
        vx += f * ax / d
        vy += f * ay / d
    cap = SPEED_CAP * p.pref_speed
    sp = math.hypot(vx, vy)
    if sp > cap:
        vx, vy = vx * cap / sp, vy * cap / sp
    nx, ny = p.pos[0] + vx * dt, p.pos[1] + vy * dt
    if not wmap.disc_free(nx, ny, p.radius):
        return replace(p, vel=(0.0, 0.0), wp_index=idx)
    return replace(p, pos=(nx, ny), vel=(vx, vy), wp_index=idx)


def robot_collides(pose: Pose2D, peds: Sequence[Pedestrian], wmap: WorldMap) -> bool:
    if not wmap.disc_free(pose.x, pose.y, ROBOT_RADIUS):
        return True
    return any(math.hypot(pose.x - p.pos[0], pose.y - p.pos[1]) < ROBOT_RADIUS + p.radius
               for p in peds)


def step(state: SimState, cmd: Command, dt: float = DT) -> SimState:
    """Advance one control period. A colliding move is undone and flagged."""
    if state.collided:
        return state
    cmd = cmd.clamped(V_MAX, OMEGA_MAX)
    pose = unicycle(state.robot, cmd, dt)
    peds = tuple(_ped_update(i, state.peds, state.robot, state.map, state.time, dt)
                 for i in range(len(state.peds)))
    collided = robot_collides(pose, peds, state.map)
    if collided:
        pose = state.robot
    k = state.step_index + 1
    return replace(state, time=k * dt, step_index=k, robot=pose, command=cmd, peds=peds,
                   collided=collided)


def sense(state: SimState, n_beams: int = N_BEAMS, max_range: float = MAX_RANGE) -> RangeScan:
    m = state.map
    pose = state.robot
    discs = np.array([[p.pos[0], p.pos[1], p.radius] for p in state.peds],
                     dtype=np.float64).reshape(-1, 3)
    angles = pose.theta + beam_angles(n_beams)
    r = kernels.raycast(m.occupancy.view(np.uint8), m.origin[0], m.origin[1], m.resolution,
                        pose.x, pose.y, angles, max_range, discs)
    return RangeScan(np.clip(r, MIN_RANGE, max_range), max_range)


# --------------------------------------------------------------------------- scenarios


def _free_path_exists(wmap: WorldMap, start: Pose2D, goal: Pose2D) -> bool:
    from hybridnav.costmap import static_layer

    cm = static_layer(wmap).costmap
    s, g = cm.cell_of(start.x, start.y), cm.cell_of(goal.x, goal.y)
    for r, c in (s, g):
        if not cm.in_bounds(r, c) or cm.cells[r, c] >= 254:
            return False
    cols = cm.shape[1]
    cost, _ = kernels.dijkstra(cm.cells, s[0] * cols + s[1], g[0] * cols + g[1],
                               kernels.edge_weights(cm.resolution))
    return math.isfinite(cost)


def spawn(spec: ScenarioSpec) -> SimState:
    if spec.kind not in SCENARIO_KINDS and spec.kind != "empty":
        raise ScenarioError(f"unknown scenario kind {spec.kind!r}")
    wmap = make_map(spec.map)
    for label, pose in (("start", spec.start), ("goal", spec.goal)):
        if not wmap.disc_free(pose.x, pose.y, ROBOT_RADIUS):
            raise ScenarioError(f"{label} is not in free space")
    for p in spec.peds:
        if not wmap.disc_free(p.pos[0], p.pos[1], p.radius):
            raise ScenarioError(f"pedestrian at {p.pos} is not in free space")
    if not _free_path_exists(wmap, spec.start, spec.goal):
        raise ScenarioError("infeasible scenario: no free path from start to goal")
    return SimState(0.0, 0, spec.start, Command(0.0, 0.0), tuple(spec.peds), wmap, spec.start,
                    spec.goal, spec.seed, False)


def _heading(a, b) -> float:
    return math.atan2(b[1] - a[1], b[0] - a[0])


def empty_scenario(seed: int = 0) -> ScenarioSpec:
    return ScenarioSpec("empty", "room", seed, (), Pose2D(2.0, 10.0, 0.0), Pose2D(18.0, 10.0, 0.0))


def _campus_endpoints(meta, rng, kind):
    ry = meta["route_y"]
    sy = ry + float(rng.uniform(-0.2, 0.2))
    gy = ry + float(rng.uniform(-0.2, 0.2))
    start = (1.5, sy)
    goal = (18.5, gy)
    return start, goal


def _line_y(start, goal, x):
    return start[1] + (goal[1] - start[1]) * (x - start[0]) / (goal[0] - start[0])


def _id_peds(kind, meta, start, goal, rng) -> list[Pedestrian]:
    """In-distribution pedestrian scripts; speeds roughly 0.9-1.4 m/s."""
    t_robot = lambda x: (x - start[0]) / 1.5  # noqa: E731
    ly = lambda x: _line_y(start, goal, x)  # noqa: E731
    peds: list[Pedestrian] = []
    if kind == "frontal_approach":
        x0 = float(rng.uniform(12.0, 17.0))
        lat = float(rng.uniform(0.0, 0.4))
        pref = float(rng.uniform(1.0, 1.4))
        peds.append(Pedestrian((x0, ly(x0) + lat), waypoints=((1.0, ly(1.0) + lat),),
                               pref_speed=pref, role="oncoming"))
    elif kind == "intersection":
        xa, wa = meta["alleys"][int(rng.integers(0, len(meta["alleys"])))]
        side = 1 if rng.random() < 0.5 else -1
        d0 = float(rng.uniform(4.0, 5.5))
        pref = float(rng.uniform(1.0, 1.3))
        y_line = ly(xa)
        arrive = t_robot(xa) + float(rng.uniform(-1.0, 1.0))
        delay = max(0.0, arrive - d0 / pref)
        peds.append(Pedestrian((xa, y_line + side * d0), waypoints=((xa, y_line - side * 6.0),),
                               pref_speed=pref, delay=delay, role="crossing"))
    elif kind == "narrow_doorway":
        door = meta["door"]
        gc = 0.5 * (door["gap_y0"] + door["gap_y1"])
        xd0, xd1 = door["x0"], door["x1"]
        pref = float(rng.uniform(0.9, 1.2))
        x0 = xd1 + float(rng.uniform(2.5, 4.0))
        # reach the gap around the time the robot is 2-3 m before the wall
        arrive = t_robot(xd0 - float(rng.uniform(2.0, 3.0)))
        delay = max(0.0, arrive - (x0 - xd1) / pref)
        peds.append(Pedestrian((x0, gc), waypoints=((xd1 + 0.6, gc), (xd0 - 0.8, gc),
                                                    (xd0 - 2.0, gc + 1.3), (1.0, gc + 1.3)),
                               pref_speed=pref, delay=delay, role="door"))
    elif kind == "following":
        gap = float(rng.uniform(1.8, 2.8))
        pref = float(rng.uniform(0.9, 1.2))
        x0 = start[0] + gap + 0.3
        x_end = float(rng.uniform(12.0, 15.0))
        side = 1 if rng.random() < 0.5 else -1
        peds.append(Pedestrian((x0, ly(x0)), waypoints=((x_end, ly(x_end)),
                                                       (x_end + 1.0, ly(x_end) + side * 1.6)),
                               pref_speed=pref, role="leader"))
    elif kind == "overtake":
        x0 = start[0] + float(rng.uniform(4.0, 6.0))
        pref = float(rng.uniform(0.3, 0.5))
        peds.append(Pedestrian((x0, ly(x0)), waypoints=((16.0, ly(16.0)),
                                                       (16.5, ly(16.0) - 1.5)),
                               pref_speed=pref, role="slow"))
    elif kind == "waiting_line":
        yc, w = meta["yc"], meta["width"]
        xq = float(rng.uniform(9.0, 12.0))
        y_line = ly(xq)
        lo, hi = yc - w / 2 + 0.5, yc + w / 2 - 0.5
        n = 5
        while n > 3 and (n - 1) * 0.8 > hi - lo - 1.0:
            n -= 1
        off = float(rng.uniform(-0.3, 0.3))
        ys = [y_line + off + (k - (n - 1) / 2) * 0.8 for k in range(n)]
        shift = max(0.0, ys[-1] - (hi - 1.0))
        ys = [y - shift for y in ys]
        shift = max(0.0, lo - ys[0])
        ys = [y + shift for y in ys]
        j = int(np.argmin([abs(y - y_line) for y in ys]))
        open_at = t_robot(xq - 1.0) + float(rng.uniform(0.5, 3.0))
        up = ys[-1] + 1.0 <= hi + 0.3
        for k, y in enumerate(ys):
            moves = (k >= j) if up else (k <= j)
            if moves:
                target = (xq, y + (1.0 if up else -1.0))
                peds.append(Pedestrian((xq, y), waypoints=((xq, y), target), pref_speed=0.5,
                                       delay=open_at, role="queue"))
            else:
                peds.append(Pedestrian((xq, y), waypoints=((xq, y),), pref_speed=0.5,
                                       role="queue"))
    else:
        raise ScenarioError(f"unknown scenario kind {kind!r}")
    return peds


def _lab_route() -> np.ndarray:
    return np.array([LAB_ROUTE["start"][:2], LAB_ROUTE["corner"], LAB_ROUTE["goal"]])


def _lab_point(s: float) -> tuple[float, float]:
    pts = _lab_route()
    seg = np.hypot(*np.diff(pts, axis=0).T)
    if s <= seg[0]:
        return (pts[0, 0] + s, pts[0, 1])
    s -= seg[0]
    return (pts[1, 0], pts[1, 1] + min(s, seg[1]))


def _ood_peds(kind, rng) -> list[Pedestrian]:
    """Lab scenarios; speeds and offsets lie outside the in-distribution ranges."""
    start = LAB_ROUTE["start"]
    if kind == "frontal_approach":
        s0 = float(rng.uniform(12.0, 17.0))
        pref = float(rng.uniform(1.45, 1.6))
        x0, y0 = _lab_point(s0)
        wps = []
        if s0 > 13.0:
            wps.append((LAB_ROUTE["corner"][0] - 0.2, LAB_ROUTE["corner"][1] + 0.4))
        wps.append((1.5, LAB_ROUTE["corner"][1] + 0.4))
        if y0 > LAB_ROUTE["corner"][1]:
            x0 -= 0.4
        else:
            y0 += 0.4
        return [Pedestrian((x0, y0), waypoints=tuple(wps), pref_speed=pref, role="oncoming")]
    if kind == "intersection":
        xc = LAB_ROUTE["cross_x"]
        pref = float(rng.uniform(1.35, 1.55))
        side = 1 if rng.random() < 0.5 else -1
        d0 = 6.0 if side > 0 else 3.0
        y_line = start[1]
        arrive = (xc - start[0]) / 1.5 + float(rng.uniform(-1.0, 1.0))
        delay = max(0.0, arrive - d0 / pref)
        return [Pedestrian((xc, y_line + side * d0),
                           waypoints=((xc, y_line - side * (3.0 if side > 0 else 6.0)),),
                           pref_speed=pref, delay=delay, role="crossing")]
    if kind == "following":
        gap = float(rng.uniform(3.0, 3.6))
        pref = float(rng.uniform(0.6, 0.8))
        x0 = start[0] + gap
        c = LAB_ROUTE["corner"]
        return [Pedestrian((x0, start[1]), waypoints=((c[0], c[1]), (c[0], 16.0), (14.0, 18.2)),
                           pref_speed=pref, role="leader")]
    raise ScenarioError(f"no out-of-distribution variant for {kind!r}")


def make_scenario(kind: str, seed: int, ood: bool = False) -> ScenarioSpec:
    """Scenario library: deterministic spec from (kind, seed, split family)."""
    if kind not in SCENARIO_KINDS:
        raise ScenarioError(f"unknown scenario kind {kind!r}")
    rng = np.random.default_rng([int(seed), SCENARIO_KINDS.index(kind), int(ood), 0x5C])
    if ood:
        if kind not in OOD_KINDS:
            raise ScenarioError(f"no out-of-distribution variant for {kind!r}")
        peds = _ood_peds(kind, rng)
        return ScenarioSpec(kind, "lab", int(seed), tuple(peds), Pose2D.from_list(LAB_ROUTE["start"]),
                            Pose2D(LAB_ROUTE["goal"][0], LAB_ROUTE["goal"][1], math.pi / 2))
    map_id = f"campus/{seed}" + ("/door" if kind == "narrow_doorway" else "")
    meta = make_map(map_id).meta
    start, goal = _campus_endpoints(meta, rng, kind)
    peds = _id_peds(kind, meta, start, goal, rng)
    th = _heading(start, goal)
    return ScenarioSpec(kind, map_id, int(seed), tuple(peds), Pose2D(start[0], start[1], th),
                        Pose2D(goal[0], goal[1], th))
