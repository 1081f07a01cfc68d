"""Occupancy-derived cost grids: LETHAL marking, inflation and the social layer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import ndimage

from hybridnav import kernels
from hybridnav.core_types import Pose2D, RangeScan, beam_angles

LETHAL = 254
INSCRIBED = 253

INSCRIBED_RADIUS = 0.35
DECAY = 3.0
SOCIAL_SIGMA = 0.8
SOCIAL_AMPLITUDE = 200


@dataclass(frozen=True, eq=False)
class Costmap:
    """Cost grid indexed ``cells[row, col]``; row follows y, col follows x.

    ``d2`` holds the squared distance, in cells, to the nearest LETHAL cell. It
    is only present after inflation and is capped at ``d2_cap``.
    """

    cells: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)
    d2: np.ndarray | None = None
    d2_cap: int = 0

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.uint8, order="C")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (
            math.floor((y - self.origin[1]) / self.resolution),
            math.floor((x - self.origin[0]) / self.resolution),
        )

    def center_of(self, row: int, col: int) -> tuple[float, float]:
        return (
            self.origin[0] + (col + 0.5) * self.resolution,
            self.origin[1] + (row + 0.5) * self.resolution,
        )

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.shape[0] and 0 <= col < self.shape[1]

    def cost_at(self, x: float, y: float) -> int:
        r, c = self.cell_of(x, y)
        if not self.in_bounds(r, c):
            return LETHAL
        return int(self.cells[r, c])

    def clearance(self) -> np.ndarray:
        """Metres to the nearest LETHAL cell centre, saturating at the inflation horizon."""
        if self.d2 is None:
            raise ValueError("clearance needs an inflated costmap")
        return np.sqrt(np.minimum(self.d2, self.d2_cap).astype(np.float64)) * self.resolution

    def replace(self, cells: np.ndarray) -> "Costmap":
        return Costmap(cells, self.resolution, self.origin, self.d2, self.d2_cap)

    def to_pgm(self) -> str:
        """ASCII PGM dump of costs (top row is the largest y)."""
        h, w = self.shape
        rows = [" ".join(str(int(v)) for v in row) for row in self.cells[::-1]]
        return f"P2\n# hybridnav costmap res={self.resolution}\n{w} {h}\n{LETHAL}\n" + "\n".join(rows) + "\n"


def scan_endpoints(scan: RangeScan, pose: Pose2D, nudge: float = 1e-6) -> np.ndarray:
    """World positions of beams that hit something (range below max).

    Endpoints are pushed ``nudge`` metres past the surface so they fall inside
    the obstacle that stopped the ray.
    """
    r = scan.ranges
    hit = r < scan.max_range
    ang = pose.theta + beam_angles(scan.n_beams)[hit]
    rr = r[hit] + nudge
    return np.stack([pose.x + rr * np.cos(ang), pose.y + rr * np.sin(ang)], axis=1)


def _hit_cells(occupancy_shape, resolution, origin, scan, pose) -> np.ndarray:
    pts = scan_endpoints(scan, pose)
    rows = np.floor((pts[:, 1] - origin[1]) / resolution).astype(np.int64)
    cols = np.floor((pts[:, 0] - origin[0]) / resolution).astype(np.int64)
    ok = (rows >= 0) & (rows < occupancy_shape[0]) & (cols >= 0) & (cols < occupancy_shape[1])
    return np.stack([rows[ok], cols[ok]], axis=1)


def build(world_map, scan: RangeScan, pose: Pose2D) -> Costmap:
    """Occupied map cells and scan-hit endpoints become LETHAL; all else 0."""
    cells = np.where(world_map.occupancy, LETHAL, 0).astype(np.uint8)
    hits = _hit_cells(cells.shape, world_map.resolution, world_map.origin, scan, pose)
    if len(hits):
        cells[hits[:, 0], hits[:, 1]] = LETHAL
    return Costmap(cells, world_map.resolution, world_map.origin)


@lru_cache(maxsize=32)
def cost_lut(resolution: float, inscribed_radius: float, decay: float) -> np.ndarray:
    """Inflation cost indexed by squared cell distance; the last entry is 0."""
    out = []
    d2 = 0
    while True:
        d = math.sqrt(d2) * resolution
        if d < inscribed_radius:
            cost = INSCRIBED
        else:
            cost = max(0, math.floor(252.0 * math.exp(-decay * (d - inscribed_radius)) + 0.5))
        out.append(cost)
        if cost == 0:
            break
        d2 += 1
    lut = np.array(out, dtype=np.uint8)
    lut.setflags(write=False)
    return lut


def _apply_lut(d2: np.ndarray, lut: np.ndarray) -> np.ndarray:
    return lut[np.minimum(d2, len(lut) - 1)]


def inflate(cm: Costmap, inscribed_radius: float = INSCRIBED_RADIUS, decay: float = DECAY) -> Costmap:
    """Inflate LETHAL cells using an exact Euclidean distance transform."""
    if not inscribed_radius > 0:
        raise ValueError("inscribed_radius must be positive")
    lut = cost_lut(cm.resolution, inscribed_radius, decay)
    cap = len(lut) - 1
    lethal = cm.cells >= LETHAL
    if not lethal.any():
        d2 = np.full(cm.shape, np.iinfo(np.int32).max, dtype=np.int32)
        return Costmap(cm.cells.copy(), cm.resolution, cm.origin, d2, cap)
    _, idx = ndimage.distance_transform_edt(~lethal, return_indices=True)
    rr, cc = np.indices(cm.shape)
    d2 = ((idx[0] - rr) ** 2 + (idx[1] - cc) ** 2).astype(np.int32)
    cells = np.maximum(cm.cells, _apply_lut(d2, lut))
    cells[lethal] = LETHAL
    return Costmap(cells, cm.resolution, cm.origin, d2, cap)


class StaticLayer:
    """Inflated static map, reused across timesteps.

    ``with_hits`` adds scan-hit LETHAL cells and re-inflates only around them;
    the result equals ``inflate(build(...))`` exactly.
    """

    def __init__(self, world_map, inscribed_radius: float = INSCRIBED_RADIUS, decay: float = DECAY):
        self.map = world_map
        self.lut = cost_lut(world_map.resolution, inscribed_radius, decay)
        self.cap = len(self.lut) - 1
        self.radius_cells = math.isqrt(self.cap) + 1
        base = inflate(Costmap(np.where(world_map.occupancy, LETHAL, 0), world_map.resolution,
                               world_map.origin), inscribed_radius, decay)
        self.costmap = base
        self.lethal = world_map.occupancy.copy()
        self.d2 = np.ascontiguousarray(base.d2, dtype=np.int32)

    def with_hits(self, hits: np.ndarray) -> Costmap:
        if len(hits):
            new = hits[~self.lethal[hits[:, 0], hits[:, 1]]]
        else:
            new = hits
        if len(new) == 0:
            return self.costmap
        new = np.unique(new, axis=0)
        d2 = self.d2.copy()
        kernels.stamp_d2(d2, new, self.radius_cells)
        cells = _apply_lut(d2, self.lut)
        cells[self.lethal] = LETHAL
        cells[new[:, 0], new[:, 1]] = LETHAL
        return Costmap(cells, self.map.resolution, self.map.origin, d2, self.cap)

    def for_scan(self, scan: RangeScan, pose: Pose2D) -> Costmap:
        return self.with_hits(_hit_cells(self.lethal.shape, self.map.resolution, self.map.origin,
                                         scan, pose))


_STATIC_CACHE: dict = {}


def static_layer(world_map, inscribed_radius: float = INSCRIBED_RADIUS, decay: float = DECAY) -> StaticLayer:
    key = (id(world_map), inscribed_radius, decay)
    hit = _STATIC_CACHE.get(key)
    if hit is None or hit[0] is not world_map:
        if len(_STATIC_CACHE) > 64:
            _STATIC_CACHE.clear()
        hit = (world_map, StaticLayer(world_map, inscribed_radius, decay))
        _STATIC_CACHE[key] = hit
    return hit[1]


def social_increments(shape, resolution, origin, detections, sigma: float, amplitude: float) -> np.ndarray:
    """Per-cell sum of rounded Gaussian bumps (integers, so order-independent)."""
    inc = np.zeros(shape, dtype=np.int32)
    # beyond this radius every rounded bump term is 0
    reach = sigma * math.sqrt(2.0 * math.log(max(2.0 * amplitude, 1.0))) + resolution
    for dx_, dy_ in detections:
        c0 = max(0, math.floor((dx_ - reach - origin[0]) / resolution))
        c1 = min(shape[1], math.floor((dx_ + reach - origin[0]) / resolution) + 1)
        r0 = max(0, math.floor((dy_ - reach - origin[1]) / resolution))
        r1 = min(shape[0], math.floor((dy_ + reach - origin[1]) / resolution) + 1)
        if c0 >= c1 or r0 >= r1:
            continue
        xs = origin[0] + (np.arange(c0, c1) + 0.5) * resolution
        ys = origin[1] + (np.arange(r0, r1) + 0.5) * resolution
        sq = (xs[None, :] - dx_) ** 2 + (ys[:, None] - dy_) ** 2
        bump = np.floor(amplitude * np.exp(-sq / (2.0 * sigma * sigma)) + 0.5).astype(np.int32)
        inc[r0:r1, c0:c1] += bump
    return inc


def add_social_layer(cm: Costmap, detections: Sequence[tuple[float, float]],
                     sigma: float = SOCIAL_SIGMA, amplitude: float = SOCIAL_AMPLITUDE) -> Costmap:
    """Add Gaussian cost bumps around detected people; LETHAL cells are untouched."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if amplitude > INSCRIBED:
        raise ValueError("amplitude must be <= 253")
    if len(detections) == 0:
        return cm
    inc = social_increments(cm.shape, cm.resolution, cm.origin, detections, sigma, amplitude)
    cells = np.minimum(cm.cells.astype(np.int32) + inc, INSCRIBED)
    lethal = cm.cells >= LETHAL
    cells[lethal] = LETHAL
    return cm.replace(cells.astype(np.uint8))


def _clusters(points: np.ndarray, threshold: float) -> list[np.ndarray]:
    """Single-linkage clusters as index arrays, ordered by smallest member index."""
    n = len(points)
    if n == 0:
        return []
    diff = points[:, None, :] - points[None, :, :]
    adj = (diff[..., 0] ** 2 + diff[..., 1] ** 2) <= threshold * threshold
    label = -np.ones(n, dtype=np.int64)
    out = []
    for seed in range(n):
        if label[seed] >= 0:
            continue
        label[seed] = len(out)
        stack = [seed]
        members = []
        while stack:
            i = stack.pop()
            members.append(i)
            for j in np.flatnonzero(adj[i] & (label < 0)):
                label[j] = label[seed]
                stack.append(j)
        out.append(np.array(sorted(members)))
    return out


@lru_cache(maxsize=32)
def _explained_mask(world_map) -> np.ndarray:
    return ndimage.binary_dilation(world_map.occupancy, structure=np.ones((3, 3), bool))


def detect_pedestrians(scan_history: Sequence[RangeScan], odom_history: Sequence[Pose2D],
                       world_map, cluster_threshold: float = 0.5,
                       min_motion: float = 0.1) -> list[tuple[float, float]]:
    """Moving clusters of scan endpoints not explained by the static map.

    Clusters are chained newest-to-oldest by nearest centroid; a chain is kept
    when its centroid moved at least ``min_motion`` across the history window.
    """
    if len(scan_history) != len(odom_history):
        raise ValueError("scan and odometry histories differ in length")
    explained = _explained_mask(world_map)
    per_scan = []
    for scan, pose in zip(scan_history, odom_history):
        pts = scan_endpoints(scan, pose)
        if len(pts):
            rows = np.floor((pts[:, 1] - world_map.origin[1]) / world_map.resolution).astype(int)
            cols = np.floor((pts[:, 0] - world_map.origin[0]) / world_map.resolution).astype(int)
            inside = (rows >= 0) & (rows < explained.shape[0]) & (cols >= 0) & (cols < explained.shape[1])
            keep = inside.copy()
            keep[inside] = ~explained[rows[inside], cols[inside]]
            pts = pts[keep]
        per_scan.append(np.array([pts[c].mean(axis=0) for c in _clusters(pts, cluster_threshold)]).reshape(-1, 2))
    if len(per_scan) < 2:
        return []
    out = []
    link = 0.6
    for c in per_scan[-1]:
        cur = c
        ok = True
        for older in reversed(per_scan[:-1]):
            if len(older) == 0:
                ok = False
                break
            d = np.hypot(older[:, 0] - cur[0], older[:, 1] - cur[1])
            j = int(np.argmin(d))
            if d[j] > link:
                ok = False
                break
            cur = older[j]
        if ok and math.hypot(c[0] - cur[0], c[1] - cur[1]) >= min_motion:
            out.append((float(c[0]), float(c[1])))
    return out
