"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when
``HYBRIDNAV_PURE_PYTHON=1`` is set, the pure-Python twins are used.
"""

from __future__ import annotations

import math
import os

import numpy as np

from hybridnav import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("HYBRIDNAV_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from hybridnav import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None
    else:
        _impl = _compiled
        BACKEND = "cython"
else:
    _compiled = None


def backends() -> dict:
    """Available implementations keyed by name (for tests and benchmarks)."""
    out = {"python": _fallback}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def edge_weights(resolution: float, divisor: float = 64.0) -> np.ndarray:
    """Cost of stepping into a cell of each cost value, straight (row 0) and diagonal (row 1)."""
    steps = (resolution, resolution * math.sqrt(2.0))
    w = np.empty((2, 255))
    for d, step in enumerate(steps):
        for c in range(255):
            w[d, c] = step * (1.0 + c / divisor)
    return w


def dijkstra(cost, start, goal, weights):
    return _impl.dijkstra(np.ascontiguousarray(cost, dtype=np.uint8), int(start), int(goal),
                          np.ascontiguousarray(weights, dtype=np.float64))


def raycast(occ, ox, oy, res, px, py, angles, max_range, discs):
    discs = np.ascontiguousarray(np.asarray(discs, dtype=np.float64).reshape(-1, 3))
    return _impl.raycast(np.ascontiguousarray(occ, dtype=np.uint8), float(ox), float(oy),
                         float(res), float(px), float(py),
                         np.ascontiguousarray(angles, dtype=np.float64), float(max_range), discs)


def hausdorff(a, b):
    return _impl.hausdorff(np.ascontiguousarray(a, dtype=np.float64),
                           np.ascontiguousarray(b, dtype=np.float64))


def dwa_scores(x, y, th, vs, ws, n_steps, dt, cost, clearance, ox, oy, res, plan, plan_s,
               lookahead, weights, v_max, spacing):
    return _impl.dwa_scores(
        float(x), float(y), float(th),
        np.ascontiguousarray(vs, dtype=np.float64), np.ascontiguousarray(ws, dtype=np.float64),
        int(n_steps), float(dt),
        np.ascontiguousarray(cost, dtype=np.uint8), np.ascontiguousarray(clearance, dtype=np.float64),
        float(ox), float(oy), float(res),
        np.ascontiguousarray(plan, dtype=np.float64), np.ascontiguousarray(plan_s, dtype=np.float64),
        float(lookahead), np.ascontiguousarray(weights, dtype=np.float64), float(v_max), float(spacing),
    )


def shortcut(cost, pts, pcost, ox, oy, res):
    return _impl.shortcut(np.ascontiguousarray(cost, dtype=np.uint8),
                          np.ascontiguousarray(pts, dtype=np.float64),
                          np.ascontiguousarray(pcost, dtype=np.int64),
                          float(ox), float(oy), float(res))


def stamp_d2(d2, cells, rad):
    """In-place: ``d2`` must be a C-contiguous int32 array."""
    cells = np.ascontiguousarray(np.asarray(cells, dtype=np.int64).reshape(-1, 2))
    _impl.stamp_d2(d2, cells, int(rad))


def relax_path(cost, q, iters, step, ox, oy, res):
    """In-place: ``q`` must be a C-contiguous float64 (n, 2) array."""
    _impl.relax_path(np.ascontiguousarray(cost, dtype=np.uint8), q, int(iters), float(step),
                     float(ox), float(oy), float(res))
