"""Compare the compiled kernels with their pure-Python twins.

Each kernel runs on inputs taken from a real planning step on a campus map.
Outputs are checked for exact equality before timing.

    python benchmarks/bench_kernels.py [--repeat N] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from hybridnav import kernels
from hybridnav.classical import PlannerConfig, _weights, plan_global, planning_costmap
from hybridnav.core_types import arc_lengths, beam_angles
from hybridnav.dataset import record
from hybridnav.world import make_map, make_scenario


def _inputs():
    spec = make_scenario("frontal_approach", 0)
    ep = record(spec)
    obs = ep.steps[len(ep.steps) // 3].obs
    wmap = make_map(spec.map)
    cfg = PlannerConfig()
    cm, _ = planning_costmap(obs, wmap, cfg)
    plan = plan_global(cm, obs.pose.xy, obs.goal.xy, cfg)
    cols = cm.shape[1]
    s_cell, g_cell = cm.cell_of(*obs.pose.xy), cm.cell_of(*obs.goal.xy)
    p = cfg.dwa
    rng = np.random.default_rng(0)
    rough = plan.points + rng.normal(0, 0.02, plan.points.shape)
    pose = obs.pose
    return {
        "dijkstra": lambda m: m.dijkstra(cm.cells, s_cell[0] * cols + s_cell[1],
                                         g_cell[0] * cols + g_cell[1], _weights(cm.resolution, 64.0)),
        "dwa_scores": lambda m: m.dwa_scores(
            pose.x, pose.y, pose.theta, p.v_grid(), p.w_grid(), p.n_steps, p.dt, cm.cells,
            cm.clearance(), cm.origin[0], cm.origin[1], cm.resolution, plan.points,
            arc_lengths(plan.points), p.lookahead, p.weights(), p.v_max, p.check_spacing),
        "hausdorff": lambda m: m.hausdorff(plan.points, np.ascontiguousarray(rough)),
        "raycast": lambda m: m.raycast(wmap.occupancy, wmap.origin[0], wmap.origin[1],
                                       wmap.resolution, pose.x, pose.y, beam_angles() + pose.theta,
                                       10.0, np.array([[pose.x + 2.0, pose.y, 0.3]])),
        "relax_path": lambda m: _relax(m, cm, rough),
    }


def _relax(m, cm, pts):
    q = np.ascontiguousarray(pts.copy())
    m.relax_path(cm.cells, q, 50, 0.1, cm.origin[0], cm.origin[1], cm.resolution)
    return q


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled backend unavailable; build the package first", file=sys.stderr)
        return 1
    results = {}
    print(f"{'kernel':<12}{'python ms':>12}{'cython ms':>12}{'speedup':>10}  equal")
    for name, call in _inputs().items():
        py, cy = impls["python"], impls["cython"]
        equal = _same(call(py), call(cy))
        t_py = _time(lambda: call(py), max(1, args.repeat // 2))
        t_cy = _time(lambda: call(cy), args.repeat)
        results[name] = {"python_s": t_py, "cython_s": t_cy, "speedup": t_py / t_cy, "equal": equal}
        print(f"{name:<12}{t_py * 1e3:>12.2f}{t_cy * 1e3:>12.3f}{t_py / t_cy:>10.0f}  {equal}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=1, sort_keys=True)
    return 0 if all(r["equal"] for r in results.values()) else 2


if __name__ == "__main__":
    sys.exit(main())
