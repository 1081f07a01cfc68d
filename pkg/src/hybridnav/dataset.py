"""Demonstration recording, goal extraction, labeling and split construction."""

from __future__ import annotations

import hashlib
import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from hybridnav import kernels
from hybridnav.classical import PlannerConfig, PlanningError, classical_step
from hybridnav.core_types import (
    DT, HISTORY, Command, DemoStep, Episode, GlobalPlan, Observation, Pose2D, RangeScan,
    resample_plan, to_robot_frame,
)
from hybridnav.expert import expert_policy
from hybridnav.learned import bc_target, features
from hybridnav.world import (
    OOD_KINDS, SCENARIO_KINDS, ScenarioSpec, make_map, make_scenario, sense, spawn, step,
)

MANIFEST_VERSION = "1.0.0"
GOAL_HORIZON = 10.0
GOAL_TOLERANCE = 0.3
MAX_STEPS = 600
SPLITS = ("id_train", "id_test", "ood_test")
TEST_SPLITS = ("id_test", "ood_test")


class DataError(ValueError):
    pass


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def atomic_write(path: Path | str, data: bytes | str) -> None:
    """Write via a temp file and rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(data.encode() if isinstance(data, str) else data)
    os.replace(tmp, path)


def atomic_save_npy(path: Path | str, arr: np.ndarray) -> None:
    import io

    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    atomic_write(path, buf.getvalue())


# --------------------------------------------------------------------------- recording


def goal_index(points: np.ndarray, t: int, horizon: float = GOAL_HORIZON) -> int:
    """Index of the first point whose arc length from ``t`` reaches ``horizon``."""
    seg = np.hypot(np.diff(points[t:, 0]), np.diff(points[t:, 1]))
    cum = np.cumsum(seg)
    hit = np.flatnonzero(cum >= horizon)
    if len(hit):
        return t + int(hit[0]) + 1
    return len(points) - 1


def _trajectory(episode: Episode) -> list[Pose2D]:
    poses = [s.obs.pose for s in episode.steps]
    final = episode.meta.get("final_pose")
    if final is not None:
        poses.append(Pose2D.from_list(final))
    return poses


def extract_goal(episode: Episode, t: int, horizon: float = GOAL_HORIZON) -> Pose2D:
    poses = _trajectory(episode)
    if not 0 <= t < len(episode.steps):
        raise IndexError(f"step {t} outside episode of {len(episode.steps)} steps")
    pts = np.array([p.xy for p in poses])
    return poses[goal_index(pts, t, horizon)]


@dataclass
class Rollout:
    scans: list[RangeScan]
    poses: list[Pose2D]
    commands: list[Command]
    status: str
    final_pose: Pose2D


def rollout_expert(spec: ScenarioSpec, max_steps: int = MAX_STEPS,
                   goal_tol: float = GOAL_TOLERANCE) -> Rollout:
    st = spawn(spec)
    scans, poses, cmds = [], [], []
    status = "timeout"
    for _ in range(max_steps):
        if math.hypot(st.robot.x - spec.goal.x, st.robot.y - spec.goal.y) < goal_tol:
            status = "ok"
            break
        scans.append(sense(st))
        poses.append(st.robot)
        cmd = expert_policy(st, spec.goal)
        cmds.append(cmd)
        st = step(st, cmd)
        if st.collided:
            status = "collision"
            break
    else:
        if math.hypot(st.robot.x - spec.goal.x, st.robot.y - spec.goal.y) < goal_tol:
            status = "ok"
    return Rollout(scans, poses, cmds, status, st.robot)


def _history(seq: Sequence, k: int, n: int = HISTORY) -> tuple:
    lo = k - n + 1
    return tuple(seq[max(i, 0)] for i in range(lo, k + 1))


def record(spec: ScenarioSpec, max_steps: int = MAX_STEPS, horizon: float = GOAL_HORIZON) -> Episode:
    """Run the expert and package every step as a DemoStep.

    ``meta['status']`` is ``ok``, ``collision`` or ``timeout``; only ``ok``
    episodes are usable. The returned episode has already been through the
    text round trip, so it equals what a reader of the file sees.
    """
    ro = rollout_expert(spec, max_steps)
    pts = np.array([p.xy for p in ro.poses] + [ro.final_pose.xy])
    all_poses = list(ro.poses) + [ro.final_pose]
    steps = []
    for k in range(len(ro.poses)):
        g = goal_index(pts, k, horizon)
        try:
            plan = GlobalPlan.from_points(pts[k:g + 1])
        except ValueError:
            break
        obs = Observation(
            scan_history=_history(ro.scans, k),
            odom_history=_history(ro.poses, k),
            last_command=ro.commands[k - 1] if k > 0 else Command(0.0, 0.0),
            goal=all_poses[g],
            stamp=k * DT,
        )
        steps.append(DemoStep(obs, plan, ro.commands[k]))
    meta = {"kind": spec.kind, "map": spec.map, "status": ro.status,
            "final_pose": ro.final_pose.to_list(), "spec": spec.to_dict()}
    ep = Episode(spec.scenario_id, spec.seed, steps, DT, meta)
    return Episode.loads(ep.dumps())


# --------------------------------------------------------------------------- labeling


def l2_command(a: Command, b: Command) -> float:
    return math.hypot(a.v - b.v, a.omega - b.omega)


@dataclass
class LabeledEpisode:
    arrays: dict[str, np.ndarray]
    dropped: Counter


def label_episode(episode: Episode, cfg: PlannerConfig | None = None, eps: float = 1.0,
                  social_cfg: PlannerConfig | None = None, keep_plans: bool = False) -> LabeledEpisode:
    """Compare the classical planner against every demo step of one episode."""
    cfg = cfg or PlannerConfig()
    wmap = make_map(episode.meta["map"])
    cols: dict[str, list] = {k: [] for k in (
        "features", "c", "d_global", "d_local", "bc_target", "demo_cmd", "classical_cmd",
        "recovery", "step")}
    if social_cfg is not None:
        for k in ("d_global_social", "d_local_social", "recovery_social", "social_ok"):
            cols[k] = []
    if keep_plans:
        cols["demo_plan_rf"] = []
    dropped: Counter = Counter()
    for t, st in enumerate(episode.steps):
        try:
            out = classical_step(st.obs, wmap, cfg)
        except PlanningError as exc:
            dropped[exc.reason] += 1
            continue
        demo200 = resample_plan(st.demo_plan, cfg.plan_points)
        d = kernels.hausdorff(out.plan.points, demo200.points)
        cols["features"].append(features(st.obs))
        cols["c"].append(1 if d <= eps else 0)
        cols["d_global"].append(d)
        cols["d_local"].append(l2_command(out.command, st.demo_command))
        cols["bc_target"].append(bc_target(st.demo_plan, st.obs.pose))
        cols["demo_cmd"].append((st.demo_command.v, st.demo_command.omega))
        cols["classical_cmd"].append((out.command.v, out.command.omega))
        cols["recovery"].append(out.recovery)
        cols["step"].append(t)
        if social_cfg is not None:
            try:
                so = classical_step(st.obs, wmap, social_cfg)
                cols["d_global_social"].append(kernels.hausdorff(so.plan.points, demo200.points))
                cols["d_local_social"].append(l2_command(so.command, st.demo_command))
                cols["recovery_social"].append(so.recovery)
                cols["social_ok"].append(True)
            except PlanningError:
                cols["d_global_social"].append(math.inf)
                cols["d_local_social"].append(math.inf)
                cols["recovery_social"].append(True)
                cols["social_ok"].append(False)
        if keep_plans:
            cols["demo_plan_rf"].append(to_robot_frame(demo200.points, st.obs.pose))
    n = len(cols["step"])
    arrays = {}
    for k, v in cols.items():
        if k in ("features",):
            arrays[k] = np.array(v, dtype=np.float64).reshape(n, -1)
        elif k in ("bc_target",):
            arrays[k] = np.array(v, dtype=np.float64).reshape(n, -1)
        elif k in ("demo_cmd", "classical_cmd"):
            arrays[k] = np.array(v, dtype=np.float64).reshape(n, 2)
        elif k == "demo_plan_rf":
            arrays[k] = np.array(v, dtype=np.float64).reshape(n, cfg.plan_points, 2)
        elif k in ("c",):
            arrays[k] = np.array(v, dtype=np.int8)
        elif k in ("recovery", "recovery_social", "social_ok"):
            arrays[k] = np.array(v, dtype=bool)
        elif k == "step":
            arrays[k] = np.array(v, dtype=np.int64)
        else:
            arrays[k] = np.array(v, dtype=np.float64)
    return LabeledEpisode(arrays, dropped)


def alpha_from_labels(c: np.ndarray) -> float:
    if len(c) == 0:
        raise DataError("no labeled steps")
    return float(np.mean(c))


# --------------------------------------------------------------------------- splits


@dataclass(frozen=True)
class SplitConfig:
    master_seed: int = 0
    id_episodes: int = 200
    ood_episodes: int = 30
    test_fraction: float = 0.2


@dataclass(frozen=True)
class EpisodePlan:
    split: str
    kind: str
    seed: int
    ood: bool

    @property
    def filename(self) -> str:
        return f"{self.split}/{self.kind}_{self.seed}.jsonl"

    def spec(self) -> ScenarioSpec:
        return make_scenario(self.kind, self.seed, self.ood)


def plan_splits(cfg: SplitConfig) -> list[EpisodePlan]:
    """Deterministic list of episodes to record, already tagged by split."""
    if cfg.id_episodes <= 0:
        raise DataError("empty training set")
    if cfg.ood_episodes < 0:
        raise DataError("ood episode count must be non-negative")
    base = int(cfg.master_seed) * 1_000_000
    rng = np.random.default_rng([int(cfg.master_seed), 0x5917])
    n_test = int(round(cfg.test_fraction * cfg.id_episodes))
    test = set(rng.permutation(cfg.id_episodes)[:n_test].tolist())
    out = []
    for i in range(cfg.id_episodes):
        split = "id_test" if i in test else "id_train"
        out.append(EpisodePlan(split, SCENARIO_KINDS[i % len(SCENARIO_KINDS)], base + i, False))
    for j in range(cfg.ood_episodes):
        out.append(EpisodePlan("ood_test", OOD_KINDS[j % len(OOD_KINDS)], base + 500_000 + j, True))
    return out


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def _ordered_map(fn, items: list, workers: int | None):
    """Ordered map, across processes when more than one worker is available."""
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return map(fn, items)
    import multiprocessing as mp
    from concurrent.futures import ProcessPoolExecutor

    ex = ProcessPoolExecutor(max_workers=workers, mp_context=mp.get_context("fork"))
    return _drain(ex, ex.map(fn, items, chunksize=1))


def _drain(ex, it):
    with ex:
        yield from it


def _record_text(ep_plan: EpisodePlan) -> tuple[str, str, int]:
    ep = record(ep_plan.spec())
    return ep.dumps(), ep.meta["status"], len(ep.steps)


def build_splits(cfg: SplitConfig, out_dir: Path | str | None = None,
                 progress: Callable[[str], None] | None = None,
                 workers: int | None = None) -> dict[str, Any]:
    """Record every planned episode and return the manifest (written when out_dir is set)."""
    entries, excluded = [], []
    plans = plan_splits(cfg)
    for ep_plan, (text, status, n_steps) in zip(plans, _ordered_map(_record_text, plans, workers)):
        if status != "ok" or not n_steps:
            excluded.append({"file": ep_plan.filename, "status": status})
            continue
        if out_dir is not None:
            atomic_write(Path(out_dir) / ep_plan.filename, text)
        entries.append({"file": ep_plan.filename, "split": ep_plan.split, "kind": ep_plan.kind,
                        "seed": ep_plan.seed, "map": ep_plan.spec().map, "steps": n_steps,
                        "sha256": sha256_bytes(text.encode())})
        if progress:
            progress(ep_plan.filename)
    manifest = {"version": MANIFEST_VERSION, "master_seed": cfg.master_seed,
                "id_episodes": cfg.id_episodes, "ood_episodes": cfg.ood_episodes,
                "test_fraction": cfg.test_fraction, "splits": list(SPLITS),
                "episodes": entries, "excluded": excluded}
    if out_dir is not None:
        atomic_write(Path(out_dir) / "manifest.json", canonical_json(manifest) + "\n")
    return manifest


def manifest_hash(manifest: dict[str, Any]) -> str:
    return sha256_bytes((canonical_json(manifest) + "\n").encode())


def load_manifest(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from None
    if manifest.get("version", "").split(".")[0] != MANIFEST_VERSION.split(".")[0]:
        raise DataError(f"unsupported manifest version {manifest.get('version')!r}")
    return manifest


def load_episodes(manifest_path: Path | str, manifest: dict[str, Any] | None = None,
                  splits: Iterable[str] = SPLITS, verify: bool = True) -> list[tuple[dict, Episode]]:
    manifest_path = Path(manifest_path)
    manifest = manifest or load_manifest(manifest_path)
    root = manifest_path.parent
    wanted = set(splits)
    missing, bad, out = [], [], []
    for e in manifest["episodes"]:
        if e["split"] not in wanted:
            continue
        p = root / e["file"]
        if not p.exists():
            missing.append(e["file"])
            continue
        data = p.read_bytes()
        if verify and sha256_bytes(data) != e["sha256"]:
            bad.append(e["file"])
            continue
        out.append((e, Episode.loads(data.decode())))
    if missing:
        raise DataError("missing episodes: " + ", ".join(missing))
    if bad:
        raise DataError("hash mismatch: " + ", ".join(bad))
    return out


def _label_job(job) -> LabeledEpisode:
    ep, cfg, eps, social_cfg, keep = job
    return label_episode(ep, cfg, eps, social_cfg, keep_plans=keep)


def label_dataset(manifest_path: Path | str, out_dir: Path | str, cfg: PlannerConfig,
                  eps: float = 1.0, social: bool = True,
                  progress: Callable[[str], None] | None = None,
                  workers: int | None = None) -> dict[str, Any]:
    """Label every episode; the social-layer variant is computed on test splits only."""
    from dataclasses import replace

    manifest = load_manifest(manifest_path)
    eps_list = load_episodes(manifest_path, manifest)
    social_cfg = replace(cfg, social_layer=True) if social else None
    per_split: dict[str, list[dict[str, np.ndarray]]] = {s: [] for s in SPLITS}
    dropped: dict[str, Counter] = {s: Counter() for s in SPLITS}
    ep_index: dict[str, int] = {s: 0 for s in SPLITS}
    jobs = [(ep, cfg, eps, social_cfg if e["split"] in TEST_SPLITS else None,
             e["split"] in TEST_SPLITS) for e, ep in eps_list]
    for (entry, _), lab in zip(eps_list, _ordered_map(_label_job, jobs, workers)):
        split = entry["split"]
        lab.arrays["episode"] = np.full(len(lab.arrays["step"]), ep_index[split], dtype=np.int64)
        ep_index[split] += 1
        per_split[split].append(lab.arrays)
        dropped[split].update(lab.dropped)
        if progress:
            progress(entry["file"])
    out_dir = Path(out_dir)
    summary: dict[str, Any] = {"version": MANIFEST_VERSION, "eps": eps,
                               "manifest_sha256": manifest_hash(manifest),
                               "planner": cfg.to_dict(), "social_layer": bool(social),
                               "splits": {}, "files": {}}
    for split in SPLITS:
        chunks = per_split[split]
        if not chunks:
            continue
        keys = chunks[0].keys()
        merged = {k: np.concatenate([c[k] for c in chunks]) for k in keys}
        for k, arr in merged.items():
            name = f"{split}/{k}.npy"
            atomic_save_npy(out_dir / name, arr)
            summary["files"][name] = sha256_bytes((out_dir / name).read_bytes())
        c = merged["c"]
        info = {"episodes": len(chunks), "steps": int(len(c)), "n_compliant": int(c.sum()),
                "n_noncompliant": int(len(c) - c.sum()),
                "alpha": float(c.mean()) if len(c) else None,
                "dropped": dict(sorted(dropped[split].items())),
                "episode_files": [e["file"] for e, _ in eps_list if e["split"] == split]}
        if "d_global_social" in merged:
            info["alpha_social"] = float(np.mean(merged["d_global_social"] <= eps))
        summary["splits"][split] = info
    atomic_write(out_dir / "summary.json", json.dumps(summary, sort_keys=True, indent=1) + "\n")
    return summary


def load_labeled(label_dir: Path | str, split: str) -> dict[str, np.ndarray]:
    d = Path(label_dir) / split
    if not d.is_dir():
        raise DataError(f"no labeled data for split {split!r} in {label_dir}")
    return {p.stem: np.load(p, allow_pickle=False) for p in sorted(d.glob("*.npy"))}
