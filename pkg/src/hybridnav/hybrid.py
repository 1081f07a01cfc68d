"""Gate-driven switching between the classical and learned planners."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, NamedTuple, Union

import numpy as np

from hybridnav import kernels
from hybridnav.classical import PlannerConfig, PlanningError, classical_step
from hybridnav.core_types import (
    DT, OMEGA_MAX, PLAN_POINTS, Command, GlobalPlan, Observation, resample_plan,
)
from hybridnav.dataset import MAX_STEPS, TEST_SPLITS, _history, load_labeled
from hybridnav.learned import (
    Mlp, bc_predict, decode_waypoints, features, forward, gate_probability,
    pursuit_command,
)
from hybridnav.world import ScenarioSpec, sense, spawn, step

CLASSICAL, LEARNED = "classical", "learned"
# absorbs float drift when comparing k*dt stamps against now + t_lock
_TIME_SLACK = 1e-9
# DWA rollouts that run past the plan end are penalised, so the classical planner
# parks about v_min * horizon = 0.32 m short of the goal; arrival must allow that
ARRIVAL_TOLERANCE = 0.5


@dataclass(frozen=True)
class SwitchConfig:
    n: int = 10
    r: float = 0.7
    p: float = 0.5
    t_lock: float = 2.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 < self.r <= 1.0:
            raise ValueError("r must be in (0, 1]")
        if not self.p > 0.0:
            raise ValueError("p must be positive")
        if self.t_lock < 0.0:
            raise ValueError("t_lock must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class SwitchState:
    votes: tuple[int, ...] = ()
    active: str = CLASSICAL
    override_until: float = -math.inf


def gate_class(p_classical: float) -> int:
    """1 (classical) unless the gate is strictly below one half."""
    return 1 if p_classical >= 0.5 else 0


def update_switch(state: SwitchState, vote: int, min_range: float, now: float,
                  cfg: SwitchConfig) -> tuple[SwitchState, str]:
    votes = (state.votes + (int(vote),))[-cfg.n:]
    until = state.override_until
    if min_range < cfg.p:
        until = now + cfg.t_lock
        choice = CLASSICAL
    elif now < until - _TIME_SLACK:
        choice = CLASSICAL
    else:
        zeros = votes.count(0)  # missing startup votes count as classical
        choice = LEARNED if zeros / cfg.n >= cfg.r else CLASSICAL
    return SwitchState(votes, choice, until), choice


# --------------------------------------------------------------------------- planner composition

Gate = Union[Mlp, Callable[[Observation], float]]


@dataclass
class HybridModels:
    gate: Gate
    bc: Mlp

    def p_classical(self, obs: Observation) -> float:
        if isinstance(self.gate, Mlp):
            return float(gate_probability(forward(self.gate, features(obs))))
        return float(self.gate(obs))


class HybridStep(NamedTuple):
    plan: GlobalPlan | None
    command: Command
    state: SwitchState
    info: dict


def hybrid_behavior(obs: Observation, world_map, models: HybridModels, state: SwitchState,
                    cfg: SwitchConfig | None = None, planner_cfg: PlannerConfig | None = None) -> HybridStep:
    """Evaluate both planners, vote, and return the chosen output."""
    cfg = cfg or SwitchConfig()
    planner_cfg = planner_cfg or PlannerConfig()
    try:
        cl = classical_step(obs, world_map, planner_cfg)
        cl_plan, cl_cmd, cl_rec, cl_err = cl.plan, cl.command, cl.recovery, None
    except PlanningError as exc:
        cl_plan, cl_cmd, cl_rec, cl_err = None, Command(0.0, OMEGA_MAX / 2.0), True, exc.reason
    bc = bc_predict(models.bc, obs)
    p1 = models.p_classical(obs)
    vote = gate_class(p1)
    min_range = float(np.min(obs.scan.ranges))
    new_state, choice = update_switch(state, vote, min_range, obs.stamp, cfg)
    if choice == CLASSICAL:
        plan, cmd = cl_plan, cl_cmd
    else:
        plan, cmd = bc.plan, bc.command
    info = {"choice": choice, "vote": vote, "p_classical": p1, "min_range": min_range,
            "override": min_range < cfg.p or obs.stamp < state.override_until - _TIME_SLACK,
            "classical_cmd": cl_cmd.to_list(), "learned_cmd": bc.command.to_list(),
            "classical_error": cl_err, "recovery": choice == CLASSICAL and cl_rec,
            "learned_degenerate": bc.degenerate,
            "d_planners": (kernels.hausdorff(cl_plan.points, bc.points) if cl_plan is not None
                           else None)}
    return HybridStep(plan, cmd, new_state, info)


# --------------------------------------------------------------------------- playback evaluation


@dataclass
class PlannerDistances:
    d_global: np.ndarray
    d_local: np.ndarray

    def alpha(self, eps: float) -> float:
        return float(np.count_nonzero(self.d_global <= eps)) / len(self.d_global)


def bc_playback(net: Mlp, data: dict[str, np.ndarray]) -> PlannerDistances:
    """BC distances on stored steps; the comparison runs in the robot frame."""
    out = forward(net, data["features"])
    wps = decode_waypoints(out)
    demo = data["demo_plan_rf"]
    dg = np.empty(len(out))
    dl = np.empty(len(out))
    for i in range(len(out)):
        wp = wps[i]
        try:
            pts = resample_plan(GlobalPlan.from_points(wp), PLAN_POINTS).points
        except ValueError:
            pts = np.repeat(wp[:1], PLAN_POINTS, axis=0)
        dg[i] = kernels.hausdorff(np.ascontiguousarray(pts), np.ascontiguousarray(demo[i]))
        cmd = pursuit_command(wp)
        dl[i] = math.hypot(cmd.v - data["demo_cmd"][i, 0], cmd.omega - data["demo_cmd"][i, 1])
    return PlannerDistances(dg, dl)


def gate_classes(net: Mlp, X: np.ndarray) -> np.ndarray:
    p1 = gate_probability(forward(net, X))
    return (p1 >= 0.5).astype(np.int8)


def _select(cls: np.ndarray, a: PlannerDistances, b: PlannerDistances) -> PlannerDistances:
    pick = cls.astype(bool)
    return PlannerDistances(np.where(pick, a.d_global, b.d_global), np.where(pick, a.d_local, b.d_local))


@dataclass
class PlaybackResult:
    distances: dict[str, dict[str, PlannerDistances]] = field(default_factory=dict)
    gate_accuracy: dict[str, float] = field(default_factory=dict)
    steps: dict[str, int] = field(default_factory=dict)


def run_playback_eval(label_dir: Path | str, planners=("classical", "bc", "hybrid"),
                      bc: Mlp | None = None, bc_hybrid: Mlp | None = None, gate: Mlp | None = None,
                      splits=TEST_SPLITS, extras: bool = True) -> PlaybackResult:
    """Each planner answers every recorded step; the hybrid uses the raw gate.

    ``bc`` is the standalone learned planner, ``bc_hybrid`` the one the hybrid
    switches to (falls back to ``bc``). With ``extras`` the social-layer
    classical variant and an oracle-gated hybrid are added where possible.
    """
    res = PlaybackResult()
    bc_h = bc_hybrid or bc
    for split in splits:
        data = load_labeled(label_dir, split)
        res.steps[split] = int(len(data["c"]))
        cl = PlannerDistances(data["d_global"], data["d_local"])
        out: dict[str, PlannerDistances] = {}
        cache: dict[int, PlannerDistances] = {}

        def run_bc(net):
            if id(net) not in cache:
                cache[id(net)] = bc_playback(net, data)
            return cache[id(net)]

        if "classical" in planners:
            out["classical"] = cl
        if "bc" in planners:
            out["bc"] = run_bc(bc)
        if "hybrid" in planners:
            cls = gate_classes(gate, data["features"])
            out["hybrid"] = _select(cls, cl, run_bc(bc_h))
            res.gate_accuracy[split] = float(np.mean(cls == data["c"]))
        if extras:
            if "d_global_social" in data:
                out["classical_social"] = PlannerDistances(data["d_global_social"],
                                                           data["d_local_social"])
            if "hybrid" in planners:
                out["hybrid_oracle"] = _select(data["c"], cl, run_bc(bc_h))
        res.distances[split] = out
    return res


# --------------------------------------------------------------------------- closed loop


class SimOutcome(NamedTuple):
    status: str
    log: list[dict]
    trajectory: np.ndarray


def run_closed_loop(spec: ScenarioSpec, planner: str, models: HybridModels | None = None,
                    switch_cfg: SwitchConfig | None = None, planner_cfg: PlannerConfig | None = None,
                    max_steps: int = MAX_STEPS) -> SimOutcome:
    """Drive the simulator with ``classical``, ``bc`` or ``hybrid`` and log every step."""
    if planner not in ("classical", "bc", "hybrid"):
        raise ValueError(f"unknown planner {planner!r}")
    if planner != "classical" and models is None:
        raise ValueError(f"planner {planner!r} needs trained models")
    switch_cfg = switch_cfg or SwitchConfig()
    planner_cfg = planner_cfg or PlannerConfig()
    st = spawn(spec)
    scans, poses, log = [], [], []
    sw = SwitchState()
    last = Command(0.0, 0.0)
    status = "timeout"
    for k in range(max_steps):
        if math.hypot(st.robot.x - spec.goal.x, st.robot.y - spec.goal.y) < ARRIVAL_TOLERANCE:
            status = "goal"
            break
        scans.append(sense(st))
        poses.append(st.robot)
        obs = Observation(_history(scans, k), _history(poses, k), last, spec.goal, k * DT)
        rec: dict[str, Any] = {"step": k, "time": round(k * DT, 9), "pose": st.robot.to_list()}
        if planner == "classical":
            try:
                out = classical_step(obs, st.map, planner_cfg)
                cmd, flag = out.command, out.recovery
            except PlanningError as exc:
                cmd, flag = Command(0.0, OMEGA_MAX / 2.0), True
                rec["classical_error"] = exc.reason
            rec.update(choice=CLASSICAL, recovery=flag, min_range=float(np.min(obs.scan.ranges)))
        elif planner == "bc":
            cmd = bc_predict(models.bc, obs).command
            rec.update(choice=LEARNED, min_range=float(np.min(obs.scan.ranges)))
        else:
            hs = hybrid_behavior(obs, st.map, models, sw, switch_cfg, planner_cfg)
            sw, cmd = hs.state, hs.command
            rec.update(hs.info)
        rec["command"] = cmd.to_list()
        log.append(rec)
        last = cmd
        st = step(st, cmd)
        if st.collided:
            status = "collision"
            break
    else:
        if math.hypot(st.robot.x - spec.goal.x, st.robot.y - spec.goal.y) < ARRIVAL_TOLERANCE:
            status = "goal"
    traj = np.array([p.xy for p in poses] + [st.robot.xy])
    return SimOutcome(status, log, traj)


def count_switches(log: list[dict]) -> int:
    choices = [r["choice"] for r in log]
    return sum(1 for a, b in zip(choices, choices[1:]) if a != b)


def safety_violations(log: list[dict], cfg: SwitchConfig) -> list[int]:
    """Steps where an obstacle was within p but the executed command was not classical."""
    bad = []
    for r in log:
        if r["min_range"] < cfg.p:
            if r["choice"] != CLASSICAL:
                bad.append(r["step"])
            elif "classical_cmd" in r and r["command"] != r["classical_cmd"]:
                bad.append(r["step"])
    return bad


def log_jsonl(log: list[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in log)
