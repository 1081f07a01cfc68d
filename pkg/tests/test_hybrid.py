import itertools
import math

import numpy as np
import pytest

from hybridnav.core_types import DT, Command, GlobalPlan, Observation, Pose2D, resample_plan
from hybridnav.dataset import load_labeled
from hybridnav.hybrid import (
    CLASSICAL, LEARNED, HybridModels, SwitchConfig, SwitchState, count_switches, gate_class,
    hybrid_behavior, run_closed_loop, run_playback_eval, safety_violations, update_switch,
)
from hybridnav.learned import FEATURE_DIM, Mlp, bc_target
from hybridnav.world import empty_scenario, make_scenario
from oracles import window_choices


def _feed(votes, cfg, ranges=None, state=None):
    state = state or SwitchState()
    ranges = ranges or [10.0] * len(votes)
    out = []
    for k, (v, mr) in enumerate(zip(votes, ranges)):
        state, choice = update_switch(state, v, mr, k * DT, cfg)
        out.append(choice)
    return out, state


def straight_bc() -> Mlp:
    """A learned planner that always proposes 10 m straight ahead."""
    net = Mlp.zeros((FEATURE_DIM, 32))
    plan = resample_plan(GlobalPlan.from_points(np.array([[0.0, 0.0], [10.0, 0.0]])), 200)
    net.biases[0][:] = bc_target(plan, Pose2D(0.0, 0.0, 0.0))
    return net


def const_gate(p):
    return lambda obs: p


# ---------------------------------------------------------------- gate / switch rules


@pytest.mark.parametrize("p,cls", [(0.9, 1), (0.5, 1), (0.1, 0), (0.4999999, 0)])
def test_gate_class(p, cls):
    assert gate_class(p) == cls


def test_switch_ratio_example():
    out, state = _feed([0, 0, 0, 1, 1], SwitchConfig(n=5, r=0.6))
    assert out[-1] == LEARNED and state.votes == (0, 0, 0, 1, 1)


def test_startup_counts_missing_votes_as_classical():
    out, _ = _feed([0] * 7, SwitchConfig(n=10, r=0.7))
    assert out == [CLASSICAL] * 6 + [LEARNED]


def test_proximity_override_persists():
    cfg = SwitchConfig(n=5, r=0.6, p=0.5, t_lock=2.0)
    _, state = _feed([0] * 5, cfg)
    assert state.active == LEARNED
    ranges = [0.4] + [5.0] * 30
    out = []
    for k, mr in enumerate(ranges):
        state, choice = update_switch(state, 0, mr, 1.0 + k * DT, cfg)
        out.append(choice)
    assert out[:20] == [CLASSICAL] * 20
    assert out[20] == LEARNED


def test_alternating_votes_never_switch():
    cfg = SwitchConfig(r=0.6)
    out, _ = _feed([k % 2 for k in range(200)], cfg)
    assert set(out) == {CLASSICAL}
    out, _ = _feed([(k + 1) % 2 for k in range(200)], cfg)
    assert set(out) == {CLASSICAL}


@pytest.mark.parametrize("n", range(1, 9))
def test_switch_matches_window_oracle_exhaustively(n):
    length = min(n + 3, 10)
    for r in (0.25, 0.5, 0.6, 0.7, 1.0):
        cfg = SwitchConfig(n=n, r=r)
        for votes in itertools.product((0, 1), repeat=length):
            out, _ = _feed(list(votes), cfg)
            assert out == window_choices(votes, [10.0] * length, cfg, DT), (n, r, votes)


def test_switch_matches_oracle_with_overrides():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        cfg = SwitchConfig(n=n, r=float(rng.choice([0.3, 0.5, 0.7, 1.0])),
                           t_lock=float(rng.choice([0.1, 0.25, 0.5, 2.0])))
        votes = rng.integers(0, 2, 60).tolist()
        ranges = np.where(rng.random(60) < 0.05, 0.3, 3.0).tolist()
        out, _ = _feed(votes, cfg, ranges)
        assert out == window_choices(votes, ranges, cfg, DT)


@pytest.mark.parametrize("t_lock", [0.1, 0.25, 0.3, 1.0, 1.55, 2.0])
def test_override_lasts_ceil_tlock_over_dt_steps(t_lock):
    cfg = SwitchConfig(n=1, r=1.0, t_lock=t_lock)
    start = 37
    ranges = [5.0] * start + [0.2] + [5.0] * 40
    out, _ = _feed([0] * len(ranges), cfg, ranges)
    forced = 0
    for c in out[start:]:
        if c != CLASSICAL:
            break
        forced += 1
    assert forced == math.ceil(t_lock / DT - 1e-9)


@pytest.mark.parametrize("n", range(1, 9))
def test_hysteresis_bound_from_saturated_window(n):
    for r in (0.25, 0.4, 0.5, 0.6, 0.75):
        cfg = SwitchConfig(n=n, r=r)
        bound = math.ceil(n * min(r, 1 - r) - 1e-9)
        for sat in (0, 1):
            _, base = _feed([sat] * n, cfg)
            for votes in itertools.product((0, 1), repeat=n):
                out, _ = _feed(list(votes), cfg, state=base)
                first = next((k for k, c in enumerate(out) if c != base.active), None)
                if first is not None:
                    assert first + 1 >= bound


def test_switch_config_validation():
    for bad in ({"n": 0}, {"r": 0.0}, {"r": 1.5}, {"p": 0.0}, {"t_lock": -1.0}):
        with pytest.raises(ValueError):
            SwitchConfig(**bad)


# ---------------------------------------------------------------- behavior


def test_both_planners_run_and_chosen_output_executes(room_obs):
    obs, st = room_obs
    models = HybridModels(const_gate(1.0), straight_bc())
    hs = hybrid_behavior(obs, st.map, models, SwitchState())
    assert hs.info["choice"] == CLASSICAL and hs.command.to_list() == hs.info["classical_cmd"]
    assert hs.info["d_planners"] is not None and hs.plan is not None
    cfg = SwitchConfig(n=1, r=1.0)
    hs = hybrid_behavior(obs, st.map, HybridModels(const_gate(0.0), straight_bc()), SwitchState(), cfg)
    assert hs.info["choice"] == LEARNED and hs.command.to_list() == hs.info["learned_cmd"]


def test_classical_failure_gives_flagged_recovery(room_obs):
    obs, st = room_obs
    bad = Observation(obs.scan_history, obs.odom_history, obs.last_command, Pose2D(-5.0, -5.0, 0.0),
                      obs.stamp)
    hs = hybrid_behavior(bad, st.map, HybridModels(const_gate(1.0), straight_bc()), SwitchState())
    assert hs.info["classical_error"] and hs.info["recovery"]
    assert hs.command == Command(0.0, 0.75) and hs.plan is None


@pytest.mark.parametrize("kind,seed", [("empty", 0), ("intersection", 3), ("frontal_approach", 0)])
def test_always_classical_gate_is_bit_exact(kind, seed):
    spec = empty_scenario() if kind == "empty" else make_scenario(kind, seed)
    steps = 400 if kind == "empty" else 80
    ref = run_closed_loop(spec, "classical", max_steps=steps)
    hyb = run_closed_loop(spec, "hybrid", HybridModels(const_gate(0.9), straight_bc()), max_steps=steps)
    assert hyb.status == ref.status
    assert [r["command"] for r in hyb.log] == [r["command"] for r in ref.log]
    assert np.array_equal(hyb.trajectory, ref.trajectory)
    if kind == "empty":
        assert ref.status == "goal"


def test_always_learned_gate_matches_bc_run():
    spec = empty_scenario()
    models = HybridModels(const_gate(0.0), straight_bc())
    cfg = SwitchConfig(n=1, r=1.0)
    ref = run_closed_loop(spec, "bc", models, max_steps=150)
    hyb = run_closed_loop(spec, "hybrid", models, cfg, max_steps=150)
    assert all(r["min_range"] >= cfg.p for r in ref.log)
    assert [r["command"] for r in hyb.log] == [r["command"] for r in ref.log]
    assert np.array_equal(hyb.trajectory, ref.trajectory)
    assert count_switches(hyb.log) == 0


@pytest.mark.parametrize("kind,seed", [("intersection", 0), ("waiting_line", 0), ("overtake", 2)])
def test_safety_override_in_logs(kind, seed):
    cfg = SwitchConfig()
    out = run_closed_loop(make_scenario(kind, seed), "hybrid", HybridModels(const_gate(0.0), straight_bc()),
                          cfg, max_steps=200)
    assert safety_violations(out.log, cfg) == []
    close = [r for r in out.log if r["min_range"] < cfg.p]
    assert close
    for r in close:
        assert r["choice"] == CLASSICAL and r["command"] == r["classical_cmd"]


def test_safety_checker_flags_bad_logs():
    cfg = SwitchConfig()
    log = [{"step": 0, "min_range": 0.2, "choice": LEARNED, "command": [1, 0]},
           {"step": 1, "min_range": 0.2, "choice": CLASSICAL, "command": [1, 0], "classical_cmd": [0, 0]},
           {"step": 2, "min_range": 2.0, "choice": LEARNED, "command": [1, 0]}]
    assert safety_violations(log, cfg) == [0, 1]
    assert count_switches(log) == 2


def test_closed_loop_argument_errors():
    with pytest.raises(ValueError):
        run_closed_loop(empty_scenario(), "teleport")
    with pytest.raises(ValueError):
        run_closed_loop(empty_scenario(), "hybrid")


# ---------------------------------------------------------------- playback


def test_playback_classical_reuses_labels(small_pipeline):
    res = run_playback_eval(small_pipeline["labeled"], ("classical",), extras=False)
    for split, dist in res.distances.items():
        lab = load_labeled(small_pipeline["labeled"], split)
        np.testing.assert_array_equal(dist["classical"].d_global, lab["d_global"])


def test_playback_hybrid_selects_per_gate(small_pipeline):
    from hybridnav.hybrid import gate_classes

    m = small_pipeline["models"]
    bc = Mlp.loads((m / "bc_n.json").read_text())
    gate = Mlp.loads((m / "gate.json").read_text())
    res = run_playback_eval(small_pipeline["labeled"], bc=bc, gate=gate)
    for split, dist in res.distances.items():
        cls = gate_classes(gate, load_labeled(small_pipeline["labeled"], split)["features"]).astype(bool)
        expect = np.where(cls, dist["classical"].d_global, dist["bc"].d_global)
        np.testing.assert_array_equal(dist["hybrid"].d_global, expect)


@pytest.mark.parametrize("bc_seed", [0, 1])
def test_oracle_gate_dominates(small_pipeline, bc_seed):
    bc = Mlp.init((FEATURE_DIM, 16, 32), bc_seed)
    gate = Mlp.init((FEATURE_DIM, 8, 2), bc_seed)
    res = run_playback_eval(small_pipeline["labeled"], bc=bc, gate=gate)
    for dist in res.distances.values():
        a = {k: dist[k].alpha(1.0) for k in ("classical", "bc", "hybrid_oracle")}
        assert a["hybrid_oracle"] >= max(a["classical"], a["bc"])


# ---------------------------------------------------------------- trained models


@pytest.mark.slow
def test_doorway_switch_cycle_with_trained_models(trained_models):
    cycles = 0
    for seed in range(3):
        out = run_closed_loop(make_scenario("narrow_doorway", seed), "hybrid", trained_models)
        runs = [c for k, c in enumerate(r["choice"] for r in out.log)
                if k == 0 or out.log[k - 1]["choice"] != c]
        cycles += "".join("C" if c == CLASSICAL else "L" for c in runs).count("CLC")
    assert cycles >= 1


@pytest.mark.slow
def test_frontal_hybrid_run_is_safe(trained_models):
    cfg = SwitchConfig()
    out = run_closed_loop(make_scenario("frontal_approach", 0), "hybrid", trained_models, cfg)
    assert out.log and safety_violations(out.log, cfg) == []
