"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import hashlib
import itertools
import json
import math
import time

import numpy as np
import pytest
from scipy import special

from hybridnav.classical import PlanningError, dwa_evaluate, plan_path
from hybridnav.compliance import LOCAL_THRESHOLDS, cdf, hausdorff, l2_command, one_way_anova
from hybridnav.core_types import DT, Command
from hybridnav.costmap import LETHAL, Costmap
from hybridnav.hybrid import CLASSICAL, SwitchConfig
from hybridnav.learned import Mlp, batch_loss, grad
from oracles import brute_hausdorff, fd_gradient_error, hand_anova_f, ucs_cost, window_choices
from conftest import run_pipeline
from test_classical import _centre, _obs, _random_map, _rollout_hits, random_dwa_state
from test_hybrid import _feed


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {title} ({detail})")
        assert ok, detail

    return emit


def test_c1_dijkstra_matches_ucs(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    mismatches = compared = 0
    for _ in range(50):
        cells = _random_map(rng)
        free = np.argwhere(cells < LETHAL)
        s, g = (tuple(int(v) for v in free[k]) for k in rng.choice(len(free), 2, replace=False))
        ref = ucs_cost(cells, s, g, 0.1)
        try:
            got = plan_path(Costmap(cells, 0.1), _centre(s), _centre(g)).cost
        except PlanningError:
            got = math.inf
        compared += 1
        mismatches += got != ref
    dt = time.perf_counter() - t0
    report(1, "Dijkstra cost equals UCS oracle on 50 maps, < 5 s", mismatches == 0 and dt < 5.0,
           f"{compared} maps, {mismatches} mismatches, {dt:.2f} s")


def test_c2_gradient_check(report):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        net = Mlp.init((7, 6, 5, 3), seed)
        rng = np.random.default_rng(seed + 100)
        for b in net.biases:
            b[:] = rng.normal(0, 0.1, b.shape)
        X = rng.normal(size=(9, 7))
        for kind in ("mse", "cross_entropy"):
            Y = rng.normal(size=(9, 3)) if kind == "mse" else rng.integers(0, 3, 9)
            worst = max(worst, fd_gradient_error(net, X, Y, kind, batch_loss, grad(net, (X, Y), kind)))
    dt = time.perf_counter() - t0
    report(2, "analytic vs central-difference gradients, rel err <= 1e-4, < 10 s",
           worst <= 1e-4 and dt < 10.0, f"max rel err {worst:.2e}, {dt:.2f} s")


def test_c3_hausdorff_properties(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    bad = []
    for k in range(100):
        a = np.cumsum(rng.normal(0, 0.1, (200, 2)), axis=0)
        b = np.cumsum(rng.normal(0, 0.1, (200, 2)), axis=0)
        h = hausdorff(a, b)
        if h != hausdorff(b, a) or h < 0 or h != brute_hausdorff(a, b):
            bad.append(k)
        if hausdorff(a, a) != 0.0 or hausdorff(a, a[rng.permutation(200)]) != 0.0 or not h > 0.0:
            bad.append(k)
    dt = time.perf_counter() - t0
    report(3, "Hausdorff symmetry / non-negativity / identity / oracle on 100 pairs, < 5 s",
           not bad and dt < 5.0, f"{len(bad)} failing pairs, {dt:.2f} s")


def test_c4_dwa_safety(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    unsafe = recoveries = 0
    for _ in range(1000):
        cm, pose, plan = random_dwa_state(rng)
        res = dwa_evaluate(_obs(pose), plan, cm)
        if res.recovery:
            recoveries += 1
        elif _rollout_hits(cm, pose, res.command):
            unsafe += 1
    dt = time.perf_counter() - t0
    report(4, "DWA never selects a LETHAL rollout over 1000 states, recovery exercised, < 30 s",
           unsafe == 0 and recoveries >= 1 and dt < 30.0,
           f"{unsafe} unsafe, {recoveries} recoveries, {dt:.2f} s")


@pytest.mark.slow
def test_c5_pipeline_reproduction(full_pipeline, report):
    s = json.loads((full_pipeline["eval"] / "summary.json").read_text())
    a = {split: {p: v["1.0"] for p, v in {**s["alpha"][split], **s["alpha_extra"][split]}.items()}
         for split in ("id_test", "ood_test")}
    idt, ood = a["id_test"], a["ood_test"]
    checks = {
        "a": 0.6 <= idt["classical"] <= 0.95,
        "b": idt["classical_social"] <= idt["classical"],
        "c": idt["bc"] >= idt["classical"] and ood["classical"] >= ood["bc"],
        "d": all(x["hybrid"] >= max(x["classical"], x["bc"]) - 0.05 for x in (idt, ood)),
        "runtime": full_pipeline["seconds"] <= 600.0,
    }
    detail = (f"ID classical={idt['classical']:.4f} social={idt['classical_social']:.4f} "
              f"bc={idt['bc']:.4f} hybrid={idt['hybrid']:.4f}; OOD classical={ood['classical']:.4f} "
              f"social={ood['classical_social']:.4f} bc={ood['bc']:.4f} hybrid={ood['hybrid']:.4f}; "
              f"{full_pipeline['seconds']:.0f} s; failed={[k for k, v in checks.items() if not v]}")
    report(5, "pipeline alpha(1.0) pattern, 200 ID / 30 OOD, seed 0, <= 10 min", all(checks.values()),
           detail)


@pytest.mark.slow
def test_c6_gate_quality(full_pipeline, report):
    s = json.loads((full_pipeline["eval"] / "summary.json").read_text())
    acc = s["gate_accuracy"]["id_test"]
    ok = acc >= 0.90
    parts = [f"ID gate accuracy {acc:.4f}"]
    for split in ("id_test", "ood_test"):
        a = {**s["alpha"][split], **s["alpha_extra"][split]}
        oracle, cl, bc = (a[p]["1.0"] for p in ("hybrid_oracle", "classical", "bc"))
        ok &= oracle >= max(cl, bc)
        parts.append(f"{split} oracle={oracle:.4f} classical={cl:.4f} bc={bc:.4f}")
    report(6, "gate accuracy >= 0.90 on ID test; oracle-gate hybrid >= both planners", ok, "; ".join(parts))


def test_c7_local_metric_jump(report):
    rng = np.random.default_rng(0)
    demo = [Command(1.6, float(w)) for w in rng.normal(0, 0.1, 400)]
    stopper = [Command(0.0, 0.0) if k % 3 else d for k, d in enumerate(demo)]
    d = np.array([l2_command(a, b) for a, b in zip(stopper, demo)])
    curve = cdf(d, LOCAL_THRESHOLDS)
    i15, i17 = (int(np.argmin(np.abs(LOCAL_THRESHOLDS - t))) for t in (1.5, 1.7))
    direct = float(np.mean((d >= 1.5) & (d <= 1.7)))
    jump = float(curve.fractions[i17] - curve.fractions[i15 - 1])
    report(7, "stop-vs-go local CDF: >= 10% of steps in [1.5, 1.7]", direct >= 0.10,
           f"{direct:.3f} of steps in band, CDF rise across band {jump:.3f}")


def test_c8_anova(report):
    groups = [[1, 2, 3], [2, 3, 4], [3, 4, 5]]
    res = one_way_anova(groups)
    f_oracle = hand_anova_f(groups)
    d1, d2 = res.df_between, res.df_within
    p_oracle = float(special.betainc(d2 / 2, d1 / 2, d2 / (d2 + d1 * f_oracle)))
    same = one_way_anova([[1, 2, 3]] * 3)
    ok = abs(res.f - 3.0) <= 1e-9 and abs(res.p - p_oracle) <= 1e-9 and same.p == 1.0
    report(8, "ANOVA F = 3.0 within 1e-9, p vs incomplete-beta oracle within 1e-9, identical groups p = 1",
           ok, f"F={res.f!r} p={res.p!r} oracle p={p_oracle!r} identical p={same.p}")


def _digests(run):
    out = {"manifest": (run["manifest"]).read_bytes()}
    for m in sorted(run["models"].glob("*")):
        out[m.name] = m.read_bytes()
    for c in sorted(run["eval"].glob("*.csv")):
        out[c.name] = c.read_bytes()
    return {k: hashlib.sha256(v).hexdigest() for k, v in out.items()}


def test_c9_end_to_end_determinism(small_pipeline, tmp_path, report):
    again = run_pipeline(tmp_path, seed=0, id_episodes=10, ood_episodes=4, epochs=5)
    a, b = _digests(small_pipeline), _digests(again)
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    report(9, "two gen->label->train->eval runs, same seed, byte-identical manifest/model/CSV hashes",
           not differing and len(a) >= 8, f"{len(a)} artifacts compared, differing: {differing or 'none'}")


def test_c10_hysteresis(report):
    sequences = mismatches = 0
    for n in range(1, 9):
        for r in (0.25, 0.5, 0.6, 0.7, 1.0):
            cfg = SwitchConfig(n=n, r=r)
            length = min(n + 3, 10)
            for votes in itertools.product((0, 1), repeat=length):
                sequences += 1
                got, _ = _feed(list(votes), cfg)
                mismatches += got != window_choices(votes, [10.0] * length, cfg, DT)
    cfg = SwitchConfig()
    ranges = [5.0] * 15 + [0.3] + [5.0] * 40
    got, _ = _feed([0] * len(ranges), cfg, ranges)
    forced = next(k for k, c in enumerate(got[15:]) if c != CLASSICAL)
    expect = math.ceil(cfg.t_lock / DT - 1e-9)
    report(10, "update_switch matches window oracle for all vote sequences n <= 8; override lasts "
               "ceil(t_lock/dt) steps", mismatches == 0 and forced == expect,
           f"{sequences} sequences, {mismatches} mismatches, override {forced} steps (expected {expect})")
