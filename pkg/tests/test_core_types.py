import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridnav.core_types import (
    Command, DemoStep, Episode, GlobalPlan, Observation, Pose2D, RangeScan, beam_angles,
    normalize_angle, resample_plan, to_robot_frame, to_world_frame,
)
from oracles import resample_walk

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_resample_straight_segment():
    out = resample_plan(GlobalPlan(np.array([[0.0, 0.0], [1.0, 0.0]])), 3)
    np.testing.assert_allclose(out.points, [[0, 0], [0.5, 0], [1, 0]], atol=1e-15)


def test_resample_uniform_plan_is_identity():
    pts = np.stack([np.linspace(0, 4, 9), np.zeros(9)], axis=1)
    out = resample_plan(GlobalPlan(pts), 9)
    np.testing.assert_allclose(out.points, pts, atol=1e-12)


def test_resample_l_shape_against_walk():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    out = resample_plan(GlobalPlan(pts), 5)
    np.testing.assert_allclose(out.points, resample_walk(pts, 5), atol=1e-12)
    np.testing.assert_allclose(out.points[2], [1.0, 0.0], atol=1e-12)


def test_resample_degenerate_rejected():
    with pytest.raises(ValueError, match="consecutive"):
        GlobalPlan(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(ValueError):
        resample_plan(GlobalPlan(np.array([[0.0, 0.0], [1.0, 0.0]])), 1)


@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=12), st.integers(2, 300))
def test_resample_preserves_length_and_endpoints(raw, count):
    try:
        plan = GlobalPlan.from_points(raw)
    except ValueError:
        return
    if plan.length() < 1e-6 or np.array_equal(plan.points[0], plan.points[-1]):
        return
    out = resample_plan(plan, count)
    assert len(out) == count
    np.testing.assert_array_equal(out.points[0], plan.points[0])
    np.testing.assert_array_equal(out.points[-1], plan.points[-1])
    # resampling straightens corners, so the total can only shrink
    assert out.length() <= plan.length() * (1 + 1e-9)


def test_resample_preserves_arc_length_on_dense_curve():
    t = np.linspace(0, math.pi, 400)
    plan = GlobalPlan(np.stack([np.cos(t), np.sin(t)], axis=1))
    out = resample_plan(plan, 400)
    assert out.length() == pytest.approx(plan.length(), rel=1e-9)


def test_normalize_angle_examples():
    assert normalize_angle(0.0) == 0.0
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
    assert normalize_angle(3 * math.pi) > 0
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-7.0) == pytest.approx(-7.0 + 2 * math.pi, abs=1e-12)
    with pytest.raises(ValueError):
        normalize_angle(float("nan"))


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_normalize_angle_range_and_idempotent(theta):
    a = normalize_angle(theta)
    assert -math.pi < a <= math.pi
    assert normalize_angle(a) == a
    assert math.isclose(math.cos(a), math.cos(theta), abs_tol=1e-8)


def test_robot_frame_examples():
    pose = Pose2D(1.0, 0.0, math.pi / 2)
    np.testing.assert_allclose(to_robot_frame((1.0, 2.0), pose), (2.0, 0.0), atol=1e-12)
    assert to_robot_frame((2.0, 3.0), Pose2D(0, 0, 0)) == (2.0, 3.0)
    assert to_robot_frame((1.0, 0.0), pose) == (0.0, 0.0)


@given(finite, finite, st.floats(-math.pi, math.pi), finite, finite)
def test_frame_round_trip(x, y, th, px, py):
    pose = Pose2D(x, y, th)
    back = to_world_frame(to_robot_frame((px, py), pose), pose)
    np.testing.assert_allclose(back, (px, py), atol=1e-12 * max(1.0, abs(x), abs(y), abs(px), abs(py)) * 10)


def test_command_clamp_and_scan_validation():
    assert Command(5.0, -9.0).clamped() == Command(1.6, -1.5)
    with pytest.raises(ValueError):
        RangeScan(np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        RangeScan(np.array([11.0]))


def test_beam_angles_mirror_exact():
    a = beam_angles(72)
    assert a[0] == 0.0
    for k in range(1, 72):
        if k != 36:  # the backward beam is its own mirror image
            assert a[k] == -a[72 - k]
    assert a[36] == math.pi


def test_episode_jsonl_round_trip_is_byte_stable(room_obs):
    obs, _ = room_obs
    plan = GlobalPlan(np.array([[2.0, 10.0], [12.0, 10.0]]))
    ep = Episode("empty/room/0", 0, [DemoStep(obs, plan, Command(1.6, 0.0))], 0.1, {"kind": "empty"})
    text = ep.dumps()
    first = text.splitlines()[0]
    assert '"scenario_id"' in first and '"seed"' in first and '"dt"' in first
    assert '"obs"' in text and '"demo_plan"' in text and '"demo_command"' in text
    again = Episode.loads(text)
    assert again.dumps() == text
    assert again.steps[0].obs == Observation.from_dict(obs.to_dict())
