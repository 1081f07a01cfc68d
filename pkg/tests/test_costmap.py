import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridnav.core_types import Command, Pose2D, RangeScan
from hybridnav.costmap import (
    INSCRIBED, LETHAL, Costmap, add_social_layer, build, detect_pedestrians, inflate,
    static_layer,
)
from hybridnav.world import Pedestrian, SimState, room_map, sense, step


def _single(res, shape=(41, 41), at=(20, 20)):
    cells = np.zeros(shape, np.uint8)
    cells[at] = LETHAL
    return Costmap(cells, res)


# ---------------------------------------------------------------- build


def test_build_empty_room_only_border(room_obs):
    wmap = room_map()
    scan = RangeScan(np.full(72, 10.0))
    cm = build(wmap, scan, Pose2D(10.0, 10.0, 0.0))
    np.testing.assert_array_equal(cm.cells == LETHAL, wmap.occupancy)
    assert set(np.unique(cm.cells)) == {0, LETHAL}


def test_build_wall_row():
    from hybridnav.world import WorldMap

    occ = room_map().occupancy.copy()
    occ[50, 20:80] = True
    cm = build(WorldMap(occ), RangeScan(np.full(72, 10.0)), Pose2D(10.0, 10.0, 0.0))
    np.testing.assert_array_equal(cm.cells == LETHAL, occ)


def test_build_marks_scan_hit_cell():
    ranges = np.full(72, 10.0)
    ranges[0] = 1.7
    pose = Pose2D(10.03, 10.02, 0.0)
    cm = build(room_map(), RangeScan(ranges), pose)
    r, c = math.floor(10.02 / 0.1), math.floor((10.03 + 1.7) / 0.1)
    assert cm.cells[r, c] == LETHAL
    assert (cm.cells == LETHAL).sum() == room_map().occupancy.sum() + 1


# ---------------------------------------------------------------- inflate


def test_inflate_without_lethal_is_identity():
    cells = np.random.default_rng(0).integers(0, 200, (20, 20)).astype(np.uint8)
    np.testing.assert_array_equal(inflate(Costmap(cells, 0.1)).cells, cells)


def test_inflate_formula_points():
    cm = inflate(_single(0.05), 0.35, 3.0)
    # 7 cells = 0.35 m (boundary), 11 cells = 0.55 m
    assert cm.cells[20, 27] == 252
    assert cm.cells[20, 31] == round(252 * math.exp(-0.6)) == 138
    assert cm.cells[20, 26] == INSCRIBED and cm.cells[20, 20] == LETHAL


@given(st.integers(0, 40), st.integers(0, 40))
def test_inflate_matches_direct_formula(r, c):
    res = 0.1
    cm = inflate(_single(res), 0.35, 3.0)
    d = math.hypot(r - 20, c - 20) * res
    if d == 0:
        want = LETHAL
    elif d < 0.35:
        want = INSCRIBED
    else:
        want = max(0, math.floor(252 * math.exp(-3.0 * (d - 0.35)) + 0.5))
    assert cm.cells[r, c] == want


def test_inflate_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        inflate(_single(0.1), 0.0)


@given(st.integers(0, 10_000))
def test_inflation_monotone_and_nonincreasing(seed):
    rng = np.random.default_rng(seed)
    cells = np.where(rng.random((30, 30)) < 0.03, LETHAL, 0).astype(np.uint8)
    base = inflate(Costmap(cells, 0.1))
    extra = cells.copy()
    extra[tuple(rng.integers(0, 30, 2))] = LETHAL
    more = inflate(Costmap(extra, 0.1))
    assert np.all(more.cells >= base.cells)
    twice = inflate(base)
    assert np.all(twice.cells >= base.cells)
    if base.d2 is not None and (cells == LETHAL).any():
        # cost never increases as the distance to the nearest LETHAL cell grows
        order = np.argsort(base.d2, axis=None, kind="stable")
        d = base.d2.ravel()[order]
        v = base.cells.ravel()[order].astype(int)
        for k in np.unique(d):
            assert len(set(v[d == k])) == 1
        firsts = [v[np.argmax(d == k)] for k in np.unique(d)]
        assert all(a >= b for a, b in zip(firsts, firsts[1:]))


def test_static_layer_equals_full_inflate(room_obs):
    from hybridnav.world import make_map, make_scenario, spawn

    spec = make_scenario("waiting_line", 1)
    s = spawn(spec)
    wmap = make_map(spec.map)
    layer = static_layer(wmap)
    for _ in range(3):
        scan = sense(s)
        a = layer.for_scan(scan, s.robot)
        b = inflate(build(wmap, scan, s.robot))
        np.testing.assert_array_equal(a.cells, b.cells)
        s = step(s, Command(1.0, 0.1))


# ---------------------------------------------------------------- social layer


def test_social_no_detections_identity():
    cm = inflate(_single(0.1))
    assert add_social_layer(cm, []).cells is cm.cells


def test_social_center_and_one_sigma():
    cm = Costmap(np.zeros((41, 41), np.uint8), 0.1)
    out = add_social_layer(cm, [(2.05, 2.05)], sigma=0.8, amplitude=200)
    assert out.cells[20, 20] == 200
    # cell centre exactly 0.8 m (1 sigma) away
    assert out.cells[20, 28] == round(200 * math.exp(-0.5)) == 121


def test_social_caps_and_keeps_lethal():
    cells = np.zeros((41, 41), np.uint8)
    cells[20, 20] = LETHAL
    cells[20, 21] = 100
    out = add_social_layer(Costmap(cells, 0.1), [(2.05, 2.05), (2.15, 2.05)], amplitude=200)
    assert out.cells[20, 20] == LETHAL and out.cells[20, 21] == INSCRIBED
    assert out.cells.max() == LETHAL


@given(st.lists(st.tuples(st.floats(0.0, 4.0), st.floats(0.0, 4.0)), min_size=1, max_size=5),
       st.randoms())
def test_social_order_independent(dets, rnd):
    cm = Costmap(np.zeros((40, 40), np.uint8), 0.1)
    shuffled = list(dets)
    rnd.shuffle(shuffled)
    np.testing.assert_array_equal(add_social_layer(cm, dets).cells,
                                  add_social_layer(cm, shuffled).cells)


def test_social_rejects_bad_params():
    cm = Costmap(np.zeros((5, 5), np.uint8), 0.1)
    with pytest.raises(ValueError):
        add_social_layer(cm, [(0, 0)], sigma=0.0)
    with pytest.raises(ValueError):
        add_social_layer(cm, [(0, 0)], amplitude=300)


# ---------------------------------------------------------------- detection


def _history(peds, pose, steps=5):
    s = SimState(0.0, 0, pose, Command(0, 0), tuple(peds), room_map(), pose, pose)
    scans, poses = [], []
    for _ in range(steps):
        scans.append(sense(s))
        poses.append(s.robot)
        s = step(s, Command(0.0, 0.0))
    return scans, poses, s


def test_detect_static_world_empty():
    scans, poses, _ = _history([], Pose2D(5.0, 10.0, 0.0))
    assert detect_pedestrians(scans, poses, room_map()) == []


def test_detect_static_person_filtered():
    still = Pedestrian((8.0, 10.0))
    scans, poses, _ = _history([still], Pose2D(5.0, 10.0, 0.0))
    assert detect_pedestrians(scans, poses, room_map()) == []


def test_detect_one_walker():
    ped = Pedestrian((9.0, 12.0), waypoints=((9.0, 2.0),), pref_speed=1.0)
    scans, poses, s = _history([ped], Pose2D(5.0, 10.0, 0.0))
    # the scans were taken before the final step; compare to the last sensed position
    dets = detect_pedestrians(scans, poses, room_map())
    assert len(dets) == 1
    truth = (9.0, 12.0 - 0.1 * 4)
    assert math.dist(dets[0], truth) < 0.3


def test_detect_two_walkers():
    peds = [Pedestrian((9.0, 8.5), waypoints=((14.0, 8.5),)),
            Pedestrian((9.0, 11.5), waypoints=((14.0, 11.5),))]
    scans, poses, _ = _history(peds, Pose2D(5.0, 10.0, 0.0))
    dets = detect_pedestrians(scans, poses, room_map())
    assert len(dets) == 2
    assert abs(dets[0][1] - dets[1][1]) > 2.0


def test_detect_length_mismatch():
    with pytest.raises(ValueError):
        detect_pedestrians([RangeScan(np.full(72, 10.0))], [], room_map())
