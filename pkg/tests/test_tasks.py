import numpy as np
import pytest

from teleloop.errors import PlacementFailure, ValidationError
from teleloop.tasks import (
    CUBE_SORT,
    PEG_INSERT,
    GraspModel,
    TaskDescriptor,
    check_stage,
    default_descriptor,
    reposition_post_grasp,
    reset,
    step_world,
    world_features,
)

DT = 0.02


def drive(ws, desc, path, gripper):
    """Feed a scripted gripper path (list of positions) with a constant
    gripper command."""
    for p in path:
        step_world(ws, np.asarray(p, float), gripper, desc, DT)
    return ws


def grasp_at(ws, desc, pos):
    step_world(ws, np.asarray(pos, float), 1.0, desc, DT)
    step_world(ws, np.asarray(pos, float), 0.0, desc, DT)
    return ws


def test_reset_deterministic():
    desc = default_descriptor(CUBE_SORT)
    a = reset(desc, 123)
    b = reset(desc, 123)
    for oa, ob in zip(a.objects, b.objects):
        assert oa.id == ob.id and np.array_equal(oa.pos, ob.pos)
    for fa, fb in zip(a.fixtures, b.fixtures):
        assert fa.id == fb.id and np.array_equal(fa.pos, fb.pos)


def test_reset_seeds_differ():
    desc = default_descriptor(PEG_INSERT)
    a = reset(desc, 1)
    b = reset(desc, 2)
    assert not np.array_equal(a.object("disk").pos, b.object("disk").pos)


def test_reset_positions_inside_region_and_separated():
    desc = default_descriptor(CUBE_SORT)
    cx, cy = desc.region_center
    hx, hy = desc.region_size / 2
    for seed in range(10_000):
        ws = reset(desc, seed)
        pts = [o.pos[:2] for o in ws.objects] + [f.pos[:2] for f in ws.fixtures]
        for p in pts:
            assert cx - hx <= p[0] <= cx + hx
            assert cy - hy <= p[1] <= cy + hy
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                assert np.linalg.norm(pts[i] - pts[j]) >= desc.min_separation


def test_pole_positions_span_segment():
    desc = default_descriptor(PEG_INSERT)
    ys = [reset(desc, s).fixture("pole").pos[1] for s in range(5000)]
    start = desc.pole_segment_start[1]
    assert min(ys) >= start and max(ys) <= start + 0.03
    # the draw actually spans the 3 cm segment
    assert min(ys) - start < 0.001
    assert start + 0.03 - max(ys) < 0.001


def test_reset_placement_failure():
    desc = TaskDescriptor(
        kind=CUBE_SORT,
        region_center=np.array([0.3, 0.0]),
        region_size=np.array([0.05, 0.05]),
        min_separation=0.2,
    )
    with pytest.raises(PlacementFailure):
        reset(desc, 0)


def test_grasp_clean_at_center():
    desc = default_descriptor(PEG_INSERT)
    ws = reset(desc, 0)
    disk = ws.object("disk")
    grasp_at(ws, desc, disk.pos)
    assert ws.gripper.held_object == "disk"
    assert not ws.marginal_hold
    assert ws.stage1_latched


def test_grasp_outside_slip_bound_misses():
    desc = default_descriptor(PEG_INSERT)
    ws = reset(desc, 0)
    disk = ws.object("disk")
    off = disk.pos + np.array([desc.grasp.g_slip + 1e-4, 0.0, 0.0])
    grasp_at(ws, desc, off)
    assert ws.gripper.held_object is None
    assert ws.missed_close


def test_marginal_grasp_slips_during_transport():
    desc = default_descriptor(PEG_INSERT)
    ws = reset(desc, 0)
    disk = ws.object("disk")
    offset = (desc.grasp.g_tol + desc.grasp.g_slip) / 2
    start = disk.pos + np.array([offset, 0.0, 0.0])
    grasp_at(ws, desc, start)
    assert ws.gripper.held_object == "disk"
    assert ws.marginal_hold
    # transport in small steps beyond d_slip: the disk must drop en route
    steps = 100
    seg = np.array([desc.grasp.d_slip * 1.5 / steps, 0.0, 0.0])
    dropped_at = None
    p = start.copy()
    for i in range(steps):
        p = p + seg
        step_world(ws, p, 0.0, desc, DT)
        if ws.gripper.held_object is None:
            dropped_at = (i + 1) * seg[0]
            break
    assert dropped_at is not None
    assert dropped_at > desc.grasp.d_slip - 0.01
    assert ws.object("disk").pos[2] == pytest.approx(0.01)


def test_clean_grasp_survives_long_transport():
    desc = default_descriptor(CUBE_SORT)
    ws = reset(desc, 3)
    cube = ws.object("cube_red")
    grasp_at(ws, desc, cube.pos)
    assert not ws.marginal_hold
    p = cube.pos.copy()
    for _ in range(100):
        p = p + np.array([0.004, 0.0, 0.0])
        step_world(ws, p, 0.0, desc, DT)
    assert ws.gripper.held_object == "cube_red"


def test_insertion_clearance_predicate():
    desc = default_descriptor(PEG_INSERT)
    ws = reset(desc, 0)
    pole = ws.fixture("pole")
    disk = ws.object("disk")
    # settled at 0.9 mm lateral offset, below the insertion plane: success
    disk.pos = np.array([pole.pos[0] + 0.0009, pole.pos[1], 0.01])
    assert check_stage(ws, desc)["stage2"]
    # 1.2 mm is outside the 1.0 mm radial clearance
    disk.pos = np.array([pole.pos[0] + 0.0012, pole.pos[1], 0.01])
    assert not check_stage(ws, desc)["stage2"]


def test_cube_wrong_container_not_done():
    desc = default_descriptor(CUBE_SORT)
    ws = reset(desc, 5)
    for color in ("red", "green", "blue"):
        target = "green" if color == "red" else ("red" if color == "green" else "blue")
        box = ws.fixture(f"container_{target}")
        cube = ws.object(f"cube_{color}")
        cube.pos = np.array([box.pos[0], box.pos[1], 0.0125])
    st = check_stage(ws, desc)
    assert not st["done"]


def test_cube_sort_done_when_all_matched():
    desc = default_descriptor(CUBE_SORT)
    ws = reset(desc, 5)
    for color in ("red", "green", "blue"):
        box = ws.fixture(f"container_{color}")
        ws.object(f"cube_{color}").pos = np.array([box.pos[0], box.pos[1], 0.0125])
    assert check_stage(ws, desc)["done"]


def test_attachment_exclusive():
    desc = default_descriptor(CUBE_SORT)
    for seed in range(50):
        ws = reset(desc, seed)
        for o in ws.objects:
            grasp_at(ws, desc, o.pos)
        assert sum(o.attached for o in ws.objects) <= 1


def test_release_by_opening():
    desc = default_descriptor(PEG_INSERT)
    ws = reset(desc, 1)
    disk = ws.object("disk")
    grasp_at(ws, desc, disk.pos)
    target = disk.pos + np.array([0.02, 0.01, 0.0])
    step_world(ws, target, 0.0, desc, DT)
    step_world(ws, target, 1.0, desc, DT)
    assert ws.gripper.held_object is None
    assert np.allclose(ws.object("disk").pos[:2], target[:2])


def test_reposition_post_grasp():
    desc = default_descriptor(PEG_INSERT)
    ws = reset(desc, 7)
    assert not ws.stage1_latched
    reposition_post_grasp(ws, desc)
    assert ws.gripper.held_object == "disk"
    assert ws.stage1_latched
    assert ws.gripper.pos[2] == pytest.approx(desc.lift_z)


def test_world_features_layout():
    desc = default_descriptor(PEG_INSERT)
    ws = reset(desc, 0)
    f = world_features(ws, desc)
    assert f.shape == (10,)  # disk pos(3) + quat(4) + pole pos(3)
    assert np.allclose(f[:3], ws.object("disk").pos)


def test_grasp_model_invariant():
    with pytest.raises(ValidationError):
        GraspModel(g_tol=0.01, g_slip=0.005)
