import numpy as np
import pytest

from teleloop.armsim import ArmState, PDGains
from teleloop.bridge import (
    ControlMode,
    CopilotState,
    GainSchedule,
    WorkspaceMap,
    map_follower_to_leader,
    map_leader_to_follower,
    policy_sync_tick,
    select_gains,
    switch_mode,
    teleop_tick,
)
from teleloop.errors import SwitchRejected, ValidationError
from teleloop.kinematics import IkParams, forward_kinematics

IDENT = np.array([1.0, 0.0, 0.0, 0.0])


def make_state(leader_q, follower_q, mode=ControlMode.TELEOP, sync_error=0.0):
    return CopilotState(
        mode=mode,
        leader=ArmState(q=np.asarray(leader_q, float), qdot=np.zeros(len(leader_q)), t=0.0),
        follower=ArmState(q=np.asarray(follower_q, float), qdot=np.zeros(len(follower_q)), t=0.0),
        leader_orientation_input=IDENT.copy(),
        last_follower_cmd=np.asarray(follower_q, float),
        last_leader_cmd=np.asarray(leader_q, float),
        sync_error=sync_error,
    )


# ------------------------------------------------------------- workspace map


def test_map_identity():
    wm = WorkspaceMap(alpha=1.0, c_l=np.zeros(3), c_t=np.zeros(3))
    x = np.array([0.1, 0.2, 0.3])
    assert np.allclose(map_leader_to_follower(wm, x), x)


def test_map_scale_and_offset():
    wm = WorkspaceMap(alpha=2.0, c_l=np.zeros(3), c_t=np.array([0.5, 0.0, 0.3]))
    out = map_leader_to_follower(wm, np.array([0.1, 0.1, 0.1]))
    assert np.allclose(out, [0.7, 0.2, 0.5])
    back = map_follower_to_leader(wm, np.array([0.7, 0.2, 0.5]))
    assert np.allclose(back, [0.1, 0.1, 0.1])


def test_map_center_fixed_point():
    wm = WorkspaceMap(alpha=0.5, c_l=np.array([0.3, 0.0, 0.1]), c_t=np.array([0.4, 0.1, 0.0]))
    assert np.allclose(map_leader_to_follower(wm, wm.c_l), wm.c_t)
    assert np.allclose(map_follower_to_leader(wm, wm.c_t), wm.c_l)


def test_map_round_trip_and_affinity():
    rng = np.random.default_rng(2)
    for _ in range(500):
        wm = WorkspaceMap(
            alpha=float(rng.uniform(0.1, 5.0)),
            c_l=rng.uniform(-1, 1, 3),
            c_t=rng.uniform(-1, 1, 3),
        )
        x, y = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        rt = map_follower_to_leader(wm, map_leader_to_follower(wm, x))
        assert np.abs(rt - x).max() < 1e-12
        lhs = map_leader_to_follower(wm, x) - map_leader_to_follower(wm, y)
        assert np.allclose(lhs, wm.alpha * (x - y), atol=1e-12)


def test_map_rejects_nonpositive_alpha():
    with pytest.raises(ValidationError):
        WorkspaceMap(alpha=0.0, c_l=np.zeros(3), c_t=np.zeros(3))


# ------------------------------------------------------------- gain schedule


def gains(n, kp, kd=1.0):
    return PDGains(kp=np.full(n, float(kp)), kd=np.full(n, float(kd)))


def test_gain_schedule_rules():
    gs = GainSchedule(
        teleop_leader=gains(3, 30), teleop_follower=gains(4, 60),
        policy_leader=gains(3, 60), policy_follower=gains(4, 60),
    )
    (lg, lc), (fg, fc) = select_gains(gs, ControlMode.POLICY)
    assert lg is gs.policy_leader
    assert lc.friction_comp_on is False
    assert lc.gravity_comp_on is True
    assert fc.friction_comp_on is True
    (lg, lc), _ = select_gains(gs, ControlMode.TELEOP)
    assert lg is gs.teleop_leader
    assert lc.friction_comp_on is True


def test_gain_schedule_rejects_weak_policy_gains():
    with pytest.raises(ValidationError):
        GainSchedule(
            teleop_leader=gains(3, 30), teleop_follower=gains(4, 60),
            policy_leader=gains(3, 20), policy_follower=gains(4, 60),
        )


def test_gain_schedule_requires_strict_increase_somewhere():
    with pytest.raises(ValidationError):
        GainSchedule(
            teleop_leader=gains(3, 30), teleop_follower=gains(4, 60),
            policy_leader=gains(3, 30), policy_follower=gains(4, 60),
        )


def test_gain_schedule_rejects_policy_friction_comp():
    with pytest.raises(ValidationError):
        GainSchedule(
            teleop_leader=gains(3, 30), teleop_follower=gains(4, 60),
            policy_leader=gains(3, 60), policy_follower=gains(4, 60),
            policy_leader_friction_comp=True,
        )


# -------------------------------------------------------------------- ticks


def test_teleop_tick_center_maps_to_center(planar2, planar3):
    wm = WorkspaceMap(alpha=2.0, c_l=np.array([0.35, 0.05, 0.0]), c_t=np.array([0.3, 0.0, 0.0]))
    # put the leader EE exactly at c_l
    from teleloop.kinematics import Pose, inverse_kinematics

    q_l = inverse_kinematics(
        planar2, Pose(wm.c_l, IDENT.copy()), np.array([0.3, 0.5]),
        IkParams(position_only=True),
    )
    cs = make_state(q_l, np.array([0.3, 0.5, -0.2]))
    res = teleop_tick(cs, planar2, planar3, wm, IkParams(position_only=True))
    ee_f = forward_kinematics(planar3, res.follower_cmd).position
    assert np.linalg.norm(ee_f - wm.c_t) < 1e-6
    assert np.array_equal(res.leader_cmd, cs.leader.q)


def test_teleop_tick_displacement_scaling(planar2, planar3):
    wm = WorkspaceMap(alpha=2.0, c_l=np.array([0.35, 0.05, 0.0]), c_t=np.array([0.3, 0.0, 0.0]))
    rng = np.random.default_rng(4)
    ik = IkParams(position_only=True)
    for _ in range(20):
        q_l = rng.uniform(planar2.lo + 0.5, planar2.hi - 0.5)
        lead = forward_kinematics(planar2, q_l).position
        target = map_leader_to_follower(wm, lead)
        if np.linalg.norm(target[:2]) > 0.55:  # keep inside the follower annulus
            continue
        cs = make_state(q_l, np.array([0.3, 0.5, -0.2]))
        res = teleop_tick(cs, planar2, planar3, wm, ik)
        assert not res.held
        ee_f = forward_kinematics(planar3, res.follower_cmd).position
        assert np.linalg.norm(ee_f - target) < 1e-6


def test_teleop_tick_holds_on_unreachable(planar2, planar3):
    # map the leader pose far outside the follower's reach
    wm = WorkspaceMap(alpha=10.0, c_l=np.zeros(3), c_t=np.zeros(3))
    cs = make_state(np.array([0.0, 0.0]), np.array([0.3, 0.5, -0.2]))
    res = teleop_tick(cs, planar2, planar3, wm, IkParams(position_only=True, max_iters=30))
    assert res.held
    assert np.array_equal(res.follower_cmd, cs.last_follower_cmd)


def test_policy_sync_tick_aligns_leader(planar2, planar3):
    wm = WorkspaceMap(alpha=2.0, c_l=np.array([0.35, 0.05, 0.0]), c_t=np.array([0.3, 0.0, 0.0]))
    cs = make_state(np.array([0.2, 0.4]), np.array([0.4, 0.3, -0.1]),
                    mode=ControlMode.POLICY)
    res = policy_sync_tick(cs, planar2, planar3, wm, IkParams(), cs.follower.q.copy())
    assert not res.held
    assert res.sync_error < 1e-6


def test_policy_sync_mirror_case(planar3):
    # identical chains, alpha 1, shared centers: leader command converges to
    # the follower's joints (the IK seed sits at the solution already)
    wm = WorkspaceMap(alpha=1.0, c_l=np.zeros(3), c_t=np.zeros(3))
    q_f = np.array([0.3, 0.2, -0.4])
    cs = CopilotState(
        mode=ControlMode.POLICY,
        leader=ArmState(q=q_f.copy(), qdot=np.zeros(3), t=0.0),
        follower=ArmState(q=q_f.copy(), qdot=np.zeros(3), t=0.0),
        leader_orientation_input=IDENT.copy(),
        last_follower_cmd=q_f.copy(),
        last_leader_cmd=q_f.copy(),
    )
    res = policy_sync_tick(cs, planar3, planar3, wm, IkParams(), q_f.copy())
    assert np.abs(res.leader_cmd - q_f).max() < 1e-6


# ------------------------------------------------------------- mode switching


def test_switch_accepts_when_synced():
    cs = make_state(np.zeros(2), np.zeros(3), mode=ControlMode.POLICY, sync_error=0.0)
    out = switch_mode(cs, ControlMode.TELEOP, tol=0.01)
    assert out.mode == ControlMode.TELEOP


def test_switch_rejects_when_misaligned():
    cs = make_state(np.zeros(2), np.zeros(3), mode=ControlMode.POLICY, sync_error=0.05)
    with pytest.raises(SwitchRejected):
        switch_mode(cs, ControlMode.TELEOP, tol=0.01)


def test_switch_to_policy_unconditional():
    cs = make_state(np.zeros(2), np.zeros(3), mode=ControlMode.TELEOP, sync_error=0.09)
    out = switch_mode(cs, ControlMode.POLICY, tol=0.01)
    assert out.mode == ControlMode.POLICY
