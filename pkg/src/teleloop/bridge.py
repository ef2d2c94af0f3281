"""Bidirectional leader-follower coupling.

Two arms with different kinematics stay aligned in one task workspace through
an affine position map: in teleop mode the leader's end-effector drives the
follower through IK; in policy mode the follower's state is mapped back and
the leader tracks it, so a human can take over at any instant without a jump.
Orientation passes through unscaled from an explicit input channel (the
wrist-sensor stand-in); leader IK therefore runs position-only.
"""

import enum
from dataclasses import dataclass, replace

import numpy as np

from .armsim import ArmState, CompensationConfig, PDGains
from .errors import SwitchRejected, UnreachableError, ValidationError
from .kinematics import IkParams, Pose, forward_kinematics, inverse_kinematics


class ControlMode(enum.Enum):
    TELEOP = "teleop"
    POLICY = "policy"


@dataclass(frozen=True)
class WorkspaceMap:
    """x_task = alpha * (x_leader - c_l) + c_t, fixed for a whole session."""

    alpha: float
    c_l: np.ndarray
    c_t: np.ndarray

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValidationError("alpha", "scaling factor must be > 0")
        object.__setattr__(self, "c_l", np.asarray(self.c_l, dtype=float))
        object.__setattr__(self, "c_t", np.asarray(self.c_t, dtype=float))


def map_leader_to_follower(wm, x_l):
    return wm.alpha * (np.asarray(x_l, float) - wm.c_l) + wm.c_t


def map_follower_to_leader(wm, x_f):
    return (np.asarray(x_f, float) - wm.c_t) / wm.alpha + wm.c_l


@dataclass(frozen=True)
class GainSchedule:
    """Per-mode PD gains and the leader compensation rule.

    Policy mode stiffens the leader (it must track the follower in real time)
    and disables its friction compensation; teleop mode runs the softest
    leader so the operator's hand dominates.
    """

    teleop_leader: PDGains
    teleop_follower: PDGains
    policy_leader: PDGains
    policy_follower: PDGains
    teleop_leader_friction_comp: bool = True
    policy_leader_friction_comp: bool = False

    def __post_init__(self):
        if self.policy_leader_friction_comp:
            raise ValidationError(
                "policy_leader_friction_comp",
                "leader friction compensation must be off in policy mode",
            )
        kp_p, kp_t = self.policy_leader.kp, self.teleop_leader.kp
        if kp_p.shape != kp_t.shape or (kp_p < kp_t).any() or not (kp_p > kp_t).any():
            raise ValidationError(
                "policy_leader",
                "policy-mode leader kp must dominate teleop-mode kp "
                "(elementwise >=, strict somewhere)",
            )


def select_gains(gs, mode):
    """Returns ((leader gains, leader comp), (follower gains, follower comp))."""
    if mode == ControlMode.POLICY:
        leader = (
            gs.policy_leader,
            CompensationConfig(gravity_comp_on=True, friction_comp_on=gs.policy_leader_friction_comp),
        )
        follower = (gs.policy_follower, CompensationConfig())
    else:
        leader = (
            gs.teleop_leader,
            CompensationConfig(gravity_comp_on=True, friction_comp_on=gs.teleop_leader_friction_comp),
        )
        follower = (gs.teleop_follower, CompensationConfig())
    return leader, follower


@dataclass(frozen=True)
class CopilotState:
    """Snapshot of the coupling bus at one tick."""

    mode: ControlMode
    leader: ArmState
    follower: ArmState
    leader_orientation_input: np.ndarray  # unit quaternion, passthrough channel
    last_follower_cmd: np.ndarray
    last_leader_cmd: np.ndarray
    sync_error: float = 0.0


@dataclass(frozen=True)
class TickResult:
    follower_cmd: np.ndarray
    leader_cmd: np.ndarray
    held: bool = False  # IK failed; command held, never extrapolated
    sync_error: float = 0.0


def _dist3(a, b):
    return float(
        ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2) ** 0.5
    )


def teleop_tick(cs, leader_chain, follower_chain, wm, ik=None, follower_pose=None):
    """Leader drives: FK the leader, map its position, IK the follower.

    The leader command is its own observed posture (the human owns the arm;
    low gains just hold it). On follower IK failure the previous follower
    command is held and ``held`` is flagged. follower_pose, when given, must
    be FK(follower_chain, cs.follower.q) (callers on the tick path cache it).
    """
    ik = ik or IkParams()
    lead_pose = forward_kinematics(leader_chain, cs.leader.q)
    mapped = map_leader_to_follower(wm, lead_pose.position)
    target = Pose(
        position=mapped,
        orientation=np.asarray(cs.leader_orientation_input, float),
    )
    try:
        follower_cmd = inverse_kinematics(
            follower_chain, target, cs.follower.q, ik
        )
        held = False
    except UnreachableError:
        follower_cmd = cs.last_follower_cmd
        held = True
    if follower_pose is None:
        follower_pose = forward_kinematics(follower_chain, cs.follower.q)
    sync = _dist3(mapped, follower_pose.position)
    return TickResult(
        follower_cmd=follower_cmd,
        leader_cmd=cs.leader.q.copy(),
        held=held,
        sync_error=sync,
    )


def policy_sync_tick(cs, leader_chain, follower_chain, wm, ik, policy_follower_cmd,
                     follower_pose=None):
    """Policy drives the follower; the leader is servoed onto the follower's
    mapped pose so both arms stay aligned for instant takeover."""
    ik = ik or IkParams()
    follower_cmd = follower_chain.clamp(policy_follower_cmd)
    if follower_pose is None:
        follower_pose = forward_kinematics(follower_chain, cs.follower.q)
    leader_target = Pose(
        position=map_follower_to_leader(wm, follower_pose.position),
        orientation=np.array([1.0, 0.0, 0.0, 0.0]),
    )
    pos_only = ik if ik.position_only else replace(ik, position_only=True)
    try:
        leader_cmd = inverse_kinematics(leader_chain, leader_target, cs.leader.q, pos_only)
        held = False
    except UnreachableError:
        leader_cmd = cs.last_leader_cmd
        held = True
    cmd_pose = forward_kinematics(leader_chain, leader_cmd)
    sync = _dist3(
        map_leader_to_follower(wm, cmd_pose.position), follower_pose.position
    )
    return TickResult(
        follower_cmd=follower_cmd, leader_cmd=leader_cmd, held=held, sync_error=sync
    )


DEFAULT_SWITCH_TOL = 0.005  # m, in follower EE space


def switch_mode(cs, to, tol=DEFAULT_SWITCH_TOL):
    """Swap the active channel. Switching back to teleop requires the arms to
    be aligned within tol (bumpless transfer), else SwitchRejected."""
    if to == cs.mode:
        return cs
    if to == ControlMode.TELEOP and cs.sync_error > tol:
        raise SwitchRejected(cs.sync_error, tol)
    return replace(cs, mode=to)
