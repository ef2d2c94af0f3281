"""Scripted operator: waypoint plans with hand jitter.

Stands in for the human on the leader device. Emits leader-space position
targets at the record rate: a carrot point glides toward the current
waypoint's leader-space image at constant speed, plus zero-mean Gaussian
jitter modeling the hand. Grasp and release are gated on the measured world
state (a person watches the scene), so placement precision scales with the
workspace map: the same leader-space tremor lands alpha-times larger in the
task frame.

Phases are derived from the world, not from time, so the driver re-plans
automatically after drops, missed grasps, or mid-task takeover.
"""

from dataclasses import dataclass

import numpy as np

from .bridge import map_follower_to_leader
from .tasks import CUBE_SORT, GRIPPER_CLOSE_THRESHOLD, check_stage

APPROACH = "approach"
DESCEND = "descend"
GRASP = "grasp"
LIFT = "lift"
TRANSPORT = "transport"
ALIGN = "align"
RETREAT = "retreat"
DONE = "done"

OPEN = 1.0
CLOSED = 0.0


@dataclass
class ExpertIntent:
    """What the operator is currently trying to do; the intervention
    supervisor uses it as the reference path."""

    phase: str
    goal: np.ndarray  # task-space point the phase drives toward
    phase_start: np.ndarray  # follower EE position when the phase began
    phase_elapsed: float


class ExpertDriver:
    def __init__(self, cfg, seed=0, jitter=True, hold_at_align=False):
        self.cfg = cfg
        self.wm = cfg.workspace
        self.desc = cfg.task
        self.rng = np.random.default_rng(np.random.SeedSequence([17, int(seed)]))
        self.jitter = jitter
        self.hold_at_align = hold_at_align  # hover above the goal, never release
        self.sigma = cfg.expert.sigma
        self.phase = APPROACH
        self.gripper = OPEN
        self._carrot = None
        self._goal = None
        self._phase_start = None
        self._phase_t0 = 0.0

    def reset(self, ws, t=0.0):
        """Re-plan from the current world state, e.g. at takeover. Keeps the
        gripper closed when something is already held."""
        self.phase = LIFT if ws.held() is not None else APPROACH
        self.gripper = CLOSED if ws.held() is not None else OPEN
        self._carrot = map_follower_to_leader(self.wm, ws.gripper.pos)
        self._set_phase(self.phase, ws.gripper.pos, t)
        self._goal = ws.gripper.pos.copy()

    def _set_phase(self, phase, ee, t):
        self.phase = phase
        self._phase_start = np.asarray(ee, float).copy()
        self._phase_t0 = t

    def _target_object(self, ws):
        """Next object needing work, or None when the task is finished."""
        if self.desc.kind == CUBE_SORT:
            for o in sorted(ws.objects, key=lambda o: o.id):
                if not self._placed(ws, o):
                    return o
            return None
        disk = ws.object("disk")
        if check_stage(ws, self.desc)["done"]:
            return None
        return disk

    def _placed(self, ws, obj):
        box = ws.fixture(f"container_{obj.color}")
        inside = (np.abs(obj.pos[:2] - box.pos[:2]) <= box.half_extent).all()
        return inside and not obj.attached

    def _goal_fixture(self, ws, obj):
        if self.desc.kind == CUBE_SORT:
            return ws.fixture(f"container_{obj.color}")
        return ws.fixture("pole")

    def _release_ok(self, ws, held):
        goal = self._goal_fixture(ws, held)
        off = float(np.linalg.norm(held.pos[:2] - goal.pos[:2]))
        if self.desc.kind == CUBE_SORT:
            return off <= self.cfg.expert.place_gate and ws.gripper.pos[2] <= 0.03
        gate = self.cfg.expert.release_gate_frac * self.desc.clearance
        return off <= gate and ws.gripper.pos[2] <= self.desc.insert_plane_z - 0.002

    def record_step(self, ws, ee_pos, t, events=None):
        """One record-rate decision: returns (leader-space target, gripper)."""
        desc = self.desc
        e = self.cfg.expert
        events = events or {}
        held = ws.held()

        if held is None:
            obj = self._target_object(ws)
            if obj is None:
                if self.phase != DONE:
                    self.gripper = OPEN
                    self._set_phase(DONE, ee_pos, t)
                goal = np.array([ee_pos[0], ee_pos[1], desc.lift_z])
                return self._emit(goal), self.gripper
            if self.gripper <= GRIPPER_CLOSE_THRESHOLD and self.phase != GRASP:
                # dropped en route or a takeover mid-grasp: reopen and re-plan
                self.gripper = OPEN
                self._set_phase(APPROACH, ee_pos, t)
            if self.phase not in (APPROACH, DESCEND, GRASP):
                self._set_phase(APPROACH, ee_pos, t)
            above = np.array([obj.pos[0], obj.pos[1], desc.lift_z])
            grasp_point = np.array([obj.pos[0], obj.pos[1], obj.pos[2]])
            goal = above
            if self.phase == APPROACH:
                if np.linalg.norm(ee_pos[:2] - above[:2]) <= e.waypoint_tol:
                    self._set_phase(DESCEND, ee_pos, t)
            if self.phase == DESCEND:
                goal = grasp_point
                lateral = np.linalg.norm(ee_pos[:2] - obj.pos[:2])
                vertical = abs(ee_pos[2] - grasp_point[2])
                if lateral <= e.close_gate_frac * desc.grasp.g_tol and vertical <= 0.004:
                    self.gripper = CLOSED
                    self._set_phase(GRASP, ee_pos, t)
            if self.phase == GRASP:
                goal = grasp_point
                if events.get("missed_close"):
                    self.gripper = OPEN
                    self._set_phase(DESCEND, ee_pos, t)
            self._goal = goal
            return self._emit(goal), self.gripper

        # holding an object
        goal_fix = self._goal_fixture(ws, held)
        above_goal = np.array([goal_fix.pos[0], goal_fix.pos[1], desc.lift_z])
        if self.phase not in (LIFT, TRANSPORT, ALIGN):
            self._set_phase(LIFT, ee_pos, t)
        goal = above_goal
        if self.phase == LIFT:
            goal = np.array([ee_pos[0], ee_pos[1], desc.lift_z])
            if abs(ee_pos[2] - desc.lift_z) <= e.waypoint_tol:
                self._set_phase(TRANSPORT, ee_pos, t)
        if self.phase == TRANSPORT:
            goal = above_goal
            if np.linalg.norm(ee_pos[:2] - above_goal[:2]) <= e.waypoint_tol:
                self._set_phase(ALIGN, ee_pos, t)
        if self.phase == ALIGN:
            if self.hold_at_align:
                goal = above_goal
            else:
                drop_z = desc.insert_plane_z - 0.005 if desc.kind != CUBE_SORT else 0.02
                goal = np.array([goal_fix.pos[0], goal_fix.pos[1], drop_z])
                if self._release_ok(ws, held):
                    self.gripper = OPEN
                    self._set_phase(RETREAT, ee_pos, t)
        self._goal = goal
        return self._emit(goal), self.gripper

    def _emit(self, task_goal):
        """Glide the leader-space carrot toward the goal's image, add hand
        jitter, clamp into the leader workspace box."""
        e = self.cfg.expert
        goal_l = map_follower_to_leader(self.wm, task_goal)
        delta = goal_l - self._carrot
        dist = float(np.linalg.norm(delta))
        step = e.leader_speed * self.cfg.record_dt
        if dist > step:
            self._carrot = self._carrot + delta * (step / dist)
        else:
            self._carrot = goal_l.copy()
        target = self._carrot
        if self.jitter and self.sigma > 0:
            target = target + self.rng.normal(0.0, self.sigma, 3)
        lo = self.wm.c_l - self.cfg.leader_box_half
        hi = self.wm.c_l + self.cfg.leader_box_half
        return np.clip(target, lo, hi)

    def intent(self, ws, ee_pos, t):
        goal = self._goal if self._goal is not None else ee_pos
        start = self._phase_start if self._phase_start is not None else ee_pos
        return ExpertIntent(
            phase=self.phase,
            goal=np.asarray(goal, float),
            phase_start=start,
            phase_elapsed=t - self._phase_t0,
        )
