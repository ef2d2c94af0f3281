"""One closed-loop control session: two simulated arms on the bidirectional
bus, a task world, an optional recorder, and either a leader driver (teleop)
or a policy (autonomous) feeding the active channel.

The control loop ticks at cfg.dt (2 ms). Record-rate work (driver decisions,
policy chunk advance, frame logging, inbound command drain) happens every
cfg.decimation ticks. Both channels exist every tick; only the active one
reaches the follower, and the inactive one is still computed at record rate
so it can be observed.
"""

from collections import deque

import numpy as np

from . import armsim, tasks
from .armsim import ArmState
from .bridge import (
    ControlMode,
    CopilotState,
    WorkspaceMap,
    map_follower_to_leader,
    policy_sync_tick,
    select_gains,
    switch_mode,
    teleop_tick,
)
from .errors import IdleOnlyViolation, TeleloopError, UnreachableError
from .kinematics import IkParams, Pose, forward_kinematics, inverse_kinematics
from .recording import Frame

IDENT_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


class CopilotSession:
    def __init__(self, cfg, seed, policy=None, driver=None, recorder=None):
        self.cfg = cfg
        self.seed = seed
        self.policy = policy
        self.driver = driver
        self.recorder = recorder
        self.world = tasks.reset(cfg.task, seed)
        self.mode = ControlMode.TELEOP
        self.wm = cfg.workspace
        self._pos_ik = IkParams(
            damping=cfg.ik.damping, max_iters=cfg.ik.max_iters,
            pos_tol=cfg.ik.pos_tol, ori_tol=cfg.ik.ori_tol,
            step_clip=cfg.ik.step_clip, position_only=True,
        )

        self.orientation_input = IDENT_QUAT.copy()
        home = self.world.gripper.pos.copy()
        fq = self._follower_ik(home, seed_q=self._nominal_follower_seed())
        lq = inverse_kinematics(
            cfg.leader_chain,
            Pose(map_follower_to_leader(self.wm, home), IDENT_QUAT.copy()),
            self._nominal_leader_seed(),
            self._pos_ik,
        )
        self.follower = ArmState(q=fq, qdot=np.zeros(cfg.follower_chain.n), t=0.0)
        self.leader = ArmState(q=lq, qdot=np.zeros(cfg.leader_chain.n), t=0.0)
        self._fee = forward_kinematics(cfg.follower_chain, fq)
        self.last_follower_cmd = fq.copy()
        self.last_leader_cmd = lq.copy()
        self.leader_hand_cmd = lq.copy()
        self.gripper_cmd = 1.0
        self.sync_error = 0.0
        self.held_flag = False
        self.inactive_channel_cmd = None
        self.t = 0.0
        self.seq = 0
        self._tick = 0
        self._chunk = None
        self._chunk_idx = 0
        self._leader_target = None
        self._events = {"drop": False, "missed_close": False}
        self._inbound = deque()
        self.errors = deque()  # per-message failures, drained by the gateway
        self.idle = True
        # put the world gripper where the follower actually is
        tasks.step_world(self.world, self.follower_ee().position, self.gripper_cmd,
                         cfg.task, 1e-9)
        self.world.t = 0.0

    # ------------------------------------------------------------- utilities

    def _nominal_follower_seed(self):
        n = self.cfg.follower_chain.n
        seed = np.zeros(n)
        seed[-2:] = [0.7, -0.5]
        return self.cfg.follower_chain.clamp(seed)

    def _nominal_leader_seed(self):
        n = self.cfg.leader_chain.n
        seed = np.zeros(n)
        seed[-2:] = [0.7, -0.5]
        return self.cfg.leader_chain.clamp(seed)

    def _follower_ik(self, position, seed_q=None):
        target = Pose(np.asarray(position, float), self.orientation_input.copy())
        seed = self.follower.q if seed_q is None else seed_q
        return inverse_kinematics(self.cfg.follower_chain, target, seed, self._pos_ik)

    def follower_ee(self):
        return self._fee

    def leader_ee(self):
        return forward_kinematics(self.cfg.leader_chain, self.leader.q)

    def copilot_state(self):
        return CopilotState(
            mode=self.mode,
            leader=self.leader,
            follower=self.follower,
            leader_orientation_input=self.orientation_input,
            last_follower_cmd=self.last_follower_cmd,
            last_leader_cmd=self.last_leader_cmd,
            sync_error=self.sync_error,
        )

    def observation(self):
        ee = self.follower_ee()
        return np.concatenate([
            self.follower.q,
            ee.position,
            ee.orientation,
            [self.gripper_cmd],
            tasks.world_features(self.world, self.cfg.task),
        ])

    def pop_events(self):
        ev = self._events
        self._events = {"drop": False, "missed_close": False}
        return ev

    # ------------------------------------------------------------- commands

    def submit(self, msg):
        """Queue an operator command; it takes effect at the next record
        boundary, in arrival order."""
        self._inbound.append(msg)

    def set_leader_target(self, position, orientation=None):
        self._leader_target = np.asarray(position, float)
        if orientation is not None:
            self.orientation_input = np.asarray(orientation, float)
        self._refresh_hand_cmd()

    def _refresh_hand_cmd(self):
        if self._leader_target is None:
            return
        try:
            self.leader_hand_cmd = inverse_kinematics(
                self.cfg.leader_chain,
                Pose(self._leader_target, IDENT_QUAT.copy()),
                self.leader.q,
                self._pos_ik,
            )
        except UnreachableError as e:
            self.leader_hand_cmd = e.q_best

    def switch(self, to):
        """Swap the active channel (bumpless: rejected if out of sync)."""
        new = switch_mode(self.copilot_state(), to, self.cfg.switch_tol)
        self.mode = new.mode
        if to == ControlMode.POLICY:
            self._chunk = None
            self._chunk_idx = 0
        else:
            self._leader_target = None

    def _drain_inbound(self):
        while self._inbound:
            msg = self._inbound.popleft()
            try:
                self._apply_msg(msg)
            except TeleloopError as e:
                self.errors.append(
                    {"type": "error", "error": type(e).__name__,
                     "detail": str(e), "msg_type": msg.get("type")}
                )

    def _apply_msg(self, msg):
        kind = msg.get("type")
        if kind == "set_mode":
            self.switch(ControlMode(msg["mode"]))
        elif kind == "leader_target":
            self.set_leader_target(msg["position"], msg.get("orientation"))
        elif kind == "gripper":
            v = float(msg["value"])
            self.gripper_cmd = 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)
        elif kind == "clip":
            if self.recorder is not None:
                if msg["action"] == "begin":
                    self.recorder.begin_clip(msg.get("reason", "manual"), self.mode.value)
                else:
                    self.recorder.end_clip()
        elif kind == "set_scale":
            if not self.idle:
                raise IdleOnlyViolation(
                    "scale changes are only accepted while the session is idle"
                )
            self.wm = WorkspaceMap(
                alpha=msg["alpha"],
                c_l=np.asarray(msg["c_l"], float),
                c_t=np.asarray(msg["c_t"], float),
            )
        if kind in ("set_mode", "leader_target", "gripper", "clip"):
            self.idle = False

    # ------------------------------------------------------------ main loop

    def tick(self):
        cfg = self.cfg
        boundary = self._tick % cfg.decimation == 0
        if boundary:
            self._drain_inbound()
            if self.mode == ControlMode.TELEOP and self.driver is not None:
                target, grip = self.driver.record_step(
                    self.world, self.follower_ee().position, self.t, self.pop_events()
                )
                self.set_leader_target(target)
                self.gripper_cmd = float(grip)
            if self.mode == ControlMode.POLICY and self.policy is not None:
                if self._chunk is None or self._chunk_idx >= self._chunk.shape[0]:
                    self._chunk = self.policy.predict(self.observation()).commands
                    self._chunk_idx = 0
                cmd = self._chunk[self._chunk_idx]
                self._chunk_idx += 1
                self._policy_follower_cmd = cfg.follower_chain.clamp(cmd[:-1])
                self.gripper_cmd = float(np.clip(cmd[-1], 0.0, 1.0))

        cs = self.copilot_state()
        if self.mode == ControlMode.TELEOP:
            res = teleop_tick(cs, cfg.leader_chain, cfg.follower_chain, self.wm,
                              self._pos_ik, follower_pose=self._fee)
            follower_cmd = res.follower_cmd
            leader_cmd = (
                self.leader_hand_cmd if self._leader_target is not None else res.leader_cmd
            )
            self.sync_error = res.sync_error
            self.held_flag = res.held
        else:
            if self.policy is None or self._chunk is None:
                pol_cmd = self.last_follower_cmd
            else:
                pol_cmd = self._policy_follower_cmd
            res = policy_sync_tick(cs, cfg.leader_chain, cfg.follower_chain, self.wm,
                                   self._pos_ik, pol_cmd, follower_pose=self._fee)
            follower_cmd = res.follower_cmd
            leader_cmd = res.leader_cmd
            self.sync_error = res.sync_error
            self.held_flag = res.held

        if boundary:
            self._compute_inactive_channel(cs)

        (lg, lcomp), (fg, fcomp) = select_gains(cfg.gains, self.mode)
        self.leader = armsim.step(cfg.leader_chain, cfg.leader_dyn, lcomp, lg,
                                  leader_cmd, self.leader, cfg.dt)
        self.follower = armsim.step(cfg.follower_chain, cfg.follower_dyn, fcomp, fg,
                                    follower_cmd, self.follower, cfg.dt)
        self.last_follower_cmd = follower_cmd
        self.last_leader_cmd = leader_cmd
        self._fee = forward_kinematics(cfg.follower_chain, self.follower.q)

        tasks.step_world(self.world, self._fee.position, self.gripper_cmd,
                         cfg.task, cfg.dt)
        self._events["drop"] = self._events["drop"] or self.world.drop_event
        self._events["missed_close"] = (
            self._events["missed_close"] or self.world.missed_close
        )
        self.t += cfg.dt
        self._tick += 1
        self.seq += 1

        if boundary and self.recorder is not None:
            self.recorder.append_frame(self._frame(follower_cmd, leader_cmd))
        return follower_cmd, leader_cmd

    def _compute_inactive_channel(self, cs):
        """Channel exclusivity: the discarded channel is still computed at
        record rate so subscribers can log or display it."""
        if self.mode == ControlMode.POLICY:
            res = teleop_tick(cs, self.cfg.leader_chain, self.cfg.follower_chain,
                              self.wm, self._pos_ik)
            self.inactive_channel_cmd = res.follower_cmd
        elif self.policy is not None and self._chunk is not None:
            idx = min(self._chunk_idx, self._chunk.shape[0] - 1)
            self.inactive_channel_cmd = self.cfg.follower_chain.clamp(
                self._chunk[idx][:-1]
            )
        else:
            self.inactive_channel_cmd = None

    def _frame(self, follower_cmd, leader_cmd):
        ee = self.follower_ee()
        return Frame(
            t=self.t,
            mode=self.mode.value,
            active_channel=self.mode.value,
            leader_cmd_q=leader_cmd.copy(),
            leader_obs_q=self.leader.q.copy(),
            follower_cmd_q=follower_cmd.copy(),
            follower_obs_q=self.follower.q.copy(),
            ee_pos=ee.position.copy(),
            ee_quat=ee.orientation.copy(),
            gripper=self.gripper_cmd,
            obs=self.observation(),
        )

    def run_record_step(self):
        """Advance one record period (decimation ticks)."""
        for _ in range(self.cfg.decimation):
            self.tick()

    def run(self, seconds):
        n = int(round(seconds / self.cfg.dt))
        for _ in range(n):
            self.tick()

    # ----------------------------------------------- evaluation repositioning

    def teleport_post_grasp(self):
        """Stage-2 evaluation protocol: place the gripper at the canonical
        post-grasp pose with the object attached and re-seed the arms there."""
        tasks.reposition_post_grasp(self.world, self.cfg.task)
        pos = self.world.gripper.pos.copy()
        fq = self._follower_ik(pos)
        self.follower = ArmState(q=fq, qdot=np.zeros_like(fq), t=self.follower.t)
        self._fee = forward_kinematics(self.cfg.follower_chain, fq)
        lq = inverse_kinematics(
            self.cfg.leader_chain,
            Pose(map_follower_to_leader(self.wm, pos), IDENT_QUAT.copy()),
            self.leader.q, self._pos_ik,
        )
        self.leader = ArmState(q=lq, qdot=np.zeros_like(lq), t=self.leader.t)
        self.last_follower_cmd = fq.copy()
        self.last_leader_cmd = lq.copy()
        self.gripper_cmd = 0.0
        self._chunk = None
        self._chunk_idx = 0
        held = self.world.held()
        held.pos = pos.copy()
        tasks.step_world(self.world, pos, self.gripper_cmd, self.cfg.task, 1e-9)

    def stage(self):
        return tasks.check_stage(self.world, self.cfg.task)
