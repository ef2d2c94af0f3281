"""Human-in-the-loop learning loop, evaluation protocol, trajectory metrics.

The loop deploys the current policy, lets a scripted supervisor decide when
to take over (the stand-in for human judgment in headless runs), records the
corrective teleop segments as clips, and fine-tunes in batches of K clips,
redeploying immediately. Everything is a pure function of (config, seeds).
"""

from dataclasses import dataclass, field

import numpy as np

from .bridge import ControlMode
from .errors import SwitchRejected
from .expert import ExpertDriver
from .policy import finetune
from .recording import Recorder, merge_dataset
from .session import CopilotSession
from .tasks import CUBE_SORT, check_stage

SUPERVISOR_GRACE = 0.5  # s after start/handback before checks resume


def _point_segment_distance(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return float(np.linalg.norm(p - a))
    u = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + u * ab)))


def should_intervene(ws, ee_pos, intent, events, thresholds, desc, release_id=None):
    """Scripted gate standing in for the human watching the rollout.

    Fires on (a) failures: a dropped object, a grasp attempt that engaged
    nothing, a release that did not accomplish its placement; (b) deviation
    from the reference phase path; (c) phase timeout.
    """
    if events.get("drop"):
        return True, "failure"
    if events.get("missed_close"):
        return True, "failure"
    if release_id is not None and not _release_was_good(ws, release_id, desc):
        return True, "failure"
    deviation = _point_segment_distance(ee_pos, intent.phase_start, intent.goal)
    if deviation > thresholds.d_int:
        return True, "deviation"
    if intent.phase_elapsed > thresholds.phase_timeout:
        return True, "timeout"
    return False, None


def _release_was_good(ws, released_id, desc):
    obj = ws.object(released_id)
    if desc.kind == CUBE_SORT:
        box = ws.fixture(f"container_{obj.color}")
        return (np.abs(obj.pos[:2] - box.pos[:2]) <= box.half_extent).all()
    return check_stage(ws, desc)["done"]


class Supervisor:
    """Tracks a jitter-free shadow plan and the world's held/released history
    to feed should_intervene each record step."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.shadow = ExpertDriver(cfg, seed=0, jitter=False)
        self._prev_held = None
        self._mute_until = SUPERVISOR_GRACE

    def reset(self, ws, t=0.0):
        self.shadow.reset(ws, t)
        self._prev_held = ws.gripper.held_object
        self._mute_until = t + SUPERVISOR_GRACE

    def mute(self, until_t):
        self._mute_until = until_t

    def check(self, session, events):
        ws = session.world
        ee = session.follower_ee().position
        t = session.t
        self.shadow.record_step(ws, ee, t, events)
        intent = self.shadow.intent(ws, ee, t)
        held_now = ws.gripper.held_object
        release_id = None
        if self._prev_held is not None and held_now is None and not events.get("drop"):
            release_id = self._prev_held
        self._prev_held = held_now
        if t < self._mute_until:
            return False, None
        return should_intervene(
            ws, ee, intent, events, self.cfg.hil, self.cfg.task, release_id
        )


# ----------------------------------------------------------------- data flow


def collect_demos(cfg, n_episodes, seed0, require_success=True, recorder=None):
    """Scripted full-trajectory demonstrations. Failed attempts are discarded
    (they would poison the clone) but count toward the attempt budget."""
    rec = recorder or Recorder(cfg.task_kind, cfg.workspace.alpha, cfg.record_dt)
    kept = 0
    attempt = 0
    max_attempts = n_episodes * 8
    while kept < n_episodes and attempt < max_attempts:
        seed = seed0 + attempt
        attempt += 1
        driver = ExpertDriver(cfg, seed=seed)
        session = CopilotSession(cfg, seed, driver=driver, recorder=rec)
        driver.reset(session.world, session.t)
        rec.begin_episode()
        done = _run_until_done(session, cfg.hil.episode_timeout)
        outcome = session.stage()
        outcome["duration"] = session.t
        if done or not require_success:
            rec.end_episode(outcome)
            kept += 1
        else:
            rec.abort_episode()
    return rec


def _settled_done(session):
    return session.stage()["done"] and session.world.held() is None


def _run_until_done(session, timeout):
    while session.t < timeout:
        session.run_record_step()
        if _settled_done(session):
            return True
    return False


# ---------------------------------------------------------------- evaluation


@dataclass
class StageReport:
    task_id: str
    per_rollout: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def n(self):
        return len(self.per_rollout)

    def _pct(self, key):
        if not self.per_rollout:
            return 0.0
        return 100.0 * sum(1 for r in self.per_rollout if r[key]) / self.n

    @property
    def stage1_pct(self):
        return self._pct("stage1")

    @property
    def stage2_pct(self):
        return self._pct("stage2")

    @property
    def total_pct(self):
        return self._pct("total")

    def as_dict(self):
        return {
            "task": self.task_id,
            "rollouts": self.n,
            "stage1_pct": self.stage1_pct,
            "stage2_pct": self.stage2_pct,
            "total_pct": self.total_pct,
            "wall_time_s": round(self.wall_time, 4),
            "per_rollout": self.per_rollout,
        }


def format_stage_table(reports):
    """Aligned S1 / S2 / Total columns, one row per named policy."""
    lines = [f"{'Policy':<14} {'S1':>6} {'S2':>6} {'Total':>6}"]
    for name, rep in reports.items():
        lines.append(
            f"{name:<14} {rep.stage1_pct:>6.1f} {rep.stage2_pct:>6.1f} {rep.total_pct:>6.1f}"
        )
    return "\n".join(lines)


def evaluate(policy, cfg, rollouts=None, seed0=10_000):
    """Stage-wise protocol: run the policy untouched; if the grasp stage
    failed, teleport to the canonical post-grasp state and score the second
    stage independently. Total requires both stages in one uninterrupted run.
    """
    m = rollouts or cfg.hil.eval_rollouts
    report = StageReport(task_id=cfg.task_kind)
    for i in range(m):
        seed = seed0 + i
        session = CopilotSession(cfg, seed, policy=policy)
        session.switch(ControlMode.POLICY)
        done = _run_until_done(session, cfg.hil.episode_timeout)
        stage1 = session.world.stage1_latched
        total = bool(done and stage1)
        if stage1:
            stage2 = done
        else:
            session.teleport_post_grasp()
            stage2 = _run_until_done(
                session, session.t + cfg.hil.episode_timeout
            )
        report.per_rollout.append(
            {"seed": seed, "stage1": bool(stage1), "stage2": bool(stage2), "total": total}
        )
        report.wall_time += session.t
    return report


# ------------------------------------------------------------------ HIL loop


def run_hil(d0, policy0, cfg, seed0=5_000, recorder=None):
    """Deploy, intervene, clip, batch-finetune, redeploy.

    Follows the clip-buffer rule exactly: every sealed clip lands in the
    buffer; whenever the buffer holds trigger_k clips, the base demos and all
    clips collected so far are merged, the policy is rebuilt and redeployed,
    and the buffer empties. Returns (final policy, clips, log).
    """
    hil = cfg.hil
    rec = recorder or Recorder(cfg.task_kind, cfg.workspace.alpha, cfg.record_dt)
    policy = policy0
    all_clips = []
    log = {
        "iterations": [],
        "finetune_count": 0,
        "interventions": 0,
        "rollouts": 0,
    }
    rollout_index = 0
    for it in range(hil.iterations):
        # the buffer starts empty each iteration; sub-trigger leftovers stay
        # collected and ride along in the next merge
        all_clips.extend(rec.take_clips())
        it_log = {"rollouts": [], "clips": 0}
        for _ in range(hil.rollouts_per_iter):
            seed = seed0 + rollout_index
            rollout_index += 1
            expert = ExpertDriver(cfg, seed=seed)
            supervisor = Supervisor(cfg)
            session = CopilotSession(cfg, seed, policy=policy, recorder=rec)
            session.switch(ControlMode.POLICY)
            supervisor.reset(session.world, session.t)
            rec.begin_episode()
            interventions = 0
            intervention_t0 = None
            while session.t < hil.episode_timeout:
                session.run_record_step()
                if _settled_done(session) and session.mode == ControlMode.POLICY:
                    break
                if session.mode == ControlMode.POLICY:
                    events = session.pop_events()
                    fire, reason = supervisor.check(session, events)
                    if fire:
                        try:
                            session.switch(ControlMode.TELEOP)
                        except SwitchRejected:
                            continue  # stay on policy until alignment recovers
                        clip_reason = "failure" if reason == "timeout" else reason
                        rec.begin_clip(clip_reason, "teleop")
                        expert.reset(session.world, session.t)
                        session.driver = expert
                        intervention_t0 = session.t
                        interventions += 1
                else:
                    # the correction runs until the task settles: handing a
                    # lookup policy a clip that stops mid-action would teach
                    # it to stall at the handback state
                    elapsed = session.t - intervention_t0
                    if _settled_done(session) or elapsed >= hil.intervention_timeout:
                        rec.end_clip()
                        session.driver = None
                        session.switch(ControlMode.POLICY)
                        supervisor.reset(session.world, session.t)
                        policy = _maybe_finetune(rec, d0, policy, all_clips, hil, log)
                        session.policy = policy
            if session.mode == ControlMode.TELEOP:
                # episode ended mid-intervention: seal the clip
                rec.end_clip()
                session.driver = None
                policy = _maybe_finetune(rec, d0, policy, all_clips, hil, log)
            outcome = session.stage()
            outcome["interventions"] = interventions
            outcome["duration"] = session.t
            rec.end_episode(outcome)
            log["interventions"] += interventions
            log["rollouts"] += 1
            it_log["rollouts"].append(
                {"seed": seed, "interventions": interventions, "done": outcome["done"]}
            )
        it_log["clips"] = len(all_clips) + len(rec.clip_buffer)
        log["iterations"].append(it_log)
    # clips still buffered below the trigger are kept as collected data
    all_clips.extend(rec.take_clips())
    log["clips_total"] = len(all_clips)
    return policy, all_clips, log


def _maybe_finetune(rec, d0, policy, all_clips, hil, log):
    if len(rec.clip_buffer) < hil.trigger_k:
        return policy
    all_clips.extend(rec.take_clips())
    merged = merge_dataset(d0, all_clips)
    log["finetune_count"] += 1
    return finetune(policy, merged)


# ------------------------------------------------------------------- metrics


def rms_alignment_metric(positions, times, target, velocities=None):
    """RMS lateral/forward deviation from the target over the alignment
    phase, which starts at the first transport-velocity zero crossing after
    motion onset. Monotone approaches (no crossing) fall back to the final
    20% of samples and are flagged.
    """
    positions = np.asarray(positions, float)
    times = np.asarray(times, float)
    if positions.shape[0] < 2:
        raise ValueError("trajectory needs at least 2 samples")
    target = np.asarray(target, float)
    direction = target[:2] - positions[0, :2]
    norm = np.linalg.norm(direction)
    direction = direction / norm if norm > 1e-12 else np.array([1.0, 0.0])
    lateral_dir = np.array([-direction[1], direction[0]])
    along = positions[:, :2] @ direction
    if velocities is None:
        v = np.gradient(along, times)
    else:
        v = np.asarray(velocities, float)[:, :2] @ direction
    peak = np.abs(v).max()
    onset_candidates = np.nonzero(np.abs(v) > 0.1 * peak)[0] if peak > 0 else []
    crossing_found = False
    start = int(0.8 * len(v))
    if len(onset_candidates):
        onset = int(onset_candidates[0])
        sign0 = np.sign(v[onset])
        for k in range(onset + 1, len(v)):
            if np.sign(v[k]) == -sign0 and abs(v[k]) > 0:
                start = k
                crossing_found = True
                break
    dev = positions[start:, :2] - target[:2]
    lateral = dev @ lateral_dir
    forward = dev @ direction
    return {
        "lateral_rms": float(np.sqrt(np.mean(lateral**2))),
        "forward_rms": float(np.sqrt(np.mean(forward**2))),
        "alignment_start_index": start,
        "zero_crossing_found": crossing_found,
    }


def alignment_trial(cfg, seed, duration=2.4):
    """One transport-and-hover run toward the pole with the disk in hand;
    returns the metric against the pole position."""
    driver = ExpertDriver(cfg, seed=seed, hold_at_align=True)
    session = CopilotSession(cfg, seed, driver=driver)
    session.teleport_post_grasp()
    driver.reset(session.world, session.t)
    pole = session.world.fixture("pole").pos
    target = np.array([pole[0], pole[1], cfg.task.lift_z])
    positions, times = [], []
    steps = int(round(duration / cfg.record_dt))
    for _ in range(steps):
        session.run_record_step()
        positions.append(session.follower_ee().position.copy())
        times.append(session.t)
    return rms_alignment_metric(np.array(positions), np.array(times), target)


def alignment_comparison(make_cfg, seeds, alphas=(0.5, 2.0)):
    """Run the same seeded alignment trials at each scaling factor.

    make_cfg(alpha) must return a session config whose workspace map uses
    that alpha with everything else unchanged.
    """
    out = {}
    for alpha in alphas:
        cfg = make_cfg(alpha)
        lat, fwd = [], []
        for seed in seeds:
            m = alignment_trial(cfg, seed)
            lat.append(m["lateral_rms"])
            fwd.append(m["forward_rms"])
        out[alpha] = {
            "lateral_rms": float(np.sqrt(np.mean(np.square(lat)))),
            "forward_rms": float(np.sqrt(np.mean(np.square(fwd)))),
            "trials": len(seeds),
        }
    return out


def collection_time_report(episodes, clips):
    """Wall-clock totals per source plus the matched-count comparison."""
    ep_times = [e.wall_time for e in episodes]
    clip_times = [c.wall_time for c in clips]
    m = min(len(ep_times), len(clip_times))
    matched_eps = sum(ep_times[:m])
    matched_clips = sum(clip_times[:m])
    return {
        "episodes": {"n": len(ep_times), "total_s": round(sum(ep_times), 4)},
        "clips": {"n": len(clip_times), "total_s": round(sum(clip_times), 4)},
        "matched": {
            "n": m,
            "episodes_s": round(matched_eps, 4),
            "clips_s": round(matched_clips, 4),
            "clips_less": bool(matched_clips < matched_eps) if m else None,
        },
    }
