"""Experiment configuration: chains, workspace map, gains, dynamics, task,
expert and learning-loop parameters.

Defaults are per task; a JSON config document overrides any subset of them
(same nesting as ``default_dict``). Geometry is chosen so the leader box maps
onto the task's randomized region at the session's scaling factor.
"""

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .armsim import DynamicsParams, PDGains
from .bridge import GainSchedule, WorkspaceMap
from .errors import ParseError
from .kinematics import IkParams, builtin_chain, load_chain_file
from .tasks import CUBE_SORT, PEG_INSERT, GraspModel, TaskDescriptor


@dataclass(frozen=True)
class ExpertConfig:
    sigma: float = 0.002  # hand jitter, leader space (m)
    leader_speed: float = 0.25  # carrot speed toward waypoints, leader space (m/s)
    waypoint_tol: float = 0.01  # task-space phase-advance tolerance (m)
    close_gate_frac: float = 0.7  # of g_tol: measured offset required to close
    release_gate_frac: float = 0.5  # of clearance (insertion) before opening
    place_gate: float = 0.012  # cube center-to-container gate (m)


@dataclass(frozen=True)
class HilConfig:
    trigger_k: int = 5  # clips buffered before a fine-tune fires
    iterations: int = 2
    rollouts_per_iter: int = 20
    d_int: float = 0.02  # intervention deviation threshold (m)
    phase_timeout: float = 4.0  # s of no phase progress before intervening
    eval_rollouts: int = 50
    episode_timeout: float = 14.0  # s, per rollout
    intervention_timeout: float = 8.0  # s, expert hands back at the latest


@dataclass(frozen=True)
class SessionConfig:
    task_kind: str
    leader_chain: object
    follower_chain: object
    workspace: WorkspaceMap
    leader_box_half: np.ndarray
    gains: GainSchedule
    leader_dyn: DynamicsParams
    follower_dyn: DynamicsParams
    ik: IkParams
    task: TaskDescriptor
    expert: ExpertConfig
    hil: HilConfig
    dt: float = 0.002
    decimation: int = 10
    switch_tol: float = 0.005
    policy_k: int = 1
    policy_h: int = 10
    stream_hz: float = 30.0

    @property
    def record_dt(self):
        return self.dt * self.decimation


def default_dict(task_kind):
    """Built-in configuration for one task, as a plain overridable dict."""
    if task_kind == PEG_INSERT:
        workspace = {
            "alpha": 0.5,
            "c_l": [0.30, 0.0, 0.10],
            "c_t": [0.32, 0.0, 0.05],
            "leader_box_half": [0.12, 0.10, 0.09],
        }
        task = {
            "region_center": [0.30, 0.0],
            "region_size": [0.04, 0.04],
            "pole_segment_start": [0.355, -0.015],
            "pole_segment_len": 0.03,
            "clearance": 0.001,
            "lift_z": 0.07,
        }
    elif task_kind == CUBE_SORT:
        workspace = {
            "alpha": 2.0,
            "c_l": [0.30, 0.0, 0.10],
            "c_t": [0.32, 0.0, 0.10],
            "leader_box_half": [0.115, 0.09, 0.05],
        }
        task = {
            "region_center": [0.32, 0.0],
            "region_size": [0.45, 0.35],
            "lift_z": 0.08,
        }
    else:
        raise ParseError(f"unknown task kind {task_kind!r}")
    return {
        "task": task_kind,
        "chains": {"leader": "lift3", "follower": "lift4"},
        "workspace": workspace,
        "task_params": task,
        "grasp": {"g_tol": 0.004, "g_slip": 0.009, "d_slip": 0.15},
        "gains": {
            "teleop_leader": {"kp": [30.0] * 3, "kd": [1.5] * 3},
            "policy_leader": {"kp": [60.0] * 3, "kd": [2.2] * 3},
            "teleop_follower": {"kp": [60.0] * 4, "kd": [3.5] * 4},
            "policy_follower": {"kp": [60.0] * 4, "kd": [3.5] * 4},
        },
        "dynamics": {
            "leader": {
                "inertia": [0.02] * 3,
                "viscous_b": [0.05] * 3,
                "coulomb_c": [0.01] * 3,
                "gravity": [0.0, 0.0, -9.81],
                "link_masses": [0.0, 0.3, 0.2],
                "link_com_offsets": [0.0, 0.15, 0.1],
            },
            "follower": {
                "inertia": [0.05] * 4,
                "viscous_b": [0.08] * 4,
                "coulomb_c": [0.01] * 4,
                "gravity": [0.0, 0.0, -9.81],
                "link_masses": [0.0, 0.4, 0.3, 0.2],
                "link_com_offsets": [0.0, 0.125, 0.125, 0.05],
            },
        },
        "ik": {"damping": 1e-3, "max_iters": 100, "pos_tol": 1e-6,
               "ori_tol": 1e-6, "step_clip": 0.2},
        "sim": {"dt": 0.002, "decimation": 10, "switch_tol": 0.005, "stream_hz": 30.0},
        "policy": {"k": 1, "h": 10},
        "expert": {"sigma": 0.002, "leader_speed": 0.25, "waypoint_tol": 0.01,
                   "close_gate_frac": 0.7, "release_gate_frac": 0.5,
                   "place_gate": 0.012},
        "hil": {"trigger_k": 5, "iterations": 2, "rollouts_per_iter": 20,
                "d_int": 0.02, "phase_timeout": 4.0, "eval_rollouts": 50,
                "episode_timeout": 8.0, "intervention_timeout": 8.0},
    }


def _merge(base, overrides):
    out = copy.deepcopy(base)
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _chain(spec):
    if spec.endswith(".json") or "/" in spec:
        return load_chain_file(spec)
    return builtin_chain(spec)


def build_config(doc):
    """Turn a (merged) config dict into typed session configuration."""
    ws = doc["workspace"]
    tp = dict(doc["task_params"])
    tp["grasp"] = GraspModel(**doc["grasp"])
    gains = {
        name: PDGains(kp=np.array(g["kp"]), kd=np.array(g["kd"]))
        for name, g in doc["gains"].items()
    }
    sim = doc["sim"]
    return SessionConfig(
        task_kind=doc["task"],
        leader_chain=_chain(doc["chains"]["leader"]),
        follower_chain=_chain(doc["chains"]["follower"]),
        workspace=WorkspaceMap(alpha=ws["alpha"], c_l=np.array(ws["c_l"]),
                               c_t=np.array(ws["c_t"])),
        leader_box_half=np.array(ws["leader_box_half"]),
        gains=GainSchedule(
            teleop_leader=gains["teleop_leader"],
            teleop_follower=gains["teleop_follower"],
            policy_leader=gains["policy_leader"],
            policy_follower=gains["policy_follower"],
        ),
        leader_dyn=DynamicsParams(**doc["dynamics"]["leader"]),
        follower_dyn=DynamicsParams(**doc["dynamics"]["follower"]),
        ik=IkParams(**doc["ik"]),
        task=TaskDescriptor(kind=doc["task"], **tp),
        expert=ExpertConfig(**doc["expert"]),
        hil=HilConfig(**doc["hil"]),
        dt=sim["dt"],
        decimation=sim["decimation"],
        switch_tol=sim["switch_tol"],
        stream_hz=sim.get("stream_hz", 30.0),
        policy_k=doc["policy"]["k"],
        policy_h=doc["policy"]["h"],
    )


def default_config(task_kind, overrides=None):
    doc = default_dict(task_kind)
    if overrides:
        doc = _merge(doc, overrides)
    return build_config(doc)


def load_config(path, task_kind=None, overrides=None):
    """Read a config document; its "task" field (or the explicit task_kind)
    selects the defaults it overrides."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"config {path}: {e}") from e
    kind = task_kind or doc.get("task")
    if kind is None:
        raise ParseError(f"config {path}: missing 'task' field")
    merged = _merge(default_dict(kind), doc)
    if overrides:
        merged = _merge(merged, overrides)
    return build_config(merged)
