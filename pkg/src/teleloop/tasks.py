"""Seeded toy manipulation worlds: randomized color sorting and tight-clearance
disk insertion.

The object model is kinematic: objects move only while held. Grasping is
abstracted by a lateral-offset rule (clean inside g_tol, marginal up to
g_slip, miss beyond), and marginal grasps drop the object after d_slip of
transport, which is the slip-during-transfer failure mode these tasks are
built to exercise. Grasped objects self-center laterally in the fingers, so
placement precision is governed by where the gripper releases, not by grasp
luck.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import PlacementFailure, ValidationError

CUBE_SORT = "cube_sort"
PEG_INSERT = "peg_insert"

TABLE_Z = 0.0
CUBE_HALF = 0.0125
CONTAINER_HALF = 0.03
DISK_RADIUS = 0.025
DISK_HALF_THICK = 0.01
GRIPPER_CLOSE_THRESHOLD = 0.5

CUBE_COLORS = ("red", "green", "blue")


@dataclass(frozen=True)
class GraspModel:
    g_tol: float = 0.004  # clean-grasp lateral offset
    g_slip: float = 0.009  # marginal-grasp bound
    d_slip: float = 0.15  # transport distance before a marginal grasp slips
    z_window: float = 0.012  # vertical engagement window around the object center

    def __post_init__(self):
        if not 0 < self.g_tol < self.g_slip:
            raise ValidationError("grasp", "requires 0 < g_tol < g_slip")


@dataclass(frozen=True)
class TaskDescriptor:
    kind: str
    region_center: np.ndarray  # (x, y) of the randomized area
    region_size: np.ndarray  # full extents (m)
    clearance: float = 0.001  # radial insertion clearance (peg_insert)
    pole_segment_start: np.ndarray = None  # (x, y); pole slides along +y
    pole_segment_len: float = 0.03
    pole_top_z: float = 0.04
    insert_plane_z: float = 0.02
    lift_z: float = 0.07
    min_separation: float = 0.085  # center-to-center, cube_sort placement
    grasp: GraspModel = field(default_factory=GraspModel)

    def __post_init__(self):
        if self.kind not in (CUBE_SORT, PEG_INSERT):
            raise ValidationError("kind", f"unknown task kind {self.kind!r}")
        if self.clearance <= 0:
            raise ValidationError("clearance", "must be > 0")
        object.__setattr__(self, "region_center", np.asarray(self.region_center, float))
        object.__setattr__(self, "region_size", np.asarray(self.region_size, float))
        if (self.region_size <= 0).any():
            raise ValidationError("region_size", "extents must be > 0")
        if self.pole_segment_start is not None:
            object.__setattr__(
                self, "pole_segment_start", np.asarray(self.pole_segment_start, float)
            )


@dataclass
class ObjectState:
    id: str
    color: str
    pos: np.ndarray
    quat: np.ndarray
    attached: bool = False

    def clone(self):
        return ObjectState(self.id, self.color, self.pos.copy(), self.quat.copy(), self.attached)


@dataclass
class FixtureState:
    id: str
    color: str
    pos: np.ndarray
    half_extent: float


@dataclass
class GripperState:
    pos: np.ndarray
    aperture: float = 1.0
    held_object: str = None


@dataclass
class WorldState:
    objects: list
    fixtures: list
    gripper: GripperState
    seed: int
    t: float = 0.0
    stage1_latched: bool = False
    marginal_hold: bool = False
    slip_travel: float = 0.0
    drop_event: bool = False  # set on the step where a marginal grasp slipped
    missed_close: bool = False  # set on a close that engaged nothing

    def object(self, oid):
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def fixture(self, fid):
        for f in self.fixtures:
            if f.id == fid:
                return f
        raise KeyError(fid)

    def held(self):
        return self.object(self.gripper.held_object) if self.gripper.held_object else None

    def clone(self):
        return WorldState(
            objects=[o.clone() for o in self.objects],
            fixtures=self.fixtures,  # fixtures never move after reset
            gripper=GripperState(self.gripper.pos.copy(), self.gripper.aperture,
                                 self.gripper.held_object),
            seed=self.seed,
            t=self.t,
            stage1_latched=self.stage1_latched,
            marginal_hold=self.marginal_hold,
            slip_travel=self.slip_travel,
            drop_event=self.drop_event,
            missed_close=self.missed_close,
        )


IDENT_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def _rest_z(obj):
    return TABLE_Z + (DISK_HALF_THICK if obj.color == "disk" else CUBE_HALF)


def reset(desc, seed, attempt_budget=1000):
    """Deterministic world draw for one seed.

    cube_sort: three cubes and three color-matched containers uniformly in
    the region, pairwise separated by min_separation. peg_insert: the disk
    uniform in the region, the pole uniform along its segment.
    """
    rng = np.random.default_rng(seed)
    cx, cy = desc.region_center
    hx, hy = desc.region_size / 2.0
    if desc.kind == CUBE_SORT:
        placed = []
        for _ in range(6):
            for attempt in range(attempt_budget + 1):
                if attempt == attempt_budget:
                    raise PlacementFailure(
                        f"could not place 6 items with separation {desc.min_separation} m"
                    )
                p = np.array([rng.uniform(cx - hx, cx + hx), rng.uniform(cy - hy, cy + hy)])
                if all(np.linalg.norm(p - q) >= desc.min_separation for q in placed):
                    placed.append(p)
                    break
        fixtures = [
            FixtureState(f"container_{c}", c, np.array([*placed[i], TABLE_Z]), CONTAINER_HALF)
            for i, c in enumerate(CUBE_COLORS)
        ]
        objects = [
            ObjectState(f"cube_{c}", c, np.array([*placed[3 + i], TABLE_Z + CUBE_HALF]),
                        IDENT_QUAT.copy())
            for i, c in enumerate(CUBE_COLORS)
        ]
    else:
        disk_xy = np.array([rng.uniform(cx - hx, cx + hx), rng.uniform(cy - hy, cy + hy)])
        u = rng.uniform(0.0, 1.0)
        pole_xy = desc.pole_segment_start + np.array([0.0, u * desc.pole_segment_len])
        objects = [
            ObjectState("disk", "disk", np.array([*disk_xy, TABLE_Z + DISK_HALF_THICK]),
                        IDENT_QUAT.copy())
        ]
        fixtures = [FixtureState("pole", "pole", np.array([*pole_xy, TABLE_Z]), 0.0068)]
    gripper = GripperState(pos=np.array([cx, cy, desc.lift_z]))
    return WorldState(objects=objects, fixtures=fixtures, gripper=gripper, seed=seed)


def _settle(ws, desc, obj):
    """Drop an object from the gripper: inserted if it is over the pole within
    clearance, otherwise it comes to rest on the table at its current xy."""
    obj.attached = False
    ws.gripper.held_object = None
    ws.marginal_hold = False
    ws.slip_travel = 0.0
    obj.pos[2] = _rest_z(obj)
    # a disk released within clearance slides down the pole and stays there


def step_world(ws, ee_pos, gripper_cmd, desc, dt):
    """Advance the kinematic world one tick.

    The gripper tracks the follower end-effector exactly. Closing engages the
    nearest free object within the grasp window; opening releases in place.
    A marginally-grasped object is dropped after d_slip of lateral transport.
    """
    if dt <= 0:
        raise ValidationError("dt", "must be > 0")
    g = desc.grasp
    prev_pos = ws.gripper.pos
    prev_ap = ws.gripper.aperture
    ws.drop_event = False
    ws.missed_close = False
    ws.gripper.pos = np.asarray(ee_pos, float).copy()
    ap = float(gripper_cmd)
    ws.gripper.aperture = 0.0 if ap < 0.0 else (1.0 if ap > 1.0 else ap)

    held = ws.held()
    if held is not None:
        dx = ws.gripper.pos[0] - prev_pos[0]
        dy = ws.gripper.pos[1] - prev_pos[1]
        # self-centered in the fingers: object follows the gripper rigidly
        held.pos = ws.gripper.pos.copy()
        if ws.marginal_hold:
            ws.slip_travel += (dx * dx + dy * dy) ** 0.5
            if ws.slip_travel > g.d_slip:
                _settle(ws, desc, held)
                ws.drop_event = True
                held = None

    closing = prev_ap > GRIPPER_CLOSE_THRESHOLD >= ws.gripper.aperture
    opening = prev_ap <= GRIPPER_CLOSE_THRESHOLD < ws.gripper.aperture
    if closing and held is None:
        best, best_off = None, np.inf
        gp = ws.gripper.pos
        for o in ws.objects:
            if o.attached:
                continue
            off = ((o.pos[0] - gp[0]) ** 2 + (o.pos[1] - gp[1]) ** 2) ** 0.5
            if off <= g.g_slip and abs(o.pos[2] - gp[2]) <= g.z_window:
                if off < best_off:
                    best, best_off = o, off
        if best is None:
            ws.missed_close = True
        else:
            best.attached = True
            ws.gripper.held_object = best.id
            ws.marginal_hold = best_off > g.g_tol
            ws.slip_travel = 0.0
            best.pos = ws.gripper.pos.copy()
            ws.stage1_latched = True
    elif opening and held is not None:
        _settle(ws, desc, held)

    ws.t += dt
    return ws


def _cube_sorted(ws, obj):
    box = ws.fixture(f"container_{obj.color}")
    inside = (np.abs(obj.pos[:2] - box.pos[:2]) <= box.half_extent).all()
    return inside and not obj.attached and obj.pos[2] <= _rest_z(obj) + 1e-9


def _disk_inserted(ws, desc):
    disk = ws.object("disk")
    pole = ws.fixture("pole")
    lateral = float(np.linalg.norm(disk.pos[:2] - pole.pos[:2]))
    return (
        lateral <= desc.clearance
        and disk.pos[2] <= desc.insert_plane_z
        and not disk.attached
    )


def check_stage(ws, desc):
    """Stage predicates: stage1 latches on the first successful grasp;
    stage2/done is full completion (all cubes sorted / disk seated)."""
    if desc.kind == CUBE_SORT:
        done = all(_cube_sorted(ws, o) for o in ws.objects)
    else:
        done = _disk_inserted(ws, desc)
    return {"stage1": ws.stage1_latched, "stage2": done, "done": done}


def reposition_post_grasp(ws, desc):
    """Teleport to the canonical post-grasp state: gripper above the target
    object at lift height with the object cleanly attached. Used by the
    stage-2 evaluation protocol after a stage-1 failure."""
    target = None
    if desc.kind == PEG_INSERT:
        target = ws.object("disk")
    else:
        for o in ws.objects:
            if not _cube_sorted(ws, o):
                target = o
                break
    if target is None:
        return ws
    held = ws.held()
    if held is not None and held.id != target.id:
        _settle(ws, desc, held)
    ws.gripper.pos = np.array([target.pos[0], target.pos[1], desc.lift_z])
    ws.gripper.aperture = 0.0
    ws.gripper.held_object = target.id
    target.attached = True
    target.pos = ws.gripper.pos.copy()
    ws.marginal_hold = False
    ws.slip_travel = 0.0
    ws.stage1_latched = True
    return ws


def world_features(ws, desc):
    """Ground-truth object features for the observation vector: per-object
    pose (pos + quat) in id order, then goal positions."""
    parts = []
    for o in sorted(ws.objects, key=lambda o: o.id):
        parts.extend(o.pos)
        parts.extend(o.quat)
    for f in sorted(ws.fixtures, key=lambda f: f.id):
        parts.extend(f.pos)
    return np.array(parts)


def default_descriptor(kind):
    if kind == CUBE_SORT:
        return TaskDescriptor(
            kind=CUBE_SORT,
            region_center=np.array([0.32, 0.0]),
            region_size=np.array([0.45, 0.35]),
            lift_z=0.08,
        )
    if kind == PEG_INSERT:
        return TaskDescriptor(
            kind=PEG_INSERT,
            region_center=np.array([0.30, 0.0]),
            region_size=np.array([0.05, 0.05]),
            pole_segment_start=np.array([0.355, -0.015]),
        )
    raise ValidationError("kind", f"unknown task kind {kind!r}")
