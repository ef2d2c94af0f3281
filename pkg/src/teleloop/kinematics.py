"""Kinematic chains: loading, forward kinematics, Jacobian, damped IK.

Chains are simplified URDF-like documents (JSON, see ``load_chain``). All
heavy math is dispatched to the selected kernel backend; this module owns
validation, typed containers, and error mapping.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import _kernels
from ._kernels import ChainPack
from .errors import DimensionMismatch, ParseError, UnreachableError, ValidationError
from .geometry import quat_from_rpy, quat_normalize

REVOLUTE = "revolute"
PRISMATIC = "prismatic"

LIMIT_EPS = 1e-9
UNIT_TOL = 1e-9


@dataclass(frozen=True)
class JointSpec:
    name: str
    kind: str
    axis: np.ndarray
    origin_translation: np.ndarray
    origin_rotation: np.ndarray
    limits: tuple


@dataclass(frozen=True)
class Pose:
    """Position plus unit quaternion (w, x, y, z). Constructed on the hot
    path, so unit norm is only enforced where external data enters (chain
    documents, wire messages) via validate_quat."""

    position: np.ndarray
    orientation: np.ndarray


def validate_quat(q, field="orientation"):
    q = np.asarray(q, dtype=float)
    if q.shape != (4,) or abs(np.linalg.norm(q) - 1.0) > 1e-6:
        raise ValidationError(field, "must be a unit quaternion (w, x, y, z)")
    return q


@dataclass(frozen=True)
class IkParams:
    damping: float = 1e-3
    max_iters: int = 100
    pos_tol: float = 1e-6
    ori_tol: float = 1e-6
    step_clip: float = 0.2
    position_only: bool = False

    def __post_init__(self):
        for name in ("damping", "max_iters", "pos_tol", "ori_tol", "step_clip"):
            if getattr(self, name) <= 0:
                raise ValidationError(name, "must be strictly positive")


@dataclass(frozen=True)
class ChainModel:
    name: str
    joints: tuple
    ee_offset: np.ndarray
    base_pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_rot: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    @property
    def n(self):
        return len(self.joints)

    @property
    def lo(self):
        return self.pack.lo

    @property
    def hi(self):
        return self.pack.hi

    @property
    def pack(self):
        pk = self.__dict__.get("_pack")
        if pk is None:
            pk = _build_pack(self)
            object.__setattr__(self, "_pack", pk)
        return pk

    def clamp(self, q):
        return np.asarray(q, dtype=float).clip(self.pack.lo, self.pack.hi)

    def check_q(self, q):
        if not (isinstance(q, np.ndarray) and q.dtype == np.float64):
            q = np.asarray(q, dtype=float)
        if q.shape != (self.n,):
            raise DimensionMismatch(
                f"chain {self.name!r} expects {self.n} joints, got shape {q.shape}"
            )
        return q


def _build_pack(chain):
    n = chain.n
    kinds = np.array(
        [0 if j.kind == REVOLUTE else 1 for j in chain.joints], dtype=np.int32
    )
    axes = np.ascontiguousarray([j.axis for j in chain.joints], dtype=float)
    trans = np.ascontiguousarray(
        [j.origin_translation for j in chain.joints], dtype=float
    )
    rots = np.ascontiguousarray([j.origin_rotation for j in chain.joints], dtype=float)
    lo = np.array([j.limits[0] for j in chain.joints], dtype=float)
    hi = np.array([j.limits[1] for j in chain.joints], dtype=float)
    # unit direction to the next joint origin (or the EE offset for the last
    # link), expressed in the link frame: anchor line for the link's COM
    com_dirs = np.empty((n, 3))
    for i in range(n):
        v = trans[i + 1] if i + 1 < n else np.asarray(chain.ee_offset, dtype=float)
        norm = np.linalg.norm(v)
        com_dirs[i] = v / norm if norm > 1e-12 else np.array([1.0, 0.0, 0.0])
    return ChainPack(
        n=n,
        kinds=kinds,
        axes=axes,
        trans=trans,
        rots=rots,
        lo=lo,
        hi=hi,
        ee=np.ascontiguousarray(chain.ee_offset, dtype=float),
        base_pos=np.ascontiguousarray(chain.base_pos, dtype=float),
        base_rot=np.ascontiguousarray(chain.base_rot, dtype=float),
        com_dirs=np.ascontiguousarray(com_dirs),
        cache={},
    )


def _get(doc, key, ctx):
    if key not in doc:
        raise ParseError(f"{ctx}: missing field {key!r}")
    return doc[key]


def load_chain(text):
    """Parse and validate a chain-model document (JSON).

    Fields: name, joints[{name, kind, axis, origin_xyz, origin_rpy, limits}],
    ee_offset_xyz. Angles in radians, lengths in meters.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"chain document is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ParseError("chain document must be a JSON object")
    name = _get(doc, "name", "chain")
    raw_joints = _get(doc, "joints", "chain")
    ee = np.asarray(_get(doc, "ee_offset_xyz", "chain"), dtype=float)
    if ee.shape != (3,):
        raise ValidationError("ee_offset_xyz", "must be a 3-vector")
    if not raw_joints:
        raise ValidationError("joints", "chain must have at least one joint")
    joints = []
    seen = set()
    for idx, j in enumerate(raw_joints):
        ctx = f"joints[{idx}]"
        jname = _get(j, "name", ctx)
        if jname in seen:
            raise ValidationError("name", f"duplicate joint name {jname!r}")
        seen.add(jname)
        kind = _get(j, "kind", ctx)
        if kind not in (REVOLUTE, PRISMATIC):
            raise ValidationError("kind", f"{ctx}: unknown joint kind {kind!r}")
        axis = np.asarray(_get(j, "axis", ctx), dtype=float)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > UNIT_TOL:
            raise ValidationError("axis", f"{ctx}: axis must be a unit 3-vector")
        xyz = np.asarray(_get(j, "origin_xyz", ctx), dtype=float)
        if xyz.shape != (3,):
            raise ValidationError("origin_xyz", f"{ctx}: must be a 3-vector")
        rpy = _get(j, "origin_rpy", ctx)
        if len(rpy) != 3:
            raise ValidationError("origin_rpy", f"{ctx}: must be a 3-vector")
        lim = _get(j, "limits", ctx)
        if len(lim) != 2 or not all(math.isfinite(x) for x in lim):
            raise ValidationError("limits", f"{ctx}: must be a finite [lo, hi] pair")
        if lim[0] > lim[1]:
            raise ValidationError("limits", f"{ctx}: lo {lim[0]} exceeds hi {lim[1]}")
        joints.append(
            JointSpec(
                name=jname,
                kind=kind,
                axis=axis,
                origin_translation=xyz,
                origin_rotation=quat_normalize(quat_from_rpy(*rpy)),
                limits=(float(lim[0]), float(lim[1])),
            )
        )
    return ChainModel(name=name, joints=tuple(joints), ee_offset=ee)


def load_chain_file(path):
    with open(path, "r", encoding="utf-8") as f:
        return load_chain(f.read())


def builtin_chain(name):
    """Load one of the shipped fixture chains by name."""
    ref = resources.files("teleloop") / "chains" / f"{name}.json"
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"no builtin chain named {name!r}") from None
    return load_chain(text)


def forward_kinematics(chain, q):
    """End-effector pose in the base frame. Deterministic."""
    q = chain.check_q(q)
    pos, rot = _kernels.impl.fk(chain.pack, q)
    return Pose(position=pos, orientation=rot)


def jacobian(chain, q):
    """6 x n geometric Jacobian (rows: linear, then angular)."""
    q = chain.check_q(q)
    return _kernels.impl.jacobian(chain.pack, q)


def chain_points(chain, q):
    """Base, per-joint origins, and end-effector position: the polyline a
    display draws. Pure-python walk; meant for UI rates, not the control loop."""
    from .geometry import quat_from_axis_angle, quat_mul, quat_rotate

    q = chain.check_q(q)
    pk = chain.pack
    p = pk.base_pos.copy()
    r = pk.base_rot.copy()
    points = [p.copy()]
    for i in range(pk.n):
        p = p + quat_rotate(r, pk.trans[i])
        r = quat_mul(r, pk.rots[i])
        z = quat_rotate(r, pk.axes[i])
        if pk.kinds[i] == 0:
            r = quat_mul(r, quat_from_axis_angle(pk.axes[i], q[i]))
        else:
            p = p + z * q[i]
        points.append(p.copy())
    points.append(p + quat_rotate(r, pk.ee))
    return np.array(points)


def inverse_kinematics(chain, target, seed, params=None):
    """Damped-least-squares IK with per-iteration step clipping and joint
    limit clamping.

    Raises UnreachableError (carrying the best-effort q) when the tolerance
    is not met within the iteration budget.
    """
    params = params or IkParams()
    seed = chain.check_q(seed)
    q, pos_res, ori_res, iters, ok = _kernels.impl.ik_solve(
        chain.pack,
        seed,
        np.asarray(target.position, dtype=float),
        np.asarray(target.orientation, dtype=float),
        params.position_only,
        params.damping,
        params.max_iters,
        params.pos_tol,
        params.ori_tol,
        params.step_clip,
    )
    if not ok:
        raise UnreachableError(q, pos_res, ori_res, iters)
    return q
