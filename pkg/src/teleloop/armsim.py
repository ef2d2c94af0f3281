"""Per-joint arm dynamics under PD control with gravity/friction compensation.

The plant is deliberately decoupled (one effective inertia per joint) so the
control stack stays deterministic and fast; gravity couples joints through the
point-mass-per-link potential. Integration is semi-implicit Euler at a fixed
tick (default 2 ms).
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, NonFiniteState, ValidationError

DEFAULT_DT = 0.002  # 500 Hz control tick


@dataclass(frozen=True)
class ArmState:
    q: np.ndarray
    qdot: np.ndarray
    t: float


@dataclass(frozen=True)
class PDGains:
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        kp = np.asarray(self.kp, dtype=float)
        kd = np.asarray(self.kd, dtype=float)
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)
        if (kp < 0).any() or (kd < 0).any():
            raise ValidationError("gains", "kp and kd entries must be >= 0")


@dataclass(frozen=True)
class DynamicsParams:
    inertia: np.ndarray
    viscous_b: np.ndarray
    coulomb_c: np.ndarray
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    link_masses: np.ndarray = None
    link_com_offsets: np.ndarray = None

    def __post_init__(self):
        n = len(np.atleast_1d(self.inertia))
        for name in ("inertia", "viscous_b", "coulomb_c", "gravity"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name, default in (("link_masses", 0.0), ("link_com_offsets", 0.0)):
            v = getattr(self, name)
            v = np.full(n, default) if v is None else np.asarray(v, dtype=float)
            object.__setattr__(self, name, v)
        if (self.inertia <= 0).any():
            raise ValidationError("inertia", "entries must be > 0")
        for name in ("viscous_b", "coulomb_c", "link_masses"):
            if (getattr(self, name) < 0).any():
                raise ValidationError(name, "entries must be >= 0")


@dataclass(frozen=True)
class CompensationConfig:
    gravity_comp_on: bool = True
    friction_comp_on: bool = True
    model_scale: float = 1.0  # != 1.0 exercises imperfect compensation


def _check(chain, *vectors):
    n = chain.n
    for v in vectors:
        if v.shape != (n,):
            raise DimensionMismatch(f"expected {n}-vectors for chain {chain.name!r}")


def pd_torque(gains, q_cmd, state):
    """tau_i = kp_i (q_cmd_i - q_i) - kd_i qdot_i  (zero velocity target)."""
    if not (gains.kp.shape == np.shape(q_cmd) == state.q.shape):
        raise DimensionMismatch("pd_torque dimensions disagree")
    return gains.kp * (q_cmd - state.q) - gains.kd * state.qdot


def gravity_torque(chain, params, q):
    """dU/dq for U(q) = sum_i m_i g . p_com_i(q); the generalized gravity
    force acting on the joints (g carries its sign)."""
    q = chain.check_q(q)
    _check(chain, params.link_masses)
    return _kernels.impl.gravity_torque(
        chain.pack, q, params.link_masses, params.link_com_offsets, params.gravity
    )


def friction_torque(params, qdot):
    """tau_f = -b qdot - c sign(qdot), with sign(0) = 0."""
    qdot = np.asarray(qdot, dtype=float)
    if qdot.shape != params.viscous_b.shape:
        raise DimensionMismatch("friction_torque dimensions disagree")
    return -params.viscous_b * qdot - params.coulomb_c * np.sign(qdot)


def step(chain, params, comp, gains, q_cmd, state, dt=DEFAULT_DT):
    """Advance one control tick.

    The command is clamped into joint limits before PD evaluation; the
    compensation terms cancel the plant's true gravity/friction exactly when
    model_scale is 1. Raises NonFiniteState if the result is not finite.
    """
    if not 0.0 < dt <= 0.05:
        raise ValidationError("dt", "must be in (0, 0.05]")
    if not isinstance(q_cmd, np.ndarray):
        q_cmd = np.asarray(q_cmd, dtype=float)
    _check(chain, q_cmd, state.q, state.qdot)
    q2, qd2, ok = _kernels.impl.arm_step(
        chain.pack,
        state.q,
        state.qdot,
        q_cmd,
        gains.kp,
        gains.kd,
        params.inertia,
        params.viscous_b,
        params.coulomb_c,
        params.link_masses,
        params.link_com_offsets,
        params.gravity,
        comp.gravity_comp_on,
        comp.friction_comp_on,
        comp.model_scale,
        dt,
    )
    if not ok:
        raise NonFiniteState(
            f"non-finite arm state for chain {chain.name!r} at t={state.t + dt:.4f}"
        )
    return ArmState(q=q2, qdot=qd2, t=state.t + dt)
