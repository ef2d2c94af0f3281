"""Pure-numpy kernel backend.

Reference implementation of the hot kernels (FK, Jacobian, damped-least-squares
IK, gravity torque, arm step). The compiled backend in ``_ckin.pyx`` mirrors
these routines; keep the algorithms in lockstep.

All functions take a ``ChainPack`` (see ``teleloop._kernels``) plus flat
float64 arrays, and never mutate their inputs.
"""

import numpy as np

from ..geometry import (
    orientation_error,
    quat_from_axis_angle,
    quat_mul,
    quat_rotate,
)

REVOLUTE = 0
PRISMATIC = 1


def _frames(pk, q):
    """Walk the chain once, collecting per-joint anchor points and world axes.

    Returns (origins, zaxes, link_pos, link_rot, ee_pos, ee_rot) where
    origins[i] is a point on joint i's axis, zaxes[i] the joint axis in the
    base frame, and link_pos/link_rot the frame rigidly attached after
    joint i's motion (carrier of link i's mass).
    """
    n = pk.n
    origins = np.empty((n, 3))
    zaxes = np.empty((n, 3))
    link_pos = np.empty((n, 3))
    link_rot = np.empty((n, 4))
    p = pk.base_pos.copy()
    r = pk.base_rot.copy()
    for i in range(n):
        p = p + quat_rotate(r, pk.trans[i])
        r = quat_mul(r, pk.rots[i])
        z = quat_rotate(r, pk.axes[i])
        origins[i] = p
        zaxes[i] = z
        if pk.kinds[i] == REVOLUTE:
            r = quat_mul(r, quat_from_axis_angle(pk.axes[i], q[i]))
        else:
            p = p + z * q[i]
        link_pos[i] = p
        link_rot[i] = r
    ee_pos = p + quat_rotate(r, pk.ee)
    return origins, zaxes, link_pos, link_rot, ee_pos, r


def fk(pk, q):
    _, _, _, _, ee_pos, ee_rot = _frames(pk, q)
    return ee_pos, ee_rot


def jacobian(pk, q):
    origins, zaxes, _, _, ee_pos, _ = _frames(pk, q)
    J = np.zeros((6, pk.n))
    for i in range(pk.n):
        if pk.kinds[i] == REVOLUTE:
            J[:3, i] = np.cross(zaxes[i], ee_pos - origins[i])
            J[3:, i] = zaxes[i]
        else:
            J[:3, i] = zaxes[i]
    return J


def gravity_torque(pk, q, masses, com_offsets, gvec):
    """tau = dU/dq for U(q) = sum_i m_i * g . p_com_i(q).

    Since g carries its sign (e.g. (0, 0, -9.81)), this is the generalized
    gravity force acting on the joints.
    """
    origins, zaxes, link_pos, link_rot, _, _ = _frames(pk, q)
    n = pk.n
    coms = np.empty((n, 3))
    for i in range(n):
        coms[i] = link_pos[i] + quat_rotate(link_rot[i], pk.com_dirs[i]) * com_offsets[i]
    tau = np.zeros(n)
    for j in range(n):
        for i in range(j, n):
            if masses[i] == 0.0:
                continue
            if pk.kinds[j] == REVOLUTE:
                dp = np.cross(zaxes[j], coms[i] - origins[j])
            else:
                dp = zaxes[j]
            tau[j] += masses[i] * np.dot(dp, gvec)
    return tau


def ik_solve(pk, q0, target_pos, target_quat, pos_only, lam, max_iters, pos_tol, ori_tol, step_clip):
    """Damped least squares on the twist error with step clipping and limit
    clamping each iteration.

    Returns (q, pos_res, ori_res, iters, converged). On failure q is the
    best-effort iterate (smallest combined residual).
    """
    q = np.clip(np.asarray(q0, dtype=float).copy(), pk.lo, pk.hi)
    m = 3 if pos_only else 6
    best_q = q.copy()
    best_score = np.inf
    best_res = (np.inf, np.inf)
    for it in range(max_iters + 1):
        origins, zaxes, _, _, ee_pos, ee_rot = _frames(pk, q)
        ep = target_pos - ee_pos
        pos_res = float(np.linalg.norm(ep))
        if pos_only:
            ori_res = 0.0
            err = ep
        else:
            eo, ori_res = orientation_error(target_quat, ee_rot)
            err = np.concatenate([ep, eo])
        score = pos_res + ori_res
        if score < best_score:
            best_score = score
            best_q = q.copy()
            best_res = (pos_res, ori_res)
        if pos_res <= pos_tol and ori_res <= ori_tol:
            return q, pos_res, ori_res, it, True
        if it == max_iters:
            break
        J = np.zeros((m, pk.n))
        for i in range(pk.n):
            if pk.kinds[i] == REVOLUTE:
                J[:3, i] = np.cross(zaxes[i], ee_pos - origins[i])
                if not pos_only:
                    J[3:, i] = zaxes[i]
            else:
                J[:3, i] = zaxes[i]
        # error-proportional Levenberg-Marquardt damping: strong far from the
        # target, vanishing near it so tight tolerances stay reachable even
        # close to singular configurations
        lam2 = float(err @ err) + lam * lam
        A = J @ J.T + lam2 * np.eye(m)
        dq = J.T @ np.linalg.solve(A, err)
        np.clip(dq, -step_clip, step_clip, out=dq)
        q = np.clip(q + dq, pk.lo, pk.hi)
    return best_q, best_res[0], best_res[1], max_iters, False


def arm_step(pk, q, qdot, q_cmd, kp, kd, inertia, visc, coul, masses, com_offsets,
             gvec, grav_comp, fric_comp, comp_scale, dt):
    """Semi-implicit Euler step of the decoupled per-joint plant under PD
    control with optional gravity/friction compensation.

    Returns (q_next, qdot_next, finite_ok).
    """
    cmd = np.clip(q_cmd, pk.lo, pk.hi)
    tau_pd = kp * (cmd - q) - kd * qdot
    if grav_comp or masses.any():
        tau_g = gravity_torque(pk, q, masses, com_offsets, gvec)
    else:
        tau_g = np.zeros(pk.n)
    tau_f = -visc * qdot - coul * np.sign(qdot)
    tau = tau_pd
    if grav_comp:
        tau = tau - comp_scale * tau_g
    if fric_comp:
        tau = tau - comp_scale * tau_f
    qdd = (tau + tau_g + tau_f) / inertia
    qdot2 = qdot + dt * qdd
    q2 = np.clip(q + dt * qdot2, pk.lo, pk.hi)
    ok = bool(np.isfinite(q2).all() and np.isfinite(qdot2).all())
    return q2, qdot2, ok
