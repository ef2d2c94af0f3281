"""Quaternion and small-rotation helpers.

Quaternions are float64 arrays in (w, x, y, z) order, unit norm unless noted.
These are the reference implementations; the compiled kernel carries its own
C copies of the same formulas.
"""

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q):
    n = np.linalg.norm(q)
    if n < 1e-15:
        return IDENTITY_QUAT.copy()
    return q / n


def quat_mul(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v):
    # v' = v + 2 * qv x (qv x v + w v), avoids building the rotation matrix
    w = q[0]
    qv = q[1:4]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_from_axis_angle(axis, angle):
    half = 0.5 * angle
    s = np.sin(half)
    return np.array([np.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_from_rpy(roll, pitch, yaw):
    # intrinsic ZYX convention, matching the usual URDF origin rpy
    qz = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw)
    qy = quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), pitch)
    qx = quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), roll)
    return quat_mul(quat_mul(qz, qy), qx)


def orientation_error(q_target, q_current):
    """Axis-angle of q_target * q_current^-1.

    The double cover is resolved by flipping to the representative with a
    non-negative scalar part, so the angle is always in [0, pi].
    Returns (error_vector, angle).
    """
    e = quat_mul(q_target, quat_conj(q_current))
    if e[0] < 0.0:
        e = -e
    vn = np.linalg.norm(e[1:4])
    angle = 2.0 * np.arctan2(vn, e[0])
    if vn < 1e-15:
        return np.zeros(3), 0.0
    return (e[1:4] / vn) * angle, angle
