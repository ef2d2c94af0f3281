# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend.

C translations of the routines in ``_pykin``; same signatures, same math.
Chains are limited to MAXN joints (stack buffers).
"""

import numpy as np

from libc.math cimport atan2, cos, isfinite, sin, sqrt

cdef enum:
    MAXN = 16


cdef inline void _qmul(double* a, double* b, double* o) nogil:
    o[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    o[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    o[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    o[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]


cdef inline void _qrot(double* q, double* v, double* o) nogil:
    # o = v + 2 qv x (qv x v + w v)
    cdef double t0 = 2.0 * (q[2] * v[2] - q[3] * v[1])
    cdef double t1 = 2.0 * (q[3] * v[0] - q[1] * v[2])
    cdef double t2 = 2.0 * (q[1] * v[1] - q[2] * v[0])
    o[0] = v[0] + q[0] * t0 + (q[2] * t2 - q[3] * t1)
    o[1] = v[1] + q[0] * t1 + (q[3] * t0 - q[1] * t2)
    o[2] = v[2] + q[0] * t2 + (q[1] * t1 - q[2] * t0)


cdef inline void _qaxis(double* axis, double angle, double* o) nogil:
    cdef double half = 0.5 * angle
    cdef double s = sin(half)
    o[0] = cos(half)
    o[1] = axis[0] * s
    o[2] = axis[1] * s
    o[3] = axis[2] * s


cdef inline void _cross(double* a, double* b, double* o) nogil:
    o[0] = a[1] * b[2] - a[2] * b[1]
    o[1] = a[2] * b[0] - a[0] * b[2]
    o[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double _dot3(double* a, double* b) nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef void _walk(int n, int* kinds, double* axes, double* trans, double* rots,
                double* base_pos, double* base_rot, double* ee_off, double* q,
                double* origins, double* zaxes, double* link_pos, double* link_rot,
                double* ee_pos, double* ee_rot) nogil:
    cdef double p[3]
    cdef double r[4]
    cdef double t3[3]
    cdef double t4[4]
    cdef double jq[4]
    cdef int i, k
    for k in range(3):
        p[k] = base_pos[k]
    for k in range(4):
        r[k] = base_rot[k]
    for i in range(n):
        _qrot(r, trans + 3 * i, t3)
        for k in range(3):
            p[k] += t3[k]
        _qmul(r, rots + 4 * i, t4)
        for k in range(4):
            r[k] = t4[k]
        _qrot(r, axes + 3 * i, t3)
        for k in range(3):
            origins[3 * i + k] = p[k]
            zaxes[3 * i + k] = t3[k]
        if kinds[i] == 0:
            _qaxis(axes + 3 * i, q[i], jq)
            _qmul(r, jq, t4)
            for k in range(4):
                r[k] = t4[k]
        else:
            for k in range(3):
                p[k] += t3[k] * q[i]
        for k in range(3):
            link_pos[3 * i + k] = p[k]
        for k in range(4):
            link_rot[4 * i + k] = r[k]
    _qrot(r, ee_off, t3)
    for k in range(3):
        ee_pos[k] = p[k] + t3[k]
    for k in range(4):
        ee_rot[k] = r[k]


cdef int _chol_solve(double* A, double* b, double* x, int m) nogil:
    # A (row-major m*m, SPD) is overwritten with its Cholesky factor.
    cdef int i, j, k
    cdef double s
    for i in range(m):
        for j in range(i + 1):
            s = A[i * m + j]
            for k in range(j):
                s -= A[i * m + k] * A[j * m + k]
            if i == j:
                if s <= 0.0:
                    return 1
                A[i * m + i] = sqrt(s)
            else:
                A[i * m + j] = s / A[j * m + j]
    for i in range(m):
        s = b[i]
        for k in range(i):
            s -= A[i * m + k] * x[k]
        x[i] = s / A[i * m + i]
    for i in range(m - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, m):
            s -= A[k * m + i] * x[k]
        x[i] = s / A[i * m + i]
    return 0


cdef class _View:
    """Holds contiguous memoryviews of a ChainPack for pointer access."""
    cdef int n
    cdef int[::1] kinds
    cdef double[:, ::1] axes, trans, rots, com_dirs
    cdef double[::1] lo, hi, ee, base_pos, base_rot

    def __init__(self, pk):
        self.n = pk.n
        self.kinds = pk.kinds
        self.axes = pk.axes
        self.trans = pk.trans
        self.rots = pk.rots
        self.com_dirs = pk.com_dirs
        self.lo = pk.lo
        self.hi = pk.hi
        self.ee = pk.ee
        self.base_pos = pk.base_pos
        self.base_rot = pk.base_rot


cdef _View _cached_view(pk):
    cache = pk.cache
    v = cache.get("_cview")
    if v is None:
        v = _View(pk)
        cache["_cview"] = v
    return v


def fk(pk, q):
    cdef _View v = _cached_view(pk)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    if qv.shape[0] != v.n:
        raise ValueError("joint vector length mismatch")
    if v.n > MAXN:
        raise ValueError("chain too long for compiled backend")
    cdef double origins[3 * MAXN]
    cdef double zaxes[3 * MAXN]
    cdef double lpos[3 * MAXN]
    cdef double lrot[4 * MAXN]
    cdef double ee_pos[3]
    cdef double ee_rot[4]
    _walk(v.n, &v.kinds[0], &v.axes[0, 0], &v.trans[0, 0], &v.rots[0, 0],
          &v.base_pos[0], &v.base_rot[0], &v.ee[0], &qv[0],
          origins, zaxes, lpos, lrot, ee_pos, ee_rot)
    pos = np.empty(3)
    rot = np.empty(4)
    cdef double[::1] pv = pos
    cdef double[::1] rv = rot
    cdef int k
    for k in range(3):
        pv[k] = ee_pos[k]
    for k in range(4):
        rv[k] = ee_rot[k]
    return pos, rot


def jacobian(pk, q):
    cdef _View v = _cached_view(pk)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    if qv.shape[0] != v.n:
        raise ValueError("joint vector length mismatch")
    cdef double origins[3 * MAXN]
    cdef double zaxes[3 * MAXN]
    cdef double lpos[3 * MAXN]
    cdef double lrot[4 * MAXN]
    cdef double ee_pos[3]
    cdef double ee_rot[4]
    cdef double d[3]
    cdef double c[3]
    _walk(v.n, &v.kinds[0], &v.axes[0, 0], &v.trans[0, 0], &v.rots[0, 0],
          &v.base_pos[0], &v.base_rot[0], &v.ee[0], &qv[0],
          origins, zaxes, lpos, lrot, ee_pos, ee_rot)
    J = np.zeros((6, v.n))
    cdef double[:, ::1] Jv = J
    cdef int i, k
    for i in range(v.n):
        if v.kinds[i] == 0:
            for k in range(3):
                d[k] = ee_pos[k] - origins[3 * i + k]
            _cross(zaxes + 3 * i, d, c)
            for k in range(3):
                Jv[k, i] = c[k]
                Jv[3 + k, i] = zaxes[3 * i + k]
        else:
            for k in range(3):
                Jv[k, i] = zaxes[3 * i + k]
    return J


cdef void _gravity(_View v, double* q, double* masses, double* com_offsets,
                   double* gvec, double* tau) nogil:
    cdef double origins[3 * MAXN]
    cdef double zaxes[3 * MAXN]
    cdef double lpos[3 * MAXN]
    cdef double lrot[4 * MAXN]
    cdef double ee_pos[3]
    cdef double ee_rot[4]
    cdef double coms[3 * MAXN]
    cdef double t3[3]
    cdef double d[3]
    cdef double c[3]
    cdef int i, j, k
    _walk(v.n, &v.kinds[0], &v.axes[0, 0], &v.trans[0, 0], &v.rots[0, 0],
          &v.base_pos[0], &v.base_rot[0], &v.ee[0], q,
          origins, zaxes, lpos, lrot, ee_pos, ee_rot)
    for i in range(v.n):
        _qrot(lrot + 4 * i, &v.com_dirs[i, 0], t3)
        for k in range(3):
            coms[3 * i + k] = lpos[3 * i + k] + t3[k] * com_offsets[i]
    for j in range(v.n):
        tau[j] = 0.0
        for i in range(j, v.n):
            if masses[i] == 0.0:
                continue
            if v.kinds[j] == 0:
                for k in range(3):
                    d[k] = coms[3 * i + k] - origins[3 * j + k]
                _cross(zaxes + 3 * j, d, c)
                tau[j] += masses[i] * _dot3(c, gvec)
            else:
                tau[j] += masses[i] * _dot3(zaxes + 3 * j, gvec)


def gravity_torque(pk, q, masses, com_offsets, gvec):
    cdef _View v = _cached_view(pk)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(masses, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(com_offsets, dtype=np.float64)
    cdef double[::1] gv = np.ascontiguousarray(gvec, dtype=np.float64)
    tau = np.empty(v.n)
    cdef double[::1] tv = tau
    _gravity(v, &qv[0], &mv[0], &cv[0], &gv[0], &tv[0])
    return tau


def ik_solve(pk, q0, target_pos, target_quat, bint pos_only, double lam,
             int max_iters, double pos_tol, double ori_tol, double step_clip):
    cdef _View v = _cached_view(pk)
    cdef int n = v.n
    cdef double[::1] tp = np.ascontiguousarray(target_pos, dtype=np.float64)
    cdef double[::1] tq = np.ascontiguousarray(target_quat, dtype=np.float64)
    q_arr = np.clip(np.asarray(q0, dtype=np.float64), pk.lo, pk.hi)
    cdef double[::1] q = np.ascontiguousarray(q_arr)
    best = np.empty(n)
    cdef double[::1] bq = best
    cdef double origins[3 * MAXN]
    cdef double zaxes[3 * MAXN]
    cdef double lpos[3 * MAXN]
    cdef double lrot[4 * MAXN]
    cdef double ee_pos[3]
    cdef double ee_rot[4]
    cdef double err[6]
    cdef double e4[4]
    cdef double J[6 * MAXN]
    cdef double A[36]
    cdef double y[6]
    cdef double d[3]
    cdef double c[3]
    cdef double pos_res, ori_res, score, best_score, vn, ang, s, dq, lam_eff2
    cdef double best_pos = 0.0, best_ori = 0.0
    cdef int it, i, k, a, b, m
    m = 3 if pos_only else 6
    best_score = -1.0
    for it in range(max_iters + 1):
        _walk(n, &v.kinds[0], &v.axes[0, 0], &v.trans[0, 0], &v.rots[0, 0],
              &v.base_pos[0], &v.base_rot[0], &v.ee[0], &q[0],
              origins, zaxes, lpos, lrot, ee_pos, ee_rot)
        for k in range(3):
            err[k] = tp[k] - ee_pos[k]
        pos_res = sqrt(err[0] * err[0] + err[1] * err[1] + err[2] * err[2])
        ori_res = 0.0
        if not pos_only:
            # e4 = tq * conj(ee_rot), flipped to the non-negative-w cover
            ee_rot[1] = -ee_rot[1]
            ee_rot[2] = -ee_rot[2]
            ee_rot[3] = -ee_rot[3]
            _qmul(&tq[0], ee_rot, e4)
            if e4[0] < 0.0:
                for k in range(4):
                    e4[k] = -e4[k]
            vn = sqrt(e4[1] * e4[1] + e4[2] * e4[2] + e4[3] * e4[3])
            ang = 2.0 * atan2(vn, e4[0])
            ori_res = ang
            if vn < 1e-15:
                for k in range(3):
                    err[3 + k] = 0.0
            else:
                for k in range(3):
                    err[3 + k] = e4[1 + k] / vn * ang
        score = pos_res + ori_res
        if best_score < 0.0 or score < best_score:
            best_score = score
            best_pos = pos_res
            best_ori = ori_res
            for i in range(n):
                bq[i] = q[i]
        if pos_res <= pos_tol and ori_res <= ori_tol:
            out = np.empty(n)
            for i in range(n):
                out[i] = q[i]
            return out, pos_res, ori_res, it, True
        if it == max_iters:
            break
        # geometric Jacobian (row-major 6 x n in J)
        for i in range(n):
            if v.kinds[i] == 0:
                for k in range(3):
                    d[k] = ee_pos[k] - origins[3 * i + k]
                _cross(zaxes + 3 * i, d, c)
                for k in range(3):
                    J[k * n + i] = c[k]
                    J[(3 + k) * n + i] = zaxes[3 * i + k]
            else:
                for k in range(3):
                    J[k * n + i] = zaxes[3 * i + k]
                    J[(3 + k) * n + i] = 0.0
        # A = J J^T + lam_eff^2 I with error-proportional LM damping
        s = lam * lam
        for a in range(m):
            s += err[a] * err[a]
        lam_eff2 = s
        for a in range(m):
            for b in range(m):
                s = 0.0
                for i in range(n):
                    s += J[a * n + i] * J[b * n + i]
                A[a * m + b] = s
            A[a * m + a] += lam_eff2
        if _chol_solve(A, err, y, m):
            break
        for i in range(n):
            dq = 0.0
            for a in range(m):
                dq += J[a * n + i] * y[a]
            if dq > step_clip:
                dq = step_clip
            elif dq < -step_clip:
                dq = -step_clip
            q[i] = q[i] + dq
            if q[i] < v.lo[i]:
                q[i] = v.lo[i]
            elif q[i] > v.hi[i]:
                q[i] = v.hi[i]
    return best, best_pos, best_ori, max_iters, False


def arm_step(pk, q, qdot, q_cmd, kp, kd, inertia, visc, coul, masses, com_offsets,
             gvec, bint grav_comp, bint fric_comp, double comp_scale, double dt):
    cdef _View v = _cached_view(pk)
    cdef int n = v.n
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[::1] qdv = np.ascontiguousarray(qdot, dtype=np.float64)
    cdef double[::1] cmdv = np.ascontiguousarray(q_cmd, dtype=np.float64)
    cdef double[::1] kpv = np.ascontiguousarray(kp, dtype=np.float64)
    cdef double[::1] kdv = np.ascontiguousarray(kd, dtype=np.float64)
    cdef double[::1] inv = np.ascontiguousarray(inertia, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(visc, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(coul, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(masses, dtype=np.float64)
    cdef double[::1] cov = np.ascontiguousarray(com_offsets, dtype=np.float64)
    cdef double[::1] gv = np.ascontiguousarray(gvec, dtype=np.float64)
    q2 = np.empty(n)
    qd2 = np.empty(n)
    cdef double[::1] q2v = q2
    cdef double[::1] qd2v = qd2
    cdef double tau_g[MAXN]
    cdef double cmd, tau, tau_f, sgn, qdd
    cdef int i
    cdef bint any_mass = False, ok = True
    for i in range(n):
        if mv[i] != 0.0:
            any_mass = True
            break
    if any_mass:
        _gravity(v, &qv[0], &mv[0], &cov[0], &gv[0], tau_g)
    else:
        for i in range(n):
            tau_g[i] = 0.0
    for i in range(n):
        cmd = cmdv[i]
        if cmd < v.lo[i]:
            cmd = v.lo[i]
        elif cmd > v.hi[i]:
            cmd = v.hi[i]
        sgn = 0.0
        if qdv[i] > 0.0:
            sgn = 1.0
        elif qdv[i] < 0.0:
            sgn = -1.0
        tau_f = -bv[i] * qdv[i] - cv[i] * sgn
        tau = kpv[i] * (cmd - qv[i]) - kdv[i] * qdv[i]
        if grav_comp:
            tau -= comp_scale * tau_g[i]
        if fric_comp:
            tau -= comp_scale * tau_f
        qdd = (tau + tau_g[i] + tau_f) / inv[i]
        qd2v[i] = qdv[i] + dt * qdd
        q2v[i] = qv[i] + dt * qd2v[i]
        if q2v[i] < v.lo[i]:
            q2v[i] = v.lo[i]
        elif q2v[i] > v.hi[i]:
            q2v[i] = v.hi[i]
        if not (isfinite(q2v[i]) and isfinite(qd2v[i])):
            ok = False
    return q2, qd2, ok
