"""Inverse and forward rigid-body dynamics on a serial chain.

The recursive Newton-Euler sweep is written over generic scalars, so the same
code runs on plain floats, on numpy arrays (one scalar per batch sample) and
on autodiff Vars. Forward dynamics reuses it: the mass matrix is assembled
column by column with unit accelerations and solved by Cholesky.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .spatial import cross, matmul, matTvec, matvec, rot_axis_angle, skew, transpose


class SingularMassMatrix(RuntimeError):
    """Mass matrix not positive definite: the inertial parameters are implausible."""


@dataclass(frozen=True)
class JointState:
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray

    def __post_init__(self):
        for name in ("q", "qd", "qdd"):
            v = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite {name}")
            object.__setattr__(self, name, v)
        if not (self.q.shape == self.qd.shape == self.qdd.shape):
            raise ValueError("q, qd, qdd must share length")


def _triple(inertia):
    """(m, h, I_C, damping) of either a LinkInertia or a materialized one."""
    m = inertia.mass
    h = inertia.h
    I_C = inertia.I_C
    if isinstance(h, np.ndarray):
        h = h.tolist()
    if isinstance(I_C, np.ndarray):
        I_C = I_C.tolist()
    return m, list(h), [list(r) for r in I_C], inertia.damping


def _origin_inertia(m, h, I_C):
    """Rotational inertia about the link-frame origin: I_C + skew(h) skew(h)^T / m."""
    if float(ad.value(m)) == 0.0:
        return I_C
    H = skew(h)
    HHt = matmul(H, transpose(H))
    inv_m = 1.0 / m
    return [[I_C[i][j] + HHt[i][j] * inv_m for j in range(3)] for i in range(3)]


def _check_dims(model, inertias, *vecs):
    n = model.n_dof
    if len(inertias) != len(model.links):
        raise ValueError(f"need {len(model.links)} link inertias, got {len(inertias)}")
    for v in vecs:
        if len(v) != n:
            raise ValueError(f"joint vector length {len(v)} != n_dof {n}")


def rnea(model, inertias, q, qd, qdd, gravity=None, include_friction=True):
    """Joint torques achieving qdd at (q, qd), including viscous friction.

    Body-coordinate Newton-Euler: an outward sweep propagating velocity and
    acceleration (gravity enters as a fictitious base acceleration), then an
    inward sweep of forces projected onto the joint axes.
    """
    _check_dims(model, inertias, q, qd, qdd)
    grav = model.gravity if gravity is None else np.asarray(gravity, dtype=float)

    w = [0.0, 0.0, 0.0]
    u = [0.0, 0.0, 0.0]
    alpha = [0.0, 0.0, 0.0]
    acc = [-grav[0], -grav[1], -grav[2]]

    frames = []   # (R, p, axis_or_None, dof_index, force)
    j = 0
    for link, inertia in zip(model.links, inertias):
        m, h, I_C, _ = _triple(inertia)
        I_O = _origin_inertia(m, h, I_C)
        Ro = link.origin.rotation.tolist()
        p = link.origin.translation.tolist()
        axis = None
        if link.joint_kind == "revolute":
            axis = link.axis.tolist()
            R = matmul(Ro, rot_axis_angle(axis, q[j]))
        else:
            R = Ro

        # motion transform: rotate into this frame after shifting to its origin
        wp = cross(w, p)
        ap = cross(alpha, p)
        w_l = matTvec(R, w)
        u_l = matTvec(R, [u[0] + wp[0], u[1] + wp[1], u[2] + wp[2]])
        alpha_l = matTvec(R, alpha)
        acc_l = matTvec(R, [acc[0] + ap[0], acc[1] + ap[1], acc[2] + ap[2]])
        if axis is not None:
            qd_j, qdd_j = qd[j], qdd[j]
            aqd = [axis[0] * qd_j, axis[1] * qd_j, axis[2] * qd_j]
            w_l = [w_l[k] + aqd[k] for k in range(3)]
            cz = cross(w_l, aqd)
            cu = cross(u_l, aqd)
            alpha_l = [alpha_l[k] + axis[k] * qdd_j + cz[k] for k in range(3)]
            acc_l = [acc_l[k] + cu[k] for k in range(3)]

        # momentum and its bias: f = I a + v x* (I v)
        IOw = matvec(I_O, w_l)
        IOa = matvec(I_O, alpha_l)
        hxu = cross(h, u_l)
        hxw = cross(h, w_l)
        hxacc = cross(h, acc_l)
        hxalpha = cross(h, alpha_l)
        Iv_ang = [IOw[k] + hxu[k] for k in range(3)]
        Iv_lin = [u_l[k] * m - hxw[k] for k in range(3)]
        wxIv = cross(w_l, Iv_ang)
        uxIv = cross(u_l, Iv_lin)
        wxIvl = cross(w_l, Iv_lin)
        f_ang = [IOa[k] + hxacc[k] + wxIv[k] + uxIv[k] for k in range(3)]
        f_lin = [acc_l[k] * m - hxalpha[k] + wxIvl[k] for k in range(3)]

        frames.append([R, p, axis, j if axis is not None else -1, f_ang, f_lin])
        if axis is not None:
            j += 1
        w, u, alpha, acc = w_l, u_l, alpha_l, acc_l

    tau = [None] * model.n_dof
    for i in range(len(frames) - 1, -1, -1):
        R, p, axis, dof, f_ang, f_lin = frames[i]
        if axis is not None:
            t = axis[0] * f_ang[0] + axis[1] * f_ang[1] + axis[2] * f_ang[2]
            if include_friction:
                damping = _triple(inertias[i])[3]
                if isinstance(damping, ad.Var) or float(ad.value(damping)) != 0.0:
                    t = t + damping * qd[dof]
            tau[dof] = t
        if i > 0:
            fp_lin = matvec(R, f_lin)
            Rf_ang = matvec(R, f_ang)
            pxf = cross(p, fp_lin)
            fp_ang = [Rf_ang[k] + pxf[k] for k in range(3)]
            parent = frames[i - 1]
            parent[4] = [parent[4][k] + fp_ang[k] for k in range(3)]
            parent[5] = [parent[5][k] + fp_lin[k] for k in range(3)]
    return tau


def bias_forces(model, inertias, q, qd, gravity=None):
    """Velocity and gravity torques: rnea with zero acceleration."""
    zeros = [0.0] * model.n_dof
    return rnea(model, inertias, q, qd, zeros, gravity=gravity)


def mass_matrix(model, inertias, q):
    """Joint-space mass matrix via the unit-acceleration method, gravity off."""
    n = model.n_dof
    zeros = [0.0] * n
    no_grav = np.zeros(3)
    base = rnea(model, inertias, q, zeros, zeros, gravity=no_grav)
    M = []
    for jcol in range(n):
        e = [0.0] * n
        e[jcol] = 1.0
        col = rnea(model, inertias, q, zeros, e, gravity=no_grav)
        M.append([col[i] - base[i] for i in range(n)])
    # M currently holds columns; return row-major
    return [[M[jcol][i] for jcol in range(n)] for i in range(n)]


def cholesky_solve(A, b):
    """Solve A x = b for symmetric positive definite A over generic scalars."""
    n = len(b)
    L = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for jj in range(i + 1):
            s = A[i][jj]
            for k in range(jj):
                s = s - L[i][k] * L[jj][k]
            if i == jj:
                sv = np.asarray(ad.value(s))
                if not np.all(sv > 0.0):
                    raise SingularMassMatrix("mass matrix is not positive definite")
                L[i][i] = ad.sqrt(s)
            else:
                L[i][jj] = s / L[jj][jj]
    y = [None] * n
    for i in range(n):
        s = b[i]
        for k in range(i):
            s = s - L[i][k] * y[k]
        y[i] = s / L[i][i]
    x = [None] * n
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s = s - L[k][i] * x[k]
        x[i] = s / L[i][i]
    return x


def forward_dynamics(model, inertias, q, qd, tau, gravity=None):
    """Joint accelerations from torques: solve M qdd = tau - rnea(q, qd, 0)."""
    _check_dims(model, inertias, q, qd, tau)
    bias = bias_forces(model, inertias, q, qd, gravity=gravity)
    M = mass_matrix(model, inertias, q)
    rhs = [tau[i] - bias[i] for i in range(model.n_dof)]
    return cholesky_solve(M, rhs)


def step(model, inertias, state, tau, dt):
    """One semi-implicit Euler step; the returned state's qdd is the forward
    dynamics value used for the update."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    qdd = forward_dynamics(model, inertias, list(state.q), list(state.qd), list(tau))
    qdd = np.array([float(ad.value(x)) for x in qdd])
    qd_new = state.qd + dt * qdd
    q_new = state.q + dt * qd_new
    return JointState(q=q_new, qd=qd_new, qdd=qdd)
