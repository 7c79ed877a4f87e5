# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the reference kernels (see reference.py for contracts)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, expm1

cnp.import_array()


cdef inline void _axis_weights(double u, double dx, double* w, double* dw) nogil:
    # u in [0.5, 1.5): distances to the three stencil nodes are u, u-1, u-2
    w[0] = 0.5 * (1.5 - u) * (1.5 - u)
    w[1] = 0.75 - (u - 1.0) * (u - 1.0)
    w[2] = 0.5 * (u - 0.5) * (u - 0.5)
    dw[0] = (u - 1.5) / dx
    dw[1] = -2.0 * (u - 1.0) / dx
    dw[2] = (u - 0.5) / dx


def p2g(
    long[:, ::1] base,
    double[:, ::1] fx,
    double dx,
    long[::1] strides,
    double[::1] mass_p,
    double[:, ::1] vel_p,
    double[:, :, ::1] stress_vol,
    double[:, ::1] body_vol,
    double[::1] grid_mass,
    double[:, ::1] grid_mom,
    double[:, ::1] grid_frc,
):
    cdef Py_ssize_t N = base.shape[0]
    cdef int d = base.shape[1]
    cdef Py_ssize_t p
    cdef int i0, i1, i2, a
    cdef long node
    cdef double w, g0, g1, g2, m, wm
    cdef double w1[3][3]
    cdef double dw1[3][3]
    cdef int k

    if d == 2:
        for p in range(N):
            for k in range(2):
                _axis_weights(fx[p, k], dx, &w1[k][0], &dw1[k][0])
            m = mass_p[p]
            for i0 in range(3):
                for i1 in range(3):
                    w = w1[0][i0] * w1[1][i1]
                    g0 = dw1[0][i0] * w1[1][i1]
                    g1 = w1[0][i0] * dw1[1][i1]
                    node = (base[p, 0] + i0) * strides[0] + (base[p, 1] + i1) * strides[1]
                    wm = w * m
                    grid_mass[node] += wm
                    grid_mom[node, 0] += wm * vel_p[p, 0]
                    grid_mom[node, 1] += wm * vel_p[p, 1]
                    grid_frc[node, 0] += -(stress_vol[p, 0, 0] * g0 + stress_vol[p, 0, 1] * g1) + body_vol[p, 0] * w
                    grid_frc[node, 1] += -(stress_vol[p, 1, 0] * g0 + stress_vol[p, 1, 1] * g1) + body_vol[p, 1] * w
    else:
        for p in range(N):
            for k in range(3):
                _axis_weights(fx[p, k], dx, &w1[k][0], &dw1[k][0])
            m = mass_p[p]
            for i0 in range(3):
                for i1 in range(3):
                    for i2 in range(3):
                        w = w1[0][i0] * w1[1][i1] * w1[2][i2]
                        g0 = dw1[0][i0] * w1[1][i1] * w1[2][i2]
                        g1 = w1[0][i0] * dw1[1][i1] * w1[2][i2]
                        g2 = w1[0][i0] * w1[1][i1] * dw1[2][i2]
                        node = (
                            (base[p, 0] + i0) * strides[0]
                            + (base[p, 1] + i1) * strides[1]
                            + (base[p, 2] + i2) * strides[2]
                        )
                        wm = w * m
                        grid_mass[node] += wm
                        for a in range(3):
                            grid_mom[node, a] += wm * vel_p[p, a]
                            grid_frc[node, a] += (
                                -(stress_vol[p, a, 0] * g0 + stress_vol[p, a, 1] * g1 + stress_vol[p, a, 2] * g2)
                                + body_vol[p, a] * w
                            )


def g2p(
    long[:, ::1] base,
    double[:, ::1] fx,
    double dx,
    long[::1] strides,
    double[:, ::1] grid_vel,
):
    cdef Py_ssize_t N = base.shape[0]
    cdef int d = base.shape[1]
    vel_np = np.zeros((N, d))
    grad_np = np.zeros((N, d, d))
    cdef double[:, ::1] vel = vel_np
    cdef double[:, :, ::1] grad_v = grad_np
    cdef Py_ssize_t p
    cdef int i0, i1, i2, a, k
    cdef long node
    cdef double w, g0, g1, g2, va
    cdef double w1[3][3]
    cdef double dw1[3][3]

    if d == 2:
        for p in range(N):
            for k in range(2):
                _axis_weights(fx[p, k], dx, &w1[k][0], &dw1[k][0])
            for i0 in range(3):
                for i1 in range(3):
                    w = w1[0][i0] * w1[1][i1]
                    g0 = dw1[0][i0] * w1[1][i1]
                    g1 = w1[0][i0] * dw1[1][i1]
                    node = (base[p, 0] + i0) * strides[0] + (base[p, 1] + i1) * strides[1]
                    for a in range(2):
                        va = grid_vel[node, a]
                        vel[p, a] += w * va
                        grad_v[p, a, 0] += va * g0
                        grad_v[p, a, 1] += va * g1
    else:
        for p in range(N):
            for k in range(3):
                _axis_weights(fx[p, k], dx, &w1[k][0], &dw1[k][0])
            for i0 in range(3):
                for i1 in range(3):
                    for i2 in range(3):
                        w = w1[0][i0] * w1[1][i1] * w1[2][i2]
                        g0 = dw1[0][i0] * w1[1][i1] * w1[2][i2]
                        g1 = w1[0][i0] * dw1[1][i1] * w1[2][i2]
                        g2 = w1[0][i0] * w1[1][i1] * dw1[2][i2]
                        node = (
                            (base[p, 0] + i0) * strides[0]
                            + (base[p, 1] + i1) * strides[1]
                            + (base[p, 2] + i2) * strides[2]
                        )
                        for a in range(3):
                            va = grid_vel[node, a]
                            vel[p, a] += w * va
                            grad_v[p, a, 0] += va * g0
                            grad_v[p, a, 1] += va * g1
                            grad_v[p, a, 2] += va * g2
    return vel_np, grad_np


# ---------------------------------------------------------------------------
# Packed MLP kernels (layout documented in reference.py).
# ---------------------------------------------------------------------------

cdef inline double _act(double a, long code) nogil:
    if code == 0:
        return a
    if a > 0.0:
        return a
    return expm1(a)


cdef inline double _act_deriv(double a, long code) nogil:
    if code == 0:
        return 1.0
    if a > 0.0:
        return 1.0
    return exp(a)


def mlp_forward(
    long[::1] dims,
    long[::1] acts,
    double[::1] w_flat,
    double[::1] b_flat,
    double[:, ::1] U,
):
    cdef Py_ssize_t N = U.shape[0]
    cdef int L = dims.shape[0] - 1
    cdef int maxw = 0
    cdef int l, k, i, n_in, n_out
    for l in range(dims.shape[0]):
        if dims[l] > maxw:
            maxw = <int> dims[l]
    out_np = np.empty((N, dims[L]))
    cdef double[:, ::1] out = out_np
    cdef double* zbuf0
    cdef double* zbuf1
    cdef double* zp
    cdef double* zn
    cdef double* tmp
    cdef Py_ssize_t p, wo, bo
    cdef double acc
    scratch_np = np.empty(2 * maxw)
    cdef double[::1] scratch = scratch_np

    with nogil:
        zbuf0 = &scratch[0]
        zbuf1 = &scratch[maxw]
        for p in range(N):
            zp = zbuf0
            zn = zbuf1
            for i in range(dims[0]):
                zp[i] = U[p, i]
            wo = 0
            bo = 0
            for l in range(L):
                n_in = <int> dims[l]
                n_out = <int> dims[l + 1]
                for k in range(n_out):
                    acc = b_flat[bo + k]
                    for i in range(n_in):
                        acc += w_flat[wo + k * n_in + i] * zp[i]
                    zn[k] = _act(acc, acts[l])
                wo += n_out * n_in
                bo += n_out
                tmp = zp
                zp = zn
                zn = tmp
            for k in range(dims[L]):
                out[p, k] = zp[k]
    return out_np


def mlp_jacobian_cols(
    long[::1] dims,
    long[::1] acts,
    double[::1] w_flat,
    double[::1] b_flat,
    double[:, ::1] U,
    int c0,
    int c1,
):
    cdef Py_ssize_t N = U.shape[0]
    cdef int L = dims.shape[0] - 1
    cdef int nc = c1 - c0
    cdef int maxw = 0
    cdef int l, k, i, j, n_in, n_out
    for l in range(dims.shape[0]):
        if dims[l] > maxw:
            maxw = <int> dims[l]
    y_np = np.empty((N, dims[L]))
    J_np = np.empty((N, dims[L], nc))
    cdef double[:, ::1] y = y_np
    cdef double[:, :, ::1] Jout = J_np
    cdef Py_ssize_t p, wo, bo
    cdef double acc, dval, aval
    scratch_np = np.empty(2 * maxw * (nc + 1))
    cdef double[::1] scratch = scratch_np
    cdef double* zp
    cdef double* zn
    cdef double* Gp
    cdef double* Gn
    cdef double* tmp

    with nogil:
        zp = &scratch[0]
        zn = &scratch[maxw]
        Gp = &scratch[2 * maxw]
        Gn = &scratch[2 * maxw + maxw * nc]
        for p in range(N):
            for i in range(dims[0]):
                zp[i] = U[p, i]
            wo = 0
            bo = 0
            for l in range(L):
                n_in = <int> dims[l]
                n_out = <int> dims[l + 1]
                for k in range(n_out):
                    acc = b_flat[bo + k]
                    for i in range(n_in):
                        acc += w_flat[wo + k * n_in + i] * zp[i]
                    dval = _act_deriv(acc, acts[l])
                    zn[k] = _act(acc, acts[l])
                    if l == 0:
                        for j in range(nc):
                            Gn[k * nc + j] = dval * w_flat[wo + k * n_in + c0 + j]
                    else:
                        for j in range(nc):
                            aval = 0.0
                            for i in range(n_in):
                                aval += w_flat[wo + k * n_in + i] * Gp[i * nc + j]
                            Gn[k * nc + j] = dval * aval
                wo += n_out * n_in
                bo += n_out
                tmp = zp
                zp = zn
                zn = tmp
                tmp = Gp
                Gp = Gn
                Gn = tmp
            for k in range(dims[L]):
                y[p, k] = zp[k]
                for j in range(nc):
                    Jout[p, k, j] = Gp[k * nc + j]
    return y_np, J_np


def mlp_tangent(
    long[::1] dims,
    long[::1] acts,
    double[::1] w_flat,
    double[::1] b_flat,
    double[:, ::1] U,
    double[:, ::1] T,
):
    cdef Py_ssize_t N = U.shape[0]
    cdef int L = dims.shape[0] - 1
    cdef int maxw = 0
    cdef int l, k, i, n_in, n_out
    for l in range(dims.shape[0]):
        if dims[l] > maxw:
            maxw = <int> dims[l]
    y_np = np.empty((N, dims[L]))
    tau_np = np.empty((N, dims[L]))
    cdef double[:, ::1] y = y_np
    cdef double[:, ::1] tau = tau_np
    cdef Py_ssize_t p, wo, bo
    cdef double acc, sacc
    scratch_np = np.empty(4 * maxw)
    cdef double[::1] scratch = scratch_np
    cdef double* zp
    cdef double* zn
    cdef double* tp
    cdef double* tn
    cdef double* tmp

    with nogil:
        zp = &scratch[0]
        zn = &scratch[maxw]
        tp = &scratch[2 * maxw]
        tn = &scratch[3 * maxw]
        for p in range(N):
            for i in range(dims[0]):
                zp[i] = U[p, i]
                tp[i] = T[p, i]
            wo = 0
            bo = 0
            for l in range(L):
                n_in = <int> dims[l]
                n_out = <int> dims[l + 1]
                for k in range(n_out):
                    acc = b_flat[bo + k]
                    sacc = 0.0
                    for i in range(n_in):
                        acc += w_flat[wo + k * n_in + i] * zp[i]
                        sacc += w_flat[wo + k * n_in + i] * tp[i]
                    zn[k] = _act(acc, acts[l])
                    tn[k] = _act_deriv(acc, acts[l]) * sacc
                wo += n_out * n_in
                bo += n_out
                tmp = zp
                zp = zn
                zn = tmp
                tmp = tp
                tp = tn
                tn = tmp
            for k in range(dims[L]):
                y[p, k] = zp[k]
                tau[p, k] = tp[k]
    return y_np, tau_np
