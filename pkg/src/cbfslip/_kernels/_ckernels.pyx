# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled element kernels; same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow

cnp.import_array()

BACKEND = "cython"


def newton_local(const double[:, ::1] vals, const double[:, :, :, ::1] grads,
                 const double[:, ::1] wdet, const double[:, ::1] coef,
                 bint convection, damp_coef, damp_exp, double eps_reg):
    cdef Py_ssize_t nt = grads.shape[0]
    cdef Py_ssize_t nq = grads.shape[1]
    cdef Py_ssize_t nd = len(damp_coef)
    cdef double[::1] dc = np.ascontiguousarray(damp_coef, dtype=np.float64)
    cdef double[::1] ds = np.ascontiguousarray(damp_exp, dtype=np.float64)
    Ke_arr = np.zeros((nt, 8, 8))
    Fe_arr = np.zeros((nt, 8))
    cdef double[:, :, ::1] Ke = Ke_arr
    cdef double[:, ::1] Fe = Fe_arr

    cdef Py_ssize_t t, q, a, b, c, d, k, m
    cdef double w, ux, uy, mag2, mag, s, g1, g3, s_iso, s_dir, s_rhs, pa, pb
    cdef double u[2]
    cdef double G[2][2]
    cdef double adv[4]
    cdef double conv[2]

    for t in range(nt):
        for q in range(nq):
            w = wdet[t, q]
            ux = 0.0
            uy = 0.0
            G[0][0] = 0.0; G[0][1] = 0.0; G[1][0] = 0.0; G[1][1] = 0.0
            for a in range(4):
                ux += coef[t, a] * vals[q, a]
                uy += coef[t, 4 + a] * vals[q, a]
                for k in range(2):
                    G[0][k] += coef[t, a] * grads[t, q, a, k]
                    G[1][k] += coef[t, 4 + a] * grads[t, q, a, k]
            u[0] = ux
            u[1] = uy

            if convection:
                for a in range(4):
                    adv[a] = ux * grads[t, q, a, 0] + uy * grads[t, q, a, 1]
                conv[0] = ux * G[0][0] + uy * G[0][1]
                conv[1] = ux * G[1][0] + uy * G[1][1]
                for b in range(4):
                    pb = vals[q, b]
                    for d in range(2):
                        Fe[t, d * 4 + b] += w * conv[d] * pb
                        for a in range(4):
                            pa = vals[q, a]
                            for c in range(2):
                                Ke[t, d * 4 + b, c * 4 + a] += w * pa * G[d][c] * pb
                            Ke[t, d * 4 + b, d * 4 + a] += w * adv[a] * pb

            if nd > 0:
                mag2 = ux * ux + uy * uy
                mag = sqrt(mag2)
                s_iso = 0.0
                s_dir = 0.0
                s_rhs = 0.0
                for m in range(nd):
                    s = ds[m]
                    g1 = pow(mag, s - 1.0)
                    if s < 3.0:
                        g3 = pow(mag2 + eps_reg * eps_reg, (s - 3.0) / 2.0)
                    else:
                        g3 = pow(mag, s - 3.0)
                    s_iso += dc[m] * g1
                    s_dir += dc[m] * (s - 1.0) * g3
                    s_rhs += dc[m] * (s - 1.0) * g1
                for b in range(4):
                    pb = vals[q, b]
                    for d in range(2):
                        Fe[t, d * 4 + b] += w * s_rhs * u[d] * pb
                        for a in range(4):
                            pa = vals[q, a]
                            Ke[t, d * 4 + b, d * 4 + a] += w * s_iso * pa * pb
                            for c in range(2):
                                Ke[t, d * 4 + b, c * 4 + a] += w * s_dir * u[c] * u[d] * pa * pb
    return Ke_arr, Fe_arr


def csr_spmv(const long long[::1] indptr, const long long[::1] indices,
             const double[::1] data, const double[::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    y_arr = np.zeros(n)
    cdef double[::1] y = y_arr
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        y[i] = acc
    return y_arr
