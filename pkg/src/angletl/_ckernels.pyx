# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same signatures."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def stieltjes_solve(t, w, double gamma, lambdas, double tol=1e-12, long max_iter=100000):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tt = np.ascontiguousarray(t, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lam = np.ascontiguousarray(
        np.atleast_1d(lambdas), dtype=np.float64)
    cdef Py_ssize_t L = lam.shape[0], m = tt.shape[0], i, k
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v_out = np.empty(L)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vp_out = np.empty(L)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] it_out = np.zeros(L, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] res_out = np.empty(L)
    cdef cnp.ndarray[cnp.npy_bool, ndim=1] fail = np.zeros(L, dtype=np.bool_)
    cdef double mean_t = 0.0, lo, hi, v, v_new, q, s1, s2, g, dg, delta, lk
    cdef long n_it
    cdef bint done
    for i in range(m):
        mean_t += ww[i] * tt[i]
    for k in range(L):
        lk = lam[k]
        lo = 1.0 / (lk + gamma * mean_t)
        hi = 1.0 / lk
        v = lo
        done = False
        n_it = 0
        while n_it < max_iter:
            s1 = 0.0
            s2 = 0.0
            for i in range(m):
                q = 1.0 + tt[i] * v
                s1 += ww[i] * tt[i] / q
                s2 += ww[i] * tt[i] / (q * q)
            g = v * (lk + gamma * s1) - 1.0
            dg = lk + gamma * s2
            if g < 0:
                lo = v
            elif g > 0:
                hi = v
            n_it += 1
            if g == 0:
                v_new = v
            else:
                v_new = v - g / dg
                if v_new <= lo or v_new >= hi:
                    v_new = 0.5 * (lo + hi)
            delta = fabs(v_new - v)
            v = v_new
            if delta <= tol and delta <= 1e-13 * fabs(v):
                done = True
                break
        s1 = 0.0
        s2 = 0.0
        for i in range(m):
            q = 1.0 + tt[i] * v
            s1 += ww[i] * tt[i] / q
            s2 += ww[i] * tt[i] * tt[i] / (q * q)
        v_out[k] = v
        res_out[k] = fabs(v * (lk + gamma * s1) - 1.0)
        vp_out[k] = 1.0 / (1.0 / (v * v) - gamma * s2)
        it_out[k] = n_it
        fail[k] = not done
    return v_out, vp_out, it_out, res_out, fail


def heldout_mse(G, s2, t_y, t_w, h_w, y, long n_train, lambdas, etas):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] GG = np.ascontiguousarray(G, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ss = np.ascontiguousarray(s2, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ty = np.ascontiguousarray(t_y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tw = np.ascontiguousarray(t_w, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] hw = np.ascontiguousarray(h_w, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lam = np.ascontiguousarray(lambdas, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ee = np.ascontiguousarray(etas, dtype=np.float64)
    cdef Py_ssize_t m = GG.shape[0], r = GG.shape[1], L = lam.shape[0], E = ee.shape[1]
    cdef Py_ssize_t i, j, l, e
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((L, E))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dy = np.empty(r)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dw = np.empty(r)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] res = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.empty(m)
    cdef double c, d, f, gsum, err, acc, eta, nt = <double> n_train
    for l in range(L):
        c = nt * lam[l]
        for j in range(r):
            d = 1.0 / (ss[j] + c)
            dy[j] = ty[j] * d
            dw[j] = tw[j] * d
        for i in range(m):
            f = 0.0
            gsum = 0.0
            for j in range(r):
                f += GG[i, j] * dy[j]
                gsum += GG[i, j] * dw[j]
            res[i] = yy[i] - f
            b[i] = nt * (gsum + hw[i] / c)
        for e in range(E):
            eta = ee[l, e]
            acc = 0.0
            for i in range(m):
                err = res[i] - eta * b[i]
                acc += err * err
            out[l, e] = acc / m
    return out
