# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels. See ``_pycore`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, fabs, floor, ceil

cnp.import_array()


cdef double _loss_prob(const double[::1] eta, const double[::1] y,
                       double[::1] prob, Py_ssize_t n) nogil:
    cdef Py_ssize_t i
    cdef double e, z, acc = 0.0
    for i in range(n):
        z = eta[i]
        e = exp(-fabs(z))
        if z >= 0:
            acc += z + log1p(e) - y[i] * z
            prob[i] = 1.0 / (1.0 + e)
        else:
            acc += log1p(e) - y[i] * z
            prob[i] = e / (1.0 + e)
    return acc / n


cdef double _penalty(const double[::1] w, const double[::1] pf,
                     double l1, double l2, Py_ssize_t d) nogil:
    cdef Py_ssize_t j
    cdef double a = 0.0, q = 0.0
    for j in range(d):
        a += pf[j] * fabs(w[j])
        q += w[j] * w[j]
    return l1 * a + 0.5 * l2 * q


cdef int _cd_quadratic(const double[:, ::1] G, const double[::1] q,
                       const double[::1] pf, double l1, double l2,
                       double[::1] w, double[::1] Gw, int max_sweeps,
                       double tol) nogil:
    cdef Py_ssize_t d = w.shape[0], j, k
    cdef int sweeps = 0
    cdef double gjj, wj, rho, thr, new, delta, max_delta
    for k in range(d):
        Gw[k] = 0.0
        for j in range(d):
            Gw[k] += G[k, j] * w[j]
    while sweeps < max_sweeps:
        sweeps += 1
        max_delta = 0.0
        for j in range(d):
            gjj = G[j, j]
            wj = w[j]
            rho = q[j] - Gw[j] + gjj * wj
            thr = l1 * pf[j]
            if rho > thr:
                new = (rho - thr) / (gjj + l2)
            elif rho < -thr:
                new = (rho + thr) / (gjj + l2)
            else:
                new = 0.0
            if new != wj:
                delta = new - wj
                # G is symmetric, so row j doubles as column j
                for k in range(d):
                    Gw[k] += G[j, k] * delta
                w[j] = new
                if fabs(delta) > max_delta:
                    max_delta = fabs(delta)
        if max_delta < tol:
            break
    return sweeps


def enet_logistic(X, y, pf, double l1, double l2, w0, double b0,
                  int max_outer, int max_inner, double tol):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] yv = y_arr
    cdef double[::1] pfv = np.ascontiguousarray(pf, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], j
    cdef int it, ls, n_outer = 0
    w_arr = np.array(w0, dtype=np.float64, copy=True)
    cdef double[::1] w = w_arr
    cdef double[::1] Gw = np.empty(d)
    cdef double[::1] prob, prob_t
    cdef double b = b0, bn, bt = b0, obj, obj_t, step, dwmax, db
    cdef bint accepted = False, converged = False
    history = []

    eta = X @ w_arr + b
    prob_arr = np.empty(n)
    prob = prob_arr
    obj = _loss_prob(eta, yv, prob, n) + _penalty(w, pfv, l1, l2, d)
    history.append(obj)

    for it in range(max_outer):
        n_outer = it + 1
        v = np.maximum(prob_arr * (1.0 - prob_arr), 1e-5)
        z = eta + (y_arr - prob_arr) / v
        sv = v.sum()
        xbar = (v @ X) / sv
        zbar = float(v @ z) / sv
        Xc = X - xbar
        Xw = Xc * v[:, None]
        G = np.ascontiguousarray(Xw.T @ Xc) / n
        q = (Xw.T @ (z - zbar)) / n
        wn_arr = w_arr.copy()
        _cd_quadratic(G, q, pfv, l1, l2, wn_arr, Gw, max_inner, tol * 0.1)
        bn = zbar - float(xbar @ wn_arr)
        dw = wn_arr - w_arr
        db = bn - b
        dwmax = max(float(np.max(np.abs(dw), initial=0.0)), fabs(db))
        step = 1.0
        accepted = False
        for ls in range(50):
            wt_arr = w_arr + step * dw
            bt = b + step * db
            eta_t = X @ wt_arr + bt
            prob_t_arr = np.empty(n)
            obj_t = _loss_prob(eta_t, yv, prob_t_arr, n) + _penalty(wt_arr, pfv, l1, l2, d)
            if obj_t <= obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            history.append(obj)
            converged = True
            break
        w_arr, b, eta, prob_arr, obj = wt_arr, bt, eta_t, prob_t_arr, obj_t
        history.append(obj)
        if step * dwmax < tol:
            converged = True
            break
    return w_arr, b, n_outer, np.asarray(history), converged


def rash_accumulate(event_days, bandwidths, offsets, long start, Py_ssize_t tau):
    cdef const long long[::1] ev = np.ascontiguousarray(event_days, dtype=np.int64)
    cdef const long long[::1] h = np.ascontiguousarray(bandwidths, dtype=np.int64)
    cdef const double[::1] off = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef Py_ssize_t n_ev = ev.shape[0], R = off.shape[0], e, q
    out_arr = np.zeros(tau, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] diff = np.zeros(tau + 1)
    cdef double t, hf, shift, k, inside, height, acc
    cdef long long lo, hi
    if n_ev == 0:
        return out_arr
    with nogil:
        for e in range(n_ev):
            t = <double>(ev[e] - start)
            hf = <double>h[e]
            inside = 0.0
            for q in range(R):
                shift = off[q] * hf
                k = floor((t - shift) / hf)
                lo = <long long>ceil(shift + k * hf)
                hi = lo + h[e]
                if lo < 0:
                    lo = 0
                if lo > tau:
                    lo = tau
                if hi < 0:
                    hi = 0
                if hi > tau:
                    hi = tau
                inside += <double>(hi - lo)
            height = 1.0 / inside
            for q in range(R):
                shift = off[q] * hf
                k = floor((t - shift) / hf)
                lo = <long long>ceil(shift + k * hf)
                hi = lo + h[e]
                if lo < 0:
                    lo = 0
                if lo > tau:
                    lo = tau
                if hi < 0:
                    hi = 0
                if hi > tau:
                    hi = tau
                diff[lo] += height
                diff[hi] -= height
        acc = 0.0
        for q in range(tau):
            acc += diff[q]
            out[q] = acc
    return out_arr
