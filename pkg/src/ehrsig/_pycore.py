"""Pure numpy implementations of the numerical kernels.

These mirror ``_core.pyx`` step for step and are used when the compiled
extension is unavailable (or when ``EHRSIG_PURE=1`` is set).
"""

import numpy as np


def logloss_prob(eta, y):
    """Mean log-loss and probabilities, one exp per element."""
    e = np.exp(-np.abs(eta))
    loss = np.maximum(eta, 0.0) + np.log1p(e) - y * eta
    prob = np.where(eta >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return loss.mean(), prob


def penalty(w, pf, l1, l2):
    return l1 * np.sum(pf * np.abs(w)) + 0.5 * l2 * np.dot(w, w)


def working_gram(X, y, eta, prob):
    """Weighted-centred Gram matrix and moment vector of the IRLS model.

    The intercept is profiled out: with IRLS weights ``v`` and working
    response ``z``, the quadratic model in ``w`` is
    ``1/(2n) sum v (zc - Xc w)^2`` where ``Xc, zc`` are centred by their
    ``v``-weighted means.
    """
    n = X.shape[0]
    v = np.maximum(prob * (1.0 - prob), 1e-5)
    z = eta + (y - prob) / v
    sv = v.sum()
    xbar = (v @ X) / sv
    zbar = (v @ z) / sv
    Xc = X - xbar
    Xv = Xc * v[:, None]
    G = (Xv.T @ Xc) / n
    q = (Xv.T @ (z - zbar)) / n
    return G, q, xbar, zbar


def cd_quadratic(G, q, pf, l1, l2, w, max_sweeps, tol):
    """Cyclic coordinate descent with soft-thresholding on
    ``1/2 w'Gw - q'w + l1 * sum(pf |w|) + l2/2 |w|^2``, using covariance
    updates. Modifies ``w`` in place; returns the sweep count."""
    d = w.size
    Gw = G @ w
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
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
                Gw += G[:, j] * delta
                w[j] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta < tol:
            break
    return sweeps


def enet_logistic(X, y, pf, l1, l2, w0, b0, max_outer, max_inner, tol):
    """Proximal Newton solver for elastic-net penalized logistic regression.

    Minimizes ``mean(logloss) + l1 * sum(pf * |w|) + l2 / 2 * ||w||^2``.
    Each outer iteration forms the IRLS quadratic model, solves it by cyclic
    coordinate descent with soft-thresholding, then backtracks along the
    resulting direction until the true objective does not increase.

    Returns
    -------
    w, b, n_outer, history, converged
        ``history`` holds the objective before the first and after every
        outer iteration.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    pf = np.asarray(pf, dtype=np.float64)
    w = np.array(w0, dtype=np.float64, copy=True)
    b = float(b0)
    eta = X @ w + b
    loss, prob = logloss_prob(eta, y)
    obj = loss + penalty(w, pf, l1, l2)
    history = [obj]
    converged = False
    n_outer = 0
    for it in range(max_outer):
        n_outer = it + 1
        G, q, xbar, zbar = working_gram(X, y, eta, prob)
        wn = w.copy()
        cd_quadratic(G, q, pf, l1, l2, wn, max_inner, tol * 0.1)
        bn = zbar - xbar @ wn
        dw = wn - w
        db = bn - b
        step = 1.0
        accepted = False
        for _ in range(50):
            wt = w + step * dw
            bt = b + step * db
            eta_t = X @ wt + bt
            loss_t, prob_t = logloss_prob(eta_t, y)
            obj_t = loss_t + penalty(wt, pf, l1, l2)
            if obj_t <= obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            history.append(obj)
            converged = True
            break
        change = step * max(np.max(np.abs(dw), initial=0.0), abs(db))
        w, b, eta, prob, obj = wt, bt, eta_t, prob_t, obj_t
        history.append(obj)
        if change < tol:
            converged = True
            break
    return w, b, n_outer, np.asarray(history), converged


def rash_accumulate(event_days, bandwidths, offsets, start, tau):
    """Average of randomly shifted histograms with per-event bin widths.

    Each event contributes one bin of width ``bandwidths[e]`` per shift; the
    bin grid of shift ``r`` is offset by ``offsets[r] * bandwidth``. Every
    event's total mass inside ``[start, start + tau)`` is normalized to one.

    Returns the per-day event density (events/day), length ``tau``.
    """
    event_days = np.asarray(event_days, dtype=np.int64)
    h = np.asarray(bandwidths, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.float64)
    R = offsets.size
    out = np.zeros(tau, dtype=np.float64)
    if event_days.size == 0:
        return out
    t = (event_days - start).astype(np.float64)[:, None]
    hf = h.astype(np.float64)[:, None]
    shift = offsets[None, :] * hf
    k = np.floor((t - shift) / hf)
    lo = np.ceil(shift + k * hf).astype(np.int64)
    hi = lo + h[:, None]
    lo_c = np.clip(lo, 0, tau)
    hi_c = np.clip(hi, 0, tau)
    # an event always lies in its own bin, so this is >= R
    inside = (hi_c - lo_c).sum(axis=1).astype(np.float64)
    hgt = np.repeat(1.0 / inside, R)
    diff = np.zeros(tau + 1, dtype=np.float64)
    np.add.at(diff, lo_c.ravel(), hgt)
    np.add.at(diff, hi_c.ravel(), -hgt)
    out[:] = np.cumsum(diff[:tau])
    return out
