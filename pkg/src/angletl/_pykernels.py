"""Pure-NumPy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them loop for
loop. Both must agree to rounding error (see tests/test_kernels.py).
"""

import numpy as np


def stieltjes_solve(t, w, gamma, lambdas, tol=1e-12, max_iter=100_000):
    """Solve ``v (lam + gamma * sum_i w_i t_i / (1 + t_i v)) = 1`` for each lam.

    Newton's method started at the left bracket end. The left-hand side is
    increasing and concave in v, so iterates approach the root monotonically
    from below; a bisection step is taken whenever Newton leaves the bracket.

    Returns ``(v, v_prime, iterations, residual, failed)`` arrays.
    ``v_prime`` is dv/dz at z = -lam, from implicit differentiation.
    """
    t = np.asarray(t, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    lam = np.atleast_1d(np.asarray(lambdas, dtype=np.float64))
    lo = 1.0 / (lam + gamma * float(w @ t))
    hi = 1.0 / lam
    v = lo.copy()
    iters = np.zeros(lam.shape, dtype=np.int64)
    active = np.ones(lam.shape, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        va = v[active]
        q = 1.0 + np.outer(va, t)
        s1 = (w * t / q).sum(axis=1)
        s2 = (w * t / (q * q)).sum(axis=1)
        g = va * (lam[active] + gamma * s1) - 1.0
        dg = lam[active] + gamma * s2
        # maintain bracket
        lo_a, hi_a = lo[active], hi[active]
        lo_a = np.where(g < 0, va, lo_a)
        hi_a = np.where(g > 0, va, hi_a)
        step = g / dg
        v_new = va - step
        outside = (v_new <= lo_a) | (v_new >= hi_a)
        bis = 0.5 * (lo_a + hi_a)
        v_new = np.where(outside & (g != 0), bis, v_new)
        v_new = np.where(g == 0, va, v_new)
        delta = np.abs(v_new - va)
        lo[active], hi[active] = lo_a, hi_a
        v[active] = v_new
        iters[active] += 1
        done = (delta <= tol) & (delta <= 1e-13 * np.abs(v_new))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    q = 1.0 + np.outer(v, t)
    residual = np.abs(v * (lam + gamma * (w * t / q).sum(axis=1)) - 1.0)
    dz = 1.0 / (v * v) - gamma * (w * t * t / (q * q)).sum(axis=1)
    v_prime = 1.0 / dz
    return v, v_prime, iters, residual, active


def heldout_mse(G, s2, t_y, t_w, h_w, y, n_train, lambdas, etas):
    """Held-out mean squared error of the angle-penalised ridge on a (lam, eta) grid.

    With the training design factorised as ``X = U diag(s) V^T`` (thin SVD,
    ``s2 = s**2``), ``G = X_te V``, ``t_y = V^T X^T Y``, ``t_w = V^T w`` and
    ``h_w = X_te w - G t_w``, the prediction at ``(lam, eta)`` is
    ``f(lam) + eta * g(lam)`` where, with ``c = n_train * lam``,

        f = G diag(1/(s2+c)) t_y
        g = n_train * (G diag(1/(s2+c)) t_w + h_w / c)

    ``etas`` has shape (L, E): row l holds the eta values paired with lam_l.
    """
    lam = np.asarray(lambdas, dtype=np.float64)
    etas = np.asarray(etas, dtype=np.float64)
    c = n_train * lam
    D = 1.0 / (s2[:, None] + c[None, :])
    F = G @ (t_y[:, None] * D)
    B = n_train * (G @ (t_w[:, None] * D) + h_w[:, None] / c[None, :])
    R = y[:, None] - F
    err = R[:, :, None] - etas[None, :, :] * B[:, :, None]
    return np.mean(err * err, axis=0)
