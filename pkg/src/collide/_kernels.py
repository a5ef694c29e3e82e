"""Compiled inner loops. Everything here works on plain float64 arrays and
assumes the caller has validated shapes and matrix classes."""
import numpy as np
from numba import njit

OK = 0
CAP_EXCEEDED = 1


@njit(cache=True, nogil=True, inline="always")
def _solve_active(r, w, dy, idx, m, sub, rhs):
    """Solve r[idx, idx] y = -w[idx] by Gaussian elimination with partial
    pivoting; the solution lands in rhs[:m]. False if a pivot vanishes."""
    for a in range(m):
        rhs[a] = -w[idx[a]]
        for b in range(m):
            sub[a, b] = r[idx[a], idx[b]]
    for c in range(m):
        p = c
        for a in range(c + 1, m):
            if abs(sub[a, c]) > abs(sub[p, c]):
                p = a
        if abs(sub[p, c]) < 1e-14:
            return False
        if p != c:
            for b in range(m):
                sub[c, b], sub[p, b] = sub[p, b], sub[c, b]
            rhs[c], rhs[p] = rhs[p], rhs[c]
        for a in range(c + 1, m):
            f = sub[a, c] / sub[c, c]
            for b in range(c, m):
                sub[a, b] -= f * sub[c, b]
            rhs[a] -= f * rhs[c]
    for c in range(m - 1, -1, -1):
        s = rhs[c]
        for b in range(c + 1, m):
            s -= sub[c, b] * rhs[b]
        rhs[c] = s / sub[c, c]
    return True


@njit(cache=True, nogil=True, inline="always")
def lcp_core(w, r, q, tol, max_iter, dy, z, new, idx, sub, rhs):
    """Solve z = w + r dy, z >= 0, dy >= 0, z . dy = 0 using caller buffers.

    Fixed-point iteration dy <- max(0, q dy - w) from dy = 0, followed by an
    exact re-solve on the detected active set. Returns (status, iterations, change).
    """
    d = w.shape[0]
    inside = True
    for i in range(d):
        dy[i] = 0.0
        if w[i] < 0.0:
            inside = False
    if inside:
        for i in range(d):
            z[i] = w[i]
        return OK, 0, 0.0

    change = 0.0
    it = 0
    status = CAP_EXCEEDED
    while it < max_iter:
        it += 1
        change = 0.0
        for i in range(d):
            s = -w[i]
            for j in range(d):
                s += q[i, j] * dy[j]
            v = s if s > 0.0 else 0.0
            c = abs(v - dy[i])
            if c > change:
                change = c
            new[i] = v
        for i in range(d):
            dy[i] = new[i]
        if change < tol:
            status = OK
            break

    m = 0
    for i in range(d):
        if dy[i] > 0.0:
            idx[m] = i
            m += 1
    if m > 0 and _solve_active(r, w, dy, idx, m, sub, rhs):
        good = True
        for a in range(m):
            if not rhs[a] > 0.0:
                good = False
        if good:
            for i in range(d):
                new[i] = 0.0
            for a in range(m):
                new[idx[a]] = rhs[a]
            for i in range(d):
                if new[i] == 0.0:
                    s = w[i]
                    for j in range(d):
                        s += r[i, j] * new[j]
                    if s < -1e-13 * (1.0 + abs(w[i])):
                        good = False
        if good:
            for i in range(d):
                dy[i] = new[i]

    for i in range(d):
        s = w[i]
        for j in range(d):
            s += r[i, j] * dy[j]
        # complementarity is exact on the active set; tiny negatives are roundoff
        if dy[i] > 0.0 or (s < 0.0 and s > -1e-9):
            s = 0.0
        z[i] = s
    return status, it, change


@njit(cache=True, nogil=True)
def lcp_solve(w, r, q, tol, max_iter, dy, z):
    d = w.shape[0]
    return lcp_core(w, r, q, tol, max_iter, dy, z, np.empty(d), np.empty(d, dtype=np.int64),
                    np.empty((d, d)), np.empty(d))


@njit(cache=True, nogil=True)
def skorohod_path(z0, dx, r, q, tol, max_iter):
    """Apply the per-step LCP along increments ``dx`` (n x d) from ``z0``.

    Returns (states, regulators, failed_step, last_change); failed_step is -1
    on success.
    """
    n, d = dx.shape
    states = np.empty((n + 1, d))
    regs = np.zeros((n + 1, d))
    for i in range(d):
        states[0, i] = z0[i]
    w = np.empty(d)
    dy = np.empty(d)
    z = np.empty(d)
    new = np.empty(d)
    idx = np.empty(d, dtype=np.int64)
    sub = np.empty((d, d))
    rhs = np.empty(d)
    for k in range(n):
        inside = True
        for i in range(d):
            w[i] = states[k, i] + dx[k, i]
            if w[i] < 0.0:
                inside = False
        if inside:
            # no reflection needed; skipping the call avoids per-call array refcounting
            for i in range(d):
                states[k + 1, i] = w[i]
                regs[k + 1, i] = regs[k, i]
            continue
        status, it, change = lcp_core(w, r, q, tol, max_iter, dy, z, new, idx, sub, rhs)
        if status != OK:
            return states, regs, k, change
        for i in range(d):
            states[k + 1, i] = z[i]
            regs[k + 1, i] = regs[k, i] + dy[i]
    return states, regs, -1, 0.0


@njit(cache=True, nogil=True)
def rank_order(x, out):
    """Stable insertion sort of indices of x (ties keep the smaller index first)."""
    n = x.shape[0]
    for i in range(n):
        out[i] = i
    for i in range(1, n):
        cur = out[i]
        j = i - 1
        while j >= 0 and x[out[j]] > x[cur]:
            out[j + 1] = out[j]
            j -= 1
        out[j + 1] = cur


@njit(cache=True, nogil=True)
def named_path(x0, g, sig, dt, xi):
    """Euler scheme for rank-dependent drift and volatility; xi is n x N."""
    n, big_n = xi.shape
    pos = np.empty((n + 1, big_n))
    ranks = np.empty((n + 1, big_n), dtype=np.int64)
    order = np.empty(big_n, dtype=np.int64)
    sdt = np.sqrt(dt)
    for i in range(big_n):
        pos[0, i] = x0[i]
    for k in range(n):
        rank_order(pos[k], order)
        for rk in range(big_n):
            ranks[k, rk] = order[rk] + 1
        for rk in range(big_n):
            i = order[rk]
            pos[k + 1, i] = pos[k, i] + g[rk] * dt + sig[rk] * sdt * xi[k, i]
    rank_order(pos[n], order)
    for rk in range(big_n):
        ranks[n, rk] = order[rk] + 1
    return pos, ranks


@njit(cache=True, nogil=True)
def first_zero(z0, dx, r, q, tol, max_iter, out):
    """Run the per-step LCP without storing the path; stop at the first step
    whose state has every coordinate at 0. Final state goes to ``out``.

    Returns (hit_step, failed_step); both -1 when nothing happened.
    """
    n, d = dx.shape
    w = np.empty(d)
    dy = np.empty(d)
    new = np.empty(d)
    idx = np.empty(d, dtype=np.int64)
    sub = np.empty((d, d))
    rhs = np.empty(d)
    for i in range(d):
        out[i] = z0[i]
    for k in range(n):
        inside = True
        for i in range(d):
            w[i] = out[i] + dx[k, i]
            if w[i] < 0.0:
                inside = False
        if inside:
            for i in range(d):
                out[i] = w[i]
            continue
        status, it, change = lcp_core(w, r, q, tol, max_iter, dy, out, new, idx, sub, rhs)
        if status != OK:
            return -1, k
        at_zero = True
        for i in range(d):
            if out[i] != 0.0:
                at_zero = False
        if at_zero:
            return k + 1, -1
    return -1, -1
