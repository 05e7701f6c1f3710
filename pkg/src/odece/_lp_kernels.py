"""Loop-level simplex and branch-and-bound kernels (numba-compilable)."""

import numpy as np

from ._jit import njit

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
NUMERICAL_FAILURE = 3

PIVOT_TOL = 1e-9
PIVOT_FAIL = 1e-11
COST_TOL = 1e-9
TIE_TOL = 1e-12
DEGENERATE_STREAK = 25
INTEGRAL_TOL = 1e-9


@njit
def row_activity(A, x):
    """``A @ x`` summed left to right; the one canonical evaluation order."""
    m, n = A.shape
    out = np.zeros(m)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += A[i, j] * x[j]
        out[i] = s
    return out


@njit
def _flip_column(mat, j, u, flipped):
    last = mat.shape[1] - 1
    for i in range(mat.shape[0]):
        mat[i, last] -= mat[i, j] * u
        mat[i, j] = -mat[i, j]
    flipped[j] = not flipped[j]


@njit
def _complement_basic(mat, r, basis, upper, flipped):
    j = basis[r]
    last = mat.shape[1] - 1
    for k in range(last + 1):
        mat[r, k] = -mat[r, k]
    mat[r, j] = 1.0
    mat[r, last] += upper[j]
    flipped[j] = not flipped[j]


@njit
def _pivot(mat, r, e, basis):
    p = mat[r, e]
    if abs(p) < PIVOT_FAIL:
        return False
    width = mat.shape[1]
    for k in range(width):
        mat[r, k] /= p
    for i in range(mat.shape[0]):
        if i == r:
            continue
        f = mat[i, e]
        if f != 0.0:
            for k in range(width):
                mat[i, k] -= f * mat[r, k]
            mat[i, e] = 0.0
    basis[r] = e
    return True


@njit
def iterate(mat, basis, upper, flipped, ncols, max_iter):
    """Primal simplex on the last row of ``mat``; Dantzig pricing, Bland after a degenerate streak."""
    m = mat.shape[0] - 1
    last = mat.shape[1] - 1
    bland = False
    degenerate = 0
    for _ in range(max_iter):
        e = -1
        best = -COST_TOL
        for j in range(ncols):
            dj = mat[m, j]
            if dj < -COST_TOL:
                if bland:
                    e = j
                    break
                if dj < best:
                    best = dj
                    e = j
        if e < 0:
            return OPTIMAL
        theta = np.inf
        r = -1
        r_upper = False
        r_mag = 0.0
        for i in range(m):
            a = mat[i, e]
            bi = max(mat[i, last], 0.0)
            ub = upper[basis[i]]
            if a > PIVOT_TOL:
                t = bi / a
                up = False
            elif a < -PIVOT_TOL and ub < np.inf:
                t = max(ub - bi, 0.0) / -a
                up = True
            else:
                continue
            take = False
            if r < 0 or t < theta - TIE_TOL:
                take = True
            elif t <= theta + TIE_TOL:
                if bland:
                    take = basis[i] < basis[r]
                else:
                    take = abs(a) > r_mag
            if take:
                if t < theta:
                    theta = t
                r = i
                r_upper = up
                r_mag = abs(a)
        u_e = upper[e]
        if r < 0 and u_e == np.inf:
            return UNBOUNDED
        if u_e <= theta:
            _flip_column(mat, e, u_e, flipped)
            degenerate = 0
            continue
        if r_upper:
            _complement_basic(mat, r, basis, upper, flipped)
        if not _pivot(mat, r, e, basis):
            return NUMERICAL_FAILURE
        if not (np.isfinite(mat[r, last]) and np.isfinite(mat[m, last])):
            return NUMERICAL_FAILURE
        if theta <= TIE_TOL:
            degenerate += 1
            if degenerate >= DEGENERATE_STREAK:
                bland = True
        else:
            degenerate = 0
    return NUMERICAL_FAILURE


@njit
def lp_core(c, A, b, is_ge, lower, upper):
    """Two-phase bounded simplex.

    Returns ``(status, x, reduced_costs)`` where ``reduced_costs`` covers the
    ``n`` structural and ``m`` slack columns in their final (possibly
    complemented) orientation.
    """
    m, n = A.shape
    x = np.zeros(n)
    reduced = np.zeros(n + m)
    span = upper - lower
    for j in range(n):
        if span[j] < 0:
            return INFEASIBLE, x, reduced
    rhs = b - row_activity(A, lower)
    sign = np.ones(m)
    slack_coef = np.ones(m)
    k = 0
    for i in range(m):
        if is_ge[i]:
            slack_coef[i] = -1.0
        if rhs[i] < 0:
            sign[i] = -1.0
            slack_coef[i] = -slack_coef[i]
        if rhs[i] == 0 and slack_coef[i] < 0:
            sign[i] = -sign[i]
            slack_coef[i] = 1.0
        if slack_coef[i] < 0:
            k += 1
    ncols = n + m + k
    mat = np.zeros((m + 1, ncols + 1))
    basis = np.empty(m, dtype=np.int64)
    col_upper = np.full(ncols, np.inf)
    for j in range(n):
        col_upper[j] = span[j]
    flipped = np.zeros(ncols, dtype=np.bool_)
    a_idx = 0
    for i in range(m):
        for j in range(n):
            mat[i, j] = A[i, j] * sign[i]
        mat[i, n + i] = slack_coef[i]
        mat[i, ncols] = abs(rhs[i])
        if slack_coef[i] < 0:
            col = n + m + a_idx
            mat[i, col] = 1.0
            basis[i] = col
            a_idx += 1
        else:
            basis[i] = n + i
    max_iter = 50 * (m + ncols) + 100

    if k > 0:
        for j in range(n + m, ncols):
            mat[m, j] = 1.0
        for i in range(m):
            if basis[i] >= n + m:
                for j in range(ncols + 1):
                    mat[m, j] -= mat[i, j]
        status = iterate(mat, basis, col_upper, flipped, ncols, max_iter)
        if status != OPTIMAL:
            return NUMERICAL_FAILURE, x, reduced
        scale = 1.0
        for i in range(m):
            scale = max(scale, 1.0 + abs(rhs[i]))
        if -mat[m, ncols] > 1e-9 * scale:
            return INFEASIBLE, x, reduced
        keep = np.ones(m, dtype=np.bool_)
        is_basic = np.zeros(ncols, dtype=np.bool_)
        for i in range(m):
            is_basic[basis[i]] = True
        for r in range(m):
            if basis[r] < n + m:
                continue
            best_j = -1
            best_mag = PIVOT_TOL
            for j in range(n + m):
                if not is_basic[j] and abs(mat[r, j]) > best_mag:
                    best_mag = abs(mat[r, j])
                    best_j = j
            if best_j >= 0:
                is_basic[basis[r]] = False
                _pivot(mat, r, best_j, basis)
                is_basic[best_j] = True
            else:
                keep[r] = False
        m2 = 0
        for r in range(m):
            if keep[r]:
                m2 += 1
        mat2 = np.zeros((m2 + 1, n + m + 1))
        basis2 = np.empty(m2, dtype=np.int64)
        r2 = 0
        for r in range(m):
            if keep[r]:
                for j in range(n + m):
                    mat2[r2, j] = mat[r, j]
                mat2[r2, n + m] = mat[r, ncols]
                basis2[r2] = basis[r]
                r2 += 1
        mat = mat2
        basis = basis2
        flipped = flipped[: n + m].copy()
        col_upper = col_upper[: n + m].copy()
        ncols = n + m
        m = m2

    last = ncols
    cz = np.zeros(ncols)
    for j in range(n):
        cz[j] = -c[j] if flipped[j] else c[j]
    for j in range(ncols + 1):
        mat[m, j] = 0.0
    for j in range(ncols):
        mat[m, j] = cz[j]
    for i in range(m):
        cb = cz[basis[i]]
        if cb != 0.0:
            for j in range(ncols + 1):
                mat[m, j] -= cb * mat[i, j]
    status = iterate(mat, basis, col_upper, flipped, ncols, max_iter)
    if status != OPTIMAL:
        return status, x, reduced

    z = np.zeros(ncols)
    for i in range(m):
        z[basis[i]] = mat[i, last]
    for j in range(n):
        y = col_upper[j] - z[j] if flipped[j] else z[j]
        y = min(max(y, 0.0), span[j])
        x[j] = lower[j] + y
    for j in range(ncols):
        reduced[j] = mat[m, j]
    return OPTIMAL, x, reduced


@njit
def bnb_core(q, A, b):
    """Depth-first binary branch-and-bound; returns ``(status, x, nodes)``."""
    m, n = A.shape
    cap = 2 * n + 2
    stack = np.empty((cap, n), dtype=np.int8)
    for j in range(n):
        stack[0, j] = -1
    top = 1
    best_x = np.zeros(n)
    best_obj = np.inf
    found = False
    nodes = 0
    zeros_ge = np.zeros(m, dtype=np.bool_)
    while top > 0:
        top -= 1
        node = stack[top].copy()
        nodes += 1
        nfree = 0
        for j in range(n):
            if node[j] < 0:
                nfree += 1
        free_idx = np.empty(nfree, dtype=np.int64)
        t = 0
        for j in range(n):
            if node[j] < 0:
                free_idx[t] = j
                t += 1
        resid = b.copy()
        base = 0.0
        for j in range(n):
            if node[j] == 1:
                base += q[j]
                for i in range(m):
                    resid[i] -= A[i, j]
        prune = False
        if nfree > 0:
            for i in range(m):
                lo = 0.0
                for t in range(nfree):
                    a = A[i, free_idx[t]]
                    if a < 0:
                        lo += a
                if lo - resid[i] > 1e-9 * (1.0 + abs(b[i])):
                    prune = True
                    break
        if prune:
            continue
        if nfree == 0:
            cand = np.zeros(n)
            for j in range(n):
                cand[j] = node[j]
            act = row_activity(A, cand)
            ok = True
            for i in range(m):
                if act[i] - b[i] > 0:
                    ok = False
            if ok:
                obj = 0.0
                for j in range(n):
                    obj += q[j] * cand[j]
                if obj < best_obj:
                    best_obj = obj
                    best_x = cand
                    found = True
            continue
        qs = np.empty(nfree)
        As = np.empty((m, nfree))
        for t in range(nfree):
            qs[t] = q[free_idx[t]]
            for i in range(m):
                As[i, t] = A[i, free_idx[t]]
        status, xr, _ = lp_core(qs, As, resid, zeros_ge, np.zeros(nfree), np.ones(nfree))
        if status == INFEASIBLE:
            continue
        if status != OPTIMAL:
            return NUMERICAL_FAILURE, best_x, nodes
        bound = base
        for t in range(nfree):
            bound += qs[t] * xr[t]
        if found and bound >= best_obj - 1e-9 * (1.0 + abs(best_obj)):
            continue
        integral = True
        for t in range(nfree):
            if abs(xr[t] - np.round(xr[t])) > INTEGRAL_TOL:
                integral = False
                break
        if integral:
            cand = np.zeros(n)
            for j in range(n):
                if node[j] >= 0:
                    cand[j] = node[j]
            for t in range(nfree):
                cand[free_idx[t]] = np.round(xr[t])
            act = row_activity(A, cand)
            ok = True
            for i in range(m):
                if act[i] - b[i] > 0:
                    ok = False
            if ok:
                obj = 0.0
                for j in range(n):
                    obj += q[j] * cand[j]
                if obj < best_obj:
                    best_obj = obj
                    best_x = cand
                    found = True
                continue
            # The LP tolerance admitted an exactly infeasible point; keep splitting.
            jb = free_idx[0]
            first = 1 if cand[jb] > 0.5 else 0
        else:
            kbest = 0
            dbest = np.inf
            for t in range(nfree):
                d = abs(xr[t] - 0.5)
                if d < dbest:
                    dbest = d
                    kbest = t
            jb = free_idx[kbest]
            first = 1 if xr[kbest] >= 0.5 else 0
        # Push the far child first so the rounded-nearest child is popped next.
        stack[top] = node
        stack[top, jb] = 1 - first
        top += 1
        stack[top] = node
        stack[top, jb] = first
        top += 1
    if not found:
        return INFEASIBLE, best_x, nodes
    return OPTIMAL, best_x, nodes


@njit
def enumerate_core(q, A, b):
    """Scan ``{0,1}^n`` in lexicographic order (``x[0]`` most significant)."""
    m, n = A.shape
    best_x = np.zeros(n)
    best_obj = np.inf
    found = False
    x = np.zeros(n)
    for code in range(1 << n):
        for j in range(n):
            x[j] = (code >> (n - 1 - j)) & 1
        act = row_activity(A, x)
        ok = True
        for i in range(m):
            if act[i] - b[i] > 0:
                ok = False
                break
        if not ok:
            continue
        obj = 0.0
        for j in range(n):
            obj += q[j] * x[j]
        if obj < best_obj:
            best_obj = obj
            best_x = x.copy()
            found = True
    return found, best_x
