"""Vectorized numpy implementations of the hot kernels.

This is the fallback backend: same signatures and semantics as
``_kernels_numba``, selected via ``NMFSTREAM_BACKEND=numpy`` (or
automatically when numba is unavailable). Loops over right-hand sides
and row blocks are kept in Python here; the numba backend compiles them.
"""

import numpy as np

# Chunk size for streamed Schur accumulation, sized so the (B, m, m) and
# (B, m, k, k) temporaries stay in the tens of megabytes.
_CHUNK_DOUBLES = 3_000_000


def block_cholesky(blocks):
    """Lower Cholesky factor of each (k, k) block in a (N, k, k) stack.

    Returns ``(factors, bad)`` where ``bad`` is the index of the first
    block that is not positive definite, or -1 if all succeeded.
    """
    out = np.zeros_like(blocks)
    try:
        out[:] = np.linalg.cholesky(blocks)
        return out, -1
    except np.linalg.LinAlgError:
        pass
    for i in range(blocks.shape[0]):
        try:
            out[i] = np.linalg.cholesky(blocks[i])
        except np.linalg.LinAlgError:
            return out, i
    return out, -1


def block_solve_lower(l, b):
    """Solve L[i] @ Z[i] = B[i] for each block; L lower triangular."""
    return np.linalg.solve(l, b)


def block_solve_lower_t(l, b):
    """Solve L[i].T @ Z[i] = B[i] for each block."""
    return np.linalg.solve(l.transpose(0, 2, 1), b)


def _chunk(n, per_item):
    return max(1, min(n, _CHUNK_DOUBLES // max(1, per_item)))


def schur_reduce(x_rows, y_cols, l, h, resid, full):
    """Accumulate the eliminated-block contribution to the reduced system.

    Eliminating the first variable block through its block-diagonal factor
    leaves an (mk, mk) correction ``S`` to subtract from the second
    diagonal block, and an (m, k) correction ``R`` to subtract from the
    second right-hand side. ``x_rows`` holds the n coupling row vectors,
    ``y_cols`` the m coupling column vectors, ``l`` the n lower factors,
    ``h`` the forward-substituted first rhs. With ``full`` the coupling
    blocks gain a residual-scaled identity term and ``resid`` is used.
    """
    n, k = x_rows.shape
    m = y_cols.shape[0]
    s_acc = np.zeros((m, k, m, k))
    r_acc = np.zeros((m, k))
    yt = np.ascontiguousarray(y_cols.T)  # (k, m)
    if not full:
        bs = _chunk(n, m * m + k * m)
        for i0 in range(0, n, bs):
            i1 = min(n, i0 + bs)
            lc = l[i0:i1]
            w = np.linalg.solve(lc, np.broadcast_to(yt, (i1 - i0, k, m)))
            t = np.matmul(w.transpose(0, 2, 1), w)  # (B, m, m)
            a = x_rows[i0:i1, :, None] * x_rows[i0:i1, None, :]  # (B, k, k)
            s_acc += np.tensordot(t, a, axes=(0, 0)).transpose(0, 2, 1, 3)
            wh = np.einsum("bkj,bk->bj", w, h[i0:i1])  # (B, m)
            r_acc += wh.T @ x_rows[i0:i1]
    else:
        eye = np.eye(k)
        bs = _chunk(n, 2 * m * k * k)
        for i0 in range(0, n, bs):
            i1 = min(n, i0 + bs)
            b = i1 - i0
            lc = l[i0:i1]
            linv = np.linalg.solve(lc, np.broadcast_to(eye, (b, k, k)))
            w = linv @ yt  # (B, k, m)
            pinv = linv.transpose(0, 2, 1)  # inverse of the upper factor
            g = (
                x_rows[i0:i1, None, :, None] * w.transpose(0, 2, 1)[:, :, None, :]
                + resid[i0:i1, :, None, None] * pinv[:, None, :, :]
            )  # (B, m, k, k)
            g2 = g.transpose(1, 2, 0, 3).reshape(m * k, b * k)
            s_acc += (g2 @ g2.T).reshape(m, k, m, k)
            r_acc += np.einsum("bjpq,bq->jp", g, h[i0:i1])
    return s_acc.reshape(m * k, m * k), r_acc


def rhs_reduce(x_rows, y_cols, l, h, resid, full):
    """Right-hand-side part of :func:`schur_reduce` only (reused factors)."""
    n, k = x_rows.shape
    m = y_cols.shape[0]
    r_acc = np.zeros((m, k))
    yt = np.ascontiguousarray(y_cols.T)
    bs = _chunk(n, 2 * k * m)
    for i0 in range(0, n, bs):
        i1 = min(n, i0 + bs)
        lc = l[i0:i1]
        w = np.linalg.solve(lc, np.broadcast_to(yt, (i1 - i0, k, m)))
        wh = np.einsum("bkj,bk->bj", w, h[i0:i1])
        r_acc += wh.T @ x_rows[i0:i1]
        if full:
            # residual-identity part: f_ij * (L^-T h_i) summed over i
            g = block_solve_lower_t(lc, h[i0:i1, :, None])[:, :, 0]
            r_acc += resid[i0:i1].T @ g
    return r_acc


def back_substitute(x_rows, y_cols, l, h, dy_rows, resid, full):
    """Recover the eliminated first-block update from the second-block one."""
    n, k = x_rows.shape
    m = y_cols.shape[0]
    yt = np.ascontiguousarray(y_cols.T)
    t = x_rows @ dy_rows.T  # (n, m)
    q = np.empty((n, k))
    bs = _chunk(n, 2 * k * m)
    for i0 in range(0, n, bs):
        i1 = min(n, i0 + bs)
        w = np.linalg.solve(l[i0:i1], np.broadcast_to(yt, (i1 - i0, k, m)))
        q[i0:i1] = np.einsum("bkj,bj->bk", w, t[i0:i1])
    if full:
        q += block_solve_lower(l, (resid @ dy_rows)[:, :, None])[:, :, 0]
    return block_solve_lower_t(l, (h - q)[:, :, None])[:, :, 0]


def _passive_solve(ctc, ctb_row, pidx):
    """Refined normal-equation solve restricted to the passive columns."""
    a = ctc[np.ix_(pidx, pidx)]
    b = ctb_row[pidx]
    try:
        lf = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None
    z = np.linalg.solve(lf.T, np.linalg.solve(lf, b))
    res = b - a @ z
    z += np.linalg.solve(lf.T, np.linalg.solve(lf, res))
    return z


def nnls_batch(ctc, ctb, btb, warm_passive, warm_mode, tol, max_changes):
    """Solve a batch of nonnegative least squares problems sharing one Gram matrix.

    Each right-hand side t minimizes ``0.5 * ||C z - d_t||^2`` over ``z >= 0``
    given ``ctc = C.T C``, ``ctb[t] = C.T d_t`` and ``btb[t] = d_t . d_t``,
    by the active-set method (normal equations on the passive set, full
    refactorization on any passive-set change).

    warm_mode: 0 solve every rhs cold; 1 seed each rhs with the previous
    rhs's passive set (streaming chain); 2 seed rhs t with
    ``warm_passive[t]``. A warm seed is accepted outright when its solve is
    feasible and dual feasible, otherwise the rhs falls back to a cold start.

    Returns ``(x, passive, changes, resid2, status)`` with per-rhs status
    0 = solved, 1 = change cap exceeded, 2 = rank-deficient passive set.
    """
    nrhs, k = ctb.shape
    x_out = np.zeros((nrhs, k))
    p_out = np.zeros((nrhs, k), dtype=np.bool_)
    changes_out = np.zeros(nrhs, dtype=np.int64)
    resid2 = np.zeros(nrhs)
    status = np.zeros(nrhs, dtype=np.int8)
    prev_passive = np.zeros(k, dtype=np.bool_)

    for t in range(nrhs):
        d = ctb[t]
        tol_t = tol[t]
        if warm_mode == 2:
            seed = warm_passive[t]
        elif warm_mode == 1:
            seed = prev_passive
        else:
            seed = None

        x = None
        passive = None
        if seed is not None and (warm_mode == 2 or t > 0):
            x, passive = _try_warm(ctc, d, seed, tol_t)

        if x is None:
            x, passive, nch, st = _cold_lawson_hanson(ctc, d, tol_t, max_changes)
            changes_out[t] = nch
            status[t] = st
        p_out[t] = passive
        x_out[t] = x
        prev_passive = passive
        r2 = btb[t] - 2.0 * (x @ d) + x @ ctc @ x
        resid2[t] = r2 if r2 > 0.0 else 0.0
    return x_out, p_out, changes_out, resid2, status


def _try_warm(ctc, d, seed, tol_t):
    k = d.shape[0]
    x = np.zeros(k)
    if not seed.any():
        if np.all(d <= tol_t):
            return x, seed.copy()
        return None, None
    pidx = np.flatnonzero(seed)
    z = _passive_solve(ctc, d, pidx)
    if z is None or np.any(z < 0.0):
        return None, None
    x[pidx] = z
    w = d - ctc @ x
    if np.all(w[~seed] <= tol_t) and np.all(np.abs(w[seed]) <= tol_t):
        return x, seed.copy()
    return None, None


def _cold_lawson_hanson(ctc, d, tol_t, max_changes):
    k = d.shape[0]
    x = np.zeros(k)
    passive = np.zeros(k, dtype=np.bool_)
    w = d.copy()
    nch = 0
    while True:
        w_act = np.where(passive, -np.inf, w)
        j = int(np.argmax(w_act))
        if w_act[j] <= tol_t:
            return x, passive, nch, 0
        passive[j] = True
        nch += 1
        if nch > max_changes:
            return x, passive, nch, 1
        pidx = np.flatnonzero(passive)
        z = _passive_solve(ctc, d, pidx)
        if z is None:
            return x, passive, nch, 2
        while np.any(z <= 0.0):
            xp = x[pidx]
            neg = z <= 0.0
            ratios = xp[neg] / (xp[neg] - z[neg])
            alpha = ratios.min()
            x[pidx] = xp + alpha * (z - xp)
            drop = pidx[neg][ratios <= alpha]
            x[drop] = 0.0
            passive[drop] = False
            nch += drop.size
            if nch > max_changes:
                return x, passive, nch, 1
            x[~passive] = 0.0
            pidx = np.flatnonzero(passive)
            if pidx.size == 0:
                z = np.zeros(0)
                break
            z = _passive_solve(ctc, d, pidx)
            if z is None:
                return x, passive, nch, 2
        x[:] = 0.0
        x[pidx] = z
        w = d - ctc @ x
