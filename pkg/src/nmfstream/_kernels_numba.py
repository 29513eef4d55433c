"""Numba-compiled implementations of the hot kernels.

Same signatures and semantics as ``_kernels_numpy``; selected by default
when numba imports cleanly (see ``backend``). All kernels are nopython,
single-threaded and cached on disk.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def block_cholesky(blocks):
    nb, k, _ = blocks.shape
    out = np.zeros_like(blocks)
    for b in range(nb):
        for j in range(k):
            s = blocks[b, j, j]
            for p in range(j):
                s -= out[b, j, p] * out[b, j, p]
            if s <= 0.0:
                return out, b
            out[b, j, j] = np.sqrt(s)
            for i in range(j + 1, k):
                t = blocks[b, i, j]
                for p in range(j):
                    t -= out[b, i, p] * out[b, j, p]
                out[b, i, j] = t / out[b, j, j]
    return out, -1


@njit(cache=True)
def block_solve_lower(l, b):
    nb, k, r = b.shape
    z = np.empty_like(b)
    for t in range(nb):
        for c in range(r):
            for i in range(k):
                s = b[t, i, c]
                for p in range(i):
                    s -= l[t, i, p] * z[t, p, c]
                z[t, i, c] = s / l[t, i, i]
    return z


@njit(cache=True)
def block_solve_lower_t(l, b):
    nb, k, r = b.shape
    z = np.empty_like(b)
    for t in range(nb):
        for c in range(r):
            for i in range(k - 1, -1, -1):
                s = b[t, i, c]
                for p in range(i + 1, k):
                    s -= l[t, p, i] * z[t, p, c]
                z[t, i, c] = s / l[t, i, i]
    return z


@njit(cache=True)
def _solve_lower_cols(l_t, rhs, out):
    # out <- L^{-1} rhs for one (k, m) rhs block
    k, m = rhs.shape
    for c in range(m):
        for i in range(k):
            s = rhs[i, c]
            for p in range(i):
                s -= l_t[i, p] * out[p, c]
            out[i, c] = s / l_t[i, i]


@njit(cache=True)
def schur_reduce(x_rows, y_cols, l, h, resid, full):
    n, k = x_rows.shape
    m = y_cols.shape[0]
    s_acc = np.zeros((m * k, m * k))
    r_acc = np.zeros((m, k))
    yt = np.empty((k, m))
    for j in range(m):
        for p in range(k):
            yt[p, j] = y_cols[j, p]
    w = np.empty((k, m))
    if not full:
        tj = np.empty(m)
        for i in range(n):
            _solve_lower_cols(l[i], yt, w)
            u = x_rows[i]
            hi = h[i]
            for j in range(m):
                s = 0.0
                for p in range(k):
                    s += w[p, j] * hi[p]
                tj[j] = s
            for j in range(m):
                for p in range(k):
                    r_acc[j, p] += tj[j] * u[p]
            for j in range(m):
                for lcol in range(m):
                    dot = 0.0
                    for p in range(k):
                        dot += w[p, j] * w[p, lcol]
                    for p in range(k):
                        base_j = j * k + p
                        up = dot * u[p]
                        for q in range(k):
                            s_acc[base_j, lcol * k + q] += up * u[q]
    else:
        pinv = np.empty((k, k))
        eye = np.eye(k)
        g = np.empty((m, k, k))
        for i in range(n):
            li = l[i]
            _solve_lower_cols(li, yt, w)
            # pinv = L^{-T}: back substitution on identity columns
            for c in range(k):
                for row in range(k - 1, -1, -1):
                    s = eye[row, c]
                    for p in range(row + 1, k):
                        s -= li[p, row] * pinv[p, c]
                    pinv[row, c] = s / li[row, row]
            u = x_rows[i]
            hi = h[i]
            for j in range(m):
                f = resid[i, j]
                for p in range(k):
                    for q in range(k):
                        g[j, p, q] = u[p] * w[q, j] + f * pinv[p, q]
            for j in range(m):
                for p in range(k):
                    s = 0.0
                    for q in range(k):
                        s += g[j, p, q] * hi[q]
                    r_acc[j, p] += s
            for j in range(m):
                for lcol in range(m):
                    for p in range(k):
                        base_j = j * k + p
                        for q in range(k):
                            dot = 0.0
                            for c in range(k):
                                dot += g[j, p, c] * g[lcol, q, c]
                            s_acc[base_j, lcol * k + q] += dot
    return s_acc, r_acc


@njit(cache=True)
def rhs_reduce(x_rows, y_cols, l, h, resid, full):
    n, k = x_rows.shape
    m = y_cols.shape[0]
    r_acc = np.zeros((m, k))
    yt = np.empty((k, m))
    for j in range(m):
        for p in range(k):
            yt[p, j] = y_cols[j, p]
    w = np.empty((k, m))
    g = np.empty(k)
    for i in range(n):
        li = l[i]
        _solve_lower_cols(li, yt, w)
        u = x_rows[i]
        hi = h[i]
        for j in range(m):
            s = 0.0
            for p in range(k):
                s += w[p, j] * hi[p]
            for p in range(k):
                r_acc[j, p] += s * u[p]
        if full:
            for row in range(k - 1, -1, -1):
                s = hi[row]
                for p in range(row + 1, k):
                    s -= li[p, row] * g[p]
                g[row] = s / li[row, row]
            for j in range(m):
                f = resid[i, j]
                for p in range(k):
                    r_acc[j, p] += f * g[p]
    return r_acc


@njit(cache=True)
def back_substitute(x_rows, y_cols, l, h, dy_rows, resid, full):
    n, k = x_rows.shape
    m = y_cols.shape[0]
    dx = np.empty((n, k))
    yt = np.empty((k, m))
    for j in range(m):
        for p in range(k):
            yt[p, j] = y_cols[j, p]
    w = np.empty((k, m))
    q = np.empty(k)
    extra = np.empty(k)
    fdy = np.empty(k)
    for i in range(n):
        li = l[i]
        _solve_lower_cols(li, yt, w)
        u = x_rows[i]
        for p in range(k):
            q[p] = 0.0
        for j in range(m):
            t = 0.0
            for p in range(k):
                t += u[p] * dy_rows[j, p]
            for p in range(k):
                q[p] += w[p, j] * t
        if full:
            for p in range(k):
                s = 0.0
                for j in range(m):
                    s += resid[i, j] * dy_rows[j, p]
                fdy[p] = s
            for row in range(k):
                s = fdy[row]
                for p in range(row):
                    s -= li[row, p] * extra[p]
                extra[row] = s / li[row, row]
            for p in range(k):
                q[p] += extra[p]
        for row in range(k - 1, -1, -1):
            s = h[i, row] - q[row]
            for p in range(row + 1, k):
                s -= li[p, row] * dx[i, p]
            dx[i, row] = s / li[row, row]
    return dx


@njit(cache=True)
def _passive_factor(ctc, pidx, np_, a_buf, l_buf):
    for a in range(np_):
        for b in range(np_):
            a_buf[a, b] = ctc[pidx[a], pidx[b]]
    for j in range(np_):
        s = a_buf[j, j]
        for p in range(j):
            s -= l_buf[j, p] * l_buf[j, p]
        if s <= 0.0:
            return False
        l_buf[j, j] = np.sqrt(s)
        for i in range(j + 1, np_):
            t = a_buf[i, j]
            for p in range(j):
                t -= l_buf[i, p] * l_buf[j, p]
            l_buf[i, j] = t / l_buf[j, j]
    return True


@njit(cache=True)
def _chol_solve_small(l_buf, b, np_, z):
    for i in range(np_):
        s = b[i]
        for p in range(i):
            s -= l_buf[i, p] * z[p]
        z[i] = s / l_buf[i, i]
    for i in range(np_ - 1, -1, -1):
        s = z[i]
        for p in range(i + 1, np_):
            s -= l_buf[p, i] * z[p]
        z[i] = s / l_buf[i, i]


@njit(cache=True)
def _passive_solve_refined(ctc, d, pidx, np_, a_buf, l_buf, z, rbuf, dz):
    for a in range(np_):
        rbuf[a] = d[pidx[a]]
    _chol_solve_small(l_buf, rbuf, np_, z)
    # one refinement pass keeps the passive dual residual near machine level
    for a in range(np_):
        s = d[pidx[a]]
        for b in range(np_):
            s -= a_buf[a, b] * z[b]
        rbuf[a] = s
    _chol_solve_small(l_buf, rbuf, np_, dz)
    for a in range(np_):
        z[a] += dz[a]


@njit(cache=True)
def nnls_batch(ctc, ctb, btb, warm_passive, warm_mode, tol, max_changes):
    nrhs, k = ctb.shape
    x_out = np.zeros((nrhs, k))
    p_out = np.zeros((nrhs, k), dtype=np.bool_)
    changes_out = np.zeros(nrhs, dtype=np.int64)
    resid2 = np.zeros(nrhs)
    status = np.zeros(nrhs, dtype=np.int8)

    passive = np.zeros(k, dtype=np.bool_)
    prev_passive = np.zeros(k, dtype=np.bool_)
    x = np.zeros(k)
    w = np.zeros(k)
    z = np.zeros(k)
    rbuf = np.zeros(k)
    dz = np.zeros(k)
    pidx = np.zeros(k, dtype=np.int64)
    a_buf = np.zeros((k, k))
    l_buf = np.zeros((k, k))
    cache_sig = np.zeros(k, dtype=np.bool_)
    cache_np = 0
    cache_valid = False

    for t in range(nrhs):
        d = ctb[t]
        tol_t = tol[t]
        solved = False
        nch = 0

        # warm attempt: accept the seed set outright when it already solves
        use_seed = False
        if warm_mode == 2:
            for j in range(k):
                passive[j] = warm_passive[t, j]
            use_seed = True
        elif warm_mode == 1 and t > 0:
            for j in range(k):
                passive[j] = prev_passive[j]
            use_seed = True

        if use_seed:
            np_ = 0
            for j in range(k):
                if passive[j]:
                    pidx[np_] = j
                    np_ += 1
            if np_ == 0:
                ok = True
                for j in range(k):
                    if d[j] > tol_t:
                        ok = False
                        break
                if ok:
                    for j in range(k):
                        x[j] = 0.0
                    solved = True
            else:
                same = cache_valid
                if same:
                    for j in range(k):
                        if cache_sig[j] != passive[j]:
                            same = False
                            break
                ok = True
                if not same:
                    ok = _passive_factor(ctc, pidx, np_, a_buf, l_buf)
                    if ok:
                        for j in range(k):
                            cache_sig[j] = passive[j]
                        cache_np = np_
                        cache_valid = True
                    else:
                        cache_valid = False
                if ok:
                    _passive_solve_refined(ctc, d, pidx, np_, a_buf, l_buf, z, rbuf, dz)
                    feas = True
                    for a in range(np_):
                        if z[a] < 0.0:
                            feas = False
                            break
                    if feas:
                        for j in range(k):
                            x[j] = 0.0
                        for a in range(np_):
                            x[pidx[a]] = z[a]
                        dual_ok = True
                        for j in range(k):
                            s = d[j]
                            for p in range(k):
                                s -= ctc[j, p] * x[p]
                            w[j] = s
                            if passive[j]:
                                if abs(s) > tol_t:
                                    dual_ok = False
                                    break
                            elif s > tol_t:
                                dual_ok = False
                                break
                        solved = dual_ok

        if not solved:
            # cold start from zero with an empty passive set
            for j in range(k):
                passive[j] = False
                x[j] = 0.0
                w[j] = d[j]
            st = 0
            while True:
                jmax = -1
                wmax = tol_t
                for j in range(k):
                    if not passive[j] and w[j] > wmax:
                        wmax = w[j]
                        jmax = j
                if jmax < 0:
                    break
                passive[jmax] = True
                nch += 1
                if nch > max_changes:
                    st = 1
                    break
                inner_failed = False
                while True:
                    np_ = 0
                    for j in range(k):
                        if passive[j]:
                            pidx[np_] = j
                            np_ += 1
                    if np_ == 0:
                        break
                    ok = _passive_factor(ctc, pidx, np_, a_buf, l_buf)
                    if not ok:
                        cache_valid = False
                        st = 2
                        inner_failed = True
                        break
                    for j in range(k):
                        cache_sig[j] = passive[j]
                    cache_np = np_
                    cache_valid = True
                    _passive_solve_refined(ctc, d, pidx, np_, a_buf, l_buf, z, rbuf, dz)
                    all_pos = True
                    for a in range(np_):
                        if z[a] <= 0.0:
                            all_pos = False
                            break
                    if all_pos:
                        for j in range(k):
                            x[j] = 0.0
                        for a in range(np_):
                            x[pidx[a]] = z[a]
                        break
                    # blocking step: move to the feasibility boundary, drop
                    # every passive index that reaches zero
                    alpha = 1.0
                    for a in range(np_):
                        if z[a] <= 0.0:
                            xa = x[pidx[a]]
                            ratio = xa / (xa - z[a])
                            if ratio < alpha:
                                alpha = ratio
                    ndrop = 0
                    for a in range(np_):
                        j = pidx[a]
                        xa = x[j]
                        newx = xa + alpha * (z[a] - xa)
                        if z[a] <= 0.0 and xa / (xa - z[a]) <= alpha:
                            x[j] = 0.0
                            passive[j] = False
                            ndrop += 1
                        else:
                            x[j] = newx if newx > 0.0 else 0.0
                    nch += ndrop
                    if nch > max_changes:
                        st = 1
                        inner_failed = True
                        break
                if st != 0:
                    break
                for j in range(k):
                    s = d[j]
                    for p in range(k):
                        s -= ctc[j, p] * x[p]
                    w[j] = s
            status[t] = st

        for j in range(k):
            x_out[t, j] = x[j]
            p_out[t, j] = passive[j]
            prev_passive[j] = passive[j]
        changes_out[t] = nch
        r2 = btb[t]
        for j in range(k):
            r2 -= 2.0 * x[j] * d[j]
        for j in range(k):
            s = 0.0
            for p in range(k):
                s += ctc[j, p] * x[p]
            r2 += x[j] * s
        resid2[t] = r2 if r2 > 0.0 else 0.0
    return x_out, p_out, changes_out, resid2, status
