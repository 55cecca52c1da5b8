"""Compiled inner loops for the solvers.

Everything numerically hot lives here as numba kernels operating on plain
arrays; the solver drivers marshal problems into this form and call kernels
between history checkpoints, so timing and objective evaluation stay outside
the measured loops. When numba is unavailable the decorators fall back to
plain Python (same semantics, much slower).

Matrix arguments come in twice: a dense pair (D, DT) used when `use_dense`
is set, and CSR/CSC index arrays otherwise. Primal geometry is a flat group
table (start, stop, kind, alpha, cap, exact_mass) with kind 0 = entropy,
1 = euclidean-nonnegative.

Status codes returned by chunk runners:
    0 ok, 1 backtracking stall, 2 positivity/domain violation, 3 cache drift.
"""

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except Exception:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap

    NUMBA_AVAILABLE = False

# counters indices
CNT_CLAMP = 0
CNT_SHRINKS = 1
CNT_SIGMA_POS = 2
CNT_LS_TRIALS = 3
CNT_REJECTS = 4
CNT_RESTARTS = 5
# float diagnostics indices
DIAG_SIGMA_MAX = 0
DIAG_DRIFT_MAX = 1

_FLOOR = 1e-300
_CLAMP = 700.0

STATUS_OK = 0
STATUS_STALL = 1
STATUS_DOMAIN = 2
STATUS_DRIFT = 3


# -- primitive pieces ---------------------------------------------------------


@njit(cache=True)
def _mv(use_dense, D, data, ind, ptr, x, out):
    """out = A @ x."""
    if use_dense:
        m, n = D.shape
        for i in range(m):
            acc = 0.0
            for j in range(n):
                acc += D[i, j] * x[j]
            out[i] = acc
    else:
        m = ptr.shape[0] - 1
        for i in range(m):
            acc = 0.0
            for p in range(ptr[i], ptr[i + 1]):
                acc += data[p] * x[ind[p]]
            out[i] = acc


@njit(cache=True)
def _rmv(use_dense, DT, data, ind, ptr, y, out):
    """out = A.T @ y (DT dense transpose, or CSC arrays of A)."""
    if use_dense:
        n, m = DT.shape
        for j in range(n):
            acc = 0.0
            for i in range(m):
                acc += DT[j, i] * y[i]
            out[j] = acc
    else:
        n = ptr.shape[0] - 1
        for j in range(n):
            acc = 0.0
            for p in range(ptr[j], ptr[j + 1]):
                acc += data[p] * y[ind[p]]
            out[j] = acc


@njit(cache=True)
def _mv_rows(use_dense, D, data, ind, ptr, x, out, r0, r1):
    """out[i] = (A @ x)[i] for rows r0..r1 (absolute positions in out)."""
    if use_dense:
        n = D.shape[1]
        for i in range(r0, r1):
            acc = 0.0
            for j in range(n):
                acc += D[i, j] * x[j]
            out[i] = acc
    else:
        for i in range(r0, r1):
            acc = 0.0
            for p in range(ptr[i], ptr[i + 1]):
                acc += data[p] * x[ind[p]]
            out[i] = acc


@njit(cache=True)
def _add_rows_t(use_dense, D, data, ind, ptr, dy, r0, r1, acc):
    """acc += A[r0:r1].T @ dy[r0:r1], with dy absolute-indexed."""
    if use_dense:
        n = D.shape[1]
        for i in range(r0, r1):
            d = dy[i]
            if d != 0.0:
                for j in range(n):
                    acc[j] += D[i, j] * d
    else:
        for i in range(r0, r1):
            d = dy[i]
            if d != 0.0:
                for p in range(ptr[i], ptr[i + 1]):
                    acc[ind[p]] += data[p] * d


@njit(cache=True)
def _primal_prox(x, aty, sp, gamma, g_start, g_stop, g_kind, g_alpha, g_cap,
                 g_exact, out, counters):
    """Grouped primal prox at base x with gradient sp - aty, step gamma.

    Entropy groups: multiplicative update then conditional rescale (cap) or
    unconditional rescale (exact mass). Euclidean groups: shifted clip at 0.
    """
    nclamp = 0
    for g in range(g_start.shape[0]):
        a = g_start[g]
        b = g_stop[g]
        al = g_alpha[g]
        if g_kind[g] == 0:
            total = 0.0
            for j in range(a, b):
                e = -gamma * (sp[j] - aty[j]) / al
                if e > _CLAMP:
                    e = _CLAMP
                    nclamp += 1
                elif e < -_CLAMP:
                    e = -_CLAMP
                    nclamp += 1
                v = x[j] * np.exp(e)
                if v < _FLOOR:
                    v = _FLOOR
                out[j] = v
                total += v
            if g_exact[g] > 0.0:
                f = g_exact[g] / total
                for j in range(a, b):
                    v = out[j] * f
                    out[j] = v if v > _FLOOR else _FLOOR
            elif g_cap[g] > 0.0 and total > g_cap[g]:
                f = g_cap[g] / total
                for j in range(a, b):
                    v = out[j] * f
                    out[j] = v if v > _FLOOR else _FLOOR
        else:
            for j in range(a, b):
                v = x[j] - gamma * (sp[j] - aty[j]) / al
                out[j] = v if v > 0.0 else 0.0
    counters[CNT_CLAMP] += nclamp


@njit(cache=True)
def _dual_q(y, ax, c, gamma, out, r0, r1):
    """Dual log-barrier prox rows r0..r1: positive root of v^2 + eta v = gamma c,
    eta = gamma*ax - y. Cancellation-free for either sign of eta."""
    for i in range(r0, r1):
        e = gamma * ax[i] - y[i]
        g4 = 4.0 * gamma * c[i]
        sq = np.sqrt(e * e + g4)
        if e > 0.0:
            v = g4 / (2.0 * (sq + e))
        else:
            v = 0.5 * (sq - e)
        if v < _FLOOR:
            v = _FLOOR
        out[i] = v


@njit(cache=True)
def _kl_term(p, q):
    """p*log(p/q) - p + q, evaluated cancellation-free near p == q:
    q * ((1+d)*log1p(d) - d) with d = (p - q)/q, which is ~ q d^2/2."""
    d = (p - q) / q
    return q * ((1.0 + d) * np.log1p(d) - d)


@njit(cache=True)
def _sigma_val(x, xh, xp, y, yh, yp, aty, atyh, ax, axh, gamma,
               g_start, g_stop, g_kind, g_alpha):
    """Acceptance quantity gamma<F(uh)-F(u), uh-u+> - V(u+,uh) - V(uh,u)
    under the aggregated distance sum_g alpha_g V_g + 0.5||.||_2^2."""
    ip = 0.0
    for j in range(x.shape[0]):
        ip += (aty[j] - atyh[j]) * (xh[j] - xp[j])
    for i in range(y.shape[0]):
        ip += (axh[i] - ax[i]) * (yh[i] - yp[i])
    v1 = 0.0
    v2 = 0.0
    for g in range(g_start.shape[0]):
        a = g_start[g]
        b = g_stop[g]
        al = g_alpha[g]
        acc1 = 0.0
        acc2 = 0.0
        if g_kind[g] == 0:
            for j in range(a, b):
                acc1 += _kl_term(xp[j], xh[j])
                acc2 += _kl_term(xh[j], x[j])
        else:
            for j in range(a, b):
                d1 = xp[j] - xh[j]
                acc1 += 0.5 * d1 * d1
                d2 = xh[j] - x[j]
                acc2 += 0.5 * d2 * d2
        v1 += al * acc1
        v2 += al * acc2
    for i in range(y.shape[0]):
        d1 = yp[i] - yh[i]
        v1 += 0.5 * d1 * d1
        d2 = yh[i] - y[i]
        v2 += 0.5 * d2 * d2
    gip = gamma * ip
    return gip - v1 - v2, abs(gip) + v1 + v2


@njit(cache=True)
def _cmp_candidate(gamma, use_dense, D, DT, csr_data, csr_ind, csr_ptr,
                   csc_data, csc_ind, csc_ptr, sp, c,
                   g_start, g_stop, g_kind, g_alpha, g_cap, g_exact,
                   x, y, xh, yh, xp, yp, aty, atyh, ax, axh, counters):
    """One full extragradient candidate: two F evaluations, four matvecs."""
    m = y.shape[0]
    _rmv(use_dense, DT, csc_data, csc_ind, csc_ptr, y, aty)
    _primal_prox(x, aty, sp, gamma, g_start, g_stop, g_kind, g_alpha, g_cap,
                 g_exact, xh, counters)
    _mv(use_dense, D, csr_data, csr_ind, csr_ptr, x, ax)
    _dual_q(y, ax, c, gamma, yh, 0, m)
    _rmv(use_dense, DT, csc_data, csc_ind, csc_ptr, yh, atyh)
    _primal_prox(x, atyh, sp, gamma, g_start, g_stop, g_kind, g_alpha, g_cap,
                 g_exact, xp, counters)
    _mv(use_dense, D, csr_data, csr_ind, csr_ptr, xh, axh)
    _dual_q(y, axh, c, gamma, yp, 0, m)


@njit(cache=True)
def _cmp_commit(gamma, x, y, xh, yh, xp, yp, xbar, ybar, wsum_io):
    w = wsum_io[0] + gamma
    fw = gamma / w
    wsum_io[0] = w
    ok = True
    for j in range(x.shape[0]):
        xbar[j] += fw * (xh[j] - xbar[j])
        x[j] = xp[j]
        if not x[j] > 0.0:
            ok = False
    for i in range(y.shape[0]):
        ybar[i] += fw * (yh[i] - ybar[i])
        y[i] = yp[i]
        if not y[i] > 0.0:
            ok = False
    return ok


# -- batch composite mirror prox ---------------------------------------------


@njit(cache=True)
def cmp_chunk(iters, use_dense, D, DT, csr_data, csr_ind, csr_ptr,
              csc_data, csc_ind, csc_ptr, sp, c,
              g_start, g_stop, g_kind, g_alpha, g_cap, g_exact,
              x, y, xbar, ybar, wsum_io,
              policy_kind, gamma_const, ls_gamma_io, ls_grow, ls_shrink,
              ls_max_shrinks, track_sigma, counters, fdiag):
    """Run `iters` CMP iterations in place. policy_kind: 0 fixed, 1 line search."""
    n = x.shape[0]
    m = y.shape[0]
    xh = np.empty(n)
    xp = np.empty(n)
    aty = np.empty(n)
    atyh = np.empty(n)
    yh = np.empty(m)
    yp = np.empty(m)
    ax = np.empty(m)
    axh = np.empty(m)
    for _ in range(iters):
        if policy_kind == 0:
            g = gamma_const
            _cmp_candidate(g, use_dense, D, DT, csr_data, csr_ind, csr_ptr,
                           csc_data, csc_ind, csc_ptr, sp, c,
                           g_start, g_stop, g_kind, g_alpha, g_cap, g_exact,
                           x, y, xh, yh, xp, yp, aty, atyh, ax, axh, counters)
            if track_sigma:
                sg, scale = _sigma_val(x, xh, xp, y, yh, yp, aty, atyh, ax,
                                       axh, g, g_start, g_stop, g_kind, g_alpha)
                if sg > fdiag[DIAG_SIGMA_MAX]:
                    fdiag[DIAG_SIGMA_MAX] = sg
                # violations are sigma beyond the roundoff floor of its own
                # evaluation; fixed-point wobble at ~1 ulp is not a violation
                tol = 1e-14 * scale
                if tol < 1e-30:
                    tol = 1e-30
                if sg > tol:
                    counters[CNT_SIGMA_POS] += 1
        else:
            g = ls_gamma_io[0]
            shrinks = 0
            while True:
                counters[CNT_LS_TRIALS] += 1
                _cmp_candidate(g, use_dense, D, DT, csr_data, csr_ind, csr_ptr,
                               csc_data, csc_ind, csc_ptr, sp, c,
                               g_start, g_stop, g_kind, g_alpha, g_cap, g_exact,
                               x, y, xh, yh, xp, yp, aty, atyh, ax, axh, counters)
                sg, scale = _sigma_val(x, xh, xp, y, yh, yp, aty, atyh, ax,
                                       axh, g, g_start, g_stop, g_kind, g_alpha)
                # accept at the roundoff floor of sigma's own evaluation, so
                # fixed-point noise (~1 ulp wobble) cannot stall the search
                tol = 1e-14 * scale
                if tol < 1e-30:
                    tol = 1e-30
                if sg <= tol:
                    ls_gamma_io[0] = g * ls_grow
                    break
                g *= ls_shrink
                shrinks += 1
                counters[CNT_SHRINKS] += 1
                if shrinks > ls_max_shrinks:
                    return STATUS_STALL
            if sg > fdiag[DIAG_SIGMA_MAX]:
                fdiag[DIAG_SIGMA_MAX] = sg
        if not _cmp_commit(g, x, y, xh, yh, xp, yp, xbar, ybar, wsum_io):
            return STATUS_DOMAIN
    return STATUS_OK


# -- randomized block variants -------------------------------------------------


@njit(cache=True)
def _sm64_next(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _rand_below(state, nblocks):
    """Uniform block index via modulo-rejection (exactly uniform)."""
    n = np.uint64(nblocks)
    rem = (np.uint64(0) - n) % n  # 2^64 mod n
    while True:
        state, w = _sm64_next(state)
        if rem == np.uint64(0) or w < (np.uint64(0) - rem):
            return state, np.int64(w % n)


@njit(cache=True)
def _flush_dual_avg(acc_y, last_s, ofs, y, wsum):
    for k in range(last_s.shape[0]):
        dw = wsum - last_s[k]
        if dw > 0.0:
            for i in range(ofs[k], ofs[k + 1]):
                acc_y[i] += dw * y[i]
            last_s[k] = wsum


@njit(cache=True)
def rb_chunk(max_new_iters, pass_target, use_dense, D, DT,
             csr_data, csr_ind, csr_ptr, csc_data, csc_ind, csc_ptr, sp, c,
             g_start, g_stop, g_kind, g_alpha, g_cap, g_exact,
             ofs, x, y, xbar, acc_y, last_s, wsum_io, aty,
             gamma_const, rng_io, iter_io, pass_io, block_counts,
             recompute_every, drift_tol, counters, fdiag):
    """Partially randomized block mirror prox: full primal update each step,
    one random dual block updated, A^T y maintained incrementally.

    With a single block this walks the exact op-for-op CMP iteration, so the
    b=1 trajectory is bitwise identical to cmp_chunk at equal stepsizes.
    Dual ergodic averages are accumulated lazily per block (acc_y/last_s);
    call _flush_dual_avg before reading them.
    """
    n = x.shape[0]
    m = y.shape[0]
    b = ofs.shape[0] - 1
    xh = np.empty(n)
    xp = np.empty(n)
    aty2 = np.empty(n)
    atyh = np.empty(n)
    yh = np.empty(m)
    yp = np.empty(m)
    ax = np.empty(m)
    axh = np.empty(m)
    dy = np.empty(m)
    state = rng_io[0]
    done = 0
    g = gamma_const
    while done < max_new_iters and pass_io[0] < pass_target:
        if b == 1:
            _cmp_candidate(g, use_dense, D, DT, csr_data, csr_ind, csr_ptr,
                           csc_data, csc_ind, csc_ptr, sp, c,
                           g_start, g_stop, g_kind, g_alpha, g_cap, g_exact,
                           x, y, xh, yh, xp, yp, aty, atyh, ax, axh, counters)
            if not _cmp_commit(g, x, y, xh, yh, xp, yp, xbar, acc_y, wsum_io):
                rng_io[0] = state
                return STATUS_DOMAIN
            last_s[0] = wsum_io[0]
            block_counts[0] += 1
            pass_io[0] += 1.0
            iter_io[0] += 1
            done += 1
            continue
        state, k = _rand_below(state, b)
        r0 = ofs[k]
        r1 = ofs[k + 1]
        block_counts[k] += 1
        # extragradient half step: full primal, selected dual block
        _primal_prox(x, aty, sp, g, g_start, g_stop, g_kind, g_alpha, g_cap,
                     g_exact, xh, counters)
        _mv_rows(use_dense, D, csr_data, csr_ind, csr_ptr, x, ax, r0, r1)
        _dual_q(y, ax, c, g, yh, r0, r1)
        # A^T yhat = cached A^T y + block correction
        for j in range(n):
            aty2[j] = aty[j]
        for i in range(r0, r1):
            dy[i] = yh[i] - y[i]
        _add_rows_t(use_dense, D, csr_data, csr_ind, csr_ptr, dy, r0, r1, aty2)
        # full step
        _primal_prox(x, aty2, sp, g, g_start, g_stop, g_kind, g_alpha, g_cap,
                     g_exact, xp, counters)
        _mv_rows(use_dense, D, csr_data, csr_ind, csr_ptr, xh, axh, r0, r1)
        _dual_q(y, axh, c, g, yp, r0, r1)
        # averages: incremental for x, lazy per-block for y
        w0 = wsum_io[0]
        w = w0 + g
        fw = g / w
        for j in range(n):
            xbar[j] += fw * (xh[j] - xbar[j])
        dwk = w0 - last_s[k]
        for i in range(r0, r1):
            acc_y[i] += dwk * y[i] + g * yh[i]
        last_s[k] = w
        wsum_io[0] = w
        # commit x and the selected dual block; keep cached A^T y current
        ok = True
        for j in range(n):
            x[j] = xp[j]
            if not x[j] > 0.0:
                ok = False
        for i in range(r0, r1):
            dy[i] = yp[i] - y[i]
            y[i] = yp[i]
            if not y[i] > 0.0:
                ok = False
        _add_rows_t(use_dense, D, csr_data, csr_ind, csr_ptr, dy, r0, r1, aty)
        if not ok:
            rng_io[0] = state
            return STATUS_DOMAIN
        iter_io[0] += 1
        done += 1
        pass_io[0] += (n + (r1 - r0)) / (n + m)
        if iter_io[0] % recompute_every == 0:
            _rmv(use_dense, DT, csc_data, csc_ind, csc_ptr, y, atyh)
            drift = 0.0
            for j in range(n):
                d = abs(aty[j] - atyh[j])
                if d > drift:
                    drift = d
                aty[j] = atyh[j]
            if drift > fdiag[DIAG_DRIFT_MAX]:
                fdiag[DIAG_DRIFT_MAX] = drift
            if drift > drift_tol:
                rng_io[0] = state
                return STATUS_DRIFT
    rng_io[0] = state
    return STATUS_OK


@njit(cache=True)
def fullrb_chunk(max_new_iters, pass_target, use_dense, D, DT,
                 csr_data, csr_ind, csr_ptr, csc_data, csc_ind, csc_ptr, sp, c,
                 g_start, g_stop, g_kind, g_alpha, g_cap, g_exact,
                 ofs, x, y, acc_x, last_sx, acc_y, last_s, wsum_io, aty,
                 gamma_const, rng_io, iter_io, pass_io, block_counts,
                 recompute_every, drift_tol, counters, fdiag):
    """Fully randomized block mirror prox: one block per iteration, uniformly
    over {primal} + dual blocks. For the bilinear coupling an isolated block's
    operator component does not move during its own half step, so the second
    prox equals the first and is reused instead of recomputed.

    Both ergodic averages are lazy; flush acc_x/acc_y before reading.
    """
    n = x.shape[0]
    m = y.shape[0]
    b = ofs.shape[0] - 1
    xh = np.empty(n)
    yh = np.empty(m)
    ax = np.empty(m)
    dy = np.empty(m)
    atyh = np.empty(n)
    state = rng_io[0]
    done = 0
    g = gamma_const
    while done < max_new_iters and pass_io[0] < pass_target:
        state, k = _rand_below(state, b + 1)
        block_counts[k] += 1
        w0 = wsum_io[0]
        w = w0 + g
        if k == 0:
            _primal_prox(x, aty, sp, g, g_start, g_stop, g_kind, g_alpha,
                         g_cap, g_exact, xh, counters)
            dwx = w0 - last_sx[0]
            ok = True
            for j in range(n):
                acc_x[j] += dwx * x[j] + g * xh[j]
                x[j] = xh[j]
                if not x[j] > 0.0:
                    ok = False
            last_sx[0] = w
            if not ok:
                rng_io[0] = state
                return STATUS_DOMAIN
            pass_io[0] += n / (n + m)
        else:
            r0 = ofs[k - 1]
            r1 = ofs[k]
            _mv_rows(use_dense, D, csr_data, csr_ind, csr_ptr, x, ax, r0, r1)
            _dual_q(y, ax, c, g, yh, r0, r1)
            dwk = w0 - last_s[k - 1]
            ok = True
            for i in range(r0, r1):
                acc_y[i] += dwk * y[i] + g * yh[i]
                dy[i] = yh[i] - y[i]
                y[i] = yh[i]
                if not y[i] > 0.0:
                    ok = False
            last_s[k - 1] = w
            _add_rows_t(use_dense, D, csr_data, csr_ind, csr_ptr, dy, r0, r1, aty)
            if not ok:
                rng_io[0] = state
                return STATUS_DOMAIN
            pass_io[0] += (r1 - r0) / (n + m)
        wsum_io[0] = w
        iter_io[0] += 1
        done += 1
        if iter_io[0] % recompute_every == 0:
            _rmv(use_dense, DT, csc_data, csc_ind, csc_ptr, y, atyh)
            drift = 0.0
            for j in range(n):
                d = abs(aty[j] - atyh[j])
                if d > drift:
                    drift = d
                aty[j] = atyh[j]
            if drift > fdiag[DIAG_DRIFT_MAX]:
                fdiag[DIAG_DRIFT_MAX] = drift
            if drift > drift_tol:
                rng_io[0] = state
                return STATUS_DRIFT
    rng_io[0] = state
    return STATUS_OK


# -- composite mirror descent ---------------------------------------------------


@njit(cache=True)
def md_chunk(iters, use_dense, D, DT, csr_data, csr_ind, csr_ptr,
             csc_data, csc_ind, csc_ptr, sp, c,
             g_start, g_stop, g_kind, g_alpha, g_cap, g_exact,
             x, gamma0, t_io, best_f_io, best_x, counters):
    """Composite mirror descent, stepsize gamma0/sqrt(t), best-so-far tracking.

    Evaluates f(x^t) before stepping; the caller folds in the final point.
    """
    n = x.shape[0]
    m = c.shape[0]
    ax = np.empty(m)
    v = np.empty(m)
    atv = np.empty(n)
    xn = np.empty(n)
    t = t_io[0]
    for _ in range(iters):
        t += 1
        _mv(use_dense, D, csr_data, csr_ind, csr_ptr, x, ax)
        f = 0.0
        for i in range(m):
            if not ax[i] > 0.0:
                t_io[0] = t
                return STATUS_DOMAIN
            f -= c[i] * np.log(ax[i])
            v[i] = c[i] / ax[i]
        for j in range(n):
            f += sp[j] * x[j]
        if f < best_f_io[0]:
            best_f_io[0] = f
            for j in range(n):
                best_x[j] = x[j]
        _rmv(use_dense, DT, csc_data, csc_ind, csc_ptr, v, atv)
        gt = gamma0 / np.sqrt(t)
        _primal_prox(x, atv, sp, gt, g_start, g_stop, g_kind, g_alpha, g_cap,
                     g_exact, xn, counters)
        for j in range(n):
            x[j] = xn[j]
    t_io[0] = t
    return STATUS_OK
