"""Compiled kernels: banded Cholesky with rank-1 modification and the event loop.

Band storage: ``Lb[i, d] == L[i, i - d]`` for ``d = 0 .. bw``.
Boundary dof codes follow :mod:`fishnet.mesh` (-1 fixed, -2 prescribed).
"""
import math

import numpy as np
from numba import njit

# run_events status codes
STOP_DROP = 0
STOP_SEPARATED = 1
STOP_BUDGET = 2
STOP_DEGENERATE = 3
STOP_NUMERIC = 4

MODE_UPDATE = 0
MODE_REFACTOR = 1
MODE_CHECK = 2

# downdate pivot alarm: refactor when a diagonal would shrink below this fraction
PIVOT_ALARM = 1e-10


@njit(cache=True, nogil=True)
def band_factor(Ab, n, bw):
    """In-place banded Cholesky.  Returns False on a non-positive pivot."""
    for j in range(n):
        s = Ab[j, 0]
        for d in range(1, min(j, bw) + 1):
            s -= Ab[j, d] * Ab[j, d]
        if not s > 0.0:
            return False
        ljj = math.sqrt(s)
        Ab[j, 0] = ljj
        for i in range(j + 1, min(n, j + bw + 1)):
            t = Ab[i, i - j]
            for k in range(max(0, i - bw), j):
                t -= Ab[i, i - k] * Ab[j, j - k]
            Ab[i, i - j] = t / ljj
    return True


@njit(cache=True, nogil=True)
def band_solve(Lb, x, n, bw, start):
    """Solve L L^T y = x in place; entries of x before ``start`` must be zero."""
    for i in range(start, n):
        t = x[i]
        for k in range(max(start, i - bw), i):
            t -= Lb[i, i - k] * x[k]
        x[i] = t / Lb[i, 0]
    for i in range(n - 1, -1, -1):
        t = x[i]
        for k in range(i + 1, min(n, i + bw + 1)):
            t -= Lb[k, k - i] * x[k]
        x[i] = t / Lb[i, 0]


@njit(cache=True, nogil=True)
def band_rank1(Lb, x, sign, n, bw, start):
    """Replace L by the factor of L L^T + sign * x x^T (x is overwritten).

    Returns False when a downdate pivot trips the alarm; Lb is then invalid.
    """
    for k in range(start, n):
        xk = x[k]
        if xk == 0.0:
            continue
        lkk = Lb[k, 0]
        r2 = lkk * lkk + sign * xk * xk
        if r2 <= PIVOT_ALARM * lkk * lkk:
            return False
        r = math.sqrt(r2)
        c = r / lkk
        s = xk / lkk
        Lb[k, 0] = r
        for i in range(k + 1, min(n, k + bw + 1)):
            lik = (Lb[i, i - k] + sign * s * x[i]) / c
            x[i] = c * x[i] - s * lik
            Lb[i, i - k] = lik
    return True


@njit(cache=True, nogil=True)
def band_assemble(Ab, f, a_dof, b_dof, stiff, pinned, n):
    """Fill lower band ``Ab`` and load ``f`` for a unit prescribed displacement."""
    Ab[:, :] = 0.0
    f[:] = 0.0
    for l in range(len(stiff)):
        kk = stiff[l]
        if kk == 0.0:
            continue
        a = a_dof[l]
        b = b_dof[l]
        if (a >= 0 and pinned[a]) or (b >= 0 and pinned[b]):
            continue
        if a >= 0:
            Ab[a, 0] += kk
        if b >= 0:
            Ab[b, 0] += kk
        if a >= 0 and b >= 0:
            if a > b:
                Ab[a, a - b] -= kk
            else:
                Ab[b, b - a] -= kk
        if b == -2 and a >= 0:
            f[a] += kk
    for d in range(n):
        if pinned[d]:
            Ab[d, 0] = 1.0


@njit(cache=True, nogil=True)
def _dof_value(u, d):
    if d >= 0:
        return u[d]
    if d == -2:
        return 1.0
    return 0.0


@njit(cache=True, nogil=True)
def connectivity(node_dof, node_ptr, node_links, a_node, b_node, alive):
    """Pin free dofs cut off from both ends; report whether the ends are separated.

    Returns (pinned, separated).
    """
    n_nodes = len(node_dof)
    pinned_dofs = 0
    for d in node_dof:
        if d >= 0:
            pinned_dofs += 1
    reach_left = np.zeros(n_nodes, np.bool_)
    reach_right = np.zeros(n_nodes, np.bool_)
    stack = np.empty(n_nodes, np.int64)
    for side in range(2):
        code = -1 if side == 0 else -2
        reach = reach_left if side == 0 else reach_right
        top = 0
        for v in range(n_nodes):
            if node_dof[v] == code:
                reach[v] = True
                stack[top] = v
                top += 1
        while top > 0:
            top -= 1
            v = stack[top]
            for p in range(node_ptr[v], node_ptr[v + 1]):
                l = node_links[p]
                if not alive[l]:
                    continue
                w = b_node[l] if a_node[l] == v else a_node[l]
                if not reach[w]:
                    reach[w] = True
                    stack[top] = w
                    top += 1
    separated = True
    for v in range(n_nodes):
        if node_dof[v] == -2 and reach_left[v]:
            separated = False
            break
    pinned = np.zeros(pinned_dofs, np.bool_)
    for v in range(n_nodes):
        d = node_dof[v]
        if d >= 0 and not reach_left[v] and not reach_right[v]:
            pinned[d] = True
    return pinned, separated


@njit(cache=True, nogil=True)
def secant(j, J, k0, kt_abs):
    return (J - j) * k0 * kt_abs / (J * kt_abs + j * k0)


@njit(cache=True, nogil=True)
def _refresh(Ab, f, u, a_dof, b_dof, stiff, pinned, n, bw):
    band_assemble(Ab, f, a_dof, b_dof, stiff, pinned, n)
    if not band_factor(Ab, n, bw):
        return False
    u[:] = f
    band_solve(Ab, u, n, bw, 0)
    return True


@njit(cache=True, nogil=True)
def run_events(a_dof, b_dof, a_node, b_node, node_dof, node_ptr, node_links,
               n, bw, gap_width, area, k0, kt_abs, J, strengths,
               term_frac, max_events, refactor_every, mode):
    """Sequentially linear event loop for one replica.

    Each event solves the unit-end-displacement problem with the current
    secant stiffnesses, scales it until exactly one link reaches its residual
    strength and applies one softening jump to that link.

    Returns
    -------
    ev_k, ev_sigma, ev_link, ev_localized : arrays of length ``n_events``
    status : int (STOP_* code)
    counters : int64[3] = (factorizations, rank-1 modifications, update fallbacks)
    check_err : float64 array, per-event relative gap to a fresh solve (MODE_CHECK only)
    """
    N = len(strengths)
    ev_k = np.empty(max_events, np.int64)
    ev_sigma = np.empty(max_events, np.float64)
    ev_link = np.empty(max_events, np.int64)
    ev_loc = np.empty(max_events, np.bool_)
    check_err = np.zeros(max_events if mode == MODE_CHECK else 0, np.float64)
    counters = np.zeros(3, np.int64)

    jumps = np.zeros(N, np.int64)
    stiff = np.full(N, k0)
    resid = strengths.copy()
    alive = np.ones(N, np.bool_)
    link_off = np.zeros(N, np.bool_)
    pinned = np.zeros(n, np.bool_)
    elong = np.zeros(N)

    Ab = np.zeros((n, bw + 1))
    f = np.zeros(n)
    u = np.zeros(n)
    z = np.zeros(n)
    x = np.zeros(n)
    Ab_chk = np.zeros((n, bw + 1)) if mode == MODE_CHECK else np.zeros((0, 0))
    f_chk = np.zeros(n)
    u_chk = np.zeros(n)

    if not _refresh(Ab, f, u, a_dof, b_dof, stiff, pinned, n, bw):
        return ev_k[:0], ev_sigma[:0], ev_link[:0], ev_loc[:0], STOP_NUMERIC, counters, check_err[:0]
    counters[0] += 1
    since_factor = 0

    k_distinct = 0
    sigma_max = -1.0
    peak = -1
    status = STOP_BUDGET
    n_ev = 0
    while n_ev < max_events:
        # unit-displacement link elongations, reaction and critical link
        best = np.inf
        crit = -1
        reaction = 0.0
        for l in range(N):
            if link_off[l]:
                elong[l] = 0.0
                continue
            e = _dof_value(u, b_dof[l]) - _dof_value(u, a_dof[l])
            elong[l] = e
            if b_dof[l] == -2:
                reaction += stiff[l] * e
            if alive[l]:
                sig = stiff[l] * e / area
                if sig > 0.0:
                    r = resid[l] / sig
                    if r < best:
                        best = r
                        crit = l
        if crit < 0:
            status = STOP_DEGENERATE
            break

        sigma_n = best * reaction / (gap_width * area)
        localized = jumps[crit] >= 1
        if not localized:
            k_distinct += 1
        ev_k[n_ev] = k_distinct
        ev_sigma[n_ev] = sigma_n
        ev_link[n_ev] = crit
        ev_loc[n_ev] = localized
        n_ev += 1
        if sigma_n > sigma_max:
            sigma_max = sigma_n
            peak = n_ev - 1
        elif sigma_n < term_frac * sigma_max:
            status = STOP_DROP
            break

        # one softening jump on the critical link
        jumps[crit] += 1
        jc = jumps[crit]
        k_old = stiff[crit]
        k_new = secant(jc, J, k0, kt_abs)
        resid[crit] = strengths[crit] * (J - jc) / J
        e_old = elong[crit]
        if jc >= J:
            k_new = 0.0
            alive[crit] = False
        stiff[crit] = k_new
        dk = k_new - k_old

        if jc >= J:
            link_off[crit] = True
            pinned, separated = connectivity(node_dof, node_ptr, node_links, a_node, b_node, alive)
            if separated:
                status = STOP_SEPARATED
                break
            for l in range(N):
                if alive[l]:
                    a = a_dof[l]
                    b = b_dof[l]
                    link_off[l] = (a >= 0 and pinned[a]) or (b >= 0 and pinned[b])
            fresh = True
        else:
            fresh = mode == MODE_REFACTOR or since_factor >= refactor_every

        if not fresh:
            a = a_dof[crit]
            b = b_dof[crit]
            x[:] = 0.0
            z[:] = 0.0
            start = n
            w = math.sqrt(-dk)
            if a >= 0:
                x[a] = -w
                z[a] = -1.0
                start = a
            if b >= 0:
                x[b] = w
                z[b] = 1.0
                start = min(start, b)
            if start < n and band_rank1(Ab, x, -1.0, n, bw, start):
                counters[1] += 1
                since_factor += 1
                # u_new = u_old - dk * e_old * K_new^{-1} g^T
                band_solve(Ab, z, n, bw, start)
                scale = -dk * e_old
                for i in range(n):
                    u[i] += scale * z[i]
            else:
                counters[2] += 1
                fresh = True

        if fresh:
            if not _refresh(Ab, f, u, a_dof, b_dof, stiff, pinned, n, bw):
                status = STOP_NUMERIC
                break
            counters[0] += 1
            since_factor = 0

        if mode == MODE_CHECK:
            band_assemble(Ab_chk, f_chk, a_dof, b_dof, stiff, pinned, n)
            if band_factor(Ab_chk, n, bw):
                u_chk[:] = f_chk
                band_solve(Ab_chk, u_chk, n, bw, 0)
                num = 0.0
                den = 0.0
                for i in range(n):
                    num = max(num, abs(u[i] - u_chk[i]))
                    den = max(den, abs(u_chk[i]))
                check_err[n_ev - 1] = num / den if den > 0 else num
            else:
                check_err[n_ev - 1] = np.inf

    return (ev_k[:n_ev], ev_sigma[:n_ev], ev_link[:n_ev], ev_loc[:n_ev],
            status, counters, check_err[:n_ev])
