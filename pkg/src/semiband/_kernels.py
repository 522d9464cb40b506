"""Compiled inner loops for the resampling estimators.

All kernels draw from a numpy ``Generator`` passed in by the caller, one
``rng.random()`` per variate, so a literal kernel consumes the stream exactly
like ``rng.random(d)`` per resampling iteration.
"""
import math

import numpy as np
from numba import njit

_TINY = np.finfo(np.float64).tiny


@njit(cache=True)
def _draw(rng, code, inv):
    u = rng.random()
    if code == 0:
        if u == 0.0:
            u = _TINY
        return (-math.log(u)) ** (-inv)
    return (1.0 - u) ** (-inv)


@njit(cache=True)
def _beats(xj, j, xi, i):
    # j outranks i in the top-m order
    return xj > xi or (xj == xi and j < i)


@njit(cache=True)
def _count_beaters(sc, c, m):
    cnt = 0
    sc_c = sc[c]
    for j in range(sc.shape[0]):
        if j != c and _beats(sc[j], j, sc_c, c):
            cnt += 1
            if cnt >= m:
                break
    return cnt


@njit(cache=True)
def _insert_top(v, j, tv, ti, n, cap_n):
    # keep tv/ti sorted best-first, at most cap_n entries; returns new length
    if n < cap_n:
        pos = n
        n += 1
    elif _beats(v, j, tv[n - 1], ti[n - 1]):
        pos = n - 1
    else:
        return n
    while pos > 0 and _beats(v, j, tv[pos - 1], ti[pos - 1]):
        tv[pos] = tv[pos - 1]
        ti[pos] = ti[pos - 1]
        pos -= 1
    tv[pos] = v
    ti[pos] = j
    return n


@njit(cache=True)
def _theta_largest(r, members, n_members, theta, tv, ti):
    n = 0
    for t in range(n_members):
        j = members[t]
        n = _insert_top(r[j], j, tv, ti, n, theta)
    return ti[theta - 1]


@njit(cache=True)
def gr_literal(rng, lam, chosen, m, code, inv, cap):
    d = lam.shape[0]
    k = chosen.shape[0]
    K = np.zeros(k, np.int64)
    active = np.ones(k, np.bool_)
    n_active = k
    sc = np.empty(d)
    it = 0
    capped = False
    while n_active > 0:
        if it >= cap:
            capped = True
            break
        it += 1
        for p in range(k):
            if active[p]:
                K[p] += 1
        for j in range(d):
            sc[j] = _draw(rng, code, inv) - lam[j]
        for p in range(k):
            if active[p] and _count_beaters(sc, chosen[p], m) < m:
                active[p] = False
                n_active -= 1
    return K, it, capped


@njit(cache=True)
def gr_lazy(rng, lam, chosen, m, code, inv, cap, order):
    """Same law as ``gr_literal`` but stops drawing once every active arm is settled.

    Active arms are drawn first, then the rest in ``order`` (ascending lam,
    the likeliest beaters first). Coordinates are i.i.d., so the order of
    evaluation does not change the distribution of the counts. An active arm
    with ``need`` outside beaters still required is rejected as soon as the
    need-th best outside score beats it.
    """
    d = lam.shape[0]
    k = chosen.shape[0]
    K = np.zeros(k, np.int64)
    pos = np.full(d, -1, np.int64)
    for p in range(k):
        pos[chosen[p]] = p
    active = np.ones(k, np.bool_)
    n_active = k
    score = np.empty(k)
    need = np.zeros(k, np.int64)
    und = np.zeros(k, np.bool_)
    tv = np.empty(m)
    ti = np.empty(m, np.int64)
    it = 0
    capped = False
    while n_active > 0:
        if it >= cap:
            capped = True
            break
        it += 1
        n_und = 0
        for p in range(k):
            und[p] = False
            if active[p]:
                K[p] += 1
                score[p] = _draw(rng, code, inv) - lam[chosen[p]]
        for p in range(k):
            if not active[p]:
                continue
            need[p] = m
            for q in range(k):
                if q != p and active[q] and _beats(score[q], chosen[q], score[p], chosen[p]):
                    need[p] -= 1
            if need[p] > 0:
                und[p] = True
                n_und += 1
        if n_und > 0:
            nx = 0
            for jj in range(d):
                j = order[jj]
                q = pos[j]
                if q >= 0 and active[q]:
                    continue
                x = _draw(rng, code, inv) - lam[j]
                if nx == m and not _beats(x, j, tv[m - 1], ti[m - 1]):
                    continue
                nx = _insert_top(x, j, tv, ti, nx, m)
                for p in range(k):
                    if und[p] and need[p] <= nx and _beats(tv[need[p] - 1], ti[need[p] - 1],
                                                           score[p], chosen[p]):
                        und[p] = False
                        n_und -= 1
                if n_und == 0:
                    break
        for p in range(k):
            if und[p]:
                active[p] = False
                n_active -= 1
    return K, it, capped


@njit(cache=True)
def cgr_literal(rng, lam, chosen, sigma, arm_at_rank, m, code, inv, cap):
    """Conditional geometric resampling; one full draw plus one theta per iteration."""
    d = lam.shape[0]
    k = chosen.shape[0]
    K = np.zeros(k, np.int64)
    live = np.ones(k, np.bool_)
    n_live = k
    r = np.empty(d)
    sc = np.empty(d)
    tv = np.empty(m)
    ti = np.empty(m, np.int64)
    it = 0
    capped = False
    while n_live > 0:
        if it >= cap:
            capped = True
            break
        it += 1
        for p in range(k):
            if live[p]:
                K[p] += 1
        for j in range(d):
            r[j] = _draw(rng, code, inv)
            sc[j] = r[j] - lam[j]
        theta = int(rng.random() * m) + 1
        if theta > m:
            theta = m
        for p in range(k):
            if not live[p]:
                continue
            c = chosen[p]
            sg = sigma[c]
            if sg > m:
                ip = _theta_largest(r, arm_at_rank, sg, theta, tv, ti)
                sc_c = r[ip] - lam[c]
                cnt = 0
                for j in range(d):
                    if j == c:
                        continue
                    if j == ip:
                        xj = r[c] - lam[ip]
                    else:
                        xj = sc[j]
                    if _beats(xj, j, sc_c, c):
                        cnt += 1
                        if cnt >= m:
                            break
            else:
                cnt = _count_beaters(sc, c, m)
            if cnt < m:
                live[p] = False
                n_live -= 1
    return K, it, capped


@njit(cache=True)
def gr_batch(rng, lam, chosen, m, code, inv, n_calls, order, lazy, cap):
    k = chosen.shape[0]
    out = np.empty((n_calls, k), np.int64)
    capped = np.zeros(n_calls, np.bool_)
    for t in range(n_calls):
        if lazy:
            K, it, c = gr_lazy(rng, lam, chosen, m, code, inv, cap, order)
        else:
            K, it, c = gr_literal(rng, lam, chosen, m, code, inv, cap)
        out[t] = K
        capped[t] = c
    return out, capped


@njit(cache=True)
def cgr_batch(rng, lam, chosen, sigma, arm_at_rank, m, code, inv, n_calls, cap):
    k = chosen.shape[0]
    out = np.empty((n_calls, k), np.int64)
    capped = np.zeros(n_calls, np.bool_)
    for t in range(n_calls):
        K, it, c = cgr_literal(rng, lam, chosen, sigma, arm_at_rank, m, code, inv, cap)
        out[t] = K
        capped[t] = c
    return out, capped


@njit(cache=True)
def cost_rounds(rng, lam, sigma, arm_at_rank, m, code, inv, n_rounds, use_cgr, lazy, cap):
    """Resampling cost M_t over rounds with actions drawn by FTPL at fixed lam."""
    order = np.argsort(lam, kind="mergesort")
    cost = np.empty(n_rounds, np.int64)
    capped = np.zeros(n_rounds, np.bool_)
    for t in range(n_rounds):
        chosen = _ftpl_topm_fast(rng, lam, m, code, inv)
        if use_cgr:
            K, it, c = cgr_literal(rng, lam, chosen, sigma, arm_at_rank, m, code, inv, cap)
            gmax = 0
            usum = 0
            for p in range(chosen.shape[0]):
                if sigma[chosen[p]] > m:
                    usum += K[p]
                elif K[p] > gmax:
                    gmax = K[p]
            cost[t] = gmax + usum
        else:
            if lazy:
                K, it, c = gr_lazy(rng, lam, chosen, m, code, inv, cap, order)
            else:
                K, it, c = gr_literal(rng, lam, chosen, m, code, inv, cap)
            cost[t] = K.max()
        capped[t] = c
    return cost, capped


@njit(cache=True)
def _ftpl_topm_fast(rng, lam, m, code, inv):
    # top-m of r - lam via a running sorted list of the m best
    d = lam.shape[0]
    tv = np.empty(m)
    ti = np.empty(m, np.int64)
    n = 0
    for j in range(d):
        n = _insert_top(_draw(rng, code, inv) - lam[j], j, tv, ti, n, m)
    return np.sort(ti)


@njit(cache=True)
def rank_frequencies(rng, lam, members, code, inv, n_draws):
    """Monte Carlo counts of each member's descending rank within ``members``.

    counts[p, q] = number of draws in which members[p] ranked q+1 (ties to lower index).
    """
    b = members.shape[0]
    counts = np.zeros((b, b), np.int64)
    sc = np.empty(b)
    for _ in range(n_draws):
        for p in range(b):
            sc[p] = _draw(rng, code, inv) - lam[members[p]]
        for p in range(b):
            rk = 0
            for q in range(b):
                if q != p and _beats(sc[q], members[q], sc[p], members[p]):
                    rk += 1
            counts[p, rk] += 1
    return counts
