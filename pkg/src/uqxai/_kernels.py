"""Compiled inner loops for K-NN scored Shapley values.

A coalition ``S`` turns each background row ``b`` into the hybrid point
``z = (x on S, b elsewhere)``. Its squared distance to training row ``t`` is
``sum_{q in S} (x_q - t_q)^2 + sum_{q not in S} (b_q - t_q)^2``, so adding or
removing one feature only shifts every (b, t) distance by a per-feature delta.
Walking coalitions one feature at a time therefore costs ``O(B N)`` per step
instead of ``O(B N Q)``.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def _target_share(D, labels, k, target):
    """Mean over rows of D of the fraction of ``target`` among the k nearest.

    Ties in distance go to the lower training index: a candidate only
    displaces a kept neighbour when strictly closer.
    """
    B, N = D.shape
    best_d = np.empty(k)
    best_l = np.empty(k, dtype=np.int64)
    total = 0
    for b in range(B):
        filled = 0
        for t in range(N):
            d = D[b, t]
            if filled < k:
                j = filled
                filled += 1
            elif d < best_d[k - 1]:
                j = k - 1
            else:
                continue
            while j > 0 and best_d[j - 1] > d:
                best_d[j] = best_d[j - 1]
                best_l[j] = best_l[j - 1]
                j -= 1
            best_d[j] = d
            best_l[j] = labels[t]
        for j in range(k):
            if best_l[j] == target:
                total += 1
    return total / (k * B)


@numba.njit(cache=True)
def _base_distances(bg, T):
    B, Q = bg.shape
    N = T.shape[0]
    D = np.zeros((B, N))
    for b in range(B):
        for t in range(N):
            s = 0.0
            for q in range(Q):
                diff = bg[b, q] - T[t, q]
                s += diff * diff
            D[b, t] = s
    return D


@numba.njit(cache=True)
def _deltas(x, bg, T):
    """delta[q, b, t] = (x_q - t_q)^2 - (b_q - t_q)^2."""
    B, Q = bg.shape
    N = T.shape[0]
    out = np.empty((Q, B, N))
    for q in range(Q):
        for b in range(B):
            for t in range(N):
                dx = x[q] - T[t, q]
                db = bg[b, q] - T[t, q]
                out[q, b, t] = dx * dx - db * db
    return out


@numba.njit(cache=True)
def knn_coalition_values_gray(x, bg, T, labels, k, target):
    """v(S) for every coalition, indexed by bitmask, via a Gray-code walk."""
    Q = x.shape[0]
    D = _base_distances(bg, T)
    delta = _deltas(x, bg, T)
    n = 1 << Q
    v = np.empty(n)
    v[0] = _target_share(D, labels, k, target)
    mask = 0
    for i in range(1, n):
        q = 0
        while not (i >> q) & 1:
            q += 1
        mask ^= 1 << q
        if (mask >> q) & 1:
            D += delta[q]
        else:
            D -= delta[q]
        v[mask] = _target_share(D, labels, k, target)
    return v


@numba.njit(cache=True)
def knn_permutation_contribs(x, bg, T, labels, k, target, perms):
    """Marginal contributions (n_perm, Q) along each feature ordering."""
    P, Q = perms.shape
    D0 = _base_distances(bg, T)
    delta = _deltas(x, bg, T)
    v0 = _target_share(D0, labels, k, target)
    out = np.empty((P, Q))
    for p in range(P):
        D = D0.copy()
        prev = v0
        for j in range(Q):
            q = perms[p, j]
            D += delta[q]
            cur = _target_share(D, labels, k, target)
            out[p, q] = cur - prev
            prev = cur
    return out
