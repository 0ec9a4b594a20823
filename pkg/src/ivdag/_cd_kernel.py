"""Cyclic coordinate descent for weighted-L1 least squares on a Gram matrix.

Solves  min_b 0.5 b'Gb - xty'b + sum_j w_j |b_j|  in place over the alive
columns. The residual correlation vector is maintained only on the active
set during sweeps and rebuilt from the sparse iterate for KKT scans, so the
cost scales with the support size rather than the full column count. The
Gram matrix must be symmetric.

The explicit-loop implementation is numba-compiled when numba is importable
and runs as plain Python otherwise (slow but identical).
"""

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _HAVE_NUMBA = False


def _cd_loops(gram, xty, weights, beta, alive, tol, max_sweeps):
    m = gram.shape[0]
    active = np.zeros(m, dtype=np.bool_)
    act = np.empty(m, dtype=np.int64)
    na = 0
    for j in range(m):
        if alive[j] and (beta[j] != 0.0 or weights[j] == 0.0):
            active[j] = True
            act[na] = j
            na += 1
    r_full = np.empty(m)
    sweeps = 0
    while True:
        for j in range(m):
            r_full[j] = xty[j]
        for u in range(na):
            bu = beta[act[u]]
            if bu != 0.0:
                row = gram[act[u]]
                for j in range(m):
                    r_full[j] -= row[j] * bu
        r_a = np.empty(m)
        for t in range(na):
            r_a[t] = r_full[act[t]]
        while sweeps < max_sweeps:
            sweeps += 1
            max_change = 0.0
            for t in range(na):
                j = act[t]
                gjj = gram[j, j]
                z = r_a[t] + gjj * beta[j]
                wj = weights[j]
                if z > wj:
                    new = (z - wj) / gjj
                elif z < -wj:
                    new = (z + wj) / gjj
                else:
                    new = 0.0
                delta = new - beta[j]
                if delta != 0.0:
                    beta[j] = new
                    row = gram[j]
                    for u in range(na):
                        r_a[u] -= row[act[u]] * delta
                    if abs(delta) > max_change:
                        max_change = abs(delta)
            if max_change < tol:
                break
        for j in range(m):
            r_full[j] = xty[j]
        for u in range(na):
            bu = beta[act[u]]
            if bu != 0.0:
                row = gram[act[u]]
                for j in range(m):
                    r_full[j] -= row[j] * bu
        added = False
        for j in range(m):
            if alive[j] and not active[j] and abs(r_full[j]) > weights[j] + 1e-12:
                active[j] = True
                act[na] = j
                na += 1
                added = True
        if not added:
            break
    return beta


if _HAVE_NUMBA:
    cd_weighted_l1 = njit(cache=True)(_cd_loops)
else:
    cd_weighted_l1 = _cd_loops
