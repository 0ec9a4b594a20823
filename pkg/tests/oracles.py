"""Independent reference implementations used to cross-check the package.

Everything here deliberately uses different mechanisms from the library:
reachability via boolean matrix powers instead of graph search, best-subset
search via raw least squares over explicit index subsets, and set definitions
evaluated directly from ground-truth matrices.
"""

import itertools

import numpy as np


def adjacency(p, edges):
    a = np.zeros((p, p), dtype=bool)
    for k, j in edges:
        a[k - 1, j - 1] = True
    return a


def reach_matrix(p, edges):
    """reach[k, j] True iff a directed path k -> ... -> j exists (length >= 1)."""
    a = adjacency(p, edges)
    reach = np.zeros_like(a)
    power = a.copy()
    for _ in range(p):
        reach |= power
        power = power @ a
    return reach


def brute_ancestors(p, edges, j):
    return {k + 1 for k in range(p) if reach_matrix(p, edges)[k, j - 1]} - {j}


def brute_mediators(p, edges, k, j):
    r = reach_matrix(p, edges)
    return {m + 1 for m in range(p)
            if m + 1 not in (k, j) and r[k - 1, m] and r[m, j - 1]}


def brute_longest_path(p, edges, k, j):
    """Longest path length via boolean powers of the adjacency matrix."""
    a = adjacency(p, edges)
    power = np.eye(p, dtype=bool)
    best = None
    for d in range(1, p + 1):
        power = power @ a
        if power[k - 1, j - 1]:
            best = d
    return best


def best_subset(y, columns, budgets):
    """Exact block-budgeted least squares by exhaustive search.

    columns: list of (n, m_b) arrays; budgets: per-block int or None.
    Returns (best support as a frozenset of flat column indices, rss).
    """
    offsets = np.cumsum([0] + [c.shape[1] for c in columns])
    x = np.hstack(columns)
    free = [i for b, c in enumerate(columns) if budgets[b] is None
            for i in range(offsets[b], offsets[b + 1])]
    per_block = []
    for b, c in enumerate(columns):
        if budgets[b] is None:
            per_block.append([()])
            continue
        idx = range(offsets[b], offsets[b + 1])
        subsets = []
        for size in range(min(budgets[b], c.shape[1]) + 1):
            subsets.extend(itertools.combinations(idx, size))
        per_block.append(subsets)
    best = None
    for combo in itertools.product(*per_block):
        sel = sorted(free + [i for subset in combo for i in subset])
        if sel:
            coef, *_ = np.linalg.lstsq(x[:, sel], y, rcond=None)
            rss = float(np.sum((y - x[:, sel] @ coef) ** 2))
        else:
            rss = float(y @ y)
        pen = frozenset(i for i in sel if i not in free)
        if best is None or rss < best[1] - 1e-10:
            best = (pen, rss)
    return best


def truth_eplus_edges(p, u):
    r = reach_matrix(p, {(k + 1, j + 1) for k, j in zip(*np.nonzero(u))})
    return {(k + 1, j + 1) for k in range(p) for j in range(p) if r[k, j] and k != j}


def truth_candidate_sets(p, q, u, w):
    """Candidate instruments straight from the definition: hit the node, and
    otherwise hit only its descendants."""
    eplus = truth_eplus_edges(p, u)
    desc = {k: {j for (kk, j) in eplus if kk == k} for k in range(1, p + 1)}
    ca = {}
    for k in range(1, p + 1):
        good = set()
        for l in range(1, q + 1):
            targets = {j + 1 for j in np.flatnonzero(w[l - 1])}
            if k in targets and all(t == k or t in desc[k] for t in targets):
                good.add(l)
        ca[k] = good
    return ca


def truth_iplus_edges(p, q, u, w):
    eplus = truth_eplus_edges(p, u)
    anc = {j: {k for (k, jj) in eplus if jj == j} for j in range(1, p + 1)}
    out = set()
    for l in range(1, q + 1):
        targets = {j + 1 for j in np.flatnonzero(w[l - 1])}
        for j in range(1, p + 1):
            if j in targets or (targets & anc[j]):
                out.add((l, j))
    return out


def reduced_form(u, w):
    """W (I - U)^{-1} via the nilpotent series, keeping structural zeros exact."""
    p = u.shape[0]
    inv = np.eye(p)
    power = np.eye(p)
    for _ in range(p - 1):
        power = power @ u
        inv = inv + power
    return w @ inv


def random_identified_model(rng, p_max=8):
    """Random acyclic model where every node has two private instruments plus
    occasional two-target rows, so candidate sets are well defined."""
    p = int(rng.integers(2, p_max + 1))
    order = rng.permutation(p)
    u = np.zeros((p, p))
    for a in range(p):
        for b in range(a + 1, p):
            if rng.random() < 0.35:
                k, j = order[a], order[b]
                u[k, j] = rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
    n_invalid = int(rng.integers(0, 3))
    w = np.vstack([np.eye(p), np.eye(p), np.zeros((n_invalid, p))])
    for i in range(n_invalid):
        a, b = rng.choice(p, size=2, replace=False)
        w[2 * p + i, a] = rng.uniform(0.5, 1.5)
        w[2 * p + i, b] = rng.uniform(0.5, 1.5)
    return p, 2 * p + n_invalid, u, w
