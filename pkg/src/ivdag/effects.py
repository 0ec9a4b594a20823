"""Sequential instrumental-variable estimation of direct effects.

Every ancestral pair (k, j) is fit in increasing order of the longest
directed path from k to j. The response is first cleaned of already-estimated
mediator contributions (the working response), the cause variable is replaced
by its imputation from interventions and non-mediating ancestors, and a
budgeted regression lets a minority of candidate instruments enter as direct
(invalid) effects while the remaining covariates absorb confounder-induced
correlation.
"""

from dataclasses import dataclass, field

import numpy as np

from . import graphs
from .config import Hyperparams, PIPELINE_DEFAULTS
from .graphs import Digraph
from .peeling import ArgEstimate, VMatrix, estimate_v
from .simulate import Dataset
from .sparse import BlockProblem, SparseFit


class NoCandidateInstrumentsError(RuntimeError):
    """A node has no candidate instruments, so its outgoing effects are unidentified."""

    def __init__(self, k):
        self.k = int(k)
        super().__init__(f"no candidate instruments for node {self.k}")


@dataclass
class EdgeFit:
    """Diagnostics for one fitted ancestral pair."""

    k: int
    j: int
    depth: int
    u_kj: float = 0.0
    kappa: int | None = None
    nu2: int | None = None
    bic: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {"k": self.k, "j": self.j, "depth": self.depth, "u_kj": self.u_kj,
                "kappa": self.kappa, "nu2": self.nu2, "bic": self.bic, "error": self.error}


@dataclass
class FittedModel:
    """Estimated structural coefficients, interventional effects, and residuals."""

    u_hat: np.ndarray    # (p, p), supported inside the ancestral relation set
    w_hat: np.ndarray    # (q, p), supported inside the propagated interventions
    residuals: np.ndarray  # (p, n)
    mode: str
    edges: list = field(default_factory=list)

    def estimated_digraph(self) -> Digraph:
        ks, js = np.nonzero(self.u_hat)
        return Digraph(self.u_hat.shape[0],
                       frozenset((int(k) + 1, int(j) + 1) for k, j in zip(ks, js)))

    def to_dict(self) -> dict:
        ks, js = np.nonzero(self.u_hat)
        ls, ms = np.nonzero(self.w_hat)
        return {
            "mode": self.mode,
            "p": int(self.u_hat.shape[0]),
            "q": int(self.w_hat.shape[0]),
            "n": int(self.residuals.shape[1]),
            "u_hat": [[int(k) + 1, int(j) + 1, float(self.u_hat[k, j])]
                      for k, j in sorted(zip(ks, js))],
            "w_hat": [[int(l) + 1, int(j) + 1, float(self.w_hat[l, j])]
                      for l, j in sorted(zip(ls, ms))],
            "residual_variances": [float(v) for v in self.residuals.var(axis=1)],
            "edges": [e.to_dict() for e in self.edges],
        }


class _FitContext:
    """Per-dataset caches: the joint Gram of [X; Y] and imputation fits.

    All edge regressions are assembled from this Gram algebraically, so the
    per-edge cost does not grow with the sample size.
    """

    def __init__(self, data: Dataset, arg: ArgEstimate, params: Hyperparams):
        self.data = data
        self.arg = arg
        # classical BIC here: omitting a needed nuisance term biases the edge
        # coefficient, while a spare one only adds variance, and the instrument
        # signal cannot leak into the nuisance blocks
        self.params = params.with_overrides(dim_penalty=0.0)
        z = np.vstack([data.x, data.y])
        self.big = z @ z.T
        self.q = data.q
        self.p = data.p
        self.n = data.n
        self._impute = {}

    def xcol(self, l: int) -> int:
        return l - 1

    def ycol(self, k: int) -> int:
        return self.q + k - 1

    def impute_alpha(self, k: int, nm: tuple):
        """Sparse projection of Y_k on (X, Y_nm); returns (column indices, coefs, fit)."""
        key = (k, nm)
        hit = self._impute.get(key)
        if hit is not None:
            return hit
        idx = np.array([self.xcol(l) for l in range(1, self.q + 1)]
                       + [self.ycol(m) for m in nm])
        t = self.ycol(k)
        gram = self.big[np.ix_(idx, idx)]
        xty = self.big[idx, t]
        yty = self.big[t, t]
        cap = max(1, min(idx.size, self.n // 2))
        prob = BlockProblem.from_gram(gram, xty, yty, self.n,
                                      [(idx.size, 0)], self.params)
        fit = prob.tune([(v,) for v in range(1, cap + 1)])
        out = (idx, fit.coefficients[0], fit)
        self._impute[key] = out
        return out


def _edge_sets(arg: ArgEstimate, k: int, j: int) -> tuple:
    me = tuple(sorted(graphs.mediators(arg.eplus, k, j)))
    nm = tuple(sorted(graphs.non_mediators(arg.eplus, k, j)))
    return me, nm


def impute_yk(data: Dataset, arg: ArgEstimate, k: int, j: int,
              params: Hyperparams | None = None) -> np.ndarray:
    """Fitted values of Y_k regressed on all interventions and the
    non-mediating ancestors of the pair (k, j), with one joint L0 budget."""
    params = params or PIPELINE_DEFAULTS
    ctx = _FitContext(data, arg, params)
    _, nm = _edge_sets(arg, k, j)
    idx, alpha, _ = ctx.impute_alpha(k, nm)
    design = np.vstack([data.x, data.y])[idx]
    return design.T @ alpha


def _fit_edge(ctx: _FitContext, k: int, j: int, u_partial: np.ndarray,
              mode: str) -> tuple:
    """Working-response regression for one pair; returns (EdgeFit, beta, gamma)."""
    arg, big, params = ctx.arg, ctx.big, ctx.params
    ca = sorted(arg.candidate_ivs.get(k, ()))
    if not ca:
        raise NoCandidateInstrumentsError(k)
    me, nm = _edge_sets(arg, k, j)
    idx_imp, alpha, _ = ctx.impute_alpha(k, nm)

    cac = sorted(set(range(1, ctx.q + 1)) - set(ca))
    base_idx = np.array([ctx.xcol(l) for l in ca]
                        + [ctx.ycol(m) for m in nm]
                        + [ctx.xcol(l) for l in cac], dtype=int)
    # working response: Y_j minus estimated mediator contributions
    tgt_idx = np.array([ctx.ycol(j)] + [ctx.ycol(m) for m in me], dtype=int)
    tgt_w = np.array([1.0] + [-u_partial[m - 1, j - 1] for m in me])

    m_tot = 1 + base_idx.size
    gram = np.empty((m_tot, m_tot))
    gram[1:, 1:] = big[np.ix_(base_idx, base_idx)]
    cross = alpha @ big[np.ix_(idx_imp, base_idx)]
    gram[0, 1:] = cross
    gram[1:, 0] = cross
    gram[0, 0] = alpha @ big[np.ix_(idx_imp, idx_imp)] @ alpha
    xty = np.empty(m_tot)
    xty[0] = alpha @ (big[np.ix_(idx_imp, tgt_idx)] @ tgt_w)
    xty[1:] = big[np.ix_(base_idx, tgt_idx)] @ tgt_w
    yty = tgt_w @ big[np.ix_(tgt_idx, tgt_idx)] @ tgt_w

    n_ca = len(ca)
    n_z = len(nm) + len(cac)
    if mode == "recovery":
        # the edge indicator shares the instrument budget, so the sweep must
        # always reach 1 or no edge could ever be selected
        spec = [(1 + n_ca, 0), (n_z, 0)]
        kappa_hi = max(n_ca // 2, 1)
    elif mode == "estimation":
        spec = [(1, None), (n_ca, 0), (n_z, 0)]
        kappa_hi = max((n_ca + 1) // 2 - 1, 0)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    prob = BlockProblem.from_gram(gram, xty, yty, ctx.n, spec, params)
    nu2_hi = min(n_z, ctx.n // 2)
    grid = [(kappa, nu2) for kappa in range(kappa_hi + 1) for nu2 in range(nu2_hi + 1)]
    fit = prob.tune(grid)

    if mode == "recovery":
        ab = fit.coefficients[0]
        u_kj, beta, gamma = float(ab[0]), ab[1:], fit.coefficients[1]
    else:
        u_kj, beta, gamma = float(fit.coefficients[0][0]), fit.coefficients[1], fit.coefficients[2]
    edge = EdgeFit(k=k, j=j, depth=0, u_kj=u_kj,
                   kappa=int(fit.budgets[0]), nu2=int(fit.budgets[1]), bic=fit.bic)
    return edge, beta, gamma


def fit_edge(data: Dataset, arg: ArgEstimate, k: int, j: int,
             u_partial: np.ndarray, mode: str = "recovery",
             params: Hyperparams | None = None) -> tuple:
    """Estimate one direct effect given already-fitted mediator coefficients.

    Returns (u_kj, beta, gamma): the direct-effect estimate, the coefficients
    on the candidate instruments of k, and the nuisance coefficients.
    """
    params = params or PIPELINE_DEFAULTS
    ctx = _FitContext(data, arg, params)
    edge, beta, gamma = _fit_edge(ctx, k, j, np.asarray(u_partial, dtype=float), mode)
    return edge.u_kj, beta, gamma


def _depth_groups(eplus: Digraph) -> dict:
    """Ancestral pairs grouped by the longest directed path length."""
    order = graphs.topological_order(eplus)
    ch = eplus.children_map()
    groups = {}
    for k in range(1, eplus.p + 1):
        dist = {k: 0}
        for u in order:
            if u not in dist:
                continue
            for v in ch[u]:
                if dist[u] + 1 > dist.get(v, -1):
                    dist[v] = dist[u] + 1
        for (kk, j) in eplus.edges:
            if kk == k and j in dist:
                groups.setdefault(dist[j], []).append((k, j))
    return {d: sorted(pairs) for d, pairs in groups.items()}


def estimate_effects(data: Dataset, arg: ArgEstimate, mode: str = "recovery",
                     params: Hyperparams | None = None) -> FittedModel:
    """Fit every ancestral pair in mediation order and assemble the model.

    In recovery mode a zero edge estimate prunes the edge; per-pair failures
    are recorded in the diagnostics instead of aborting the whole graph.
    """
    if mode not in ("recovery", "estimation"):
        raise ValueError(f"unknown mode {mode!r}")
    params = params or PIPELINE_DEFAULTS
    ctx = _FitContext(data, arg, params)
    v = arg.v_hat if arg.v_hat is not None else estimate_v(data, params)
    p, q = data.p, data.q
    u = np.zeros((p, p))
    diags = []
    done = set()
    groups = _depth_groups(arg.eplus)
    for depth in sorted(groups):
        for (k, j) in groups[depth]:
            for m in graphs.mediators(arg.eplus, k, j):
                assert (m, j) in done, f"mediator pair ({m},{j}) not yet fitted"
            try:
                edge, _, _ = _fit_edge(ctx, k, j, u, mode)
                edge.depth = depth
                u[k - 1, j - 1] = edge.u_kj
            except (NoCandidateInstrumentsError, np.linalg.LinAlgError) as exc:
                edge = EdgeFit(k=k, j=j, depth=depth, error=str(exc))
            diags.append(edge)
            done.add((k, j))
    w = v.entries @ (np.eye(p) - u)
    mask = np.zeros((q, p), dtype=bool)
    for (l, j) in arg.iplus.edges:
        mask[l - 1, j - 1] = True
    w = np.where(mask, w, 0.0)
    residuals = (np.eye(p) - u.T) @ data.y - w.T @ data.x
    return FittedModel(u_hat=u, w_hat=w, residuals=residuals, mode=mode, edges=diags)
