"""Block-budgeted L0 least squares.

Minimizes ``||y - X b||^2`` subject to a cap on the number of active columns
inside each penalized block; unpenalized blocks are always fully active.
Small problems are solved exactly by subset enumeration. Larger ones run a
truncated-L1 difference-of-convex path: weighted-L1 subproblems are solved by
cyclic coordinate descent on the Gram matrix, the supports visited along a
descending lambda grid become candidates, and every candidate is refit by
ordinary least squares before model comparison.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._cd_kernel import cd_weighted_l1
from .config import Hyperparams

_EXACT = "exact"
_DC = "dc"


@dataclass
class DesignBlock:
    """A group of regressor columns sharing one L0 budget.

    budget is None for an unpenalized block, otherwise a nonnegative cap on
    the number of nonzero coefficients inside the block. ``bic_tune``
    replaces the budgets of penalized blocks with grid values, so any
    nonnegative placeholder works there.
    """

    columns: np.ndarray
    budget: int | None = None

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=float)
        if self.columns.ndim != 2:
            raise ValueError("block columns must be a 2-d array (n x m)")
        if self.budget is not None:
            self.budget = int(self.budget)
            if self.budget < 0:
                raise ValueError(f"negative budget {self.budget} is infeasible")

    @property
    def m(self) -> int:
        return self.columns.shape[1]


@dataclass
class SparseFit:
    """A refit solution: per-block coefficients plus fit statistics."""

    coefficients: list
    rss: float
    support_sizes: list
    bic: float
    ridged: bool = False
    budgets: tuple = ()

    @property
    def df(self) -> int:
        return int(sum(self.support_sizes))

    def stacked(self) -> np.ndarray:
        return np.concatenate([np.asarray(c, dtype=float) for c in self.coefficients])


class BlockProblem:
    """One regression problem; shares candidate supports across budget calls.

    Construct either from raw data (``y`` plus blocks) or from precomputed
    Gram quantities via :meth:`from_gram`. All refits are cached, so sweeping
    a large budget grid only costs a handful of small linear solves.
    """

    def __init__(self, y, blocks, params: Hyperparams | None = None, *,
                 gram=None, solver: str = "auto", penalty: str = "tlp"):
        y = np.asarray(y, dtype=float).ravel()
        if not np.all(np.isfinite(y)):
            raise ValueError("response contains non-finite values")
        if not blocks:
            raise ValueError("at least one design block is required")
        n = y.shape[0]
        for b in blocks:
            if b.columns.shape[0] != n:
                raise ValueError("all blocks must share the sample size n")
            if not np.all(np.isfinite(b.columns)):
                raise ValueError("design contains non-finite values")
        x = np.hstack([b.columns for b in blocks]) if len(blocks) > 1 else blocks[0].columns
        if x.shape[1] == 0:
            raise ValueError("design has no columns")
        gram = x.T @ x if gram is None else np.asarray(gram, dtype=float)
        self._init_core(gram, x.T @ y, float(y @ y), n,
                        [(b.m, b.budget) for b in blocks], params, solver, penalty)

    @classmethod
    def from_gram(cls, gram, xty, yty, n, block_spec, params: Hyperparams | None = None,
                  *, solver: str = "auto", penalty: str = "tlp") -> "BlockProblem":
        """block_spec: sequence of (width, budget-or-None) pairs."""
        self = cls.__new__(cls)
        self._init_core(np.asarray(gram, dtype=float), np.asarray(xty, dtype=float).ravel(),
                        float(yty), int(n), list(block_spec), params, solver, penalty)
        return self

    def _init_core(self, gram, xty, yty, n, block_spec, params, solver, penalty="tlp"):
        self.params = params or Hyperparams()
        self.gram = gram
        self.xty = xty
        self.yty = max(yty, 0.0)
        self.n = n
        self.block_spec = block_spec
        self.m_total = int(sum(m for m, _ in block_spec))
        if self.gram.shape != (self.m_total, self.m_total):
            raise ValueError("gram shape does not match total column count")
        if solver not in ("auto", _EXACT, _DC):
            raise ValueError(f"unknown solver {solver!r}")
        if penalty not in ("tlp", "l1"):
            raise ValueError(f"unknown penalty {penalty!r}")
        self.solver = solver
        self.penalty = penalty

        starts = np.cumsum([0] + [m for m, _ in block_spec])
        self.block_cols = [np.arange(starts[i], starts[i + 1]) for i in range(len(block_spec))]
        self.pen_mask = np.zeros(self.m_total, dtype=bool)
        for cols, (_, budget) in zip(self.block_cols, block_spec):
            if budget is not None:
                self.pen_mask[cols] = True
        diag = np.diag(self.gram)
        self.alive = diag > 1e-14 * max(1.0, float(diag.max(initial=0.0)))
        self.unpen_cols = np.flatnonzero(~self.pen_mask & self.alive)
        self._candidates = None
        self._cand_sizes = None   # (n_cand, n_pen_blocks) int array
        self._cand_stats = None   # (rss, total, coef, ridged) per candidate
        self._size_levels = None  # per pen block: sorted unique support sizes
        self._refit_cache = {}
        self._fit_cache = {}
        self.dc_objective_curves = []

    # -- candidate supports ------------------------------------------------

    def _solver_kind(self) -> str:
        if self.solver != "auto":
            return self.solver
        n_pen = int(np.count_nonzero(self.pen_mask & self.alive))
        return _EXACT if n_pen <= self.params.exhaustive_limit else _DC

    def candidates(self) -> list:
        """Boolean masks (over all columns) of penalized supports to consider."""
        if self._candidates is None:
            if self._solver_kind() == _EXACT:
                self._candidates = self._enumerate_supports()
            else:
                self._candidates = self._dc_path_supports()
            pen_blocks = self._pen_blocks()
            self._cand_sizes = np.array(
                [[int(np.count_nonzero(c[self.block_cols[i]])) for i in pen_blocks]
                 for c in self._candidates], dtype=int).reshape(len(self._candidates),
                                                                len(pen_blocks))
            self._size_levels = [np.unique(self._cand_sizes[:, pos])
                                 for pos in range(len(pen_blocks))]
        return self._candidates

    def _pen_blocks(self) -> list:
        return [i for i, (_, bud) in enumerate(self.block_spec) if bud is not None]

    def _enumerate_supports(self) -> list:
        per_block = []
        for cols, (_, budget) in zip(self.block_cols, self.block_spec):
            if budget is None:
                per_block.append([()])
                continue
            usable = [c for c in cols if self.alive[c]]
            subsets = []
            for size in range(len(usable) + 1):
                subsets.extend(itertools.combinations(usable, size))
            per_block.append(subsets)
        masks = []
        for combo in itertools.product(*per_block):
            mask = np.zeros(self.m_total, dtype=bool)
            for subset in combo:
                for c in subset:
                    mask[c] = True
            masks.append(mask)
        # earlier columns win exact-rss ties, so order supports lexicographically
        masks.sort(key=lambda m: (int(m.sum()), tuple(np.flatnonzero(m))))
        return masks

    def _dc_path_supports(self) -> list:
        params = self.params
        pen_alive = self.pen_mask & self.alive
        masks = [np.zeros(self.m_total, dtype=bool)]
        if not pen_alive.any():
            return masks
        # standardize columns to unit variance for the path; refits use raw scale
        rms = np.sqrt(np.clip(np.diag(self.gram), 0.0, None) / max(self.n, 1))
        scale = np.where(self.alive, np.where(rms > 0, rms, 1.0), 1.0)
        g = self.gram / scale[:, None] / scale[None, :]
        b = self.xty / scale
        tau = params.tau if params.tau is not None else math.sqrt(
            math.log(max(self.m_total, self.n, 3)) / max(self.n, 2))
        lam_max = float(np.abs(b[pen_alive]).max())
        if lam_max <= 0:
            return masks
        lam_max *= (1.0 + 1e-10) * (tau if self.penalty == "tlp" else 1.0)
        lams = np.geomspace(lam_max, lam_max * params.lambda_min_ratio, params.lambda_points)
        beta = np.zeros(self.m_total)
        weights = np.zeros(self.m_total)
        seen = {masks[0].tobytes()}
        for lam in lams:
            curve = []
            prev_pattern = None
            reweights = params.dc_max_iter if self.penalty == "tlp" else 1
            for _ in range(reweights):
                if self.penalty == "tlp":
                    np.multiply(pen_alive, lam / tau, out=weights)
                    weights[pen_alive & (np.abs(beta) >= tau)] = 0.0
                else:
                    np.multiply(pen_alive, lam, out=weights)
                beta = cd_weighted_l1(g, b, weights, beta, self.alive,
                                      params.cd_tol, params.cd_max_sweeps)
                rss = self.yty - 2.0 * (b @ beta) + beta @ (g @ beta)
                if self.penalty == "tlp":
                    surr = np.minimum(np.abs(beta[pen_alive]) / tau, 1.0).sum()
                else:
                    surr = np.abs(beta[pen_alive]).sum()
                curve.append(0.5 * rss + lam * surr)
                pattern = (np.abs(beta) >= tau) & pen_alive
                key = pattern.tobytes()
                if key == prev_pattern:
                    break
                prev_pattern = key
            self.dc_objective_curves.append(curve)
            support = pen_alive & (beta != 0.0)
            key = support.tobytes()
            if key not in seen:
                seen.add(key)
                masks.append(support.copy())
            cap = min(params.path_support_cap, int(np.count_nonzero(pen_alive)))
            if int(np.count_nonzero(support)) >= cap:
                break
        return self._cross_block_supports(masks)

    def _cross_block_supports(self, masks: list) -> list:
        """Cross-combine per-block supports seen along the path.

        One shared penalty level couples the blocks, so the joint path may
        never visit a sparse support in one block together with a dense one
        in another even though a budget pair demands it. Any combination of
        per-block path supports is a valid candidate since refits are exact.
        """
        pen_blocks = self._pen_blocks()
        if len(pen_blocks) < 2:
            masks.sort(key=lambda m: (int(m.sum()), tuple(np.flatnonzero(m))))
            return masks
        per_block = []
        for i in pen_blocks:
            cols = self.block_cols[i]
            distinct, seen = [], set()
            for m in masks:
                key = m[cols].tobytes()
                if key not in seen:
                    seen.add(key)
                    distinct.append(m[cols].copy())
            per_block.append((cols, distinct))
        n_combos = 1
        for _, distinct in per_block:
            n_combos *= len(distinct)
        if n_combos > 2048:  # fall back to the joint path plus projections
            extra = []
            for m in masks:
                for cols, _ in per_block:
                    proj = m.copy()
                    others = [c for cc, _ in per_block if cc is not cols for c in cc]
                    proj[others] = False
                    extra.append(proj)
            combined = masks + extra
        else:
            combined = []
            for combo in itertools.product(*[d for _, d in per_block]):
                mask = np.zeros(self.m_total, dtype=bool)
                for (cols, _), sub in zip(per_block, combo):
                    mask[cols] = sub
                combined.append(mask)
        out, seen = [], set()
        for m in combined:
            key = m.tobytes()
            if key not in seen:
                seen.add(key)
                out.append(m)
        out.sort(key=lambda m: (int(m.sum()), tuple(np.flatnonzero(m))))
        return out

    # -- refits and model choice --------------------------------------------

    def _refit(self, mask) -> tuple:
        key = mask.tobytes()
        hit = self._refit_cache.get(key)
        if hit is not None:
            return hit
        cols = np.flatnonzero((~self.pen_mask & self.alive) | mask)
        coef = np.zeros(self.m_total)
        ridged = False
        if cols.size:
            g = self.gram[np.ix_(cols, cols)]
            b = self.xty[cols]
            try:
                sol = scipy.linalg.cho_solve(scipy.linalg.cho_factor(g), b)
            except scipy.linalg.LinAlgError:
                ridged = True
                lam = self.params.ridge * max(1.0, float(np.max(np.diag(g))))
                sol = scipy.linalg.solve(g + lam * np.eye(cols.size), b, assume_a="pos")
            coef[cols] = sol
            rss = self.yty - 2.0 * (b @ sol) + sol @ (g @ sol)
        else:
            rss = self.yty
        rss = max(float(rss), 0.0)
        out = (coef, rss, ridged)
        self._refit_cache[key] = out
        return out

    def _bic(self, rss: float, df: int) -> float:
        n = self.n
        var = self.yty / max(n, 1)  # response second moment, scale for the rss floor
        floor = max(1e-12 * var * n, np.finfo(float).tiny)
        pen = math.log(n) + self.params.dim_penalty * math.log(max(self.m_total, n, 2))
        return n * math.log(max(rss, floor) / n) + df * pen

    def _normalize_budgets(self, budgets) -> tuple:
        pen_blocks = [i for i, (_, bud) in enumerate(self.block_spec) if bud is not None]
        if budgets is None:
            budgets = tuple(self.block_spec[i][1] for i in pen_blocks)
        budgets = tuple(int(b) for b in budgets)
        if len(budgets) != len(pen_blocks):
            raise ValueError(f"expected {len(pen_blocks)} budgets, got {len(budgets)}")
        if any(b < 0 for b in budgets):
            raise ValueError(f"negative budget in {budgets}")
        return budgets

    def _effective_key(self, budgets) -> tuple:
        """Budgets snapped down to realizable support sizes; equal keys share a fit."""
        self.candidates()
        key = []
        for pos, b in enumerate(budgets):
            levels = self._size_levels[pos]
            idx = int(np.searchsorted(levels, b, side="right")) - 1
            key.append(int(levels[idx]) if idx >= 0 else 0)
        return tuple(key)

    def _ensure_stats(self) -> None:
        if self._cand_stats is None:
            self.candidates()
            self._cand_stats = [self._refit(mask) for mask in self._candidates]

    def fit(self, budgets=None) -> SparseFit:
        """Best refit subject to per-block budgets (penalized blocks, in order)."""
        budgets = self._normalize_budgets(budgets)
        key = self._effective_key(budgets)
        if key not in self._fit_cache:
            self._ensure_stats()
            eps = 1e-12 * (self.yty + 1.0)
            caps = np.asarray(key, dtype=int)
            best = None  # (rss, total_support, index)
            for idx in np.flatnonzero(np.all(self._cand_sizes <= caps, axis=1)):
                coef, rss, ridged = self._cand_stats[idx]
                total = int(self._cand_sizes[idx].sum())
                if best is None or rss < best[0] - eps or (
                        abs(rss - best[0]) <= eps and total < best[1]):
                    best = (rss, total, idx, coef, ridged)
            if best is None:  # cannot happen: the empty support is always a candidate
                raise RuntimeError("no feasible support")
            rss, _, idx, coef, ridged = best
            sizes = []
            coefs = []
            for cols, (_, bud) in zip(self.block_cols, self.block_spec):
                c = coef[cols]
                coefs.append(c)
                sizes.append(int(np.count_nonzero(c)) if bud is not None else int(cols.size))
            df = len(self.unpen_cols) + int(self._candidates[idx].sum())
            self._fit_cache[key] = SparseFit(
                coefficients=coefs, rss=rss, support_sizes=sizes,
                bic=self._bic(rss, df), ridged=ridged)
        cached = self._fit_cache[key]
        return SparseFit(coefficients=cached.coefficients, rss=cached.rss,
                         support_sizes=cached.support_sizes, bic=cached.bic,
                         ridged=cached.ridged, budgets=budgets)

    def tune(self, budget_grid) -> SparseFit:
        """BIC-minimizing fit over a grid of budget tuples; ties go to smaller df."""
        grid = list(budget_grid)
        if not grid:
            raise ValueError("empty budget grid")
        best = None
        eps = 1e-9
        seen = set()
        for t in grid:
            t = (t,) if isinstance(t, int) else tuple(t)
            key = self._effective_key(self._normalize_budgets(t))
            if key in seen:  # same feasible candidates, same fit
                continue
            seen.add(key)
            fit = self.fit(t)
            cand = (fit.bic, fit.df)
            if best is None or cand[0] < best[0][0] - eps or (
                    abs(cand[0] - best[0][0]) <= eps and cand[1] < best[0][1]):
                best = (cand, fit)
        return best[1]


def block_l0_regression(y, blocks, params: Hyperparams | None = None,
                        *, solver: str = "auto") -> SparseFit:
    """Solve one block-budgeted L0 regression at the budgets carried by the blocks."""
    return BlockProblem(y, blocks, params, solver=solver).fit()


def bic_tune(y, blocks, budget_grid, params: Hyperparams | None = None,
             *, solver: str = "auto") -> SparseFit:
    """Fit every budget tuple in the grid and return the BIC-minimizing fit."""
    grid = [(t,) if isinstance(t, int) else tuple(t) for t in budget_grid]
    return BlockProblem(y, blocks, params, solver=solver).tune(grid)
