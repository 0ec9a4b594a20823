"""Residual precision-matrix estimation.

The support of the error precision is found by nodewise L1 regressions of
each residual on the others (OR-rule symmetrized), then the precision itself
is refit by maximizing the Gaussian log-determinant likelihood restricted to
that support. Each coordinate update has a closed-form maximizer that keeps
the iterate positive definite, so the refit ascends monotonically.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import Hyperparams, PIPELINE_DEFAULTS
from .sparse import BlockProblem


@dataclass
class PrecisionEstimate:
    """Symmetric positive-definite precision with an explicit off-diagonal support."""

    omega: np.ndarray
    support: frozenset
    min_eigenvalue: float
    ridged: bool = False
    objective_history: list = field(default_factory=list, repr=False)

    @property
    def p(self) -> int:
        return self.omega.shape[0]

    def to_dict(self) -> dict:
        return {
            "omega": [[float(v) for v in row] for row in self.omega],
            "support": sorted([list(e) for e in self.support]),
            "min_eigenvalue": float(self.min_eigenvalue),
            "ridged": self.ridged,
        }


def neighborhood_select(residuals: np.ndarray, params: Hyperparams | None = None) -> frozenset:
    """Off-diagonal support from nodewise lasso regressions, OR-symmetrized.

    Each nodewise penalty level is chosen by BIC over the lasso path. A
    neighborhood larger than n/4 is re-selected under that cap with a warning,
    since the downstream refit needs well-posed nodewise problems.
    """
    params = params or PIPELINE_DEFAULTS
    resid = np.asarray(residuals, dtype=float)
    p, n = resid.shape
    if p < 2:
        return frozenset()
    resid = resid - resid.mean(axis=1, keepdims=True)
    gram = resid @ resid.T
    cap = min(p - 1, max(1, n - 2))
    hard_cap = max(1, n // 4)
    support = set()
    for j in range(p):
        others = np.array([i for i in range(p) if i != j])
        prob = BlockProblem.from_gram(gram[np.ix_(others, others)], gram[others, j],
                                      gram[j, j], n, [(p - 1, 0)], params, penalty="l1")
        fit = prob.tune([(k,) for k in range(0, cap + 1)])
        size = int(np.count_nonzero(fit.coefficients[0]))
        if size > hard_cap:
            warnings.warn(
                f"neighborhood of residual {j + 1} hit the n/4 cap ({hard_cap})",
                RuntimeWarning)
            fit = prob.tune([(k,) for k in range(0, hard_cap + 1)])
        for i in np.flatnonzero(fit.coefficients[0]):
            a, b = j + 1, int(others[i]) + 1
            support.add((a, b))
            support.add((b, a))
    return frozenset(support)


def _check_support(p: int, support) -> list:
    pairs = set()
    for k, j in support:
        k, j = int(k), int(j)
        if not (1 <= k <= p and 1 <= j <= p) or k == j:
            raise ValueError(f"support entry ({k},{j}) out of range or diagonal")
        if (j, k) not in support:
            raise ValueError(f"support is not symmetric: ({k},{j}) without ({j},{k})")
        pairs.add((min(k, j), max(k, j)))
    return sorted(pairs)


def refit_precision(residuals: np.ndarray, support,
                    params: Hyperparams | None = None,
                    max_sweeps: int = 500, tol: float = 1e-9) -> PrecisionEstimate:
    """Restricted-support Gaussian MLE of the precision of the residual rows.

    Maximizes log det(Omega) - tr(S Omega) over symmetric matrices whose
    off-diagonal zeros are the complement of ``support`` via exact coordinate
    maximization; floors tiny eigenvalues at 1e-8 * trace / p afterwards.
    """
    resid = np.asarray(residuals, dtype=float)
    p, n = resid.shape
    pairs = _check_support(p, support)
    resid = resid - resid.mean(axis=1, keepdims=True)
    s_hat = resid @ resid.T / max(n, 1)
    ridged = False
    scale = float(np.trace(s_hat)) / p
    if np.linalg.eigvalsh(s_hat)[0] <= 1e-12 * max(scale, 1e-300):
        s_hat = s_hat + (1e-6 * scale) * np.eye(p)
        ridged = True

    omega = np.diag(1.0 / np.diag(s_hat))
    history = []
    for _ in range(max_sweeps):
        w = np.linalg.inv(omega)
        max_step = 0.0
        for j in range(p):
            delta = 1.0 / s_hat[j, j] - 1.0 / w[j, j]
            if delta != 0.0:
                omega[j, j] += delta
                wj = w[:, j].copy()
                w -= (delta / (1.0 + delta * w[j, j])) * np.outer(wj, wj)
                max_step = max(max_step, abs(delta))
        for (k1, j1) in pairs:
            k, j = k1 - 1, j1 - 1
            wkj, wkk, wjj, skj = w[k, j], w[k, k], w[j, j], s_hat[k, j]
            a = wkj * wkj - wkk * wjj  # negative since w is PD
            qa, qb, qc = skj * a, 2.0 * skj * wkj - a, skj - wkj
            if abs(qa) < 1e-300:
                delta = -qc / qb
            else:
                disc = max(qb * qb - 4.0 * qa * qc, 0.0)
                root = np.sqrt(disc)
                r1, r2 = (-qb + root) / (2 * qa), (-qb - root) / (2 * qa)
                # admissible interval keeps (1 + d*wkj)^2 - d^2*wkk*wjj positive
                span = np.sqrt(wkj * wkj - a)
                lo, hi = sorted(((-wkj - span) / a, (-wkj + span) / a))
                delta = r1 if lo < r1 < hi else r2
                if not lo < delta < hi:
                    delta = 0.0
            if delta != 0.0:
                omega[k, j] += delta
                omega[j, k] += delta
                u2 = w[:, [k, j]]
                m = np.array([[w[k, k], w[k, j] + 1.0 / delta],
                              [w[k, j] + 1.0 / delta, w[j, j]]])
                det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
                minv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
                w -= u2 @ minv @ u2.T
                max_step = max(max_step, abs(delta))
        sign, logdet = np.linalg.slogdet(omega)
        history.append(float(logdet - np.sum(s_hat * omega)))
        if max_step < tol * (1.0 + float(np.abs(omega).max())):
            break
        if len(history) > 1 and history[-1] - history[-2] < 1e-10 * (1.0 + abs(history[-1])):
            break

    omega = 0.5 * (omega + omega.T)
    eigvals = np.linalg.eigvalsh(omega)
    floor = 1e-8 * float(np.trace(omega)) / p
    if eigvals[0] < floor:
        vals, vecs = np.linalg.eigh(omega)
        omega = (vecs * np.maximum(vals, floor)) @ vecs.T
        omega = 0.5 * (omega + omega.T)
        eigvals = np.linalg.eigvalsh(omega)
    return PrecisionEstimate(
        omega=omega,
        support=frozenset((k, j) for (k, j) in _as_pairs(pairs)),
        min_eigenvalue=float(eigvals[0]),
        ridged=ridged,
        objective_history=history,
    )


def _as_pairs(pairs):
    for (k, j) in pairs:
        yield (k, j)
        yield (j, k)


def estimate_precision(residuals: np.ndarray,
                       params: Hyperparams | None = None) -> PrecisionEstimate:
    """Neighborhood selection followed by the restricted-support refit."""
    support = neighborhood_select(residuals, params)
    return refit_precision(residuals, support, params)
