"""Graph-recovery and coefficient-accuracy metrics for benchmark runs."""

from dataclasses import dataclass

import numpy as np

from .graphs import Digraph


@dataclass(frozen=True)
class GraphMetrics:
    """Directed-edge counts and the derived recovery rates.

    tp: estimated edges with the correct direction.
    re: estimated edges whose reverse is a true edge.
    fp: estimated edges absent from the true skeleton.
    fn: true edges missing from the estimated skeleton.
    """

    tp: int
    re: int
    fp: int
    fn: int
    fdr: float
    tpr: float
    shd: float
    ji: float

    def to_dict(self) -> dict:
        return {"tp": self.tp, "re": self.re, "fp": self.fp, "fn": self.fn,
                "fdr": self.fdr, "tpr": self.tpr, "shd": self.shd, "ji": self.ji}


def graph_metrics(estimated: Digraph, truth: Digraph) -> GraphMetrics:
    """Score an estimated edge set against the truth.

    FDR = (RE+FP)/(TP+RE+FP) with an empty estimate scoring 0;
    TPR = TP/(TP+RE+FN), so reversed edges count as misses;
    SHD = FP+FN+RE; JI = TP/(TP+SHD). Both 0/0 ratios for TPR and JI
    resolve to 1 so that a perfect (possibly empty) estimate scores perfectly.
    """
    if estimated.p != truth.p:
        raise ValueError("graphs must share the node count")
    est, tru = estimated.edges, truth.edges
    tp = sum(1 for e in est if e in tru)
    re = sum(1 for (k, j) in est if (k, j) not in tru and (j, k) in tru)
    fp = len(est) - tp - re
    fn = sum(1 for (k, j) in tru if (k, j) not in est and (j, k) not in est)
    fdr = (re + fp) / (tp + re + fp) if (tp + re + fp) > 0 else 0.0
    tpr = tp / (tp + re + fn) if (tp + re + fn) > 0 else 1.0
    shd = float(fp + fn + re)
    ji = tp / (tp + shd) if (tp + shd) > 0 else 1.0
    return GraphMetrics(tp=tp, re=re, fp=fp, fn=fn, fdr=fdr, tpr=tpr, shd=shd, ji=ji)


def estimation_metrics(u_hat: np.ndarray, u_true: np.ndarray,
                       comparison: str = "union") -> tuple:
    """Deviation summary (max_ad, mean_ad, mean_sqd) between coefficient matrices.

    comparison selects the entry set: "union" of the true and estimated
    supports (default), "true" support only, or "all" entries.
    """
    u_hat = np.asarray(u_hat, dtype=float)
    u_true = np.asarray(u_true, dtype=float)
    if u_hat.shape != u_true.shape:
        raise ValueError("coefficient matrices must share a shape")
    if comparison == "union":
        mask = (u_hat != 0) | (u_true != 0)
    elif comparison == "true":
        mask = u_true != 0
    elif comparison == "all":
        mask = np.ones_like(u_true, dtype=bool)
    else:
        raise ValueError(f"unknown comparison set {comparison!r}")
    if not mask.any():
        return 0.0, 0.0, 0.0
    diff = np.abs(u_hat[mask] - u_true[mask])
    return float(diff.max()), float(diff.mean()), float((diff ** 2).mean())
