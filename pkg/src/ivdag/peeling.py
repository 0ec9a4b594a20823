"""Ancestral-relation discovery by iterative leaf peeling.

The reduced form Y = V'X + noise, with V = W (I - U)^{-1}, links every
intervention to its target and to all downstream nodes. Rows of an estimated
V with minimal support expose the current leaf variables and their valid
instruments; removing identified leaves and repeating yields ancestral
relations, propagated interventional relations, and per-node candidate
instrument sets.
"""

from dataclasses import dataclass, field

import numpy as np

from . import graphs
from .config import Hyperparams, PIPELINE_DEFAULTS
from .graphs import BipartiteEdges, Digraph
from .simulate import Dataset
from .sparse import BlockProblem


class OrphanVariablesError(RuntimeError):
    """No remaining intervention row supports the still-active variables."""

    def __init__(self, columns):
        self.columns = tuple(sorted(int(c) for c in columns))
        super().__init__(
            "no intervention supports the remaining variables: "
            f"{list(self.columns)}; every variable needs at least one instrument")


class DegenerateColumnError(ValueError):
    """An intervention column is constant and cannot be used as a regressor."""

    def __init__(self, column):
        self.column = int(column)
        super().__init__(f"intervention column {self.column} has zero variance")


@dataclass
class VMatrix:
    """Estimated reduced-form coefficients of X on Y (q x p)."""

    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim != 2:
            raise ValueError("entries must be a q x p matrix")

    @property
    def q(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]

    @property
    def support(self) -> frozenset:
        ls, js = np.nonzero(self.entries)
        return frozenset((int(l) + 1, int(j) + 1) for l, j in zip(ls, js))


@dataclass
class ArgEstimate:
    """Estimated ancestral relation graph with candidate instrument sets.

    eplus is transitively closed and acyclic; iplus includes propagated
    interventional relations; candidate_ivs maps each node to interventions
    that hit it and otherwise hit only its (estimated) descendants.
    """

    eplus: Digraph
    iplus: BipartiteEdges
    candidate_ivs: dict
    leaf_order: tuple = ()
    v_hat: VMatrix | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "eplus": self.eplus.to_dict(),
            "iplus": self.iplus.to_dict(),
            "candidate_ivs": {str(k): sorted(v) for k, v in sorted(self.candidate_ivs.items())},
            "leaf_order": [list(gen) for gen in self.leaf_order],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArgEstimate":
        return cls(
            eplus=Digraph.from_dict(d["eplus"]),
            iplus=BipartiteEdges.from_dict(d["iplus"]),
            candidate_ivs={int(k): frozenset(v) for k, v in d["candidate_ivs"].items()},
            leaf_order=tuple(tuple(gen) for gen in d["leaf_order"]),
        )


def estimate_v(data: Dataset, params: Hyperparams | None = None) -> VMatrix:
    """Column-wise sparse regression of each primary variable on all interventions."""
    params = params or PIPELINE_DEFAULTS
    if data.n < 2:
        raise ValueError("need at least two samples to estimate the reduced form")
    variances = data.x.var(axis=1)
    dead = np.flatnonzero(variances <= 0)
    if dead.size:
        raise DegenerateColumnError(dead[0] + 1)
    q, p, n = data.q, data.p, data.n
    cap = max(1, min(q, n // 2, params.kappa_max or 3 * p))
    gram = data.x @ data.x.T
    entries = np.zeros((q, p))
    grid = [(k,) for k in range(1, cap + 1)]
    for j in range(p):
        yj = data.y[j]
        prob = BlockProblem.from_gram(gram, data.x @ yj, yj @ yj, n, [(q, 0)], params)
        entries[:, j] = prob.tune(grid).coefficients[0]
    return VMatrix(entries)


def identify_leaves(v: VMatrix, active) -> tuple:
    """Leaves among the active columns and the instrument rows exposing them.

    Rows with the smallest positive support over the active columns are
    scanned; each such row votes for the column holding its largest absolute
    entry (ties go to the smallest column index).
    """
    active = sorted(int(c) for c in active)
    if not active:
        raise ValueError("no active columns")
    cols = np.array(active) - 1
    sub = v.entries[:, cols]
    supp = np.count_nonzero(sub, axis=1)
    positive = supp > 0
    if not positive.any():
        raise OrphanVariablesError(active)
    smin = supp[positive].min()
    leaves, ivs = set(), {}
    for l0 in np.flatnonzero(supp == smin):
        k = active[int(np.argmax(np.abs(sub[l0])))]
        leaves.add(k)
        ivs.setdefault(k, set()).add(int(l0) + 1)
    return frozenset(leaves), {k: frozenset(v_) for k, v_ in ivs.items()}


def identify_cross_edges(v: VMatrix, leaves, ivs, peeled) -> frozenset:
    """Edges from current leaves into already-peeled nodes.

    Edge (k, j) is declared when every instrument row of leaf k has a nonzero
    entry at the peeled column j.
    """
    edges = set()
    for k in leaves:
        rows = [l - 1 for l in ivs[k]]
        for j in peeled:
            if all(v.entries[l, j - 1] != 0 for l in rows):
                edges.add((k, j))
    return frozenset(edges)


def arg_from_v(v: VMatrix) -> ArgEstimate:
    """Run the peeling loop on a (possibly exact) reduced-form matrix."""
    q, p = v.q, v.p
    active = set(range(1, p + 1))
    peeled = []
    generations = []
    raw_edges = set()
    while active:
        leaves, ivs = identify_leaves(v, active)
        raw_edges |= identify_cross_edges(v, leaves, ivs, peeled)
        generations.append(tuple(sorted(leaves)))
        peeled.extend(sorted(leaves))
        active -= leaves
    eplus = graphs.transitive_closure(Digraph(p, frozenset(raw_edges)))
    anc = eplus.parents_map()  # closed graph: parents are exactly the ancestors
    iplus = set(v.support)
    for l, k in list(iplus):
        iplus.update((l, j) for j in range(1, p + 1) if k in anc[j])
    targets = {}
    for l, j in iplus:
        targets.setdefault(l, set()).add(j)
    candidate = {}
    for k in range(1, p + 1):
        desc = {j for j in range(1, p + 1) if k in anc[j]}
        candidate[k] = frozenset(
            l for l, tg in targets.items()
            if k in tg and all(j == k or j in desc for j in tg))
    return ArgEstimate(
        eplus=eplus,
        iplus=BipartiteEdges(q, p, frozenset(iplus)),
        candidate_ivs=candidate,
        leaf_order=tuple(generations),
        v_hat=v,
    )


def peel(data: Dataset, params: Hyperparams | None = None) -> ArgEstimate:
    """Estimate the reduced form, then peel it down to an ancestral graph."""
    return arg_from_v(estimate_v(data, params))
