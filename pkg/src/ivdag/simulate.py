"""Ground-truth model generators and data sampling for the benchmark designs.

The generative model is a linear structural equation system with additive
interventions and latent confounding:

    Y = U'Y + W'X + Phi'eta + e,   eta ~ N(0, I_r),  e ~ N(0, diag(sigma^2)),

so the error vector eps = Phi'eta + e has covariance Phi'Phi + diag(sigma^2).
"""

from dataclasses import dataclass

import numpy as np

from . import graphs
from .graphs import BipartiteEdges, Digraph


@dataclass
class DagSpec:
    """A fully specified generative model, including confounding loadings."""

    p: int
    q: int
    r: int
    u: np.ndarray       # (p, p), u[k-1, j-1] != 0 means node k causes node j
    w: np.ndarray       # (q, p) interventional effects
    phi: np.ndarray     # (r, p) confounding loadings
    sigmas: np.ndarray  # (p,) independent error scales
    intervention_kind: str = "continuous"
    seed: int = 0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if self.u.shape != (self.p, self.p):
            raise ValueError("u must be p x p")
        if self.w.shape != (self.q, self.p):
            raise ValueError("w must be q x p")
        if self.phi.shape != (self.r, self.p):
            raise ValueError("phi must be r x p")
        if self.sigmas.shape != (self.p,) or np.any(self.sigmas <= 0):
            raise ValueError("sigmas must be p positive reals")
        if self.intervention_kind not in ("continuous", "discrete"):
            raise ValueError(f"unknown intervention kind {self.intervention_kind!r}")
        if graphs.has_cycle(self.true_digraph()):
            raise ValueError("u must describe an acyclic graph")

    def true_digraph(self) -> Digraph:
        ks, js = np.nonzero(self.u)
        return Digraph(self.p, frozenset((int(k) + 1, int(j) + 1) for k, j in zip(ks, js)))

    def true_interventions(self) -> BipartiteEdges:
        ls, js = np.nonzero(self.w)
        return BipartiteEdges(self.q, self.p,
                              frozenset((int(l) + 1, int(j) + 1) for l, j in zip(ls, js)))

    def v_matrix(self) -> np.ndarray:
        """Reduced-form effect of X on Y: W (I - U)^{-1}.

        Uses the nilpotent series I + U + U^2 + ... so that entries without a
        connecting path are exactly zero, not inversion round-off.
        """
        inv = np.eye(self.p)
        power = np.eye(self.p)
        for _ in range(self.p - 1):
            power = power @ self.u
            if not power.any():
                break
            inv = inv + power
        return self.w @ inv

    def error_covariance(self) -> np.ndarray:
        return self.phi.T @ self.phi + np.diag(self.sigmas ** 2)


@dataclass
class Dataset:
    """Observed samples: primary variables y (p x n) and interventions x (q x n)."""

    y: np.ndarray
    x: np.ndarray
    names: tuple | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        if self.y.ndim != 2 or self.x.ndim != 2:
            raise ValueError("y and x must be 2-d (variables x samples)")
        if self.y.shape[1] != self.x.shape[1]:
            raise ValueError(
                f"sample counts differ: y has {self.y.shape[1]}, x has {self.x.shape[1]}")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.x))):
            raise ValueError("data contains non-finite entries")

    @property
    def p(self) -> int:
        return self.y.shape[0]

    @property
    def q(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.y.shape[1]


def _signed_uniform(rng, size):
    # magnitudes in (0.4, 0.6), random sign
    return rng.uniform(0.4, 0.6, size) * rng.choice([-1.0, 1.0], size)


def _stacked_w(p: int, q: int, f: np.ndarray) -> np.ndarray:
    return np.vstack([np.eye(p), np.eye(p), f])


def gen_hub(seed: int, intervention_kind: str = "continuous") -> DagSpec:
    """Hub design: node 1 points at every other node with a +-1 effect.

    p=101 primary variables, q=252 interventions (two valid instruments per
    node plus 50 invalid two-target rows), r=10 confounding sources hitting
    blocks of ten nodes.
    """
    p, q, r = 101, 252, 10
    rng = np.random.default_rng(seed)
    u = np.zeros((p, p))
    u[0, 1:] = rng.choice([-1.0, 1.0], p - 1)
    f = np.zeros((q - 2 * p, p))
    for j in range(1, q - 2 * p + 1):  # row j targets nodes 2j and 2j+1
        f[j - 1, 2 * j - 1] = 1.0
        f[j - 1, 2 * j] = 1.0
    phi = np.zeros((r, p))
    phi[0, 0] = _signed_uniform(rng, ())
    for m in range(1, r + 1):  # confounder m loads on nodes 10m-8 .. 10m+1
        phi[m - 1, 10 * m - 9:10 * m + 1] = _signed_uniform(rng, 10)
    sigmas = rng.uniform(0.4, 0.6, p)
    return DagSpec(p, q, r, u, _stacked_w(p, q, f), phi, sigmas, intervention_kind, seed)


def gen_random(seed: int, p: int = 100, q: int = 250, r: int = 10,
               edge_prob: float | None = None,
               intervention_kind: str = "continuous") -> DagSpec:
    """Sparse random upper-triangular design with unit edge weights."""
    if edge_prob is None:
        edge_prob = 1.0 / (10.0 * p)
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    if q < 2 * p:
        raise ValueError("need q >= 2p: two private instruments per node")
    rng = np.random.default_rng(seed)
    u = np.triu((rng.random((p, p)) < edge_prob).astype(float), k=1)
    f = np.zeros((q - 2 * p, p))
    for j in range(1, q - 2 * p + 1):  # row j targets nodes 2j-1 and 2j
        if 2 * j > p:
            break
        f[j - 1, 2 * j - 2] = 1.0
        f[j - 1, 2 * j - 1] = 1.0
    phi = np.zeros((r, p))
    for m in range(1, r + 1):  # confounder m loads on nodes 10m-9 .. 10m
        lo, hi = 10 * (m - 1), min(10 * m, p)
        if lo >= hi:
            break
        phi[m - 1, lo:hi] = _signed_uniform(rng, hi - lo)
    sigmas = rng.uniform(0.4, 0.6, p)
    return DagSpec(p, q, r, u, _stacked_w(p, q, f), phi, sigmas, intervention_kind, seed)


def sample(spec: DagSpec, n: int, seed: int | None = None) -> Dataset:
    """Draw n independent observations from the structural model."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(spec.seed ^ 0x5EED_DA7A if seed is None else seed)
    if spec.intervention_kind == "continuous":
        x = rng.standard_normal((spec.q, n))
    else:
        x = rng.choice([-1.0, 1.0], (spec.q, n))
    eta = rng.standard_normal((spec.r, n))
    e = rng.standard_normal((spec.p, n)) * spec.sigmas[:, None]
    rhs = spec.w.T @ x + spec.phi.T @ eta + e
    y = np.linalg.solve(np.eye(spec.p) - spec.u.T, rhs)
    return Dataset(y=y, x=x)


def true_ancestral_arg(spec: DagSpec):
    """Exact ancestral relation graph, propagated interventions, and candidate
    instrument sets implied by the ground-truth model, with the exact
    reduced-form matrix attached."""
    from .peeling import ArgEstimate, VMatrix  # local import avoids a cycle

    g = spec.true_digraph()
    eplus = graphs.transitive_closure(g)
    inter = spec.true_interventions()
    anc = {j: graphs.ancestors(eplus, j) for j in range(1, spec.p + 1)}
    iplus = set(inter.edges)
    for l, k in inter.edges:
        for j in range(1, spec.p + 1):
            if k in anc[j]:
                iplus.add((l, j))
    candidate = {}
    for k in range(1, spec.p + 1):
        desc = graphs.descendants(eplus, k)
        ca = set()
        for l in range(1, spec.q + 1):
            targets = inter.targets_of(l)
            if k in targets and all(t == k or t in desc for t in targets):
                ca.add(l)
        candidate[k] = frozenset(ca)
    return ArgEstimate(
        eplus=eplus,
        iplus=BipartiteEdges(spec.q, spec.p, frozenset(iplus)),
        candidate_ivs=candidate,
        leaf_order=(),
        v_hat=VMatrix(spec.v_matrix()),
    )
