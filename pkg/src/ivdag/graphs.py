"""Directed-graph primitives: ancestral, mediation, and acyclicity queries.

Nodes are labeled 1..p throughout the public types, matching the convention
used everywhere else in the package; any 0-based arithmetic is local to the
individual operations.
"""

from dataclasses import dataclass, field


class CycleError(ValueError):
    """An operation that requires an acyclic graph found a directed cycle."""


def _check_node(p: int, j: int, what: str = "node") -> None:
    if not 1 <= j <= p:
        raise IndexError(f"{what} index {j} out of range 1..{p}")


@dataclass(frozen=True)
class Digraph:
    """A directed graph on nodes 1..p with a duplicate-free edge set."""

    p: int
    edges: frozenset

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset((int(k), int(j)) for k, j in self.edges))
        if self.p < 0:
            raise ValueError("p must be nonnegative")
        for k, j in self.edges:
            _check_node(self.p, k, "edge source")
            _check_node(self.p, j, "edge target")
            if k == j:
                raise ValueError(f"self-loop ({k},{j}) not allowed")

    @classmethod
    def from_edges(cls, p: int, edges) -> "Digraph":
        return cls(p, frozenset(edges))

    def children_map(self) -> dict:
        ch = {k: set() for k in range(1, self.p + 1)}
        for k, j in self.edges:
            ch[k].add(j)
        return ch

    def parents_map(self) -> dict:
        pa = {k: set() for k in range(1, self.p + 1)}
        for k, j in self.edges:
            pa[j].add(k)
        return pa

    def to_dict(self) -> dict:
        return {"p": self.p, "edges": sorted([list(e) for e in self.edges])}

    @classmethod
    def from_dict(cls, d: dict) -> "Digraph":
        return cls(int(d["p"]), frozenset(tuple(e) for e in d["edges"]))


@dataclass(frozen=True)
class BipartiteEdges:
    """Directed edges from intervention nodes 1..q to primary nodes 1..p."""

    q: int
    p: int
    edges: frozenset

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset((int(l), int(j)) for l, j in self.edges))
        for l, j in self.edges:
            _check_node(self.q, l, "intervention")
            _check_node(self.p, j, "primary")

    @classmethod
    def from_edges(cls, q: int, p: int, edges) -> "BipartiteEdges":
        return cls(q, p, frozenset(edges))

    def targets_of(self, l: int) -> frozenset:
        return frozenset(j for (ll, j) in self.edges if ll == l)

    def to_dict(self) -> dict:
        return {"q": self.q, "p": self.p, "edges": sorted([list(e) for e in self.edges])}

    @classmethod
    def from_dict(cls, d: dict) -> "BipartiteEdges":
        return cls(int(d["q"]), int(d["p"]), frozenset(tuple(e) for e in d["edges"]))


@dataclass(frozen=True)
class HypothesisSet:
    """An ordered, duplicate-free set of hypothesized directed edges."""

    edges: tuple = field(default=())

    def __post_init__(self):
        seen, ordered = set(), []
        for k, j in self.edges:
            k, j = int(k), int(j)
            if k == j:
                raise ValueError(f"self-loop ({k},{j}) not allowed in a hypothesis")
            if k < 1 or j < 1:
                raise IndexError(f"edge ({k},{j}) has nonpositive node index")
            if (k, j) not in seen:
                seen.add((k, j))
                ordered.append((k, j))
        object.__setattr__(self, "edges", tuple(ordered))

    @classmethod
    def from_edges(cls, edges) -> "HypothesisSet":
        return cls(tuple(edges))

    @classmethod
    def parse(cls, text: str) -> "HypothesisSet":
        """Parse an edge list of the form ``"1->2, 2->3"``."""
        edges = []
        for piece in text.split(","):
            piece = piece.strip()
            if not piece:
                continue
            if "->" not in piece:
                raise ValueError(f"bad edge syntax {piece!r}, expected 'k->j'")
            k, j = piece.split("->", 1)
            try:
                edges.append((int(k), int(j)))
            except ValueError:
                raise ValueError(f"bad edge syntax {piece!r}, expected integer nodes")
        if not edges:
            raise ValueError("empty edge list")
        return cls(tuple(edges))

    def __len__(self) -> int:
        return len(self.edges)

    def as_set(self) -> frozenset:
        return frozenset(self.edges)

    def to_dict(self) -> dict:
        return {"edges": [list(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, d: dict) -> "HypothesisSet":
        return cls(tuple(tuple(e) for e in d["edges"]))


def _reachable(adj: dict, start: int) -> set:
    # iterative DFS; excludes the start node unless it lies on a cycle
    seen, stack = set(), [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def ancestors(g: Digraph, j: int) -> frozenset:
    """All nodes with a directed path into ``j``; excludes ``j`` when acyclic."""
    _check_node(g.p, j)
    return frozenset(_reachable(g.parents_map(), j) - {j})


def descendants(g: Digraph, k: int) -> frozenset:
    _check_node(g.p, k)
    return frozenset(_reachable(g.children_map(), k) - {k})


def mediators(g: Digraph, k: int, j: int) -> frozenset:
    """Nodes lying strictly inside some directed path from ``k`` to ``j``."""
    _check_node(g.p, k)
    _check_node(g.p, j)
    if k == j:
        raise ValueError("mediators are undefined for k == j")
    return frozenset((descendants(g, k) & ancestors(g, j)) - {k, j})


def non_mediators(g: Digraph, k: int, j: int) -> frozenset:
    """Ancestors of ``j`` that are neither ``k`` nor mediators of (k, j)."""
    return frozenset(ancestors(g, j) - mediators(g, k, j) - {k})


def unmediated_parents(g: Digraph, j: int) -> frozenset:
    """Parents of ``j`` with no alternative directed path into ``j``."""
    _check_node(g.p, j)
    pa = {k for (k, jj) in g.edges if jj == j}
    return frozenset(k for k in pa if not mediators(g, k, j))


def has_cycle(g: Digraph) -> bool:
    """Kahn's algorithm; True when some directed cycle exists."""
    indeg = {u: 0 for u in range(1, g.p + 1)}
    ch = g.children_map()
    for _, j in g.edges:
        indeg[j] += 1
    queue = [u for u, d in indeg.items() if d == 0]
    removed = 0
    while queue:
        u = queue.pop()
        removed += 1
        for v in ch[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    return removed < g.p


def topological_order(g: Digraph) -> list:
    indeg = {u: 0 for u in range(1, g.p + 1)}
    ch = g.children_map()
    for _, j in g.edges:
        indeg[j] += 1
    queue = sorted(u for u, d in indeg.items() if d == 0)
    order = []
    while queue:
        u = queue.pop(0)
        order.append(u)
        fresh = []
        for v in ch[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                fresh.append(v)
        queue = sorted(queue + fresh)
    if len(order) < g.p:
        raise CycleError("graph contains a directed cycle")
    return order


def transitive_closure(g: Digraph) -> Digraph:
    """Edge (k, j) present in the result iff a directed path k -> ... -> j exists."""
    if has_cycle(g):
        raise CycleError("transitive closure requires an acyclic graph")
    edges = set()
    ch = g.children_map()
    for k in range(1, g.p + 1):
        for j in _reachable(ch, k):
            if j != k:
                edges.add((k, j))
    return Digraph(g.p, frozenset(edges))


def longest_path_length(g: Digraph, k: int, j: int):
    """Number of edges on the longest directed path from ``k`` to ``j``.

    Returns None when ``j`` is unreachable from ``k``. Requires a DAG.
    """
    _check_node(g.p, k)
    _check_node(g.p, j)
    order = topological_order(g)  # raises CycleError on a cycle
    if k == j:
        return 0
    ch = g.children_map()
    dist = {k: 0}
    for u in order:
        if u not in dist:
            continue
        for v in ch[u]:
            if dist[u] + 1 > dist.get(v, -1):
                dist[v] = dist[u] + 1
    return dist.get(j)


def nondegenerate_set(eplus: Digraph, h: HypothesisSet) -> HypothesisSet:
    """Edges of ``h`` that do not close a directed cycle with ``eplus``, one at a time."""
    desc_cache = {}
    kept = []
    for k, j in h.edges:
        _check_node(eplus.p, k)
        _check_node(eplus.p, j)
        if j not in desc_cache:
            desc_cache[j] = descendants(eplus, j)
        if k not in desc_cache[j]:  # adding k -> j is safe iff no path j -> ... -> k
            kept.append((k, j))
    return HypothesisSet(tuple(kept))


def is_regular(eplus: Digraph, d: HypothesisSet) -> bool:
    """True iff the union of ``eplus`` and all edges of ``d`` stays acyclic."""
    for k, j in d.edges:
        _check_node(eplus.p, k)
        _check_node(eplus.p, j)
    return not has_cycle(Digraph(eplus.p, eplus.edges | d.as_set()))
