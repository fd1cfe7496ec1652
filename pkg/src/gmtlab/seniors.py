"""Subordination on graphs: maximizers x*, senior vertices and domination sums."""

from __future__ import annotations

import heapq
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, Iterator, List, Optional, Sequence

from .measure import ksum


class AdjacencyGraph:
    """Finite graph from an adjacency mapping; neighbour order is the stored order."""

    def __init__(self, adjacency):
        if isinstance(adjacency, dict):
            self._adj = {v: list(n) for v, n in adjacency.items()}
        else:
            self._adj = {i: list(n) for i, n in enumerate(adjacency)}

    def neighbors(self, v) -> List:
        return self._adj[v]

    def vertices(self) -> List:
        return list(self._adj)

    def max_degree(self) -> int:
        return max((len(n) for n in self._adj.values()), default=0)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple]) -> "AdjacencyGraph":
        adj = [[] for _ in range(n)]
        for a, b in edges:
            if a == b or b in adj[a]:
                continue
            adj[a].append(b)
            adj[b].append(a)
        return cls(adj)

    @classmethod
    def path(cls, n: int) -> "AdjacencyGraph":
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)])


class CubeGraph:
    """The dyadic cube graph of a lattice window, optionally restricted to an allowed vertex set.

    Unrestricted, the graph is laterally unbounded and only ``neighbors`` is finite.
    """

    def __init__(self, lattice, allowed=None):
        self.lattice = lattice
        self.allowed = None if allowed is None else frozenset(allowed)

    def neighbors(self, v) -> List:
        out = self.lattice.graph_neighbors(v)
        if self.allowed is None:
            return out
        return [u for u in out if u in self.allowed]

    @classmethod
    def around(cls, lattice, cubes, hops: int = 1) -> "CubeGraph":
        """Cubes within ``hops`` edges of the given ones (a finite induced subgraph)."""
        allowed = set(cubes)
        frontier = list(allowed)
        for _ in range(hops):
            nxt = []
            for v in frontier:
                for u in lattice.graph_neighbors(v):
                    if u not in allowed:
                        allowed.add(u)
                        nxt.append(u)
            frontier = nxt
        return cls(lattice, allowed)

    def max_degree(self) -> int:
        return self.lattice.max_degree()


@dataclass
class VertexFunction:
    """Nonnegative bounded function on graph vertices; vertices not listed carry 0."""

    graph: object
    values: Dict[Hashable, float]

    def __post_init__(self):
        for v, x in self.values.items():
            if not (x >= 0 and math.isfinite(x)):
                raise ValueError(f"value at {v!r} must be finite and nonnegative")

    def __call__(self, v) -> float:
        return self.values.get(v, 0.0)

    @property
    def bound(self) -> float:
        return max(self.values.values(), default=0.0)

    def vertices(self) -> List:
        """Vertices to classify: all of a finite graph, else those listed."""
        if hasattr(self.graph, "vertices"):
            return list(self.graph.vertices())
        return list(self.values)


def bfs_rings(graph, x, cutoff: Optional[int] = None) -> Iterator[List]:
    """Successive BFS spheres around x in discovery order."""
    seen = {x}
    ring = [x]
    yield ring
    k = 0
    while cutoff is None or k < cutoff:
        nxt = []
        for v in ring:
            for u in graph.neighbors(v):
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        if not nxt:
            return
        ring = nxt
        k += 1
        yield ring


def min_senior_exponent(max_degree: int) -> int:
    """Smallest integer M with max_degree * 2^-M < 1."""
    M = 0
    while max_degree * 2.0 ** (-M) >= 1:
        M += 1
    return M


def weighted(value: float, M: float, dist: int) -> float:
    return value * 2.0 ** (-M * dist)


@dataclass
class SeniorResult:
    seniors: List
    star: Dict
    star_distance: Dict
    M: float
    hypothesis_ok: bool

    def is_senior(self, v) -> bool:
        return self.star.get(v) == v


def maximizer(graph, nu: VertexFunction, M: float, x, sup: Optional[float] = None):
    """(x*, d(x, x*)): argmax of nu(y) 2^{-M d(x,y)}, first BFS discovery winning ties.

    Rings beyond k are skipped once the running best reaches sup * 2^{-M(k+1)},
    since nothing farther can beat it strictly.
    """
    sup = nu.bound if sup is None else sup
    best, star, star_d = nu(x), x, 0
    for k, ring in enumerate(bfs_rings(graph, x)):
        if k > 0:
            for y in ring:
                val = weighted(nu(y), M, k)
                if val > best:
                    best, star, star_d = val, y, k
        if best >= weighted(sup, M, k + 1):
            break
    return star, star_d


def senior_vertices(graph, nu: VertexFunction, M: float, vertices: Optional[Sequence] = None) -> SeniorResult:
    """Maximizer map x -> x* and the senior set {x : x* = x}."""
    D = graph.max_degree()
    ok = D * 2.0 ** (-M) < 1
    if not ok:
        warnings.warn(f"2^-M * D = {D * 2.0 ** (-M):.3g} >= 1; domination bounds do not apply", RuntimeWarning)
    verts = nu.vertices() if vertices is None else list(vertices)
    sup = nu.bound
    star, dist = {}, {}
    for x in verts:
        star[x], dist[x] = maximizer(graph, nu, M, x, sup)
    seniors = [x for x in verts if star[x] == x]
    return SeniorResult(seniors, star, dist, M, ok)


def senior_vertices_bruteforce(graph, nu: VertexFunction, M: float) -> SeniorResult:
    """Unpruned scan over the whole (finite) component of every vertex."""
    verts = list(graph.vertices())
    star, dist = {}, {}
    for x in verts:
        best, s, sd = nu(x), x, 0
        for k, ring in enumerate(bfs_rings(graph, x)):
            for y in ring:
                if k == 0:
                    continue
                val = weighted(nu(y), M, k)
                if val > best:
                    best, s, sd = val, y, k
        star[x], dist[x] = s, sd
    seniors = [x for x in verts if star[x] == x]
    return SeniorResult(seniors, star, dist, M, graph.max_degree() * 2.0 ** (-M) < 1)


def graph_distance(graph, x, y, cutoff: Optional[int] = None) -> Optional[int]:
    for k, ring in enumerate(bfs_rings(graph, x, cutoff)):
        if y in ring:
            return k
    return None


def senior_envelope(graph, nu: VertexFunction, M: float, floor: Optional[float] = None) -> Dict:
    """F(x) = max_y nu(y) 2^{-M d(x,y)} at every vertex carrying positive nu.

    Best-first propagation from all positive vertices at once; values at or
    below ``floor`` (default: the smallest positive nu) cannot make any
    listed vertex subordinate and are not propagated.  Works on unbounded graphs.
    """
    pos = {v: x for v, x in nu.values.items() if x > 0}
    if not pos:
        return {}
    floor = min(pos.values()) if floor is None else floor
    best: Dict = dict(pos)
    counter = itertools.count()
    heap = [(-x, next(counter), v, x, 0) for v, x in pos.items()]
    heapq.heapify(heap)
    while heap:
        negval, _, v, src, d = heapq.heappop(heap)
        if -negval < best.get(v, 0.0):
            continue
        val = weighted(src, M, d + 1)
        if val <= floor:
            continue
        for u in graph.neighbors(v):
            if val > best.get(u, 0.0):
                best[u] = val
                heapq.heappush(heap, (-val, next(counter), u, src, d + 1))
    return {v: best[v] for v in pos}


def seniors_by_envelope(graph, nu: VertexFunction, M: float) -> List:
    """Positive vertices not strictly dominated by anyone; order follows ``nu.values``."""
    env = senior_envelope(graph, nu, M)
    return [v for v, x in nu.values.items() if x > 0 and env[v] == x]


@dataclass
class DominationReport:
    total: float
    senior_total: float
    ratio: float
    bound: float
    pointwise_violations: int
    cluster_violations: int
    clusters: Dict = field(default_factory=dict)
    hypothesis_ok: bool = True

    @property
    def passed(self) -> bool:
        return self.pointwise_violations == 0 and self.cluster_violations == 0

    def to_dict(self) -> dict:
        return {"total": self.total, "senior_total": self.senior_total, "ratio": self.ratio,
                "geometric_bound": self.bound, "pointwise_violations": self.pointwise_violations,
                "cluster_violations": self.cluster_violations, "hypothesis_ok": self.hypothesis_ok,
                "n_clusters": len(self.clusters)}


def domination_check(graph, nu: VertexFunction, M: float, result: Optional[SeniorResult] = None) -> DominationReport:
    """nu(x) <= 2^{-M d(x,x*)} nu(x*) everywhere, and every cluster sum within nu(z)/(1 - 2^-M D)."""
    res = senior_vertices(graph, nu, M) if result is None else result
    D = graph.max_degree()
    q = D * 2.0 ** (-M)
    geom = 1.0 / (1.0 - q) if q < 1 else math.inf
    pointwise = 0
    members: Dict = {}
    for x, z in res.star.items():
        if nu(x) > weighted(nu(z), M, res.star_distance[x]):
            pointwise += 1
        members.setdefault(z, []).append(nu(x))
    clusters = {z: ksum(vals) for z, vals in members.items()}
    cluster_bad = sum(1 for z, tot in clusters.items() if tot > nu(z) * geom * (1 + 1e-12))
    total = ksum([nu(x) for x in res.star])
    senior_total = ksum([nu(z) for z in res.seniors])
    ratio = total / senior_total if senior_total > 0 else (1.0 if total == 0 else math.inf)
    return DominationReport(total, senior_total, ratio, geom, pointwise, cluster_bad, clusters, q < 1)
