"""epsilon-regular cubes and the senior-cube regularity chain on a lattice window."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .dyadic import CubeAddress, DensityTable, DyadicLattice, populated_cubes
from .measure import DiscreteMeasure, ksum
from .seniors import CubeGraph, bfs_rings, VertexFunction, min_senior_exponent, seniors_by_envelope

RTOL = 1e-12


def is_epsilon_regular(table: DensityTable, Q: CubeAddress, epsilon: float, R_graph: int,
                       sup_density: Optional[float] = None, graph=None) -> bool:
    """No populated Q' within graph distance R_graph has D(3Q') > 2^{eps d(Q,Q')} D(3Q)."""
    graph = CubeGraph(table.lattice) if graph is None else graph
    dq = table.density(Q)
    sup = max((e[1] for e in table.entries.values()), default=0.0) if sup_density is None else sup_density
    limit = dq * (1 + RTOL)
    for k, ring in enumerate(bfs_rings(graph, Q, R_graph)):
        allowed = limit * 2.0 ** (epsilon * k)
        for R in ring:
            if table.density(R) > allowed:
                return False
        # nothing farther can exceed the growing allowance
        if sup <= limit * 2.0 ** (epsilon * (k + 1)):
            return True
    return True


def epsilon_regular_cubes(mu: DiscreteMeasure, lattice: DyadicLattice, s: float, epsilon: float,
                          R_graph: int = 8, candidates: Optional[Sequence[CubeAddress]] = None,
                          table: Optional[DensityTable] = None, graph=None) -> List[CubeAddress]:
    """epsilon-regular cubes among the candidates (default: every populated cube)."""
    table = populated_cubes(mu, lattice, s) if table is None else table
    sup = max((e[1] for e in table.entries.values()), default=0.0)
    cands = sorted(table.entries) if candidates is None else list(candidates)
    return [Q for Q in cands if is_epsilon_regular(table, Q, epsilon, R_graph, sup, graph)]


def cube_weights(table: DensityTable, p: float) -> Dict[CubeAddress, float]:
    """nu(Q) = D(3Q)^p mu(3Q) on populated cubes."""
    return {Q: dens ** p * mass for Q, (mass, dens) in table.entries.items()}


@dataclass
class ChainReport:
    M: int
    p: float
    epsilon: float
    n_cubes: int
    n_seniors: int
    violations: List[CubeAddress]
    boundary_suspect: List[CubeAddress]
    total: float
    senior_total: float
    ratio: float
    bound: float
    regular_total: Optional[float] = None
    regular_constant: Optional[float] = None
    verdict: str = "complete"
    seniors: List[CubeAddress] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations and self.ratio <= self.bound + 0.01

    def to_dict(self) -> dict:
        return {"M": self.M, "p": self.p, "epsilon": self.epsilon, "n_cubes": self.n_cubes,
                "n_seniors": self.n_seniors, "n_violations": len(self.violations),
                "violations": [[q.level, *q.coords] for q in self.violations],
                "n_boundary_suspect": len(self.boundary_suspect),
                "total": self.total, "senior_total": self.senior_total,
                "domination_ratio": self.ratio, "domination_bound": self.bound,
                "regular_total": self.regular_total, "regular_constant": self.regular_constant,
                "verdict": self.verdict}


def senior_regular_chain_check(mu: DiscreteMeasure, lattice: DyadicLattice, s: float,
                               M: Optional[int] = None, p: float = 2.0, R_graph: int = 8,
                               R_guard: int = 2, scan_all_regular: bool = False,
                               table: Optional[DensityTable] = None, hops: Optional[int] = 1) -> ChainReport:
    """Seniors of nu(Q) = D(3Q)^p mu(3Q) are (M+s)/(p+1)-regular; the senior mass dominates the total.

    Edges change the level by at most one, so nu(Q') <= 2^{M d} nu(Q) gives
    D(3Q')^{p+1} <= 2^{(M+s) d} D(3Q)^{p+1}; the scan checks this numerically.
    Both steps use one graph: the cubes within ``hops`` edges of a populated
    cube (None for the laterally unbounded window, which can be very slow).
    """
    D = lattice.max_degree()
    M = min_senior_exponent(D) if M is None else int(M)
    bound = 1.0 / (1.0 - D * 2.0 ** (-M)) if D * 2.0 ** (-M) < 1 else math.inf
    eps = (M + s) / (p + 1)
    table = populated_cubes(mu, lattice, s) if table is None else table
    weights = cube_weights(table, p)
    if not weights or all(v == 0 for v in weights.values()):
        return ChainReport(M, p, eps, 0, 0, [], [], 0.0, 0.0, 1.0, bound, verdict="vacuous")
    graph = CubeGraph(lattice) if hops is None else CubeGraph.around(lattice, weights, hops)
    nu = VertexFunction(graph, weights)
    seniors = seniors_by_envelope(graph, nu, M)
    sup = max(e[1] for e in table.entries.values())
    bad = [Q for Q in seniors if not is_epsilon_regular(table, Q, eps, R_graph, sup, graph)]
    suspect = [Q for Q in seniors if Q.level - lattice.k_min < R_guard or lattice.k_max - Q.level < R_guard]
    total = ksum(list(weights.values()))
    senior_total = ksum([weights[Q] for Q in seniors])
    rep = ChainReport(M, p, eps, len(weights), len(seniors), bad, suspect, total, senior_total,
                      total / senior_total, bound, seniors=seniors)
    if scan_all_regular:
        regular = epsilon_regular_cubes(mu, lattice, s, eps, R_graph, table=table, graph=graph)
        rep.regular_total = ksum([weights[Q] for Q in regular])
        rep.regular_constant = total / rep.regular_total if rep.regular_total > 0 else math.inf
    return rep
