"""delta-non-LCV cubes (support pairs whose midpoint sees an empty ball) and Carleson packing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .dyadic import CubeAddress, DyadicLattice, points_in_triple
from .measure import DiscreteMeasure, ksum


@dataclass
class Witness:
    x: np.ndarray
    y: np.ndarray
    clearance: float

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.x + self.y)

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(), "midpoint": self.midpoint.tolist(),
                "clearance": self.clearance}


@dataclass
class LCVResult:
    delta: float
    flagged: Dict[CubeAddress, Witness] = field(default_factory=dict)
    sampled: List[CubeAddress] = field(default_factory=list)
    scanned: int = 0

    def to_dict(self) -> dict:
        return {"delta": self.delta, "n_scanned": self.scanned, "n_flagged": len(self.flagged),
                "n_sampled": len(self.sampled),
                "flags": [{"level": q.level, "coords": list(q.coords), **w.to_dict()}
                          for q, w in sorted(self.flagged.items())]}


def farthest_point_order(points: np.ndarray, k: int) -> np.ndarray:
    """Indices of k points chosen greedily to be far from those already chosen."""
    n = points.shape[0]
    k = min(k, n)
    chosen = [0]
    dist = np.linalg.norm(points - points[0], axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1))
    return np.array(chosen)


def clearance(mu: DiscreteMeasure, z: np.ndarray) -> np.ndarray:
    """Distance from each query point to the nearest support point."""
    d, _ = mu.index.query(np.atleast_2d(z), k=1)
    return np.atleast_1d(d)


def cube_witness(mu: DiscreteMeasure, lattice: DyadicLattice, Q: CubeAddress, delta: float,
                 pair_budget: int = 20_000):
    """(witness or None, sampled?) for one cube; B(mid, delta l) misses the support iff clearance >= delta l."""
    idx = points_in_triple(mu, lattice, Q, closed=True)
    if idx.size < 2:
        return None, False
    pts = mu.points[idx]
    sampled = idx.size * idx.size > pair_budget
    if sampled:
        pts = pts[farthest_point_order(pts, max(2, int(math.sqrt(pair_budget))))]
    i, j = np.triu_indices(pts.shape[0], k=1)
    radius = delta * 2.0 ** Q.level
    best = None
    for start in range(0, i.size, 200_000):
        a, b = i[start:start + 200_000], j[start:start + 200_000]
        mids = 0.5 * (pts[a] + pts[b])
        clr = clearance(mu, mids)
        hit = np.nonzero(clr >= radius)[0]
        if hit.size:
            k = hit[np.argmax(clr[hit])]
            if best is None or clr[k] > best.clearance:
                best = Witness(pts[a[k]].copy(), pts[b[k]].copy(), float(clr[k]))
    return best, sampled


def non_lcv_cubes(mu: DiscreteMeasure, lattice: DyadicLattice, delta: float, pair_budget: int = 20_000,
                  cubes: Optional[Iterable[CubeAddress]] = None) -> LCVResult:
    """Flag cubes whose closed triple holds support points x, y with B((x+y)/2, delta l(Q)) empty."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    res = LCVResult(delta)
    cand = populated_triples(mu, lattice) if cubes is None else list(cubes)
    for Q in cand:
        res.scanned += 1
        w, sampled = cube_witness(mu, lattice, Q, delta, pair_budget)
        if w is not None:
            res.flagged[Q] = w
        elif sampled:
            res.sampled.append(Q)
    return res


def populated_triples(mu: DiscreteMeasure, lattice: DyadicLattice) -> List[CubeAddress]:
    """Cubes of the window whose closed triple holds at least two support points."""
    import itertools

    out = []
    # c - 1 <= u <= c + 2 allows c in {floor(u) - 2, ..., floor(u) + 1}
    shifts = np.array(list(itertools.product((-2, -1, 0, 1), repeat=lattice.dim)), dtype=np.int64)
    for level in range(lattice.k_min, lattice.k_max + 1):
        u = (mu.points - lattice.offset) / 2.0 ** level
        base = np.floor(u).astype(np.int64)
        keys = []
        for sh in shifts:
            c = base + sh
            ok = np.all((u >= c - 1) & (u <= c + 2), axis=1)
            keys.append(c[ok])
        keys = np.vstack(keys)
        if keys.shape[0] == 0:
            continue
        uniq, counts = np.unique(keys, axis=0, return_counts=True)
        for row, cnt in zip(uniq, counts):
            if cnt >= 2:
                out.append(lattice.address(level, row))
    return out


def witness_valid(mu: DiscreteMeasure, lattice: DyadicLattice, Q: CubeAddress, w: Witness, delta: float) -> bool:
    """Both points in the closed triple and support, and the midpoint ball of radius delta l empty."""
    lo, hi = lattice.triple_box(Q)
    inside = all(np.all((p >= lo) & (p <= hi)) for p in (w.x, w.y))
    on_support = all(clearance(mu, p)[0] == 0.0 for p in (w.x, w.y))
    return bool(inside and on_support and clearance(mu, w.midpoint)[0] >= delta * 2.0 ** Q.level)


def is_ancestor(lattice: DyadicLattice, P: CubeAddress, Q: CubeAddress) -> bool:
    """Q is contained in P (Q = P allowed)."""
    if Q.level > P.level:
        return False
    shift = P.level - Q.level
    return tuple(c >> shift for c in Q.coords) == tuple(P.coords)


def carleson_packing(family: Iterable[CubeAddress], P: CubeAddress, s: float,
                     lattice: Optional[DyadicLattice] = None) -> float:
    """sum over family cubes inside P of l(Q)^s, divided by l(P)^s."""
    lat = lattice if lattice is not None else DyadicLattice(len(P.coords), P.level, P.level)
    terms = [2.0 ** ((Q.level - P.level) * s) for Q in family if is_ancestor(lat, P, Q)]
    return ksum(terms)


def carleson_constant(family: Sequence[CubeAddress], tops: Iterable[CubeAddress], s: float) -> tuple:
    """(sup ratio, witness top cube) over the given top cubes."""
    best, arg = 0.0, None
    for P in tops:
        r = carleson_packing(family, P, s)
        if r > best:
            best, arg = r, P
    return best, arg
