"""Dyadic cubes over a level window, the cube graph, and triple-cube densities."""

from __future__ import annotations

import csv
import itertools
import math
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from .measure import DiscreteMeasure, ksum

EXCEEDS_CUTOFF = None  # sentinel returned by graph_distance


class CubeAddress(NamedTuple):
    """Cube offset + 2^level * (coords + [0,1)^d) in the lattice named ``lattice_id``."""

    level: int
    coords: Tuple[int, ...]
    lattice_id: str = ""


class WindowError(ValueError):
    pass


class CubeCountError(RuntimeError):
    pass


class DyadicLattice:
    def __init__(self, dim: int, k_min: int, k_max: int, offset=None, lattice_id: Optional[str] = None):
        if k_min > k_max:
            raise ValueError("k_min must not exceed k_max")
        self.dim = int(dim)
        self.k_min = int(k_min)
        self.k_max = int(k_max)
        off = np.zeros(self.dim) if offset is None else np.asarray(offset, dtype=float).reshape(self.dim)
        self.offset = off
        self.lattice_id = lattice_id if lattice_id is not None else (
            "L" + ",".join(f"{v:.17g}" for v in off) if np.any(off) else "L0")

    def __repr__(self) -> str:
        return f"DyadicLattice(dim={self.dim}, window=[{self.k_min}, {self.k_max}], offset={self.offset.tolist()})"

    @classmethod
    def for_measure(cls, mu: DiscreteMeasure, levels_below: int = 0, offset=None,
                    k_max: Optional[int] = None, k_min: Optional[int] = None) -> "DyadicLattice":
        """Window from the finest scale resolving the support to a cube holding it all."""
        spacing = mu.min_spacing()
        extent = float(np.max(mu.points.max(axis=0) - mu.points.min(axis=0))) if len(mu) else 1.0
        if k_max is None:
            k_max = int(math.ceil(math.log2(max(extent, 1e-300)))) if extent > 0 else 0
        if k_min is None:
            k_min = int(math.floor(math.log2(spacing))) - levels_below if math.isfinite(spacing) else k_max
        return cls(mu.dim, min(k_min, k_max), k_max, offset)

    def side(self, level: int) -> float:
        return 2.0 ** level

    def in_window(self, level: int) -> bool:
        return self.k_min <= level <= self.k_max

    def address(self, level: int, coords: Iterable[int]) -> CubeAddress:
        return CubeAddress(int(level), tuple(int(c) for c in coords), self.lattice_id)

    def cube_of_point(self, x, level: int) -> CubeAddress:
        if not self.in_window(level):
            raise WindowError(f"level {level} outside window [{self.k_min}, {self.k_max}]")
        x = np.asarray(x, dtype=float).reshape(self.dim)
        c = np.floor((x - self.offset) / 2.0 ** level).astype(np.int64)
        return self.address(level, c)

    def box(self, Q: CubeAddress) -> Tuple[np.ndarray, np.ndarray]:
        side = 2.0 ** Q.level
        lo = self.offset + side * np.asarray(Q.coords, dtype=float)
        return lo, lo + side

    def center(self, Q: CubeAddress) -> np.ndarray:
        lo, hi = self.box(Q)
        return 0.5 * (lo + hi)

    def triple_box(self, Q: CubeAddress) -> Tuple[np.ndarray, np.ndarray]:
        side = 2.0 ** Q.level
        lo = self.offset + side * (np.asarray(Q.coords, dtype=float) - 1.0)
        return lo, lo + 3.0 * side

    def parent(self, Q: CubeAddress) -> CubeAddress:
        return CubeAddress(Q.level + 1, tuple(c >> 1 for c in Q.coords), Q.lattice_id)

    def children(self, Q: CubeAddress) -> List[CubeAddress]:
        base = [2 * c for c in Q.coords]
        return [CubeAddress(Q.level - 1, tuple(b + e for b, e in zip(base, bits)), Q.lattice_id)
                for bits in itertools.product((0, 1), repeat=self.dim)]

    def face_neighbors(self, Q: CubeAddress) -> List[CubeAddress]:
        out = []
        for i in range(self.dim):
            for step in (-1, 1):
                c = list(Q.coords)
                c[i] += step
                out.append(CubeAddress(Q.level, tuple(c), Q.lattice_id))
        return out

    def graph_neighbors(self, Q: CubeAddress) -> List[CubeAddress]:
        """Children (if above k_min), parent (if below k_max), and the 2d face neighbours."""
        out: List[CubeAddress] = []
        if Q.level - 1 >= self.k_min:
            out.extend(self.children(Q))
        if Q.level + 1 <= self.k_max:
            out.append(self.parent(Q))
        out.extend(self.face_neighbors(Q))
        return out

    def max_degree(self) -> int:
        return 2 ** self.dim + 2 * self.dim + 1

    def graph_distance(self, Q: CubeAddress, R: CubeAddress, cutoff: int) -> Optional[int]:
        """Breadth-first distance in the cube graph, or None if it exceeds ``cutoff``."""
        for cube in (Q, R):
            if not self.in_window(cube.level):
                raise WindowError(f"cube {cube} outside the level window")
        if Q == R:
            return 0
        for dist, ring in enumerate(self.rings(Q, cutoff)):
            if R in ring:
                return dist
        return EXCEEDS_CUTOFF

    def rings(self, Q: CubeAddress, cutoff: int) -> Iterator[List[CubeAddress]]:
        """Successive BFS spheres around Q, in discovery order, up to radius ``cutoff``."""
        seen = {Q}
        ring = [Q]
        yield ring
        for _ in range(cutoff):
            nxt = []
            for v in ring:
                for u in self.graph_neighbors(v):
                    if u not in seen:
                        seen.add(u)
                        nxt.append(u)
            if not nxt:
                return
            ring = nxt
            yield ring

    def rescaled(self, factor: float) -> "DyadicLattice":
        """Same cubes after x -> factor*x; factor must be a power of two."""
        e = math.log2(factor)
        if e != int(e):
            raise ValueError("rescaling factor must be a power of two")
        e = int(e)
        return DyadicLattice(self.dim, self.k_min + e, self.k_max + e, self.offset * factor)

    def jittered(self, seed: int = 0, amount: float = 1e-3) -> "DyadicLattice":
        """Offset moved by a small random fraction of the finest side, keeping atoms off faces."""
        rng = np.random.default_rng(seed)
        off = self.offset + amount * 2.0 ** self.k_min * rng.uniform(-1, 1, self.dim)
        return DyadicLattice(self.dim, self.k_min, self.k_max, off)


def points_in_triple(mu: DiscreteMeasure, lattice: DyadicLattice, Q: CubeAddress, closed: bool = False) -> np.ndarray:
    """Indices of support points in the open (or closed) concentric triple of Q."""
    u = (mu.points - lattice.offset) / 2.0 ** Q.level
    c = np.asarray(Q.coords, dtype=float)
    if closed:
        inside = np.all((u >= c - 1) & (u <= c + 2), axis=1)
    else:
        inside = np.all((u > c - 1) & (u < c + 2), axis=1)
    return np.nonzero(inside)[0]


def points_in_cube(mu: DiscreteMeasure, lattice: DyadicLattice, Q: CubeAddress) -> np.ndarray:
    u = np.floor((mu.points - lattice.offset) / 2.0 ** Q.level).astype(np.int64)
    return np.nonzero(np.all(u == np.asarray(Q.coords), axis=1))[0]


def cube_density_value(mass: float, level: int, s: float) -> float:
    return mass / 2.0 ** (level * s)


def density(mu: DiscreteMeasure, lattice: DyadicLattice, Q: CubeAddress, s: float) -> Tuple[float, float]:
    """(mu(3Q), mu(3Q) / l(Q)^s) with 3Q the concentric open cube of side 3 l(Q)."""
    mass = ksum(mu.weights[points_in_triple(mu, lattice, Q)])
    return mass, cube_density_value(mass, Q.level, s)


class DensityTable:
    """Cube -> (mu(3Q), D(3Q)) for every populated cube of a lattice window."""

    def __init__(self, lattice: DyadicLattice, s: float, entries: Dict[CubeAddress, Tuple[float, float]]):
        self.lattice = lattice
        self.s = s
        self.entries = entries

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, Q) -> bool:
        return Q in self.entries

    def __getitem__(self, Q) -> Tuple[float, float]:
        return self.entries[Q]

    def __iter__(self):
        return iter(self.entries)

    def items(self):
        return self.entries.items()

    def mass(self, Q) -> float:
        e = self.entries.get(Q)
        return e[0] if e else 0.0

    def density(self, Q) -> float:
        e = self.entries.get(Q)
        return e[1] if e else 0.0

    def levels(self) -> List[int]:
        return sorted({Q.level for Q in self.entries})

    def by_level(self, level: int) -> List[CubeAddress]:
        return sorted(Q for Q in self.entries if Q.level == level)

    def to_csv(self, path) -> None:
        from .reports import atomic_write_text
        import io

        buf = io.StringIO()
        wr = csv.writer(buf)
        wr.writerow(["level"] + [f"c{i}" for i in range(self.lattice.dim)] + ["mass_3Q", "density"])
        for Q in sorted(self.entries):
            m, dval = self.entries[Q]
            wr.writerow([Q.level, *Q.coords, repr(m), repr(dval)])
        atomic_write_text(path, buf.getvalue())


CUBE_CAP = 3_000_000


def populated_cubes(mu: DiscreteMeasure, lattice: DyadicLattice, s: float, cap: int = CUBE_CAP) -> DensityTable:
    """All window cubes with mu(3Q) > 0, by bucketing points into the (up to) 3^d triples holding them."""
    entries: Dict[CubeAddress, Tuple[float, float]] = {}
    if len(mu) == 0:
        return DensityTable(lattice, s, entries)
    pts = mu.points - lattice.offset
    w = mu.weights
    keep = w > 0
    pts, w = pts[keep], w[keep]
    idx = np.arange(len(mu))[keep]
    shifts = np.array(list(itertools.product((-1, 0, 1), repeat=lattice.dim)), dtype=np.int64)
    total = 0
    for level in range(lattice.k_min, lattice.k_max + 1):
        u = pts / 2.0 ** level
        base = np.floor(u).astype(np.int64)
        keys, owners = [], []
        for sh in shifts:
            c = base + sh
            # x lies in the open triple of cube c iff c - 1 < u < c + 2 coordinatewise
            ok = np.all((u > c - 1) & (u < c + 2), axis=1)
            keys.append(c[ok])
            owners.append(idx[ok])
        keys = np.vstack(keys)
        owners = np.concatenate(owners)
        if keys.shape[0] == 0:
            continue
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        total += uniq.shape[0]
        if total > cap:
            raise CubeCountError(f"more than {cap} populated cubes; narrow the level window")
        order = np.argsort(inverse, kind="stable")
        splits = np.nonzero(np.diff(inverse[order]))[0] + 1
        weights_all = mu.weights
        for row, group in zip(uniq, np.split(owners[order], splits)):
            mass = ksum(weights_all[group])
            Q = CubeAddress(level, tuple(int(v) for v in row), lattice.lattice_id)
            entries[Q] = (mass, cube_density_value(mass, level, s))
    return DensityTable(lattice, s, entries)
