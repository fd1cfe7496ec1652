"""Discrete measures on R^d: ball masses, growth constants, energies, file IO."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)

GRID_RATIO = 2.0 ** 0.25
BINARY_MAGIC = b"GMTM"


class CoincidentPointsError(ValueError):
    """Two distinct atoms share a location."""

    def __init__(self, i: int, j: int):
        super().__init__(f"points {i} and {j} coincide; pass merge=True to sum their weights")
        self.pair = (i, j)


def ksum(values) -> float:
    """Correctly rounded sum; the result does not depend on the order of ``values``."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


class DiscreteMeasure:
    """Immutable weighted point cloud with a k-d tree over its support.

    Args:
        points: array of shape (N, d). A 1-D array is read as N points in R^1.
        weights: N nonnegative masses.
        dim: required when ``points`` is empty.
        merge: sum the weights of coincident points instead of raising.
    """

    def __init__(self, points, weights, dim: Optional[int] = None, merge: bool = False):
        pts = np.asarray(points, dtype=float)
        w = np.asarray(weights, dtype=float).ravel()
        if pts.ndim == 1:
            if pts.size == 0 and dim is None:
                raise ValueError("dim is required for an empty measure")
            pts = pts.reshape(-1, dim or 1)
        elif pts.size == 0 and dim is not None:
            pts = pts.reshape(0, dim)
        if pts.ndim != 2:
            raise ValueError("points must be an (N, d) array")
        if dim is not None and pts.shape[1] != dim:
            raise ValueError(f"points have dimension {pts.shape[1]}, expected {dim}")
        if pts.shape[1] < 1:
            raise ValueError("dimension must be at least 1")
        if pts.shape[0] != w.size:
            raise ValueError(f"{pts.shape[0]} points but {w.size} weights")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("points and weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")

        if pts.shape[0] > 1:
            uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
            if uniq.shape[0] < pts.shape[0]:
                if not merge:
                    inverse = inverse.ravel()
                    order = np.argsort(inverse, kind="stable")
                    dup = np.nonzero(np.diff(inverse[order]) == 0)[0][0]
                    raise CoincidentPointsError(int(order[dup]), int(order[dup + 1]))
                merged = np.zeros(uniq.shape[0])
                np.add.at(merged, inverse.ravel(), w)
                pts, w = uniq, merged

        self._points = pts.copy()
        self._weights = w.copy()
        self._points.setflags(write=False)
        self._weights.setflags(write=False)
        self._total = ksum(self._weights)
        self._tree: Optional[cKDTree] = None

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def total_mass(self) -> float:
        return self._total

    @property
    def index(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self._points if len(self) else np.zeros((0, self.dim)))
        return self._tree

    def __len__(self) -> int:
        return self._points.shape[0]

    def __repr__(self) -> str:
        return f"DiscreteMeasure(dim={self.dim}, n={len(self)}, mass={self._total:.6g})"

    def ball_indices(self, x, r: float) -> np.ndarray:
        """Sorted indices of support points in the open ball B(x, r)."""
        x = np.asarray(x, dtype=float).reshape(self.dim)
        if len(self) == 0:
            return np.zeros(0, dtype=np.intp)
        # pad the tree query slightly, then decide membership with the exact formula
        cand = self.index.query_ball_point(x, r * (1 + 1e-9) + 1e-300)
        if not cand:
            return np.zeros(0, dtype=np.intp)
        cand = np.sort(np.asarray(cand, dtype=np.intp))
        dist = np.sqrt(np.sum((self._points[cand] - x) ** 2, axis=1))
        return cand[dist < r]

    def ball_mass(self, x, r: float) -> float:
        if not r > 0:
            raise ValueError("radius must be positive")
        return ksum(self._weights[self.ball_indices(x, r)])

    def ball_mass_bruteforce(self, x, r: float) -> float:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        dist = np.sqrt(np.sum((self._points - x) ** 2, axis=1))
        return ksum(self._weights[dist < r])

    def distances_from(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        return np.sqrt(np.sum((self._points - x) ** 2, axis=1))

    def min_spacing(self) -> float:
        """Smallest distance between two distinct support points (inf if N < 2)."""
        if len(self) < 2:
            return math.inf
        d, _ = self.index.query(self._points, k=2)
        return float(np.min(d[:, 1]))

    def diameter(self) -> float:
        if len(self) < 2:
            return 0.0
        pts = self._points
        if self.dim == 1:
            return float(pts.max() - pts.min())
        if len(self) > 2000:
            from scipy.spatial import ConvexHull, QhullError

            try:
                pts = pts[ConvexHull(pts).vertices]
            except (QhullError, ValueError):
                pass
        if len(pts) > 6000:
            return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        from scipy.spatial.distance import pdist

        return float(pdist(pts).max())

    def restrict(self, mask) -> "DiscreteMeasure":
        mask = np.asarray(mask)
        return DiscreteMeasure(self._points[mask], self._weights[mask], dim=self.dim)

    def scaled(self, factor: float, s: float) -> "DiscreteMeasure":
        """Push forward under x -> factor*x, with masses multiplied by factor**s.

        Ratios mu(B)/r^s are unchanged once radii are multiplied by ``factor``.
        """
        return DiscreteMeasure(self._points * factor, self._weights * factor ** s, dim=self.dim)

    def transformed(self, matrix=None, shift=None) -> "DiscreteMeasure":
        pts = self._points
        if matrix is not None:
            pts = pts @ np.asarray(matrix, dtype=float).T
        if shift is not None:
            pts = pts + np.asarray(shift, dtype=float)
        return DiscreteMeasure(pts, self._weights, dim=self.dim)

    def permuted(self, perm) -> "DiscreteMeasure":
        perm = np.asarray(perm)
        return DiscreteMeasure(self._points[perm], self._weights[perm], dim=self.dim)

    def with_weights(self, weights) -> "DiscreteMeasure":
        return DiscreteMeasure(self._points, weights, dim=self.dim)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(struct.pack("<IQ", self.dim, len(self)))
        h.update(np.ascontiguousarray(self._points, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self._weights, dtype="<f8").tobytes())
        return h.hexdigest()


def empty_measure(dim: int) -> DiscreteMeasure:
    return DiscreteMeasure(np.zeros((0, dim)), np.zeros(0), dim=dim)


def ball_mass(mu: DiscreteMeasure, x, r: float) -> float:
    """mu(B(x, r)) for the open ball."""
    return mu.ball_mass(x, r)


@dataclass
class GrowthReport:
    constant: float
    witness: Optional[tuple] = None
    scale_window: tuple = (0.0, 0.0)
    kind: str = "upper"
    verdict: str = "complete"
    upper_constant: Optional[float] = None
    passed: Optional[bool] = None

    def to_dict(self) -> dict:
        wit = None
        if self.witness is not None:
            c, r, q = self.witness
            wit = {"center": [float(v) for v in c], "radius": float(r), "ratio": float(q)}
        return {
            "constant": self.constant,
            "witness": wit,
            "scale_window": list(self.scale_window),
            "kind": self.kind,
            "verdict": self.verdict,
            "upper_constant": self.upper_constant,
            "passed": self.passed,
        }


def radius_grid(r_min: float, r_max: float, ratio: float = GRID_RATIO) -> np.ndarray:
    if not (0 < r_min < r_max):
        raise ValueError("need 0 < r_min < r_max")
    n = int(math.floor(math.log(r_max / r_min) / math.log(ratio) + 1e-9))
    radii = r_min * ratio ** np.arange(n + 1)
    if radii[-1] < r_max * (1 - 1e-12):
        radii = np.append(radii, r_max)
    return radii


def default_centers(mu: DiscreteMeasure) -> np.ndarray:
    """Support points plus midpoints of each point and its nearest neighbour."""
    if len(mu) < 2:
        return mu.points.copy()
    _, nn = mu.index.query(mu.points, k=2)
    pairs = np.unique(np.sort(np.stack([np.arange(len(mu)), nn[:, 1]], axis=1), axis=1), axis=0)
    mids = 0.5 * (mu.points[pairs[:, 0]] + mu.points[pairs[:, 1]])
    return np.vstack([mu.points, mids])


def default_window(mu: DiscreteMeasure) -> tuple:
    spacing = mu.min_spacing()
    diam = mu.diameter()
    if not math.isfinite(spacing) or diam <= 0:
        return (0.5, 2.0)
    return (2.0 * spacing, max(diam, 4.0 * spacing))


def _ratio_scan(mu: DiscreteMeasure, s: float, centers: np.ndarray, radii: np.ndarray):
    """Yield (center index, radius index, ratio) over every (center, radius) pair."""
    r_max = float(radii[-1])
    w = mu.weights
    for ci, c in enumerate(centers):
        idx = mu.ball_indices(c, r_max)
        dist = np.sqrt(np.sum((mu.points[idx] - c) ** 2, axis=1))
        order = np.argsort(dist, kind="stable")
        dist_sorted = dist[order]
        counts = np.searchsorted(dist_sorted, radii, side="left")
        prev_count, prev_mass = -1, 0.0
        for ri, cnt in enumerate(counts):
            if cnt != prev_count:
                prev_mass = ksum(w[idx[order[:cnt]]])
                prev_count = cnt
            yield ci, ri, prev_mass / radii[ri] ** s


def niceness_constant(mu: DiscreteMeasure, s: float, r_min: Optional[float] = None,
                      r_max: Optional[float] = None, centers=None) -> GrowthReport:
    """Largest mu(B(x,r))/r^s over tested balls; a lower bound for the growth constant."""
    if r_min is not None and r_min <= 0:
        raise ValueError("r_min must be positive: atoms make the ratio blow up as r -> 0")
    lo, hi = default_window(mu)
    r_min = lo if r_min is None else r_min
    r_max = hi if r_max is None else r_max
    radii = radius_grid(r_min, r_max)
    if len(mu) == 0 or mu.total_mass == 0:
        return GrowthReport(0.0, None, (r_min, r_max), "upper")
    centers = default_centers(mu) if centers is None else np.atleast_2d(np.asarray(centers, float))
    best = (-1.0, None)
    for ci, ri, q in _ratio_scan(mu, s, centers, radii):
        if q > best[0]:
            best = (q, (tuple(centers[ci]), float(radii[ri]), q))
    return GrowthReport(best[0], best[1], (r_min, r_max), "upper")


def ad_regularity_check(mu: DiscreteMeasure, s: float, Lambda: float,
                        r_min: Optional[float] = None, r_max: Optional[float] = None) -> GrowthReport:
    """Lower density ratio over support-centred balls, plus the matching upper check."""
    if len(mu) == 0 or mu.total_mass == 0:
        return GrowthReport(0.0, None, (r_min or 0.0, r_max or 0.0), "lower", verdict="vacuous")
    if r_min is not None and r_min <= 0:
        raise ValueError("r_min must be positive")
    lo, hi = default_window(mu)
    r_min = lo if r_min is None else r_min
    r_max = hi if r_max is None else r_max
    radii = radius_grid(r_min, r_max)
    centers = mu.points
    low = (math.inf, None)
    high = -1.0
    for ci, ri, q in _ratio_scan(mu, s, centers, radii):
        if q < low[0]:
            low = (q, (tuple(centers[ci]), float(radii[ri]), q))
        high = max(high, q)
    upper = niceness_constant(mu, s, r_min, r_max).constant
    passed = bool(low[0] >= 1.0 / Lambda and upper <= Lambda)
    return GrowthReport(low[0], low[1], (r_min, r_max), "lower",
                        upper_constant=max(upper, high), passed=passed)


def reasonable_growth_check(mu: DiscreteMeasure, s: float, Lambda: float, beta: float, R: float,
                            r_min: Optional[float] = None, r_max: Optional[float] = None) -> GrowthReport:
    """Largest mu(B(x,r)) / (r^s (R max(1, 1/r))^beta) over balls centred in B(0, R).

    The exponent ``beta`` is an input; pass iff the ratio stays below ``Lambda``.
    """
    lo, hi = default_window(mu)
    r_min = lo if r_min is None else r_min
    r_max = hi if r_max is None else r_max
    radii = radius_grid(r_min, r_max)
    if len(mu) == 0:
        return GrowthReport(0.0, None, (r_min, r_max), "upper", verdict="vacuous", passed=True)
    centers = default_centers(mu)
    centers = centers[np.linalg.norm(centers, axis=1) < R]
    best = (0.0, None)
    for ci, ri, q in _ratio_scan(mu, s, centers, radii):
        r = radii[ri]
        q = q / (R * max(1.0, 1.0 / r)) ** beta
        if q > best[0]:
            best = (q, (tuple(centers[ci]), float(r), q))
    return GrowthReport(best[0], best[1], (r_min, r_max), "upper", passed=bool(best[0] <= Lambda))


def _pair_blocks(n: int, block: int = 512) -> Iterator[slice]:
    for start in range(0, n, block):
        yield slice(start, min(n, start + block))


def energy(mu: DiscreteMeasure, s: float) -> float:
    """Sum over i != j of w_i w_j |x_i - x_j|^{-(s-1)}."""
    if s <= 1:
        raise ValueError("energy needs s > 1")
    n = len(mu)
    if n < 2:
        return 0.0
    pts, w = mu.points, mu.weights
    parts = []
    for rows in _pair_blocks(n):
        diff = pts[rows, None, :] - pts[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        ii = np.arange(rows.start, rows.stop)
        dist[ii - rows.start, ii] = np.inf
        zero = np.argwhere(dist == 0)
        if zero.size:
            a, b = zero[0]
            raise CoincidentPointsError(int(a + rows.start), int(b))
        terms = (w[rows, None] * w[None, :]) / dist ** (s - 1)
        parts.append(ksum(terms))
    return ksum(parts)


def coordinate_energies(mu: DiscreteMeasure, s: float) -> np.ndarray:
    """Per-axis sums of w_i w_k (x_ij - x_kj)^2 / |x_i - x_k|^{s+1} over i != k."""
    n, d = len(mu), mu.dim
    if n < 2:
        return np.zeros(d)
    pts, w = mu.points, mu.weights
    parts = [[] for _ in range(d)]
    for rows in _pair_blocks(n):
        diff = pts[rows, None, :] - pts[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        ii = np.arange(rows.start, rows.stop)
        dist[ii - rows.start, ii] = np.inf
        scale = (w[rows, None] * w[None, :]) / dist ** (s + 1)
        for j in range(d):
            parts[j].append(ksum(diff[:, :, j] ** 2 * scale))
    return np.array([ksum(p) for p in parts])


# ---------------------------------------------------------------- file formats

def save_measure(mu: DiscreteMeasure, path, fmt: Optional[str] = None) -> Path:
    """Write JSON (``.json``) or the little-endian binary format (anything else)."""
    from .reports import atomic_write_bytes

    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "binary")
    if fmt == "json":
        payload = {"dim": mu.dim, "points": mu.points.tolist(), "weights": mu.weights.tolist()}
        data = json.dumps(payload).encode()
    elif fmt == "binary":
        header = BINARY_MAGIC + struct.pack("<IQ", mu.dim, len(mu))
        data = (header + np.ascontiguousarray(mu.points, dtype="<f8").tobytes()
                + np.ascontiguousarray(mu.weights, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown format {fmt!r}")
    atomic_write_bytes(path, data)
    return path


def load_measure(path, merge: bool = False) -> DiscreteMeasure:
    raw = Path(path).read_bytes()
    if raw[:4] == BINARY_MAGIC:
        dim, count = struct.unpack("<IQ", raw[4:16])
        body = np.frombuffer(raw, dtype="<f8", offset=16)
        if body.size != count * (dim + 1):
            raise ValueError(f"{path}: truncated binary measure")
        pts = body[: count * dim].reshape(count, dim)
        w = body[count * dim:]
        return DiscreteMeasure(pts, w, dim=dim, merge=merge)
    obj = json.loads(raw.decode())
    dim = int(obj["dim"])
    pts = np.asarray(obj["points"], dtype=float).reshape(-1, dim)
    return DiscreteMeasure(pts, obj["weights"], dim=dim, merge=merge)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
