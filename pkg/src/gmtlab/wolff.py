"""Wolff potentials in closed form, dyadic Wolff sums, the MPV ratio and the truncated-transform bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .dyadic import CubeAddress, DensityTable, DyadicLattice, populated_cubes, points_in_cube
from .kernels import KernelSpec, kernel_components, kernel_values
from .measure import DiscreteMeasure, ksum


@dataclass(frozen=True)
class WolffParams:
    p: float
    s: float
    r_max: float = math.inf

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("p must be positive")
        if not self.s > 0:
            raise ValueError("s must be positive")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")


def wolff_from_distances(dist: np.ndarray, weights: np.ndarray, p: float, s: float,
                         r_max: float = math.inf) -> float:
    """Integral over (0, r_max) of (m(r)/r^s)^p dr/r where m(r) = sum of weights with dist < r.

    m is a step function, so summation by parts gives
    (1/sp) [sum_k (M_k^p - M_{k-1}^p) rho_k^{-sp} - M_K^p r_max^{-sp}].
    """
    dist = np.asarray(dist, dtype=float)
    weights = np.asarray(weights, dtype=float)
    keep = (weights > 0) & (dist < r_max)
    dist, weights = dist[keep], weights[keep]
    if dist.size == 0:
        return 0.0
    if np.any(dist == 0):
        return math.inf
    order = np.argsort(dist, kind="stable")
    rho = dist[order]
    cum = np.cumsum(weights[order])
    prev = np.concatenate([[0.0], cum[:-1]])
    sp = s * p
    total = ksum((cum ** p - prev ** p) * rho ** (-sp))
    if math.isfinite(r_max):
        total -= cum[-1] ** p * r_max ** (-sp)
    return max(total, 0.0) / sp


def wolff_potential(mu: DiscreteMeasure, params: WolffParams, x, exclude: Optional[int] = None) -> float:
    """W_p(mu)(x); +inf when x carries an atom that is not excluded."""
    dist = mu.distances_from(x)
    w = mu.weights
    if exclude is not None:
        w = w.copy()
        w[exclude] = 0.0
    return wolff_from_distances(dist, w, params.p, params.s, params.r_max)


def wolff_at_support(mu: DiscreteMeasure, params: WolffParams, self_exclude: bool = True,
                     block: int = 256) -> np.ndarray:
    """W_p at every support point; by default each point's own mass is left out."""
    n = len(mu)
    out = np.zeros(n)
    sp = params.s * params.p
    for start in range(0, n, block):
        rows = slice(start, min(n, start + block))
        diff = mu.points[rows, None, :] - mu.points[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        w = np.broadcast_to(mu.weights, dist.shape).copy()
        if self_exclude:
            ii = np.arange(rows.start, rows.stop)
            w[ii - rows.start, ii] = 0.0
        w[dist >= params.r_max] = 0.0
        # zero-weight entries never enter the step function
        dist = np.where(w > 0, dist, np.inf)
        if np.any(dist == 0):
            bad = np.any(dist == 0, axis=1)
        else:
            bad = None
        order = np.argsort(dist, axis=1, kind="stable")
        rho = np.take_along_axis(dist, order, axis=1)
        cum = np.cumsum(np.take_along_axis(w, order, axis=1), axis=1)
        prev = np.concatenate([np.zeros((cum.shape[0], 1)), cum[:, :-1]], axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(np.isfinite(rho) & (rho > 0), (cum ** params.p - prev ** params.p) * rho ** (-sp), 0.0)
        vals = np.array([ksum(row) for row in terms])
        if math.isfinite(params.r_max):
            vals -= cum[:, -1] ** params.p * params.r_max ** (-sp)
        vals = np.maximum(vals, 0.0) / sp
        if bad is not None:
            vals[bad] = math.inf
        out[rows] = vals
    return out


def wolff_quadrature(dist: np.ndarray, weights: np.ndarray, p: float, s: float, r_max: float = math.inf) -> float:
    """Adaptive quadrature of the step integrand, interval by interval (reference value)."""
    from scipy.integrate import quad

    dist = np.asarray(dist, float)
    weights = np.asarray(weights, float)
    keep = weights > 0
    dist, weights = dist[keep], weights[keep]
    if dist.size == 0:
        return 0.0
    if np.any(dist == 0):
        return math.inf
    knots = np.unique(dist[dist < r_max])
    total = 0.0
    edges = list(knots) + [r_max]
    for a, b in zip(edges[:-1], edges[1:]):
        m = float(np.sum(weights[dist <= a]))
        if m == 0:
            continue
        val, _ = quad(lambda r: (m / r ** s) ** p / r, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
    return total


# ------------------------------------------------------------- dyadic sums

def dyadic_wolff_sum(mu: DiscreteMeasure, lattice: DyadicLattice, p: float, s: float,
                     table: Optional[DensityTable] = None) -> float:
    """sum over populated cubes of D(3Q)^p mu(3Q)."""
    table = populated_cubes(mu, lattice, s) if table is None else table
    return ksum([dens ** p * mass for mass, dens in table.entries.values()])


@dataclass
class MPVReport:
    sup_ratio: float
    witness: Optional[CubeAddress]
    ratios: List[tuple] = field(default_factory=list)
    verdict: str = "complete"
    self_excluded: bool = True

    def to_dict(self) -> dict:
        return {"sup_ratio": self.sup_ratio,
                "witness": None if self.witness is None else {"level": self.witness.level, "coords": list(self.witness.coords)},
                "verdict": self.verdict, "self_excluded": self.self_excluded,
                "cubes": [{"level": q.level, "coords": list(q.coords), "ratio": r} for q, r in self.ratios]}


def occupied_cubes(mu: DiscreteMeasure, lattice: DyadicLattice) -> List[CubeAddress]:
    out = []
    pos = mu.weights > 0
    for level in range(lattice.k_min, lattice.k_max + 1):
        c = np.floor((mu.points[pos] - lattice.offset) / 2.0 ** level).astype(np.int64)
        for row in np.unique(c, axis=0):
            out.append(lattice.address(level, row))
    return out


def mpv_ratio(mu: DiscreteMeasure, lattice: DyadicLattice, Q: CubeAddress, s: float,
              self_exclude: bool = True) -> Optional[float]:
    """(1/mu(Q)) sum_{x_i in Q} w_i W_2(chi_Q mu)(x_i) with r_max = diam Q; None if mu(Q) = 0."""
    sub = mu.restrict(points_in_cube(mu, lattice, Q))
    mass = sub.total_mass
    if mass == 0:
        return None
    diam = math.sqrt(lattice.dim) * 2.0 ** Q.level
    vals = wolff_at_support(sub, WolffParams(2.0, s, diam), self_exclude)
    return ksum(vals * sub.weights) / mass


def mpv_condition_test(mu: DiscreteMeasure, lattice: DyadicLattice, s: float,
                       cubes: Optional[Sequence[CubeAddress]] = None, self_exclude: bool = True) -> MPVReport:
    """sup over test cubes of the Wolff-energy-to-mass ratio of chi_Q mu."""
    cubes = occupied_cubes(mu, lattice) if cubes is None else list(cubes)
    ratios = []
    for Q in cubes:
        r = mpv_ratio(mu, lattice, Q, s, self_exclude)
        if r is not None:
            ratios.append((Q, r))
    if not ratios:
        return MPVReport(0.0, None, [], verdict="vacuous", self_excluded=self_exclude)
    best = max(range(len(ratios)), key=lambda i: ratios[i][1])
    return MPVReport(ratios[best][1], ratios[best][0], ratios, self_excluded=self_exclude)


# ------------------------------------------------------ truncated transform

@dataclass
class TruncatedBoundReport:
    eps: List[float]
    lhs: List[float]
    rhs: float
    ratios: List[float]
    max_ratio: float
    violation: bool

    def to_dict(self) -> dict:
        return {"eps": self.eps, "lhs": self.lhs, "rhs": self.rhs, "ratios": self.ratios,
                "max_ratio": self.max_ratio, "violation": self.violation}


def default_eps_grid(mu: DiscreteMeasure) -> np.ndarray:
    lo = 0.5 * mu.min_spacing()
    hi = mu.diameter()
    if not math.isfinite(lo) or hi <= 0:
        return np.array([1.0])
    n = max(1, int(math.ceil(math.log2(hi / lo))))
    return lo * 2.0 ** np.arange(n + 1)


def truncated_energy(nu: DiscreteMeasure, K: KernelSpec, eps_grid: Sequence[float], block: int = 256) -> np.ndarray:
    """sum_i w_i |sum_{|x_i - x_j| > eps} K(x_i - x_j) w_j|^2 for every eps in the grid."""
    eps = np.asarray(eps_grid, dtype=float)
    n = len(nu)
    out = np.zeros((n, eps.size))
    for start in range(0, n, block):
        rows = slice(start, min(n, start + block))
        comps = [nu.points[rows, i, None] - nu.points[None, :, i] for i in range(nu.dim)]
        dist = np.sqrt(sum(c * c for c in comps))
        vals = kernel_components(K, comps)
        # sort each row from far to near so prefix sums give the truncated field
        order = np.argsort(-dist, axis=1, kind="stable")
        dsorted = np.take_along_axis(dist, order, axis=1)
        field_sq = np.zeros((dist.shape[0], eps.size))
        counts = np.stack([np.sum(dist > e, axis=1) for e in eps], axis=1)
        for v in vals:
            pref = np.cumsum(np.take_along_axis(v * nu.weights[None, :], order, axis=1), axis=1)
            pref = np.concatenate([np.zeros((pref.shape[0], 1)), pref], axis=1)
            picked = np.take_along_axis(pref, counts, axis=1)
            field_sq += picked * picked
        del dsorted
        out[rows] = field_sq
    return np.array([ksum(out[:, k] * nu.weights) for k in range(eps.size)])


def truncated_bound_check(nu: DiscreteMeasure, K: KernelSpec, eps_grid: Optional[Sequence[float]] = None,
                          self_exclude: bool = True) -> TruncatedBoundReport:
    """Truncated transform energy against the integrated W_2 potential, over an eps grid."""
    eps = default_eps_grid(nu) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    lhs = truncated_energy(nu, K, eps)
    rhs = ksum(wolff_at_support(nu, WolffParams(2.0, K.s), self_exclude) * nu.weights)
    ratios = []
    violation = False
    for value in lhs:
        if rhs > 0:
            ratios.append(float(value / rhs))
        else:
            ratios.append(0.0)
            violation = violation or value > 0
    return TruncatedBoundReport([float(e) for e in eps], [float(v) for v in lhs], float(rhs), ratios,
                                max(ratios) if ratios else 0.0, violation)


@dataclass
class NearFieldReport:
    u1_sum: float
    u1_bound: float
    wolff_side: float
    pointwise_violations: int
    summed_ok: bool
    wolff_ok: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def u1_domination_check(nu: DiscreteMeasure, K: KernelSpec, eps: float, max_points: int = 40) -> NearFieldReport:
    """Triple-sum check of the near-field step on U_1 = {|x-y| >= |x-z| > eps, |y-z| < |x-z|}.

    On U_1, |x-z| > |x-y|/2, so |K(x-y).K(x-z)| <= 2^s |x-y|^{-2s}; the dominating
    triple sum over {|x-y| >= |x-z|} is in turn at most 2s * sum_i w_i W_2(x_i).
    """
    n = len(nu)
    if n > max_points:
        raise ValueError(f"triple enumeration limited to {max_points} points")
    X, w, s = nu.points, nu.weights, K.s
    D = np.sqrt(np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2))
    Kv = kernel_values(K, X[:, None, :] - X[None, :, :])  # Kv[i, j] = K(x_i - x_j)
    dxy = D[:, :, None]
    dxz = D[:, None, :]
    dyz = D[None, :, :]
    offdiag = (dxy > 0) & (dxz > 0)
    U = offdiag & (dxy >= dxz) & (dxz > eps)
    U1 = U & (dyz < dxz)
    dots = np.einsum("ijc,ikc->ijk", Kv, Kv)
    wt = w[:, None, None] * w[None, :, None] * w[None, None, :]
    with np.errstate(divide="ignore"):
        inv = np.where(offdiag, dxy ** (-2 * s), 0.0)
    pointwise = np.abs(dots) > (2.0 ** s) * inv * (1 + 1e-12)
    violations = int(np.sum(pointwise & U1))
    u1_sum = abs(ksum(np.where(U1, dots * wt, 0.0)))
    dom = offdiag & (dxy >= dxz)
    bound = ksum(np.where(dom, inv * wt, 0.0))
    wolff_side = 2 * s * ksum(wolff_at_support(nu, WolffParams(2.0, s)) * w)
    return NearFieldReport(u1_sum, bound, wolff_side, violations,
                           bool(u1_sum <= 2.0 ** s * bound * (1 + 1e-12)),
                           bool(bound <= wolff_side * (1 + 1e-12)))
