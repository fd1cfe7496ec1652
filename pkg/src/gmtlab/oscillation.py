"""Mean-zero Lipschitz test functions, oscillation lower bounds and Riesz-system frame constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .dyadic import CubeAddress, DyadicLattice, density
from .kernels import KernelSpec, riesz_transform_at_support
from .measure import DiscreteMeasure, ksum

PROFILES = ("radial_hat", "tensor_hat", "coordinate_modulated")
MEAN_RTOL = 1e-12


class PlacementError(RuntimeError):
    pass


def default_A(dim: int) -> float:
    return 128.0 * math.sqrt(dim)


def _profile_values(profile: str, axis: int, center: np.ndarray, r: float, x: np.ndarray) -> np.ndarray:
    diff = x - center
    if profile == "radial_hat":
        return np.maximum(0.0, 1.0 - np.linalg.norm(diff, axis=1) / r)
    if profile == "tensor_hat":
        return np.prod(np.maximum(0.0, 1.0 - np.abs(diff) / r), axis=1)
    if profile == "coordinate_modulated":
        hat = np.maximum(0.0, 1.0 - np.linalg.norm(diff, axis=1) / r)
        return diff[:, axis] / r * hat
    raise ValueError(f"unknown profile {profile!r}")


def _profile_lip(profile: str, dim: int, r: float) -> float:
    """Global Lipschitz constant of one bump of radius r."""
    factor = {"radial_hat": 1.0, "tensor_hat": math.sqrt(dim), "coordinate_modulated": 2.0}[profile]
    return factor / r


def _support_radius(profile: str, dim: int, r: float) -> float:
    return r * math.sqrt(dim) if profile == "tensor_hat" else r


@dataclass
class TestFunction:
    """psi = c1 b1 - c2 b2 with two bumps of one profile and disjoint supports."""

    __test__ = False  # keep pytest from collecting this class

    profile: str
    centers: Tuple[np.ndarray, np.ndarray]
    radius: Tuple[float, float]
    coefficients: Tuple[float, float]
    lip_bound: float
    support_ball: Tuple[np.ndarray, float]
    axis: int = 0
    degenerate: bool = False

    def values_on(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0])
        for c, r, coef in zip(self.centers, self.radius, self.coefficients):
            if coef != 0.0:
                out += coef * _profile_values(self.profile, self.axis, c, r, x)
        return out

    def sup_norm_bound(self) -> float:
        return max(abs(c) for c in self.coefficients)

    def to_dict(self) -> dict:
        return {"profile": self.profile, "axis": self.axis,
                "centers": [c.tolist() for c in self.centers], "radius": list(self.radius),
                "coefficients": list(self.coefficients), "lip_bound": self.lip_bound,
                "support_ball": {"center": self.support_ball[0].tolist(), "radius": self.support_ball[1]},
                "degenerate": self.degenerate}

    @classmethod
    def from_dict(cls, d: dict) -> "TestFunction":
        return cls(d["profile"], tuple(np.asarray(c, float) for c in d["centers"]), tuple(d["radius"]),
                   tuple(d["coefficients"]), d["lip_bound"],
                   (np.asarray(d["support_ball"]["center"], float), d["support_ball"]["radius"]),
                   d.get("axis", 0), d.get("degenerate", False))


@dataclass
class Certificate:
    support_ok: bool
    mean: float
    mean_ok: bool
    sampled_lip: float
    lip_ok: bool

    @property
    def passed(self) -> bool:
        return self.support_ok and self.mean_ok and self.lip_ok


def certify(psi: TestFunction, mu: DiscreteMeasure, n_pairs: int = 10_000, seed: int = 0) -> Certificate:
    """Support inside the declared ball, mu-mean zero, sampled Lipschitz quotient within lip_bound."""
    bc, br = psi.support_ball
    reach = max(np.linalg.norm(c - bc) + _support_radius(psi.profile, len(bc), r)
                for c, r in zip(psi.centers, psi.radius))
    support_ok = reach <= br
    vals = psi.values_on(mu.points)
    mean = abs(ksum(vals * mu.weights))
    mean_ok = mean <= MEAN_RTOL * max(mu.total_mass, 1e-300)
    rng = np.random.default_rng(seed)
    n = len(mu)
    q = 0.0
    if n >= 2:
        i = rng.integers(0, n, n_pairs)
        j = rng.integers(0, n, n_pairs)
        keep = i != j
        d = np.linalg.norm(mu.points[i[keep]] - mu.points[j[keep]], axis=1)
        if d.size:
            q = float(np.max(np.abs(vals[i[keep]] - vals[j[keep]]) / d))
    return Certificate(bool(support_ok), mean, bool(mean_ok), q, bool(q <= psi.lip_bound * (1 + 1e-12)))


def make_test_function(mu: DiscreteMeasure, center, ell: float, A: float, profile: str = "radial_hat",
                       seed: int = 0, axis: int = 0, centers=None, radius=None,
                       max_attempts: int = 200) -> TestFunction:
    """A certified mean-zero bump pair in B(center, A*ell) with Lipschitz norm exactly 1/ell.

    Bump centres are drawn from support points in the ball (a free point stands in
    when the ball holds a single atom); radii lie in [ell, 4 ell] unless the
    centres are too close for two disjoint bumps of that size.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    xq = np.asarray(center, dtype=float).reshape(mu.dim)
    big = A * ell
    inside = mu.ball_indices(xq, big)
    if inside.size == 0:
        raise PlacementError("no mass in B(x_Q, A l(Q))")
    # draw from a coordinate-sorted list so the placement ignores the storage order of the points
    inside = inside[np.lexsort(mu.points[inside].T[::-1])]
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        if centers is not None:
            c1, c2 = (np.asarray(c, dtype=float) for c in centers)
            r1 = r2 = float(radius if radius is not None else ell)
        else:
            c1 = mu.points[rng.choice(inside)]
            if inside.size >= 2:
                c2 = mu.points[rng.choice(inside)]
            else:
                direction = rng.normal(size=mu.dim)
                c2 = c1 + direction / np.linalg.norm(direction) * rng.uniform(0.1, 0.5) * big
            # radii in [l, 4l], shrunk when the two centres are closer than that allows
            gap = np.linalg.norm(c1 - c2) / _support_radius(profile, mu.dim, 1.0)
            r1, r2 = np.minimum(rng.uniform(ell, 4 * ell, 2), rng.uniform(0.25, 0.5, 2) * gap)
            if r1 <= 0 or r2 <= 0:
                continue
        R1, R2 = _support_radius(profile, mu.dim, r1), _support_radius(profile, mu.dim, r2)
        fits = (np.linalg.norm(c1 - xq) + R1 < big) and (np.linalg.norm(c2 - xq) + R2 < big)
        disjoint = np.linalg.norm(c1 - c2) > R1 + R2
        if not (fits and disjoint):
            if centers is not None:
                raise PlacementError("given bumps do not fit disjointly inside the ball")
            continue
        b1 = _profile_values(profile, axis, c1, r1, mu.points)
        b2 = _profile_values(profile, axis, c2, r2, mu.points)
        m1, m2 = ksum(b1 * mu.weights), ksum(b2 * mu.weights)
        if m1 == 0.0 and m2 == 0.0:
            k1, k2 = 1.0, 0.0
        else:
            k1, k2 = m2, m1
        lip = max(abs(k1) * _profile_lip(profile, mu.dim, r1), abs(k2) * _profile_lip(profile, mu.dim, r2))
        if lip == 0.0:
            if centers is not None:
                raise PlacementError("bumps carry no usable mass")
            continue
        scale = (1.0 / ell) / lip
        psi = TestFunction(profile, (c1, c2), (float(r1), float(r2)), (k1 * scale, -k2 * scale),
                           1.0 / ell, (xq, big), axis)
        vals = psi.values_on(mu.points)
        psi.degenerate = bool(np.all(vals == 0.0))
        if psi.degenerate and inside.size >= 2 and centers is None:
            continue
        if not certify(psi, mu, n_pairs=2000, seed=seed).passed:
            continue
        return psi
    raise PlacementError(f"no admissible placement after {max_attempts} attempts")


# -------------------------------------------------------------- oscillation

def pairing_with_one(mu: DiscreteMeasure, f, transform: np.ndarray) -> np.ndarray:
    """<T(f mu), 1>_mu = -sum_j f_j w_j R(x_j) with R the diagonal-excluded transform at the support."""
    f = np.asarray(f, dtype=float)
    return -np.array([ksum(f * mu.weights * transform[:, c]) for c in range(transform.shape[1])])


@dataclass
class OscillationResult:
    value: float
    best: Optional[TestFunction]
    values: List[float]

    def to_dict(self) -> dict:
        return {"theta_lower_bound": self.value, "values": self.values,
                "best": None if self.best is None else self.best.to_dict(),
                "label": "lower bound for the oscillation coefficient"}


def dictionary(mu: DiscreteMeasure, center, ell: float, A: float, n: int, seed: int = 0,
               profiles: Sequence[str] = PROFILES) -> List[TestFunction]:
    """n test functions cycling through profiles (and axes for the modulated one); seeds are deterministic."""
    out = []
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2 ** 31, n)
    for k in range(n):
        prof = profiles[k % len(profiles)]
        axis = (k // len(profiles)) % mu.dim
        out.append(make_test_function(mu, center, ell, A, prof, int(seeds[k]), axis))
    return out


def symmetric_dictionary(dim: int, n: int = 32, seed: int = 0, offsets=(0.15, 0.75),
                         radii=(0.05, 0.2), span: Optional[int] = None, center=None) -> List[TestFunction]:
    """n odd bump pairs r(b(x - z - c) - b(x - z + c)), each 1-Lipschitz, independent of any measure.

    Oddness makes the mu-mean exactly zero for every measure symmetric under
    x - z -> z - x (z = ``center``, default the origin), so one dictionary
    serves a whole refinement sequence.  With
    ``span`` the offsets lie in the first ``span`` coordinates.
    """
    rng = np.random.default_rng(seed)
    out = []
    k = dim if span is None else span
    z = np.zeros(dim) if center is None else np.asarray(center, dtype=float).reshape(dim)
    for _ in range(n):
        direction = np.zeros(dim)
        direction[:k] = rng.normal(size=k)
        direction /= np.linalg.norm(direction)
        c = direction * rng.uniform(*offsets)
        r = min(rng.uniform(*radii), 0.999 * float(np.linalg.norm(c)))
        out.append(TestFunction("radial_hat", (z + c, z - c), (r, r), (r, -r), 1.0,
                                (z.copy(), float(np.linalg.norm(c)) + r)))
    return out


def oscillation_lower(mu: DiscreteMeasure, K: KernelSpec, center, ell: float, A: float,
                      n: int = 16, seed: int = 0, functions: Optional[Sequence[TestFunction]] = None,
                      transform: Optional[np.ndarray] = None) -> OscillationResult:
    """max over a finite dictionary of |<T(psi mu), 1>_mu|."""
    funcs = dictionary(mu, center, ell, A, n, seed) if functions is None else list(functions)
    if not funcs:
        raise ValueError("dictionary is empty")
    R = riesz_transform_at_support(mu, K) if transform is None else transform
    vals = [float(np.linalg.norm(pairing_with_one(mu, psi.values_on(mu.points), R))) for psi in funcs]
    best = int(np.argmax(vals))
    return OscillationResult(vals[best], funcs[best], vals)


def theta_density_ratio(mu: DiscreteMeasure, K: KernelSpec, lattice: DyadicLattice, Q: CubeAddress,
                        A: float, n: int = 16, seed: int = 0, transform: Optional[np.ndarray] = None) -> Optional[float]:
    """Theta lower bound / (D(3Q) mu(3Q)); None when mu(3Q) = 0."""
    mass, dens = density(mu, lattice, Q, K.s)
    if mass == 0:
        return None
    ell = 2.0 ** Q.level
    res = oscillation_lower(mu, K, lattice.center(Q), ell, A, n, seed, transform=transform)
    return res.value / (dens * mass)


# ------------------------------------------------------------- Riesz system

def occupied_cubes(mu: DiscreteMeasure, lattice: DyadicLattice) -> List[CubeAddress]:
    out = []
    pos = mu.weights > 0
    for level in range(lattice.k_min, lattice.k_max + 1):
        c = np.floor((mu.points[pos] - lattice.offset) / 2.0 ** level).astype(np.int64)
        for row in np.unique(c, axis=0):
            out.append(lattice.address(level, row))
    return out


@dataclass
class RieszSystem:
    """Analysis matrix rows psi_Q(x_i) sqrt(w_i) / sqrt(rho_Q), rho_Q = mu(B(x_Q, 3 A l(Q)))."""

    cubes: List[CubeAddress]
    functions: List[TestFunction]
    rho: np.ndarray
    inner_mass: np.ndarray
    matrix: sp.csr_matrix
    A: float

    def analysis(self, mu: DiscreteMeasure, f) -> np.ndarray:
        """<f, psi_Q>_mu / sqrt(rho_Q) for every cube."""
        return self.matrix @ (np.asarray(f, dtype=float) * np.sqrt(mu.weights))

    def frame_bound(self, tol: float = 1e-12, max_iter: int = 5000, seed: int = 0) -> float:
        """||Psi||^2, the best constant C over all f, by power iteration on Psi^T Psi."""
        from scipy.sparse.linalg import svds

        M = self.matrix
        if M.shape[0] == 0 or M.nnz == 0:
            return 0.0
        if min(M.shape) <= 2:
            return float(np.linalg.norm(M.toarray(), 2) ** 2)
        v0 = np.random.default_rng(seed).normal(size=min(M.shape))
        s = svds(M, k=1, tol=tol, maxiter=max_iter, v0=v0, return_singular_vectors=False)
        return float(s[0] ** 2)


def build_riesz_system(mu: DiscreteMeasure, lattice: DyadicLattice, A: Optional[float] = None,
                       seed: int = 0, profile: str = "radial_hat") -> RieszSystem:
    """One certified test function per occupied cube of the window."""
    A = default_A(mu.dim) if A is None else A
    cubes = occupied_cubes(mu, lattice)
    rows, cols, vals = [], [], []
    funcs, rho, inner = [], [], []
    kept = []
    sq = np.sqrt(mu.weights)
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2 ** 31, len(cubes))
    for Q, sd in zip(cubes, seeds):
        ell = 2.0 ** Q.level
        xq = lattice.center(Q)
        r3 = mu.ball_mass(xq, 3 * A * ell)
        if r3 == 0:
            continue
        psi = make_test_function(mu, xq, ell, A, profile, int(sd))
        reach = max(np.linalg.norm(c - xq) + _support_radius(profile, mu.dim, r) for c, r in zip(psi.centers, psi.radius))
        idx = mu.ball_indices(xq, reach + 1e-12 * ell)
        v = psi.values_on(mu.points[idx])
        nz = v != 0
        rows.extend([len(kept)] * int(nz.sum()))
        cols.extend(idx[nz].tolist())
        vals.extend((v[nz] * sq[idx[nz]] / math.sqrt(r3)).tolist())
        kept.append(Q)
        funcs.append(psi)
        rho.append(r3)
        inner.append(mu.ball_mass(xq, A * ell))
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(len(kept), len(mu)))
    return RieszSystem(kept, funcs, np.array(rho), np.array(inner), mat, A)


def sample_functions(mu: DiscreteMeasure, m: int, seed: int = 0) -> List[np.ndarray]:
    """Constants, coordinates, and m random functions (white noise and random smooth waves)."""
    rng = np.random.default_rng(seed)
    out = [np.ones(len(mu))]
    out.extend(mu.points[:, i].copy() for i in range(mu.dim))
    for k in range(m):
        if k % 2 == 0:
            out.append(rng.normal(size=len(mu)))
        else:
            freq = rng.normal(scale=8.0, size=mu.dim)
            out.append(np.cos(mu.points @ freq + rng.uniform(0, 2 * np.pi)))
    return out


@dataclass
class RieszReport:
    empirical_C: float
    frame_bound: float
    n_cubes: int
    n_samples: int
    cs_violations: int
    sup_bound_violations: int
    overlap: Dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"empirical_C": self.empirical_C, "frame_bound": self.frame_bound, "n_cubes": self.n_cubes,
                "n_samples": self.n_samples, "cauchy_schwarz_violations": self.cs_violations,
                "sup_norm_violations": self.sup_bound_violations,
                "max_overlap_per_level": {str(k): v for k, v in self.overlap.items()}}


def riesz_system_constant(mu: DiscreteMeasure, lattice: DyadicLattice, A: Optional[float] = None,
                          m: int = 50, seed: int = 0, system: Optional[RieszSystem] = None,
                          samples: Optional[Sequence[np.ndarray]] = None) -> RieszReport:
    """max over sample functions f of sum_Q |<f, psi_Q>|^2 / rho_Q / ||f||^2, with per-cube audits."""
    sysm = build_riesz_system(mu, lattice, A, seed) if system is None else system
    fs = sample_functions(mu, m, seed + 1) if samples is None else list(samples)
    sq = np.sqrt(mu.weights)
    row_norm2 = np.asarray(sysm.matrix.multiply(sysm.matrix).sum(axis=1)).ravel()  # ||psi_Q||^2 / rho_Q
    sup_bad = 0
    for psi, m_in, r3, rn in zip(sysm.functions, sysm.inner_mass, sysm.rho, row_norm2):
        # ||psi||_inf <= A, so ||psi||^2_{L2(mu)} <= A^2 mu(B(x_Q, A l))
        if psi.sup_norm_bound() > sysm.A or rn > sysm.A ** 2 * m_in / r3 * (1 + 1e-12):
            sup_bad += 1
    best = 0.0
    cs_bad = 0
    for f in fs:
        g = f * sq
        norm2 = float(g @ g)
        coeffs = sysm.matrix @ g
        terms = coeffs * coeffs
        cs_bad += int(np.sum(terms > row_norm2 * norm2 * (1 + 1e-10) + 1e-300))
        if norm2 > 0:
            best = max(best, ksum(terms) / norm2)
    return RieszReport(best, sysm.frame_bound(), len(sysm.cubes), len(fs), cs_bad, sup_bad,
                       overlap_counts(mu, lattice, sysm))


def dual_riesz_ratio(mu: DiscreteMeasure, system: RieszSystem, a) -> float:
    """||sum_Q a_Q psi_Q / sqrt(rho_Q)||^2_{L2(mu)} / ||a||^2."""
    a = np.asarray(a, dtype=float)
    n2 = float(a @ a)
    if n2 == 0:
        return 0.0
    synth = system.matrix.T @ a  # equals (sum_Q a_Q psi_Q / sqrt(rho_Q)) * sqrt(w)
    return float(synth @ synth) / n2


@dataclass
class DualReport:
    max_ratio: float
    frame_bound: float
    within_bound: bool
    matched_ok: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def dual_riesz_check(mu: DiscreteMeasure, system: RieszSystem, coefficient_sets: Sequence,
                     samples: Sequence[np.ndarray] = ()) -> DualReport:
    """Synthesis ratios stay within ||Psi||^2; at a = Psi f the dual ratio is at least the primal one."""
    C = system.frame_bound()
    ratios = [dual_riesz_ratio(mu, system, a) for a in coefficient_sets]
    sq = np.sqrt(mu.weights)
    matched = True
    for f in samples:
        g = f * sq
        a = system.matrix @ g
        if float(g @ g) == 0 or float(a @ a) == 0:
            continue
        primal = float(a @ a) / float(g @ g)
        dual = dual_riesz_ratio(mu, system, a)
        ratios.append(dual)
        matched = matched and dual >= primal * (1 - 1e-9)
    worst = max(ratios, default=0.0)
    return DualReport(worst, C, bool(worst <= C * (1 + 1e-9)), bool(matched))


def overlap_counts(mu: DiscreteMeasure, lattice: DyadicLattice, system: RieszSystem) -> Dict[int, int]:
    """Per level, the most balls B(x_Q, A l(Q)) over system cubes that contain one support point."""
    from scipy.spatial import cKDTree

    out: Dict[int, int] = {}
    by_level: Dict[int, List[CubeAddress]] = {}
    for Q in system.cubes:
        by_level.setdefault(Q.level, []).append(Q)
    for level, cubes in sorted(by_level.items()):
        centers = np.array([lattice.center(Q) for Q in cubes])
        tree = cKDTree(centers)
        radius = system.A * 2.0 ** level
        counts = tree.query_ball_point(mu.points, np.nextafter(radius, 0), return_length=True)
        out[level] = int(np.max(counts)) if len(counts) else 0
    return out


def overlap_bound(dim: int, A: float) -> int:
    """Cube centres of one level within distance A l of a point: at most (2A + 1)^d."""
    return int((2 * math.floor(A) + 2) ** dim)
