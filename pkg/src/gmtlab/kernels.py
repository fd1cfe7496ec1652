"""Calderon-Zygmund kernels, regularized transforms, operator norms and pairings."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .measure import DiscreteMeasure, ksum

log = logging.getLogger(__name__)

Monomials = Dict[Tuple[int, ...], float]


@dataclass(frozen=True)
class KernelSpec:
    """An antisymmetric, (-s)-homogeneous kernel R^d -> R^{d'}.

    Kernels of the form p(x) |x|^{-radial_power} with p a homogeneous
    polynomial carry ``numerator`` (one monomial dict per output component);
    the tree code needs that form to build its far-field expansion.
    """

    s: float
    dim: int
    alpha: float = 1.0
    variant: str = "riesz"
    codomain_dim: int = 0
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    numerator: Optional[Tuple[Monomials, ...]] = field(default=None, compare=False)
    radial_power: Optional[float] = None
    numerator_degree: int = 0

    def __post_init__(self):
        if not 0 < self.s < self.dim and self.variant != "custom":
            raise ValueError(f"s={self.s} must lie in (0, d={self.dim})")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.codomain_dim <= 0:
            raise ValueError("codomain_dim must be positive")

    @classmethod
    def riesz(cls, dim: int, s: float, alpha: float = 1.0) -> "KernelSpec":
        num = tuple({tuple(int(i == c) for i in range(dim)): 1.0} for c in range(dim))
        return cls(s=float(s), dim=dim, alpha=alpha, variant="riesz", codomain_dim=dim,
                   numerator=num, radial_power=float(s) + 1.0, numerator_degree=1)

    @classmethod
    def planar_conjugate(cls, alpha: float = 1.0) -> "KernelSpec":
        """conj(z)/z^2 = conj(z)^3/|z|^4 on C = R^2."""
        num = ({(3, 0): 1.0, (1, 2): -3.0}, {(2, 1): -3.0, (0, 3): 1.0})
        return cls(s=1.0, dim=2, alpha=alpha, variant="planar_conjugate", codomain_dim=2,
                   numerator=num, radial_power=4.0, numerator_degree=3)

    @classmethod
    def custom(cls, dim: int, s: float, evaluator: Callable[[np.ndarray], np.ndarray],
               codomain_dim: int, alpha: float = 1.0) -> "KernelSpec":
        """``evaluator`` maps an (n, d) array of nonzero vectors to (n, d') kernel values."""
        if not 0 < s < dim:
            raise ValueError(f"s={s} must lie in (0, d={dim})")
        return cls(s=float(s), dim=dim, alpha=alpha, variant="custom", codomain_dim=codomain_dim,
                   evaluator=evaluator)

    def to_dict(self) -> dict:
        return {"variant": self.variant, "s": self.s, "dim": self.dim, "alpha": self.alpha,
                "codomain_dim": self.codomain_dim}


def _radial(r2: np.ndarray, power: float) -> np.ndarray:
    """r2 ** (-power) with the common exponents done without a general pow."""
    if power == 1.0:
        return 1.0 / r2
    if power == 2.0:
        return 1.0 / (r2 * r2)
    if power == 1.5:
        return 1.0 / (r2 * np.sqrt(r2))
    if power == 0.5:
        return 1.0 / np.sqrt(r2)
    return r2 ** (-power)


def kernel_components(K: KernelSpec, comps: Sequence[np.ndarray], delta: Optional[float] = None) -> List[np.ndarray]:
    """Kernel (or K_delta) values from per-axis difference arrays of any common shape.

    Zero differences give zero, which is the convention K_delta(0) = 0.
    """
    r2 = comps[0] * comps[0]
    for c in comps[1:]:
        r2 = r2 + c * c
    zero = r2 == 0
    safe = np.where(zero, 1.0, r2) if np.any(zero) else r2
    if K.variant == "riesz":
        rad = _radial(safe, (K.s + 1) / 2)
        if np.any(zero):
            rad[zero] = 0.0
        out = None
    elif K.variant == "planar_conjugate":
        x, y = comps
        rad = _radial(safe, 2.0)
        if np.any(zero):
            rad[zero] = 0.0
        out = [(x * x - 3 * y * y) * x * rad, (y * y - 3 * x * x) * y * rad]
    else:
        flat = np.stack([c.ravel() for c in comps], axis=1)
        vals = np.zeros((flat.shape[0], K.codomain_dim))
        mask = ~zero.ravel()
        if np.any(mask):
            vals[mask] = np.asarray(K.evaluator(flat[mask]), dtype=float).reshape(-1, K.codomain_dim)
        out = [vals[:, c].reshape(comps[0].shape) for c in range(K.codomain_dim)]
        rad = None
    if delta is not None:
        if not delta > 0:
            raise ValueError("delta must be positive")
        inside = r2 < delta * delta
        if np.any(inside):
            factor = np.ones_like(r2)
            factor[inside] = (np.sqrt(r2[inside]) / delta) ** (K.s + K.alpha)
            if out is None:
                rad = rad * factor
            else:
                out = [o * factor for o in out]
    if out is None:
        out = [c * rad for c in comps]
    return out


def kernel_values(K: KernelSpec, diffs: np.ndarray) -> np.ndarray:
    """K at each row of ``diffs`` (shape (..., d)); rows equal to zero give zero."""
    diffs = np.asarray(diffs, dtype=float)
    comps = [diffs[..., i] for i in range(K.dim)]
    return np.stack(kernel_components(K, comps), axis=-1)


def regularized_values(K: KernelSpec, delta: float, diffs: np.ndarray) -> np.ndarray:
    """K_delta(x) = K(x) (|x| / max(|x|, delta))^{s + alpha}, and 0 at the origin."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    diffs = np.asarray(diffs, dtype=float)
    comps = [diffs[..., i] for i in range(K.dim)]
    return np.stack(kernel_components(K, comps, delta), axis=-1)


def _diff_blocks(targets: np.ndarray, sources: np.ndarray, rows: slice) -> List[np.ndarray]:
    return [targets[rows, i, None] - sources[None, :, i] for i in range(targets.shape[1])]


def eval_kernel(K: KernelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(K.dim)
    if not np.any(x != 0):
        raise ValueError("kernel is undefined at the origin; use eval_kernel_regularized")
    return kernel_values(K, x[None, :])[0]


def eval_kernel_regularized(K: KernelSpec, delta: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(K.dim)
    return regularized_values(K, delta, x[None, :])[0]


# ----------------------------------------------------------------- transforms

@dataclass
class TransformResult:
    values: np.ndarray
    delta: float
    accuracy: str = "direct"
    theta: Optional[float] = None
    error_bound: Optional[np.ndarray] = None
    relative_bound: float = 0.0

    def to_dict(self) -> dict:
        return {"delta": self.delta, "accuracy": self.accuracy, "theta": self.theta,
                "relative_bound": self.relative_bound, "values": self.values.tolist()}


def _row_blocks(n_rows: int, n_cols: int, budget: int = 4_000_000):
    step = max(1, budget // max(1, n_cols))
    for start in range(0, n_rows, step):
        yield slice(start, min(n_rows, start + step))


def apply_T(mu: DiscreteMeasure, K: KernelSpec, delta: float, f, targets=None) -> TransformResult:
    """values[i] = sum_j K_delta(t_i - x_j) f_j w_j, targets defaulting to the support."""
    f = np.asarray(f, dtype=float).reshape(len(mu))
    tg = mu.points if targets is None else np.asarray(targets, dtype=float).reshape(-1, mu.dim)
    q = f * mu.weights
    out = np.zeros((tg.shape[0], K.codomain_dim))
    for rows in _row_blocks(tg.shape[0], len(mu)):
        vals = kernel_components(K, _diff_blocks(tg, mu.points, rows), delta)
        for c, v in enumerate(vals):
            out[rows, c] = v @ q
    return TransformResult(out, delta)


# --------------------------------------------------------------- tree code

def multi_indices(dim: int, max_degree: int) -> List[Tuple[int, ...]]:
    """All multi-indices of total degree <= max_degree, graded by degree."""
    out = []
    for deg in range(max_degree + 1):
        for combo in itertools.product(range(deg + 1), repeat=dim):
            if sum(combo) == deg:
                out.append(combo)
    return out


def expansion_tail(two_nu: float, u: np.ndarray, order: int) -> np.ndarray:
    """sum_{n > order} (2nu)_n / n! u^n, the Gegenbauer majorant of the truncation error."""
    u = np.asarray(u, dtype=float)
    total = (1.0 - u) ** (-two_nu)
    partial = np.zeros_like(u)
    term = np.ones_like(u)
    for n in range(order + 1):
        partial = partial + term
        term = term * (two_nu + n) / (n + 1) * u
    tail = total - partial
    # keep the bound honest against cancellation in the subtraction above
    return np.maximum(tail, term) + 4e-16 * total


class _Node:
    __slots__ = ("idx", "center", "radius", "children", "moments", "abs_q")

    def __init__(self, idx, center, radius):
        self.idx = idx
        self.center = center
        self.radius = radius
        self.children: List["_Node"] = []
        self.moments = None
        self.abs_q = 0.0


class TreeCode:
    """Hierarchical summation with a certified truncated Taylor far field.

    Far-field interactions are expanded to ``order`` in the source offset; the
    error for a source cell of radius r seen from distance R is bounded by
    sum|q| R^{m - 2nu} (1 + r/R)^m tail(2nu, r/R, order), where the kernel is
    p(x)|x|^{-2nu} with p homogeneous of degree m and |p(x)| <= |x|^m.
    """

    def __init__(self, mu: DiscreteMeasure, K: KernelSpec, theta: float = 0.3,
                 order: int = 8, leaf_size: int = 64):
        if not 0 < theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if K.numerator is None:
            raise ValueError("tree code needs a polynomial-numerator kernel")
        self.mu, self.K, self.theta, self.order, self.leaf_size = mu, K, theta, order, leaf_size
        self.m = K.numerator_degree
        self.two_nu = K.radial_power
        self.mom_index = multi_indices(mu.dim, order + self.m)
        self.mom_pos = {k: i for i, k in enumerate(self.mom_index)}
        self.a_index = multi_indices(mu.dim, order)
        self.root = self._build(np.arange(len(mu)))

    def _build(self, idx: np.ndarray) -> _Node:
        pts = self.mu.points[idx]
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        center = 0.5 * (lo + hi)
        radius = float(np.sqrt(np.max(np.sum((pts - center) ** 2, axis=1))))
        node = _Node(idx, center, radius)
        if len(idx) > self.leaf_size and radius > 0:
            axis = int(np.argmax(hi - lo))
            order = np.argsort(pts[:, axis], kind="stable")
            half = len(idx) // 2
            node.children = [self._build(idx[order[:half]]), self._build(idx[order[half:]])]
        return node

    def _prepare(self, node: _Node, q: np.ndarray) -> None:
        qs = q[node.idx]
        h = self.mu.points[node.idx] - node.center
        powers = np.ones((len(node.idx), len(self.mom_index)))
        for col, k in enumerate(self.mom_index):
            for axis, e in enumerate(k):
                if e:
                    powers[:, col] *= h[:, axis] ** e
        node.moments = qs @ powers
        node.abs_q = float(np.sum(np.abs(qs)))
        for child in node.children:
            self._prepare(child, q)

    def _taylor_coeffs(self, z0: np.ndarray) -> Dict[Tuple[int, ...], np.ndarray]:
        """Coefficients a_k(z0) with |z0 + h|^{-2nu} = sum_k a_k h^k."""
        nu = self.two_nu / 2.0
        r2 = np.sum(z0 * z0, axis=1)
        a = {self.a_index[0]: r2 ** (-nu)}
        d = z0.shape[1]
        for k in self.a_index[1:]:
            deg = sum(k)
            acc1 = 0.0
            acc2 = 0.0
            for i in range(d):
                if k[i] >= 1:
                    km = k[:i] + (k[i] - 1,) + k[i + 1:]
                    acc1 = acc1 + z0[:, i] * a[km]
                if k[i] >= 2:
                    km2 = k[:i] + (k[i] - 2,) + k[i + 1:]
                    acc2 = acc2 + a[km2]
            a[k] = -((2 * deg - 2 + 2 * nu) * acc1 + (deg - 2 + 2 * nu) * acc2) / (deg * r2)
        return a

    def _far_field(self, node: _Node, z0: np.ndarray) -> np.ndarray:
        a = self._taylor_coeffs(z0)
        mom = node.moments
        pos = self.mom_pos
        gammas = multi_indices(z0.shape[1], self.m)
        S = {}
        for g in gammas:
            acc = np.zeros(z0.shape[0])
            for k, ak in a.items():
                kg = tuple(x + y for x, y in zip(k, g))
                sign = -1.0 if sum(k) % 2 else 1.0
                acc = acc + sign * mom[pos[kg]] * ak
            S[g] = acc
        out = np.zeros((z0.shape[0], self.K.codomain_dim))
        for c, poly in enumerate(self.K.numerator):
            for beta, coef in poly.items():
                for g in gammas:
                    if any(gi > bi for gi, bi in zip(g, beta)):
                        continue
                    binom = 1.0
                    mono = np.ones(z0.shape[0])
                    for axis, (bi, gi) in enumerate(zip(beta, g)):
                        binom *= math.comb(bi, gi)
                        if bi - gi:
                            mono = mono * z0[:, axis] ** (bi - gi)
                    sign = -1.0 if sum(g) % 2 else 1.0
                    out[:, c] += coef * binom * sign * mono * S[g]
        return out

    def evaluate(self, f, delta: float) -> TransformResult:
        mu, K = self.mu, self.K
        q = np.asarray(f, dtype=float).reshape(len(mu)) * mu.weights
        self._prepare(self.root, q)
        tg = mu.points
        values = np.zeros((len(mu), K.codomain_dim))
        bound = np.zeros(len(mu))
        absum = np.zeros(len(mu))
        stack = [(self.root, np.arange(len(mu)))]
        while stack:
            node, tidx = stack.pop()
            if tidx.size == 0:
                continue
            z0 = tg[tidx] - node.center
            R0 = np.sqrt(np.sum(z0 * z0, axis=1))
            accept = (R0 > 0) & (node.radius <= self.theta * R0) & (R0 - node.radius >= delta)
            if np.any(accept):
                ta, za, Ra = tidx[accept], z0[accept], R0[accept]
                values[ta] += self._far_field(node, za)
                u = node.radius / Ra
                bound[ta] += (node.abs_q * Ra ** (self.m - self.two_nu) * (1 + u) ** self.m
                              * expansion_tail(self.two_nu, u, self.order))
                absum[ta] += node.abs_q * (Ra - node.radius) ** (-K.s)
            rest = tidx[~accept]
            if rest.size == 0:
                continue
            if node.children:
                for child in node.children:
                    stack.append((child, rest))
            else:
                src = mu.points[node.idx]
                comps = [tg[rest, i, None] - src[None, :, i] for i in range(mu.dim)]
                vals = kernel_components(K, comps, delta)
                qs = q[node.idx]
                mag = np.zeros(vals[0].shape)
                for c, v in enumerate(vals):
                    values[rest, c] += v @ qs
                    mag += v * v
                absum[rest] += np.sqrt(mag) @ np.abs(qs)
        # floating-point allowance for reordering the sums
        bound += 4.0 * len(mu) * np.finfo(float).eps * absum
        scale = float(np.max(np.linalg.norm(values, axis=1))) if len(mu) else 0.0
        rel = float(np.max(bound) / scale) if scale > 0 else 0.0
        return TransformResult(values, delta, "tree", self.theta, bound, rel)


def apply_T_fast(mu: DiscreteMeasure, K: KernelSpec, delta: float, f, theta: float = 0.3,
                 order: int = 8, leaf_size: int = 64) -> TransformResult:
    """Tree-accelerated apply_T with a certified per-point error bound.

    Falls back to direct summation (bound zero) for tiny inputs, degenerate
    geometry, or kernels without a polynomial-numerator form.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if len(mu) <= leaf_size or K.numerator is None or len(mu) < 2:
        res = apply_T(mu, K, delta, f)
        res.error_bound = np.zeros(len(mu))
        res.theta = theta
        res.accuracy = "direct"
        return res
    return TreeCode(mu, K, theta, order, leaf_size).evaluate(f, delta)


# ------------------------------------------------------------ operator norm

class NormConvergenceError(RuntimeError):
    def __init__(self, delta, residual, iterations):
        super().__init__(f"power iteration at delta={delta} stalled: residual {residual:.3e} after {iterations} steps")
        self.residual = residual


def weighted_matrix(mu: DiscreteMeasure, K: KernelSpec, delta: float) -> np.ndarray:
    """Stacked components of W^{1/2} K_delta W^{1/2}, shape (d' N, N)."""
    sw = np.sqrt(mu.weights)
    vals = kernel_components(K, _diff_blocks(mu.points, mu.points, slice(0, len(mu))), delta)
    scale = sw[:, None] * sw[None, :]
    return np.concatenate([v * scale for v in vals], axis=0)


@dataclass
class NormEstimate:
    delta: float
    norm: float
    iterations: int
    residual: float

    def to_dict(self) -> dict:
        return {"delta": self.delta, "norm": self.norm, "iterations": self.iterations, "residual": self.residual}


@dataclass
class NormReport:
    estimates: List[NormEstimate]
    sup: float

    def to_dict(self) -> dict:
        return {"estimates": [e.to_dict() for e in self.estimates], "sup": self.sup}


def default_delta_grid(mu: DiscreteMeasure) -> np.ndarray:
    lo = 0.5 * mu.min_spacing()
    hi = mu.diameter()
    if not math.isfinite(lo) or hi <= 0:
        return np.array([1.0])
    n = max(1, int(math.ceil(math.log2(hi / lo))))
    return lo * 2.0 ** np.arange(n + 1)


def power_iteration_norm(mu: DiscreteMeasure, K: KernelSpec, delta: float, tol: float = 1e-8,
                         max_iter: int = 20_000, seed: int = 0, dense_limit: int = 3000,
                         block: int = 4) -> NormEstimate:
    """Largest singular value of W^{1/2} K_delta W^{1/2} by power iteration on B^T B.

    Iterates a block of ``block`` vectors (orthonormalized each step) and stops
    once the top Ritz value changes by at most ``tol`` relatively and its
    residual is below sqrt(tol).
    """
    n = len(mu)
    if n < 2 or mu.total_mass == 0:
        return NormEstimate(delta, 0.0, 0, 0.0)
    sw = np.sqrt(mu.weights)
    if n <= dense_limit:
        B = weighted_matrix(mu, K, delta)

        def gram(v):
            return B.T @ (B @ v)
    else:
        def gram(v):
            out = np.zeros(v.shape)
            for rows in _row_blocks(n, n):
                vals = kernel_components(K, _diff_blocks(mu.points, mu.points, rows), delta)
                scale = sw[rows, None] * sw[None, :]
                for comp in vals:
                    block = comp * scale
                    out += block.T @ (block @ v)
            return out

    # block power iteration with a Rayleigh-Ritz step: antisymmetric kernels
    # produce (near-)paired singular values, which stall a single vector
    rng = np.random.default_rng(seed)
    width = min(n, block)
    V, _ = np.linalg.qr(rng.standard_normal((n, width)))
    lam_prev = 0.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        G = gram(V)
        small = V.T @ G
        evals, evecs = np.linalg.eigh(0.5 * (small + small.T))
        lam = float(evals[-1])
        if lam <= 0:
            return NormEstimate(delta, 0.0, it, 0.0)
        top = V @ evecs[:, -1]
        residual = float(np.linalg.norm(G @ evecs[:, -1] - lam * top)) / lam
        if it > 1 and abs(lam - lam_prev) <= tol * lam and residual <= math.sqrt(tol):
            log.debug("delta=%g converged after %d iterations", delta, it)
            return NormEstimate(delta, math.sqrt(lam), it, residual)
        lam_prev = lam
        V, _ = np.linalg.qr(G @ evecs[:, ::-1])
    raise NormConvergenceError(delta, residual, max_iter)


def operator_norm(mu: DiscreteMeasure, K: KernelSpec, delta_grid: Optional[Sequence[float]] = None,
                  tol: float = 1e-8, max_iter: int = 50_000, seed: int = 0) -> NormReport:
    """Per-delta L2(mu) norms of T_{mu,delta} and their maximum over the grid."""
    grid = default_delta_grid(mu) if delta_grid is None else np.asarray(delta_grid, dtype=float)
    ests = [power_iteration_norm(mu, K, float(dl), tol, max_iter, seed) for dl in grid]
    return NormReport(ests, max((e.norm for e in ests), default=0.0))


# ------------------------------------------------------------ pairings

def bilinear_pairing(mu: DiscreteMeasure, K: KernelSpec, f, phi) -> np.ndarray:
    """sum_{i != j} K(x_i - x_j) (f_j phi_i - phi_j f_i)/2 w_i w_j.

    No tail correction is applied for phi = 1: finite measures have compact
    support. Supports meant to model unbounded sets need one added by the caller.
    """
    n = len(mu)
    f = np.asarray(f, dtype=float).reshape(n)
    phi = np.asarray(phi, dtype=float).reshape(n)
    w = mu.weights
    out = np.zeros(K.codomain_dim)
    for rows in _row_blocks(n, n):
        vals = kernel_components(K, _diff_blocks(mu.points, mu.points, rows))
        H = 0.5 * (f[None, :] * phi[rows, None] - phi[None, :] * f[rows, None]) * (w[rows, None] * w[None, :])
        for c, v in enumerate(vals):
            out[c] += float(np.sum(v * H))
    return out


@dataclass
class DefectReport:
    defect: float
    argmax: int
    values: List[float]
    lower_bound: bool = True

    def to_dict(self) -> dict:
        return {"defect": self.defect, "argmax": self.argmax, "values": self.values,
                "label": "lower bound for the supremum defect"}


def reflectionless_defect(mu: DiscreteMeasure, K: KernelSpec, dictionary: Sequence,
                          R: float = math.inf) -> DefectReport:
    """max over the dictionary of |pairing(f, 1_{B(0,R)})|.

    By antisymmetry pairing(f, phi) = -sum_i f_i w_i T(phi)(x_i), so one
    diagonal-excluded transform of phi serves the whole dictionary.
    """
    if len(dictionary) == 0:
        raise ValueError("dictionary is empty")
    phi = (np.linalg.norm(mu.points, axis=1) < R).astype(float)
    delta = 0.5 * mu.min_spacing() if len(mu) > 1 else 1.0
    T_phi = apply_T(mu, K, delta, phi).values
    vals = []
    for item in dictionary:
        if hasattr(item, "values_on"):
            if item.lip_bound > 1.0 + 1e-12:
                raise ValueError("dictionary functions must have certified Lipschitz norm <= 1")
            f = item.values_on(mu.points)
        else:
            f = np.asarray(item, dtype=float)
        mean = abs(ksum(f * mu.weights))
        if mean > 1e-12 * max(mu.total_mass, 1e-300):
            raise ValueError(f"dictionary function has mu-mean {mean:.3e}, not zero")
        vals.append(float(np.linalg.norm(-(f * mu.weights) @ T_phi)))
    best = int(np.argmax(vals))
    return DefectReport(vals[best], best, vals)


def riesz_transform_at_support(mu: DiscreteMeasure, K: KernelSpec) -> np.ndarray:
    """Diagonal-excluded sum_{j != i} K(x_i - x_j) w_j at every support point."""
    return apply_T(mu, K, min(1.0, 0.5 * mu.min_spacing()) if len(mu) > 1 else 1.0, np.ones(len(mu))).values
