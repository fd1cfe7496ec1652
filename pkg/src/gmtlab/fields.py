"""Grid and quadrature checks on the Riesz field: mollified divergence and the fractional principal value."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import beta

from .kernels import KernelSpec, kernel_components
from .measure import DiscreteMeasure, ksum

BUMP_POWER = 4


def mollifier(r: np.ndarray, rho: float, dim: int) -> np.ndarray:
    """Radial bump c (1 - r^2/rho^2)^4 on B(0, rho), normalized to unit integral in R^dim."""
    # integral of (1 - |x|^2)^k over the unit ball is pi^{d/2} B(k+1, d/2) / Gamma(d/2)
    unit = math.pi ** (dim / 2) * beta(BUMP_POWER + 1, dim / 2) / math.gamma(dim / 2)
    c = 1.0 / (unit * rho ** dim)
    t = np.clip(1.0 - (np.asarray(r) / rho) ** 2, 0.0, None)
    return c * t ** BUMP_POWER


@dataclass
class DivergenceResult:
    residual: float
    b: float
    h: float
    rho: float
    n_points: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class GridError(ValueError):
    pass


def _divergence_fields(mu: DiscreteMeasure, rho: float, h: float):
    """(div of psi_rho * R(mu), psi_rho * mu) on interior cell centres of a grid of spacing h."""
    d = mu.dim
    K = KernelSpec.riesz(d, d - 1.0)
    pad = 2 * rho + 4 * h
    lo = np.floor((mu.points.min(axis=0) - pad) / h) * h
    hi = np.ceil((mu.points.max(axis=0) + pad) / h) * h
    axes = [lo[i] + h * (np.arange(int(round((hi[i] - lo[i]) / h))) + 0.5) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    cells = np.stack([m.ravel() for m in mesh], axis=1)
    shape = mesh[0].shape
    # the field sum_j w_j K(u - y_j) sampled at cell centres
    comps = [cells[:, i, None] - mu.points[None, :, i] for i in range(d)]
    field = [(v @ mu.weights).reshape(shape) for v in kernel_components(K, comps)]
    m = int(math.ceil(rho / h))
    offs = h * np.arange(-m, m + 1)
    om = np.meshgrid(*([offs] * d), indexing="ij")
    stencil = mollifier(np.sqrt(sum(o * o for o in om)), rho, d) * h ** d
    smooth = [fftconvolve(f, stencil, mode="same") for f in field]
    # keep points whose convolution and difference stencils stay inside the grid
    margin = m + 2
    core = tuple(slice(margin, n - margin) for n in shape)
    div = np.zeros(tuple(n - 2 * margin for n in shape))
    for i in range(d):
        plus = [slice(margin, n - margin) for n in shape]
        minus = [slice(margin, n - margin) for n in shape]
        plus[i] = slice(margin + 1, shape[i] - margin + 1)
        minus[i] = slice(margin - 1, shape[i] - margin - 1)
        div += (smooth[i][tuple(plus)] - smooth[i][tuple(minus)]) / (2 * h)
    pts = cells.reshape(shape + (d,))[core].reshape(-1, d)
    dist = np.sqrt(np.sum((pts[:, None, :] - mu.points[None, :, :]) ** 2, axis=2))
    target = mollifier(dist, rho, d) @ mu.weights
    return div.ravel(), target


def calibrate_b(dim: int, rho: float, h: float) -> float:
    """Least-squares b from one unit atom at a grid vertex, where the quadrature is symmetric."""
    atom = DiscreteMeasure(np.zeros((1, dim)), [1.0])
    div, target = _divergence_fields(atom, rho, h)
    return float(np.dot(div, target) / np.dot(target, target))


def riesz_divergence_check(mu: DiscreteMeasure, rho: float, h: float, b: Optional[float] = None) -> DivergenceResult:
    """max over the grid of |div(psi_rho * R(mu)) - b psi_rho * mu| for the (d-1)-Riesz field."""
    if h > rho / 4:
        raise GridError("grid spacing must not exceed rho/4")
    b = calibrate_b(mu.dim, rho, h) if b is None else b
    if len(mu) == 0:
        return DivergenceResult(0.0, b, h, rho, 0)
    div, target = _divergence_fields(mu, rho, h)
    return DivergenceResult(float(np.max(np.abs(div - b * target))), b, h, rho, int(div.size))


# ------------------------------------------------------ principal value

@dataclass
class PVResult:
    residual: np.ndarray
    inner: np.ndarray
    outer: np.ndarray
    tau: float
    h: float
    A: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.residual))

    def to_dict(self) -> dict:
        return {"residual": self.residual.tolist(), "norm": self.norm, "inner": self.inner.tolist(),
                "outer": self.outer.tolist(), "tau": self.tau, "h": self.h, "A": self.A}


class SupportTooCloseError(ValueError):
    pass


def _gauss_panels(a: float, b: float, n_panels: int, order: int, geometric: bool = False):
    """Nodes and weights of composite Gauss-Legendre on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    if geometric and a > 0:
        edges = np.geomspace(a, b, n_panels + 1)
    else:
        edges = np.linspace(a, b, n_panels + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()


def field_at(mu: DiscreteMeasure, K: KernelSpec, x: np.ndarray) -> np.ndarray:
    """R(x) = sum_j w_j K(y_j - x) at each row of x."""
    comps = [mu.points[None, :, i] - x[:, i, None] for i in range(mu.dim)]
    return np.stack([v @ mu.weights for v in kernel_components(K, comps)], axis=1)


def _atom_angles(y: np.ndarray, r_split: float, h: float, order: int):
    """Angular nodes around an atom, split where rays graze the inner disc.

    Inside the grazing cone the hole in each ray opens like a square root, so
    that arc is mapped through a sine which makes the integrand smooth.
    """
    centre = math.atan2(-y[1], -y[0])
    half = math.asin(min(1.0, r_split / float(np.linalg.norm(y))))
    v, wv = _gauss_panels(-1.0, 1.0, max(1, int(math.ceil(2 * half / h))), order)
    cone = centre + half * np.sin(0.5 * math.pi * v)
    wcone = wv * half * 0.5 * math.pi * np.cos(0.5 * math.pi * v)
    rest_len = 2 * math.pi - 2 * half
    u, wu = _gauss_panels(centre + half, centre + half + rest_len,
                          max(1, int(math.ceil(rest_len / h))), order)
    return np.concatenate([cone, u]), np.concatenate([wcone, wu])


def pv_fractional_check(mu: DiscreteMeasure, s: float, x0, tau: float, h: float, A: float,
                        order: int = 8) -> PVResult:
    """P.V. of (R(x0) - R(x)) / |x - x0|^{2d+1-s} over tau < |x - x0| < A, in the plane.

    The inner disc (radius half the distance to the support) uses x0-centred polar
    nodes with symmetric angles, so odd parts cancel exactly.  Outside it the
    R(x0) part is integrated in closed form and each atom's part in atom-centred
    polar coordinates, where rho = t^{1/(2-s)} absorbs the rho^{1-s} singularity.
    """
    if mu.dim != 2:
        raise NotImplementedError("the principal-value quadrature is implemented in the plane")
    d = 2
    if not d - 1 < s < d:
        raise ValueError("s must lie in (d-1, d)")
    x0 = np.asarray(x0, dtype=float).reshape(d)
    K = KernelSpec.riesz(d, s)
    if len(mu) == 0:
        z = np.zeros(d)
        return PVResult(z, z.copy(), z.copy(), tau, h, A)
    shifted = DiscreteMeasure(mu.points - x0, mu.weights)
    dist = float(np.min(np.linalg.norm(shifted.points, axis=1)))
    if dist < 1.0:
        raise SupportTooCloseError("x0 must be at distance >= 1 from the support")
    if A < 2 * float(np.max(np.linalg.norm(shifted.points, axis=1))):
        raise ValueError("A must be at least twice the farthest support distance")
    alpha = d + 1 - s
    p = d + alpha
    r_split = 0.5 * dist
    if tau >= r_split:
        raise ValueError("tau must be below half the distance to the support")
    n_theta = 2 * int(math.ceil(math.pi / h))
    theta = 2 * math.pi * np.arange(n_theta) / n_theta
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    dth = 2 * math.pi / n_theta
    R0 = field_at(shifted, K, np.zeros((1, d)))[0]

    # inner annulus tau < r < r_split
    n_pan = max(1, int(math.ceil(math.log(r_split / tau) / h)))
    r, wr = _gauss_panels(tau, r_split, n_pan, order, geometric=True)
    pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    vals = R0[None, :] - field_at(shifted, K, pts)
    weight = (wr * r ** (1 - p))[:, None].repeat(n_theta, axis=1).ravel() * dth
    inner = np.array([ksum(vals[:, c] * weight) for c in range(d)])

    # outer region: closed form for R(x0), atom-centred polar for R(x)
    const = R0 * 2 * math.pi * (r_split ** (-alpha) - A ** (-alpha)) / alpha
    gamma_ = 1.0 / (2.0 - s)
    atom_terms = np.zeros(d)
    for y, w in zip(shifted.points, shifted.weights):
        th, wth = _atom_angles(y, r_split, h, order)
        adirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        b_dot = adirs @ y
        c = float(y @ y)
        acc = [[] for _ in range(d)]
        for k in range(th.size):
            bk = b_dot[k]
            rho_max = -bk + math.sqrt(bk * bk - c + A * A)
            pieces = [(0.0, rho_max)]
            disc = bk * bk - c + r_split * r_split
            if disc > 0:
                r1, r2 = -bk - math.sqrt(disc), -bk + math.sqrt(disc)
                if r2 > 0:
                    pieces = [(0.0, max(r1, 0.0)), (r2, rho_max)]
            for a, bnd in pieces:
                if bnd <= a:
                    continue
                ta, tb = a ** (1 / gamma_), bnd ** (1 / gamma_)
                n_p = max(1, int(math.ceil((tb - ta) / h)))
                t, wt = _gauss_panels(ta, tb, n_p, order)
                rho = t ** gamma_
                xpts = y[None, :] + rho[:, None] * adirs[k][None, :]
                g = np.sum(xpts * xpts, axis=1) ** (-p / 2)
                # K(y - x) = -omega rho^{-s}; rho^{1-s} d rho = gamma dt
                contrib = ksum(g * wt) * gamma_ * wth[k]
                for comp in range(d):
                    acc[comp].append(-adirs[k][comp] * contrib)
        atom_terms += w * np.array([ksum(a) for a in acc])
    outer = const - atom_terms
    return PVResult(inner + outer, inner, outer, tau, h, A)


def pv_reference(mu: DiscreteMeasure, s: float, x0, tau: float, A: float) -> np.ndarray:
    """The same truncated integral by adaptive quadrature (slow; reference values only).

    The inner annulus is a nested adaptive integral in x0-centred polar
    coordinates; outside it each atom is integrated in its own polar
    coordinates with the rho^{1-s} endpoint singularity given to the algebraic
    weight of the adaptive rule.
    """
    from scipy.integrate import quad

    d = 2
    x0 = np.asarray(x0, dtype=float)
    K = KernelSpec.riesz(d, s)
    shifted = DiscreteMeasure(mu.points - x0, mu.weights)
    R0 = field_at(shifted, K, np.zeros((1, d)))[0]
    alpha = d + 1 - s
    p = d + alpha
    r_split = 0.5 * float(np.min(np.linalg.norm(shifted.points, axis=1)))
    opts = dict(limit=200, epsabs=1e-13, epsrel=1e-11)
    out = R0 * 2 * math.pi * (r_split ** (-alpha) - A ** (-alpha)) / alpha
    for comp in range(d):
        def ring(r):
            def ang(t):
                x = np.array([[r * math.cos(t), r * math.sin(t)]])
                return R0[comp] - field_at(shifted, K, x)[0, comp]
            return quad(ang, 0.0, 2 * math.pi, **opts)[0] * r ** (1 - p)
        out[comp] += quad(ring, tau, r_split, **opts)[0]
    for y, w in zip(shifted.points, shifted.weights):
        c = float(y @ y)

        def ray(theta, comp):
            om = np.array([math.cos(theta), math.sin(theta)])
            bk = float(om @ y)
            rho_max = -bk + math.sqrt(bk * bk - c + A * A)
            g = lambda rho: float(np.sum((y + rho * om) ** 2)) ** (-p / 2)
            disc = bk * bk - c + r_split * r_split
            pieces = [(0.0, rho_max)]
            if disc > 0 and -bk + math.sqrt(disc) > 0:
                pieces = [(0.0, max(-bk - math.sqrt(disc), 0.0)), (-bk + math.sqrt(disc), rho_max)]
            total = 0.0
            for a, b in pieces:
                if b <= a:
                    continue
                if a == 0.0:
                    total += quad(g, a, b, weight="alg", wvar=(1 - s, 0.0), **opts)[0]
                else:
                    total += quad(lambda r: g(r) * r ** (1 - s), a, b, **opts)[0]
            return -om[comp] * total

        for comp in range(d):
            out[comp] -= w * quad(ray, 0.0, 2 * math.pi, args=(comp,), **opts)[0]
    return out
