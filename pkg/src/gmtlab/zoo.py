"""Reference measures with known analytic structure."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .measure import DiscreteMeasure

POINT_CAP = 4_000_000


class PointCapError(RuntimeError):
    pass


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise PointCapError(f"{n} points requested, cap is {cap}")


def plane_measure(d: int, s: int, h: float, L: float, cap: int = POINT_CAP) -> DiscreteMeasure:
    """Grid of spacing h on the coordinate s-plane, centred at the origin, side L, weights h^s."""
    if int(s) != s or not 0 < s <= d:
        raise ValueError("s must be an integer with 0 < s <= d")
    if not 0 < h <= L:
        raise ValueError("need 0 < h <= L")
    s = int(s)
    n = int(round(L / h))
    _check_cap(n ** s, cap)
    axis = (np.arange(n) - (n - 1) / 2.0) * h
    grids = np.meshgrid(*([axis] * s), indexing="ij")
    pts = np.zeros((n ** s, d))
    for j, g in enumerate(grids):
        pts[:, j] = g.ravel()
    return DiscreteMeasure(pts, np.full(n ** s, h ** s), dim=d)


def cantor_dimension(d: int, lam: float) -> float:
    return d * math.log(2.0) / math.log(1.0 / lam)


def cantor_measure(d: int, lam: float, levels: int, cap: int = POINT_CAP) -> DiscreteMeasure:
    """Depth-n cell centres of the 2^d-corner self-similar set in [0,1]^d, equal weights."""
    if not 0 < lam < 0.5:
        raise ValueError("contraction must lie in (0, 1/2)")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    _check_cap(2 ** (d * levels), cap)
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    origins = np.zeros((1, d))
    side = 1.0
    for _ in range(levels):
        step = side * (1.0 - lam)
        origins = (origins[:, None, :] + step * corners[None, :, :]).reshape(-1, d)
        side *= lam
    pts = origins + side / 2.0
    n = pts.shape[0]
    return DiscreteMeasure(pts, np.full(n, 2.0 ** (-d * levels)), dim=d)


def arcsine_measure(N: int) -> DiscreteMeasure:
    """Arcsine-law quantiles -cos((k - 1/2) pi / N) on the first axis of R^2."""
    if N < 2:
        raise ValueError("N must be >= 2")
    k = np.arange(1, N + 1)
    pts = np.zeros((N, 2))
    pts[:, 0] = -np.cos((k - 0.5) * np.pi / N)
    return DiscreteMeasure(pts, np.full(N, 1.0 / N), dim=2)


def arcsine_cdf(x):
    return (np.arcsin(np.clip(x, -1.0, 1.0)) + np.pi / 2) / np.pi


def disc_lebesgue(N_target: int, per_ring: int = 4) -> DiscreteMeasure:
    """Equal-area cells of the unit disc: ring i carries per_ring*(2i+1) points.

    Every cell has area pi / (per_ring * rings^2); points sit at the
    area-median radius of their ring with uniformly spaced angles.
    """
    if N_target < 1:
        raise ValueError("N_target must be >= 1")
    rings = max(1, int(round(math.sqrt(N_target / per_ring))))
    cell = math.pi / (per_ring * rings * rings)
    pts = []
    for i in range(rings):
        m = per_ring * (2 * i + 1)
        r = math.sqrt((i * i + (i + 1) * (i + 1)) / 2.0) / rings
        ang = (np.arange(m) + 0.5) * 2.0 * np.pi / m
        pts.append(np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1))
    pts = np.vstack(pts)
    return DiscreteMeasure(pts, np.full(pts.shape[0], cell), dim=2)


def segment_measure(N: int, d: int = 1) -> DiscreteMeasure:
    """N equally spaced points (k + 1/2)/N on [0,1] along the first axis, weights 1/N."""
    if N < 2:
        raise ValueError("N must be >= 2")
    pts = np.zeros((N, d))
    pts[:, 0] = (np.arange(N) + 0.5) / N
    return DiscreteMeasure(pts, np.full(N, 1.0 / N), dim=d)


def two_segments(h: float, gap: float = 0.5, length: float = 1.0, origin=(0.0, 0.0)) -> DiscreteMeasure:
    """Two parallel horizontal segments in R^2 at heights y0 and y0 + gap."""
    n = int(round(length / h))
    x = origin[0] + (np.arange(n) + 0.5) * h
    lower = np.stack([x, np.full(n, origin[1])], axis=1)
    upper = np.stack([x, np.full(n, origin[1] + gap)], axis=1)
    pts = np.vstack([lower, upper])
    return DiscreteMeasure(pts, np.full(2 * n, h), dim=2)


GENERATORS = {
    "plane": plane_measure,
    "cantor": cantor_measure,
    "arcsine": arcsine_measure,
    "disc": disc_lebesgue,
    "segment": segment_measure,
}
