"""The desk-scale acceptance suite: one function per criterion, each returning a verdict with its numbers."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .dyadic import DyadicLattice
from .fields import calibrate_b, riesz_divergence_check
from .kernels import (KernelSpec, apply_T, apply_T_fast, power_iteration_norm, reflectionless_defect,
                      regularized_values, riesz_transform_at_support, weighted_matrix)
from .lcv import carleson_packing, non_lcv_cubes, witness_valid
from .measure import DiscreteMeasure, coordinate_energies, energy
from .oscillation import build_riesz_system, dual_riesz_check, riesz_system_constant, sample_functions, symmetric_dictionary
from .regularity import senior_regular_chain_check
from .seniors import (AdjacencyGraph, VertexFunction, domination_check, min_senior_exponent, senior_vertices,
                      senior_vertices_bruteforce)
from .wolff import WolffParams, truncated_bound_check, u1_domination_check, wolff_potential, wolff_quadrature
from .zoo import arcsine_measure, cantor_measure, disc_lebesgue, plane_measure, segment_measure, two_segments


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    metrics: Dict = field(default_factory=dict)
    elapsed: float = 0.0
    budget: float = math.inf

    @property
    def within_budget(self) -> bool:
        return self.elapsed <= self.budget

    @property
    def verdict(self) -> bool:
        return self.passed and self.within_budget

    def line(self) -> str:
        tag = "PASS" if self.verdict else "FAIL"
        extra = "" if self.within_budget else f" (over the {self.budget:.0f} s budget)"
        return f"{tag}  criterion {self.number:>2}  {self.title}  [{self.elapsed:.1f} s{extra}]"

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.verdict,
                "checks_passed": self.passed, "elapsed_s": self.elapsed, "budget_s": self.budget,
                "metrics": self.metrics}


def _random_measure(rng, n: int, d: int) -> DiscreteMeasure:
    return DiscreteMeasure(rng.uniform(-1, 1, (n, d)), rng.uniform(0.1, 1.0, n))


# ------------------------------------------------------------------ criteria

def coordinate_energy_identity(seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    combos = [(d, s) for d in (1, 2, 3) for s in (1.5, 2.0, 2.5) if s < d]
    worst = 0.0
    for _ in range(100):
        d, s = combos[int(rng.integers(len(combos)))]
        mu = _random_measure(rng, int(rng.integers(2, 201)), d)
        e = energy(mu, s)
        total = math.fsum(coordinate_energies(mu, s))
        worst = max(worst, abs(total - e) / e)
    return CriterionResult(1, "coordinate energies sum to the energy", worst <= 1e-12,
                           {"max_relative_error": worst, "cases": 100}, budget=10)


def senior_oracle(seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    star_mismatch = cluster_bad = 0
    for _ in range(200):
        n = int(rng.integers(2, 501))
        D = int(rng.integers(1, 6))
        adj = [[] for _ in range(n)]
        for _ in range(n * D):
            a, b = (int(v) for v in rng.integers(0, n, 2))
            if a != b and b not in adj[a] and len(adj[a]) < D and len(adj[b]) < D:
                adj[a].append(b)
                adj[b].append(a)
        g = AdjacencyGraph(adj)
        M = min_senior_exponent(g.max_degree()) + int(rng.integers(0, 2))
        vals = rng.uniform(0, 1, n) if rng.random() < 0.5 else rng.integers(0, 4, n).astype(float)
        nu = VertexFunction(g, {i: float(vals[i]) for i in range(n)})
        fast = senior_vertices(g, nu, M)
        slow = senior_vertices_bruteforce(g, nu, M)
        star_mismatch += sum(fast.star[v] != slow.star[v] for v in fast.star)
        rep = domination_check(g, nu, M, fast)
        if rep.hypothesis_ok:
            cluster_bad += rep.cluster_violations + rep.pointwise_violations
    return CriterionResult(2, "pruned seniors match brute force", star_mismatch == 0 and cluster_bad == 0,
                           {"discrepancies": star_mismatch, "cluster_violations": cluster_bad, "graphs": 200},
                           budget=30)


def chain_check(seed: int = 0) -> CriterionResult:
    runs = []
    for n in (4, 5, 6):
        mu = cantor_measure(2, 0.25, n)
        rep = senior_regular_chain_check(mu, DyadicLattice(2, -2 * n, 0).jittered(seed + n), 1.0, p=2)
        runs.append((f"cantor{n}", rep))
    for N in (256, 1024):
        mu = segment_measure(N, 2)
        k = int(math.floor(math.log2(1.0 / N)))
        rep = senior_regular_chain_check(mu, DyadicLattice(2, k, 0).jittered(seed), 1.0, p=2)
        runs.append((f"segment{N}", rep))
    metrics = {name: {"M": r.M, "seniors": r.n_seniors, "cubes": r.n_cubes, "violations": len(r.violations),
                      "ratio": r.ratio, "bound": r.bound} for name, r in runs}
    ok = all(r.passed for _, r in runs)
    return CriterionResult(3, "senior cubes are regular and dominate", ok, metrics, budget=60)


def regularized_kernel_bound(seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)

    def cubic(x):
        r = np.linalg.norm(x, axis=1)
        out = np.zeros_like(x)
        out[:, 0] = x[:, 0] ** 3 / r ** (1.5 + 3)
        return out

    kernels = [KernelSpec.riesz(1, 0.5), KernelSpec.riesz(2, 1.0), KernelSpec.riesz(3, 2.0),
               KernelSpec.riesz(3, 1.5, alpha=0.5), KernelSpec.planar_conjugate(),
               KernelSpec.custom(3, 1.5, cubic, 3)]
    violations = 0
    origin_ok = True
    n = 100_000
    for K in kernels:
        direction = rng.normal(size=(n, K.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        x = direction * 10.0 ** rng.uniform(-4, 2, (n, 1))
        deltas = 10.0 ** rng.uniform(-4, 2, 1000)
        for dl, xs in zip(deltas, np.split(x, 1000)):
            mags = np.linalg.norm(regularized_values(K, float(dl), xs), axis=1)
            violations += int(np.sum(mags > dl ** (-K.s) * (1 + 1e-13)))
        origin_ok = origin_ok and bool(np.all(regularized_values(K, 0.5, np.zeros((1, K.dim))) == 0.0))
    return CriterionResult(4, "|K_delta| <= delta^-s and K_delta(0) = 0", violations == 0 and origin_ok,
                           {"violations": violations, "samples_per_kernel": n, "kernels": len(kernels),
                            "origin_exact_zero": origin_ok}, budget=5)


def wolff_closed_form(seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        mu = _random_measure(rng, int(rng.integers(1, 21)), d)
        p, s = float(rng.uniform(1, 3)), float(rng.uniform(0.3, d))
        r_max = math.inf if rng.random() < 0.5 else float(rng.uniform(0.5, 3))
        x = rng.uniform(-1.5, 1.5, d)
        closed = wolff_potential(mu, WolffParams(p, s, r_max), x)
        quad = wolff_quadrature(mu.distances_from(x), mu.weights, p, s, r_max)
        if closed or quad:
            worst = max(worst, abs(closed - quad) / max(abs(quad), 1e-300))
    return CriterionResult(5, "Wolff closed form matches quadrature", worst <= 1e-8,
                           {"max_relative_error": worst, "cases": 100}, budget=20)


def truncated_transform_bound(seed: int = 0) -> CriterionResult:
    families = {"cantor": [cantor_measure(2, 0.25, n) for n in (3, 4, 5, 6)],
                "arcsine": [arcsine_measure(N) for N in (64, 256, 1024)]}
    metrics: Dict = {}
    ok = True
    K = KernelSpec.riesz(2, 1.0)
    for name, seq in families.items():
        maxima = [truncated_bound_check(nu, K).max_ratio for nu in seq]
        steps = [max(a, b) / min(a, b) for a, b in zip(maxima, maxima[1:])]
        metrics[name] = {"max_ratio": maxima, "step_factor": steps}
        ok = ok and all(math.isfinite(m) and m > 0 for m in maxima) and all(f < 2 for f in steps)
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(10):
        nu = _random_measure(rng, int(rng.integers(3, 16)), 2)
        rep = u1_domination_check(nu, K, float(rng.uniform(0.01, 0.3)))
        bad += rep.pointwise_violations + (not rep.summed_ok) + (not rep.wolff_ok)
    metrics["u1_violations"] = bad
    return CriterionResult(6, "truncated transform energy against W_2", ok and bad == 0, metrics, budget=300)


def riesz_system(seed: int = 0) -> CriterionResult:
    consts, metrics, ok = [], {}, True
    for n in (4, 5, 6):
        mu = cantor_measure(2, 0.25, n)
        lat = DyadicLattice(2, -2 * n, 0)
        system = build_riesz_system(mu, lat, seed=seed)
        rep = riesz_system_constant(mu, lat, m=50, seed=seed, system=system)
        rng = np.random.default_rng(seed)
        dual = dual_riesz_check(mu, system, [rng.normal(size=len(system.cubes)) for _ in range(5)],
                                sample_functions(mu, 10, seed + 7))
        consts.append(rep.empirical_C)
        metrics[f"cantor{n}"] = {"C": rep.empirical_C, "frame_bound": rep.frame_bound, "cubes": rep.n_cubes,
                                 "cs_violations": rep.cs_violations, "sup_violations": rep.sup_bound_violations,
                                 "dual_within_bound": dual.within_bound}
        ok = ok and math.isfinite(rep.empirical_C) and rep.cs_violations == 0 and rep.sup_bound_violations == 0
        ok = ok and dual.within_bound and dual.matched_ok
    spread = max(consts) / min(consts)
    metrics["spread"] = spread
    return CriterionResult(7, "Riesz-system constant is stable", ok and spread < 2, metrics, budget=300)


def reflectionless(seed: int = 0) -> CriterionResult:
    K = KernelSpec.planar_conjugate()
    dic = symmetric_dictionary(2, 32, seed)
    disc = {N: reflectionless_defect(disc_lebesgue(N), K, dic).defect for N in (1000, 4000, 16000)}
    ratios = {N: disc[4 * N] / disc[N] for N in (1000, 4000)}
    line_dic = symmetric_dictionary(2, 32, seed, span=1)
    R = KernelSpec.riesz(2, 1.0)
    plane = {h: reflectionless_defect(plane_measure(2, 1, h, 8.0), R, line_dic).defect for h in (1 / 16, 1 / 32, 1 / 64)}
    ok = all(r <= 0.6 for r in ratios.values()) and all(v <= 5 * h for h, v in plane.items())
    return CriterionResult(8, "disc and line are nearly reflectionless", ok,
                           {"disc_defect": disc, "refinement_ratio": ratios,
                            "line_defect": {f"{h:g}": v for h, v in plane.items()}}, budget=300)


def arcsine_pv(seed: int = 0) -> CriterionResult:
    K = KernelSpec.riesz(2, 1.0)
    worst = {}
    for N in (256, 1024):
        mu = arcsine_measure(N)
        R = riesz_transform_at_support(mu, K)
        inner = np.abs(mu.points[:, 0]) <= 0.5
        worst[N] = float(np.max(np.linalg.norm(R[inner], axis=1)))
    factor = worst[256] / worst[1024]
    return CriterionResult(9, "arcsine principal value tends to zero", factor >= 2,
                           {"max_interior": worst, "decrease_factor": factor}, budget=30)


def operator_norm_oracle(seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 4))
        mu = _random_measure(rng, int(rng.integers(2, 501)), d)
        K = KernelSpec.riesz(d, float(rng.uniform(0.2, d - 0.1)))
        for dl in (1e-3, 1e-2, 1e-1):
            est = power_iteration_norm(mu, K, dl)
            sv = float(np.linalg.svd(weighted_matrix(mu, K, dl), compute_uv=False)[0])
            worst = max(worst, abs(est.norm - sv) / sv)
    rot_worst = 0.0
    for _ in range(10):
        d = int(rng.integers(2, 4))
        mu = _random_measure(rng, int(rng.integers(2, 200)), d)
        K = KernelSpec.riesz(d, float(rng.uniform(0.5, d - 0.1)))
        Qm, _ = np.linalg.qr(rng.normal(size=(d, d)))
        turned = DiscreteMeasure(mu.points @ Qm.T + rng.normal(size=d), mu.weights)
        a = power_iteration_norm(mu, K, 0.05, tol=1e-15, max_iter=200_000).norm
        b = power_iteration_norm(turned, K, 0.05, tol=1e-15, max_iter=200_000).norm
        rot_worst = max(rot_worst, abs(a - b) / a)
    return CriterionResult(10, "power iteration matches dense SVD", worst <= 1e-6 and rot_worst <= 1e-10,
                           {"max_relative_error": worst, "rotation_relative_change": rot_worst}, budget=120)


def tree_code_fidelity(seed: int = 0) -> CriterionResult:
    mu = cantor_measure(2, 0.25, 7)
    K = KernelSpec.riesz(2, 1.0)
    rng = np.random.default_rng(seed)
    f = rng.uniform(-1, 1, len(mu))
    delta = 0.5 * mu.min_spacing()
    fast = apply_T_fast(mu, K, delta, f, theta=0.3)
    exact = apply_T(mu, K, delta, f)
    err = np.linalg.norm(fast.values - exact.values, axis=1)
    within = bool(np.all(err <= fast.error_bound))
    ok = within and fast.relative_bound <= 1e-3
    return CriterionResult(11, "tree code stays within its error bound", ok,
                           {"points": len(mu), "within_bound": within, "relative_bound": fast.relative_bound,
                            "max_error": float(err.max())}, budget=60)


def lcv_geometry(seed: int = 0) -> CriterionResult:
    segs = two_segments(1 / 64, 0.5, 1.0)
    lat = DyadicLattice(2, -4, 0)
    res = non_lcv_cubes(segs, lat, 0.2)
    pair_ok = bool(res.flagged) and all(witness_valid(segs, lat, Q, w, 0.2) for Q, w in res.flagged.items())
    line = segment_measure(1024, 2)
    line_flags = len(non_lcv_cubes(line, DyadicLattice(2, -7, 0), 0.1).flagged)
    packs = []
    for n in (5, 6):
        c = cantor_measure(2, 0.25, n)
        lat = DyadicLattice(2, -8, 0)
        fam = non_lcv_cubes(c, lat, 0.1).flagged
        packs.append(carleson_packing(fam, lat.address(0, (0, 0)), 1.0))
    drift = abs(packs[1] - packs[0]) / packs[0]
    ok = pair_ok and line_flags == 0 and drift < 0.25
    return CriterionResult(12, "LCV flags and Carleson packing", ok,
                           {"two_segment_flags": len(res.flagged), "witnesses_valid": pair_ok,
                            "line_flags": line_flags, "cantor_packing": packs, "packing_drift": drift}, budget=60)


def divergence_identity(seed: int = 0) -> CriterionResult:
    rho = 1.0
    pair = DiscreteMeasure([[0.0, 0.0], [rho / 3, 0.0]], [1.0, 1.0])
    hs = [rho / 8, rho / 16, rho / 32]
    res = [riesz_divergence_check(pair, rho, h, calibrate_b(2, rho, h)).residual for h in hs]
    halving = [b / a for a, b in zip(res, res[1:])]
    ok = res[0] <= 1e-3 and all(0.35 <= q <= 0.65 for q in halving)
    return CriterionResult(13, "divergence identity after calibration", ok,
                           {"h": hs, "residual": res, "successive_ratio": halving}, budget=120)


CRITERIA: List[Callable[..., CriterionResult]] = [
    coordinate_energy_identity, senior_oracle, chain_check, regularized_kernel_bound, wolff_closed_form,
    truncated_transform_bound, riesz_system, reflectionless, arcsine_pv, operator_norm_oracle,
    tree_code_fidelity, lcv_geometry, divergence_identity,
]


def run_criterion(number: int, seed: int = 0) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[number - 1](seed)
    res.elapsed = time.perf_counter() - t0
    return res


def run_suite(numbers: Optional[Sequence[int]] = None, seed: int = 0, echo: bool = False) -> List[CriterionResult]:
    out = []
    for k in numbers or range(1, len(CRITERIA) + 1):
        res = run_criterion(k, seed)
        if echo:
            print(res.line(), flush=True)
        out.append(res)
    return out
