"""Command-line entry point: one subcommand per computation, JSON plus text reports."""

from __future__ import annotations

import argparse
import math
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .measure import file_digest, load_measure, save_measure
from .reports import Stopwatch, envelope, text_summary, write_report

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


# ------------------------------------------------------------- shared pieces

def _kernel(args, dim: int):
    from .kernels import KernelSpec

    if args.kernel == "planar":
        if dim != 2:
            raise UsageError("the planar kernel needs a measure in R^2")
        return KernelSpec.planar_conjugate()
    return KernelSpec.riesz(dim, args.s)


def _lattice(args, mu):
    from .dyadic import DyadicLattice

    lat = DyadicLattice.for_measure(mu, k_min=args.k_min, k_max=args.k_max,
                                    offset=args.offset if args.offset else None)
    if args.jitter is not None:
        lat = lat.jittered(args.jitter)
    return lat


def _cube(Q) -> dict:
    return {"level": Q.level, "coords": list(Q.coords)}


def _add_measure(p, s_required: bool = True):
    p.add_argument("--measure", required=True, help="measure file (binary .gmtm or .json)")
    if s_required:
        p.add_argument("--s", type=float, required=True, help="dimension exponent s")


def _add_lattice(p):
    p.add_argument("--k-min", type=int, default=None, help="finest level (default: resolves the support)")
    p.add_argument("--k-max", type=int, default=None, help="coarsest level (default: one cube holds the support)")
    p.add_argument("--offset", type=_floats, default=None, help="lattice origin, comma separated")
    p.add_argument("--jitter", type=int, default=None, metavar="SEED", help="randomly shift the lattice origin")


def _add_kernel(p):
    p.add_argument("--kernel", choices=("riesz", "planar"), default="riesz")


# ------------------------------------------------------------------ commands

def cmd_zoo(args):
    from . import zoo

    if args.family == "plane":
        mu = zoo.plane_measure(args.d, int(args.s), args.h, args.L)
    elif args.family == "cantor":
        mu = zoo.cantor_measure(args.d, args.lam, args.levels)
    elif args.family == "arcsine":
        mu = zoo.arcsine_measure(args.N)
    elif args.family == "disc":
        mu = zoo.disc_lebesgue(args.N)
    else:
        mu = zoo.segment_measure(args.N, args.d)
    save_measure(mu, args.out)
    result = {"file": args.out, "points": len(mu), "dim": mu.dim, "total_mass": mu.total_mass}
    return result, None, file_digest(args.out)


def cmd_energy(args, mu):
    from .measure import coordinate_energies, energy

    e = energy(mu, args.s)
    return {"energy": e, "coordinate_energies": coordinate_energies(mu, args.s)}, None


def cmd_wolff(args, mu):
    from .measure import ksum
    from .wolff import WolffParams, wolff_at_support, wolff_potential

    params = WolffParams(args.p, args.s, args.r_max)
    if args.x is not None:
        return {"x": args.x, "value": wolff_potential(mu, params, np.asarray(args.x))}, None
    vals = wolff_at_support(mu, params, self_exclude=not args.keep_self)
    return {"max": float(np.max(vals)), "integral": ksum(vals * mu.weights),
            "self_excluded": not args.keep_self, "values": vals}, None


def cmd_dyadic_sum(args, mu):
    from .wolff import dyadic_wolff_sum

    lat = _lattice(args, mu)
    return {"lattice": repr(lat), "sum": dyadic_wolff_sum(mu, lat, args.p, args.s)}, None


def cmd_mpv_check(args, mu):
    from .wolff import mpv_condition_test

    lat = _lattice(args, mu)
    rep = mpv_condition_test(mu, lat, args.s, self_exclude=not args.keep_self)
    return rep.to_dict(), None


def cmd_truncated_bound(args, mu):
    from .wolff import truncated_bound_check

    rep = truncated_bound_check(mu, _kernel(args, mu.dim), args.eps)
    return rep.to_dict(), not rep.violation


def cmd_riesz_norm(args, mu):
    from .kernels import operator_norm

    rep = operator_norm(mu, _kernel(args, mu.dim), args.deltas, seed=args.seed)
    return rep.to_dict(), None


def _cube_function(args, mu):
    from .dyadic import populated_cubes
    from .regularity import cube_weights

    lat = _lattice(args, mu)
    table = populated_cubes(mu, lat, args.s)
    return lat, table, cube_weights(table, args.p)


def cmd_senior(args, mu):
    from .seniors import CubeGraph, VertexFunction, domination_check, min_senior_exponent, senior_vertices

    lat, _, weights = _cube_function(args, mu)
    M = min_senior_exponent(lat.max_degree()) if args.M is None else args.M
    graph = CubeGraph.around(lat, weights, args.hops)
    nu = VertexFunction(graph, weights)
    res = senior_vertices(graph, nu, M, vertices=list(weights))
    rep = domination_check(graph, nu, M, res)
    out = rep.to_dict()
    out.update({"M": M, "n_seniors": len(res.seniors), "seniors": [_cube(Q) for Q in res.seniors]})
    return out, rep.passed


def cmd_regular(args, mu):
    from .regularity import epsilon_regular_cubes

    lat = _lattice(args, mu)
    cubes = epsilon_regular_cubes(mu, lat, args.s, args.eps, args.R_graph)
    return {"epsilon": args.eps, "n_regular": len(cubes), "cubes": [_cube(Q) for Q in cubes]}, None


def cmd_chain_check(args, mu):
    from .regularity import senior_regular_chain_check

    lat = _lattice(args, mu)
    rep = senior_regular_chain_check(mu, lat, args.s, args.M, args.p, args.R_graph,
                                     scan_all_regular=args.scan_regular)
    return rep.to_dict(), rep.passed


def cmd_lcv(args, mu):
    from .lcv import non_lcv_cubes

    lat = _lattice(args, mu)
    return non_lcv_cubes(mu, lat, args.delta, args.pair_budget).to_dict(), None


def cmd_packing(args, mu):
    from .lcv import carleson_constant, non_lcv_cubes

    lat = _lattice(args, mu)
    fam = list(non_lcv_cubes(mu, lat, args.delta, args.pair_budget).flagged)
    tops = {lat.address(k, tuple(c >> (k - Q.level) for c in Q.coords))
            for Q in fam for k in range(Q.level, lat.k_max + 1)}
    best, arg = carleson_constant(fam, sorted(tops), args.s)
    return {"family_size": len(fam), "carleson_constant": best,
            "witness": None if arg is None else _cube(arg)}, None


def cmd_oscillation(args, mu):
    from .oscillation import default_A, oscillation_lower

    A = default_A(mu.dim) if args.A is None else args.A
    res = oscillation_lower(mu, _kernel(args, mu.dim), np.asarray(args.center), args.ell, A, args.n, args.seed)
    return res.to_dict(), None


def cmd_riesz_system(args, mu):
    from .oscillation import riesz_system_constant

    lat = _lattice(args, mu)
    rep = riesz_system_constant(mu, lat, args.A, args.m, args.seed)
    return rep.to_dict(), rep.cs_violations == 0 and rep.sup_bound_violations == 0


def cmd_defect(args, mu):
    from .kernels import reflectionless_defect
    from .oscillation import symmetric_dictionary

    dic = symmetric_dictionary(mu.dim, args.n, args.seed, span=args.span, center=args.center)
    rep = reflectionless_defect(mu, _kernel(args, mu.dim), dic, args.R)
    return rep.to_dict(), None


def cmd_divergence(args, mu):
    from .fields import riesz_divergence_check

    res = riesz_divergence_check(mu, args.rho, args.h, args.b)
    return res.to_dict(), None if args.tol is None else res.residual <= args.tol


def cmd_pv_fractional(args, mu):
    from .fields import pv_fractional_check

    res = pv_fractional_check(mu, args.s, np.asarray(args.x0), args.tau, args.h, args.A)
    return res.to_dict(), None if args.tol is None else res.norm <= args.tol


def cmd_verify_all(args):
    from .acceptance import run_suite

    results = run_suite(args.only, args.seed, echo=not args.quiet)
    return {"suite": args.suite, "criteria": [r.to_dict() for r in results]}, all(r.verdict for r in results), None


MEASURE_COMMANDS = {
    "energy": cmd_energy, "wolff": cmd_wolff, "dyadic-sum": cmd_dyadic_sum, "mpv-check": cmd_mpv_check,
    "truncated-bound": cmd_truncated_bound, "riesz-norm": cmd_riesz_norm, "senior": cmd_senior,
    "regular": cmd_regular, "chain-check": cmd_chain_check, "lcv": cmd_lcv, "packing": cmd_packing,
    "oscillation": cmd_oscillation, "riesz-system": cmd_riesz_system, "defect": cmd_defect,
    "divergence": cmd_divergence, "pv-fractional": cmd_pv_fractional,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmtlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gmtlab {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized steps (default 0)")
    common.add_argument("--report", default=None, help="write the JSON report here (text summary beside it)")
    common.add_argument("--quiet", action="store_true", help="do not print the text summary")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    z = sub.add_parser("zoo", parents=[common], help="generate a reference measure")
    z.add_argument("family", choices=("plane", "cantor", "arcsine", "disc", "segment"))
    z.add_argument("--d", type=int, default=2)
    z.add_argument("--s", type=float, default=1)
    z.add_argument("--h", type=float, default=1 / 64)
    z.add_argument("--L", type=float, default=1.0)
    z.add_argument("--lambda", dest="lam", type=float, default=0.25)
    z.add_argument("--levels", type=int, default=5)
    z.add_argument("--N", type=int, default=256)
    z.add_argument("--out", required=True, help="measure file to write")

    def measure_cmd(name, help_text, s_required=True):
        p = sub.add_parser(name, parents=[common], help=help_text)
        _add_measure(p, s_required)
        p.add_argument("--out", dest="report_out", default=None, help="alias for --report")
        return p

    p = measure_cmd("energy", "pairwise energy and its coordinate split")

    p = measure_cmd("wolff", "Wolff potential at a point or at every support point")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--r-max", type=float, default=math.inf)
    p.add_argument("--x", type=_floats, default=None, help="evaluation point (default: every support point)")
    p.add_argument("--keep-self", action="store_true", help="keep each point's own atom (gives +inf)")

    p = measure_cmd("dyadic-sum", "sum of D(3Q)^p mu(3Q) over populated cubes")
    p.add_argument("--p", type=float, default=2.0)
    _add_lattice(p)

    p = measure_cmd("mpv-check", "sup over cubes of the Wolff energy of mu|Q per unit mass")
    p.add_argument("--keep-self", action="store_true")
    _add_lattice(p)

    p = measure_cmd("truncated-bound", "truncated transform energy against the W_2 integral")
    p.add_argument("--eps", type=_floats, default=None, help="truncation radii (default: geometric grid)")
    _add_kernel(p)

    p = measure_cmd("riesz-norm", "L2(mu) operator norms over a delta grid")
    p.add_argument("--deltas", type=_floats, default=None)
    _add_kernel(p)

    p = measure_cmd("senior", "senior cubes of D(3Q)^p mu(3Q) and their domination")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--hops", type=int, default=1, help="graph = populated cubes plus this many layers")
    _add_lattice(p)

    p = measure_cmd("regular", "epsilon-regular populated cubes")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--R-graph", dest="R_graph", type=int, default=8)
    _add_lattice(p)

    p = measure_cmd("chain-check", "seniors are regular and carry the dyadic Wolff sum")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--R-graph", dest="R_graph", type=int, default=8)
    p.add_argument("--scan-regular", action="store_true", help="also total the mass of all regular cubes")
    _add_lattice(p)

    for name, text in (("lcv", "delta-non-LCV cubes with witnesses"),
                       ("packing", "Carleson packing constant of the non-LCV family")):
        p = measure_cmd(name, text, s_required=(name == "packing"))
        p.add_argument("--delta", type=float, required=True)
        p.add_argument("--pair-budget", type=int, default=20_000)
        _add_lattice(p)

    p = measure_cmd("oscillation", "oscillation lower bound from a bump dictionary")
    p.add_argument("--center", type=_floats, required=True)
    p.add_argument("--ell", type=float, required=True)
    p.add_argument("--A", type=float, default=None)
    p.add_argument("--n", type=int, default=16)
    _add_kernel(p)

    p = measure_cmd("riesz-system", "empirical frame constant of the bump system", s_required=False)
    p.add_argument("--A", type=float, default=None)
    p.add_argument("--m", type=int, default=50)
    _add_lattice(p)

    p = measure_cmd("defect", "reflectionless defect over a symmetric bump dictionary")
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--R", type=float, default=math.inf)
    p.add_argument("--span", type=int, default=None, help="keep bump offsets in the first SPAN coordinates")
    p.add_argument("--center", type=_floats, default=None, help="symmetry centre of the measure (default origin)")
    _add_kernel(p)

    p = measure_cmd("divergence", "divergence of the mollified (d-1)-Riesz field", s_required=False)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--b", type=float, default=None, help="divergence constant (default: calibrate)")
    p.add_argument("--tol", type=float, default=None)

    p = measure_cmd("pv-fractional", "principal-value difference integral at a point off the support")
    p.add_argument("--x0", type=_floats, required=True)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--A", type=float, default=None, help="outer radius (default: 20/tau)")
    p.add_argument("--tol", type=float, default=None)

    v = sub.add_parser("verify-all", parents=[common], help="run the acceptance suite")
    v.add_argument("--suite", choices=("desk",), default="desk")
    v.add_argument("--only", type=_ints, default=None, help="criterion numbers, comma separated")
    v.add_argument("--out", dest="report_out", default=None, help="alias for --report")
    return parser


def run_command(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    report_path = getattr(args, "report_out", None) or args.report
    params = {k: v for k, v in vars(args).items() if k not in ("report", "report_out", "quiet")}
    try:
        with Stopwatch() as sw:
            if args.command == "zoo":
                result, passed, digest = cmd_zoo(args)
            elif args.command == "verify-all":
                result, passed, digest = cmd_verify_all(args)
            else:
                mu = load_measure(args.measure)
                digest = file_digest(args.measure)
                if args.command == "pv-fractional" and args.A is None:
                    args.A = max(20.0 / args.tau, 2.0 * float(np.max(np.linalg.norm(mu.points - np.asarray(args.x0), axis=1))))
                    params["A"] = args.A
                result, passed = MEASURE_COMMANDS[args.command](args, mu)
    except (UsageError, ValueError, FileNotFoundError, NotImplementedError) as exc:
        print(f"gmtlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = envelope(args.command, params, result, passed, digest, sw.elapsed)
    write_report(report, report_path)
    if not args.quiet:
        sys.stdout.write(text_summary(report))
    return EXIT_VIOLATION if passed is False else EXIT_OK


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
