"""Command-line front end: lane-emden tables, single solves, verification suites and sweeps.

Exit codes: 0 ok, 1 verification failure, 2 usage or config error,
3 unsupported physics, 4 non-convergence, 5 infeasible geometry.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from contextlib import ExitStack
from datetime import datetime, timezone
from pathlib import Path
from unittest import mock

import numpy as np

from . import __version__
from .eos import PolytropicEos, UnsupportedGammaError

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_PHYSICS, EXIT_NONCONVERGED, EXIT_INFEASIBLE = range(6)
VERIFY_BUDGET_SECONDS = 600.0

log = logging.getLogger("starplanet")


def _f(x) -> str:
    return format(float(x), ".17g")


class Manifest:
    """Plain-text run record, written on success and on failure."""

    def __init__(self, command: str, out_dir: Path | None):
        self.command = command
        self.out_dir = out_dir
        self.start = datetime.now(timezone.utc)
        self.config: dict = {}
        self.outputs: list[Path] = []
        self.summary: dict = {}
        self.error: str | None = None

    def write(self, exit_code: int) -> Path | None:
        if self.out_dir is None:
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        end = datetime.now(timezone.utc)
        lines = [
            f"command: {self.command}",
            f"version: {__version__}",
            f"start: {self.start.isoformat()}",
            f"end: {end.isoformat()}",
            f"exit_code: {exit_code}",
            f"error: {self.error or 'none'}",
            "config:",
        ]
        for k, v in self.config.items():
            lines.append(f"  {k} = {_f(v) if isinstance(v, float) else v}")
        lines.append("outputs:")
        lines += [f"  {p}" for p in self.outputs]
        lines.append("summary:")
        for k, v in self.summary.items():
            lines.append(f"  {k} = {_f(v) if isinstance(v, float) else v}")
        path = self.out_dir / "manifest.txt"
        path.write_text("\n".join(lines) + "\n")
        return path


# ---------------------------------------------------------------- lane-emden


def cmd_lane_emden(args) -> int:
    from .lane_emden import rescale, solve_unit, write_csv

    out = Path(args.out)
    man = Manifest("lane-emden", out)
    man.config = {"gamma": args.gamma, "kpress": args.kpress, "mass": list(args.mass or [1.0])}
    masses = args.mass or [1.0]
    try:
        if any(not m > 0 for m in masses):
            raise ValueError("masses must be positive")
        eos = PolytropicEos(args.kpress, args.gamma)
        unit = solve_unit(eos)
    except UnsupportedGammaError as exc:
        man.error = str(exc)
        man.write(EXIT_PHYSICS)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except ValueError as exc:
        man.error = str(exc)
        man.write(EXIT_USAGE)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "summary.csv"
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "R_m", "rho_c", "lambda_m", "e0_m"])
        for i, m in enumerate(masses):
            prof = rescale(unit, m)
            w.writerow([_f(m), _f(prof.radius), _f(prof.central_density), _f(prof.lam), _f(prof.e0)])
            path = out / f"profile_{i:02d}.csv"
            write_csv(prof, path)
            man.outputs.append(path)
    man.outputs.insert(0, summary)
    man.summary = {"profiles": len(masses), "unit_radius": unit.radius, "unit_e0": unit.e0}
    man.write(EXIT_OK)
    print(summary.read_text(), end="")
    return EXIT_OK


# ---------------------------------------------------------------- minimize


def cmd_minimize(args) -> int:
    from .minimizer import ConfigError, dump_config, load_config, minimize, write_result
    from .minimizer.scf import InfeasibleCapError, InfeasibleGeometryError

    out = Path(args.out)
    man = Manifest("minimize", out)
    try:
        config = load_config(args.config)
        man.config = config.to_dict()
        if config.gamma <= 1.5:
            raise UnsupportedGammaError(f"the solver needs gamma > 3/2, got {config.gamma}")
    except UnsupportedGammaError as exc:
        return _fail(man, EXIT_PHYSICS, exc)
    except (ConfigError, ValueError) as exc:
        return _fail(man, EXIT_USAGE, exc)
    try:
        result = minimize(config)
    except (InfeasibleGeometryError, InfeasibleCapError) as exc:
        return _fail(man, EXIT_INFEASIBLE, exc)
    except UnsupportedGammaError as exc:
        return _fail(man, EXIT_PHYSICS, exc)
    out.mkdir(parents=True, exist_ok=True)
    man.outputs = write_result(result, out)
    resolved = out / "config_resolved.toml"
    resolved.write_text(dump_config(config))
    man.outputs.append(resolved)
    b = result.breakdown
    man.summary = {"converged": result.converged, "iterations": result.iterations, "EJ": b.EJ,
                   "change": result.change,
                   "multipliers": " ".join(_f(v) for v in result.multipliers),
                   "el_residuals": " ".join(_f(v) for v in result.el_residuals)}
    code = EXIT_OK if result.converged else EXIT_NONCONVERGED
    man.write(code)
    print(f"converged={str(result.converged).lower()} iterations={result.iterations} EJ={_f(b.EJ)}")
    return code


def _fail(man: Manifest, code: int, exc: Exception) -> int:
    man.error = f"{type(exc).__name__}: {exc}"
    man.write(code)
    print(f"error: {exc}", file=sys.stderr)
    return code


# ---------------------------------------------------------------- verify


def _check(name, measured, expected, passed):
    return {"name": name, "measured": measured, "expected": expected, "passed": bool(passed)}


def _fast_checks(rng: np.random.Generator):
    from .diagnostics import g_functions, kepler_argmin
    from .field import (
        GridDensity, Patch, PatchSystem, direct_sum_potential, energies, inertia_expansion,
        interpolation_check, potential_bound, potential_values, self_interaction,
    )
    from .lane_emden import solve_lane_emden, solve_unit

    eos = PolytropicEos(1.0, 2.0)
    s = np.array([1e-6, 1.0, 10.0])
    rt = float(np.max(np.abs(eos.a_prime_inv(eos.a_prime(s)) - s) / s))
    yield _check("eos round trip", rt, "<= 1e-12", rt <= 1e-12)

    le = solve_lane_emden(1.0)
    xi = np.linspace(1e-3, np.pi - 1e-6, 200)
    th = float(np.max(np.abs(le.theta(xi) - np.sin(xi) / xi)))
    yield _check("lane-emden n=1 profile", th, "<= 1e-8", th <= 1e-8)
    radius = solve_unit(eos).radius
    rel = abs(radius / np.sqrt(np.pi / 2.0) - 1.0)
    yield _check("lane-emden n=1 radius", rel, "<= 1e-4", rel <= 1e-4)

    # the union is laid out on one shared grid and its inertia summed directly
    worst = 0.0
    for _ in range(20):
        h = 0.3
        whole = np.zeros((30, 8, 8))
        whole[:5, :5, :5] = rng.random((5, 5, 5))
        shift = int(rng.integers(8, 24))
        whole[shift:shift + 4, :6, :5] = rng.random((4, 6, 5))
        origin = rng.normal(size=3)
        union = GridDensity(whole, h, origin)
        a = GridDensity(whole[:5, :5, :5], h, origin)
        b = GridDensity(whole[shift:shift + 4, :6, :5], h, origin + np.array([shift * h, 0.0, 0.0]))
        x, y, _ = union.coords()
        xbar = np.array([np.sum(whole * x), np.sum(whole * y)]) * h**3 / union.mass
        direct = float(np.sum(whole * ((x - xbar[0]) ** 2 + (y - xbar[1]) ** 2)) * h**3)
        worst = max(worst, abs(inertia_expansion(a, b) / direct - 1.0))
    yield _check("inertia expansion identity", worst, "<= 1e-10", worst <= 1e-10)

    worst = -np.inf
    for _ in range(20):
        vals = rng.random((10, 10, 10)) ** 3
        v = potential_values(vals, 0.2)
        worst = max(worst, float(v.max() / potential_bound(vals, 0.2)))
    yield _check("potential sup-norm bound", worst, "ratio <= 1", worst <= 1.0)

    _, g0 = g_functions(1.0, 0.0, 1.0, 1.0)
    yield _check("g0(1) = 0", g0, "0", g0 == 0.0)
    arg = kepler_argmin(0.25, 1.0)
    yield _check("kepler argmin", arg, "16", arg == 16.0)

    vals = rng.random((6, 6, 6))
    ok = interpolation_check(GridDensity(vals, 0.5), 1.0, 4.0 / 3.0, np.inf)
    yield _check("interpolation inequality", ok, "True", ok)

    vals = rng.random((8, 8, 8))
    grid = GridDensity(vals, 0.25)
    err = float(np.max(np.abs(potential_values(vals, 0.25) - direct_sum_potential(grid)))
                / np.max(direct_sum_potential(grid)))
    yield _check("convolution vs direct sum", err, "<= 1e-10", err <= 1e-10)

    # energy assembly against independently computed pieces
    a = GridDensity(rng.random((6, 6, 6)), 0.2, np.array([-3.0, 0.0, -0.5]))
    b = GridDensity(rng.random((6, 6, 6)), 0.2, np.array([3.0, 0.0, -0.5]))
    system = PatchSystem([Patch(a, "planet", a.mass), Patch(b, "star", b.mass)])
    J = 0.7
    br = energies(system, J, eos)
    inertia = inertia_expansion(a, b)
    u = float((eos.a_of(a.values).sum() + eos.a_of(b.values).sum()) * 0.2**3)
    g = self_interaction(a)[0] + self_interaction(b)[0] + 2.0 * br.Ginter
    expect = u - 0.5 * g + J * J / (2.0 * inertia)
    err = abs(br.EJ - expect) / abs(expect)
    yield _check("energy assembly", br.EJ, _f(expect), err <= 1e-12)


def _full_checks():
    from .diagnostics import separation_ratio, symmetry_check
    from .lane_emden import solve_unit
    from .minimizer import SolverConfig, el_residual, ep_residual, minimize

    eos = PolytropicEos(1.0, 2.0)
    unit = solve_unit(eos)
    single = minimize(SolverConfig(J=0.0))
    rho = single.system.patches[0].rho
    x, y, z = rho.coords()
    r = np.sqrt(x * x + y * y + z * z)
    k = np.sqrt(2.0 * np.pi)
    with np.errstate(invalid="ignore", divide="ignore"):
        exact = np.where(r < unit.radius, np.where(r > 0, np.sin(k * r) / (k * r), 1.0), 0.0)
    exact *= 1.0 / (exact.sum() * rho.h**3)
    l1 = float(np.abs(rho.values - exact).sum() * rho.h**3)
    yield _check("J=0 density vs analytic", l1, "<= 0.02", single.converged and l1 <= 0.02)

    run = minimize(SolverConfig(J=0.5, m=0.2))
    el = el_residual(run)
    bound = [10.0 * run.config.tol_fixedpoint * abs(lam) for lam in run.multipliers]
    yield _check("rotating EL residual", max(e / b for e, b in zip(el, bound)), "ratio <= 1",
                 run.converged and all(e <= b for e, b in zip(el, bound)))
    ep = ep_residual(run)
    yield _check("rotating EP residual", ep, "<= 0.1", ep <= 0.1)
    ratio = separation_ratio(run)
    yield _check("kepler separation window", ratio, "(0.9, 1.1)", 0.9 < ratio < 1.1)
    sym = symmetry_check(run)["mirror_deviation"]
    yield _check("z-mirror symmetry", sym, "<= 1e-6", sym <= 1e-6)
    yield _check("descent from seed", run.breakdown.EJ, f"< {_f(run.seed_energy)}",
                 run.breakdown.EJ < run.seed_energy)


def _inject(fault: str | None, stack: ExitStack) -> None:
    if fault == "tj-sign":
        stack.enter_context(mock.patch("starplanet.field.energy.rotational_energy",
                                       lambda J, inertia: -J * J / (2.0 * inertia)))


def cmd_verify(args) -> int:
    started = time.perf_counter()
    rng = np.random.default_rng(20240601)
    results = []
    with ExitStack() as stack:
        _inject(args.inject_fault, stack)
        suites = [_fast_checks(rng)]
        if args.suite == "full":
            suites.append(_full_checks())
        for suite in suites:
            for res in suite:
                results.append(res)
    width = max(len(r["name"]) for r in results)
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        measured = _f(r["measured"]) if isinstance(r["measured"], (float, np.floating)) else r["measured"]
        print(f"{status}  {r['name']:<{width}}  measured={measured}  expected={r['expected']}")
    failed = [r for r in results if not r["passed"]]
    elapsed = time.perf_counter() - started
    if elapsed > VERIFY_BUDGET_SECONDS:
        print(f"warning: verification took {elapsed:.0f} s, over the {VERIFY_BUDGET_SECONDS:.0f} s budget",
              file=sys.stderr)
    if failed:
        for r in failed:
            print(f"failed: {r['name']} (measured {r['measured']}, expected {r['expected']})", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------- sweep


def cmd_sweep(args) -> int:
    from .diagnostics import run_sweep, sweep_from_mapping
    from .diagnostics.sweep import solver_defaults
    from .minimizer import ConfigError
    from .minimizer.config import read_config_file

    out = Path(args.out)
    man = Manifest("sweep", out)
    if args.jobs < 1:
        return _fail(man, EXIT_USAGE, ValueError("--jobs must be at least 1"))
    try:
        points, base = sweep_from_mapping(read_config_file(args.config))
    except (ConfigError, ValueError) as exc:
        return _fail(man, EXIT_USAGE, exc)
    man.config = {**solver_defaults(base), "points": len(points), "jobs": args.jobs}
    report = run_sweep(points, base, args.jobs)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "sweep.csv", out / "sweep.json", out / "fits.csv"]
    report.write_csv(paths[0])
    report.write_json(paths[1])
    report.write_fits(paths[2])
    man.outputs = paths
    frac = report.converged_fraction
    man.summary = {"points": len(points), "converged_fraction": frac, "fits": len(report.fits)}
    code = EXIT_OK if frac >= 0.9 else EXIT_NONCONVERGED
    man.write(code)
    print(f"points={len(points)} converged_fraction={_f(frac)} fits={len(report.fits)}")
    return code


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="starplanet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lane-emden", help="radial profiles and a summary table")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--kpress", type=float, default=1.0)
    p.add_argument("--mass", type=float, action="append")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lane_emden)

    p = sub.add_parser("minimize", help="one constrained minimization")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("verify", help="property checks with a pass/fail table")
    p.add_argument("--suite", choices=("fast", "full"), default="fast")
    p.add_argument("--inject-fault", choices=("tj-sign",), default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="minimize over a (J, m, gamma) grid and fit rate laws")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
