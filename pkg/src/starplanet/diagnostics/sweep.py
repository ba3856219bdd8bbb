"""Parameter sweeps over (J, m, gamma): per-point diagnostics and rate-law fits."""
from __future__ import annotations

import csv
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..minimizer import SolverConfig, config_from_mapping, minimize
from ..minimizer.io import dumps
from .geometry import support_stats
from .kepler import separation_ratio
from .rates import exponent_fit, lever_ok

log = logging.getLogger(__name__)

COLUMNS = [
    "J", "m", "gamma", "converged", "iterations", "EJ",
    "E0_planet", "E0_star", "lambda_planet", "lambda_star",
    "radius_planet", "radius_star", "linf_planet", "linf_star", "d_over_eta",
    "components_planet", "components_star", "gap_planet", "gap_star", "error",
]
FIT_COLUMNS = ["quantity", "J", "gamma", "slope", "intercept", "residual", "expected", "count"]


@dataclass
class SweepReport:
    points: list[tuple[float, float, float]]
    records: list[dict]
    fits: list[dict] = field(default_factory=list)

    @property
    def converged_fraction(self) -> float:
        if not self.records:
            return 0.0
        return sum(bool(r["converged"]) for r in self.records) / len(self.records)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# columns: " + ", ".join(COLUMNS) + "; one row per (J, m, gamma) point\n")
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for r in self.records:
                w.writerow([_fmt(r.get(c)) for c in COLUMNS])

    def write_fits(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(FIT_COLUMNS)
            for f in self.fits:
                w.writerow([_fmt(f.get(c)) for c in FIT_COLUMNS])

    def write_json(self, path: str | Path) -> None:
        data = {"points": [list(p) for p in self.points], "records": self.records, "fits": self.fits}
        Path(path).write_text(dumps(_clean(data)))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def expand_points(J, m, gamma) -> list[tuple[float, float, float]]:
    """Sorted Cartesian product of the value lists, with duplicates removed (and reported)."""
    lists = [[float(v) for v in (x if isinstance(x, (list, tuple)) else [x])] for x in (J, m, gamma)]
    raw = list(itertools.product(*lists))
    unique = sorted(set(raw))
    if len(unique) < len(raw):
        log.warning("dropped %d duplicate sweep point(s)", len(raw) - len(unique))
    return unique


def run_point(point: tuple[float, float, float], base: dict) -> dict:
    """Solve one sweep point and measure it; failures become a row with an error message."""
    J, m, gamma = point
    rec = {c: None for c in COLUMNS}
    rec.update({"J": J, "m": m, "gamma": gamma, "converged": False})
    try:
        config = config_from_mapping({**base, "J": J, "m": m, "gamma": gamma})
        result = minimize(config)
    except Exception as exc:  # recorded per row; the sweep goes on
        rec["error"] = f"{type(exc).__name__}: {exc}"
        return rec
    rec["converged"] = bool(result.converged)
    rec["iterations"] = int(result.iterations)
    rec["EJ"] = result.breakdown.EJ
    for p, e0, lam in zip(result.system.patches, result.breakdown.component_energies, result.multipliers):
        s = support_stats(p.rho)
        rec[f"E0_{p.label}"] = e0
        rec[f"lambda_{p.label}"] = lam
        rec[f"radius_{p.label}"] = s.radius
        rec[f"linf_{p.label}"] = s.linf
        rec[f"components_{p.label}"] = s.component_count
        rec[f"gap_{p.label}"] = s.max_gap
    if result.domains is not None:
        rec["d_over_eta"] = separation_ratio(result)
    return rec


def fit_rates(records: list[dict]) -> list[dict]:
    """Log-log fits in m for each (J, gamma) group with a long enough lever arm."""
    fits = []
    groups = {}
    for r in records:
        if r["converged"] and r["m"] > 0:
            groups.setdefault((r["J"], r["gamma"]), []).append(r)
    for (J, gamma), rows in sorted(groups.items()):
        if not lever_ok([r["m"] for r in rows]):
            continue
        d = 3.0 * gamma - 4.0
        laws = [
            ("linf_planet", 2.0 / d, lambda r: r["linf_planet"]),
            ("radius_planet", (gamma - 2.0) / d, lambda r: r["radius_planet"]),
            ("neg_E0_planet", (5.0 * gamma - 6.0) / d, lambda r: -r["E0_planet"]),
        ]
        for name, expected, get in laws:
            samples = [(r["m"], get(r)) for r in rows]
            if any(v is None or not v > 0 for _, v in samples):
                continue
            fit = exponent_fit(samples)
            fits.append({"quantity": name, "J": J, "gamma": gamma, "slope": fit.slope,
                         "intercept": fit.intercept, "residual": fit.residual,
                         "expected": expected, "count": fit.count})
    return fits


def run_sweep(points, base: dict | None = None, jobs: int = 1) -> SweepReport:
    """Run every point (in a process pool when jobs > 1) and assemble rows in sorted point order."""
    base = dict(base or {})
    points = sorted(points)
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run_point, points, itertools.repeat(base)))
    else:
        records = [run_point(p, base) for p in points]
    return SweepReport(points, records, fit_rates(records))


def sweep_from_mapping(data: dict) -> tuple[list[tuple[float, float, float]], dict]:
    """Split a sweep config into the point list and the fixed solver keys."""
    data = dict(data)
    missing = [k for k in ("J", "m") if k not in data]
    if missing:
        raise ValueError(f"sweep config needs {missing}")
    J, m, gamma = data.pop("J"), data.pop("m"), data.pop("gamma", 2.0)
    points = expand_points(J, m, gamma)
    # validate the shared keys once up front
    probe = {**data, "J": points[0][0], "m": points[0][1], "gamma": points[0][2]}
    config_from_mapping(probe)
    for _, _, g in points:
        if not (math.isfinite(g)):
            raise ValueError("gamma must be finite")
    return points, data


def solver_defaults(base: dict) -> dict:
    """Materialized shared keys for the manifest."""
    cfg = SolverConfig(J=0.0)
    out = {k: v for k, v in cfg.to_dict().items() if k not in ("J", "m", "gamma")}
    out.update(base)
    return out
