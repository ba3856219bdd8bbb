"""Result serialization: a JSON document plus one GPD1 snapshot per patch."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..field import write_snapshot
from .scf import MinimizerResult


def _plain(obj):
    """Recursively convert numpy scalars and arrays to JSON-ready Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def result_to_dict(result: MinimizerResult) -> dict:
    patches = []
    for p, lam, err, el in zip(result.system.patches, result.multipliers, result.mass_errors,
                               result.el_residuals):
        patches.append({
            "label": p.label,
            "target_mass": p.target_mass,
            "mass": p.rho.mass,
            "multiplier": lam,
            "mass_error": err,
            "el_residual": el,
            "dims": list(p.rho.dims),
            "h": p.rho.h,
            "origin": p.rho.origin,
            "ball_center": p.ball_center,
            "ball_radius": p.ball_radius,
            "max_density": float(p.rho.values.max()),
        })
    out = {
        "converged": result.converged,
        "iterations": result.iterations,
        "config": result.config.to_dict(),
        "multipliers": result.multipliers,
        "breakdown": result.breakdown.as_dict(),
        "residuals": {
            "mass_errors": result.mass_errors,
            "change": result.change,
            "el_residuals": result.el_residuals,
        },
        "seed_energy": result.seed_energy,
        "patches": patches,
        "history": result.history,
    }
    if result.domains is not None:
        d = result.domains
        out["domains"] = {"eta": d.eta, "ball_radius": d.ball_radius,
                          "center_planet": d.center_planet, "center_star": d.center_star}
    return _plain(out)


def dumps(data, indent: int = 1, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits.

    The stdlib encoder always uses the shortest round-trip repr, so floats are
    formatted here and everything else is delegated to ``json.dumps``.
    """
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(data, bool) or data is None or isinstance(data, (str, int)):
        return json.dumps(data)
    if isinstance(data, float):
        if not math.isfinite(data):
            return json.dumps(repr(data))
        text = format(data, ".17g")
        return text if any(c in text for c in ".e") else text + ".0"
    if isinstance(data, dict):
        if not data:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in data.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(data, (list, tuple)):
        if not data:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in data):
            return "[" + ", ".join(dumps(v) for v in data) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in data]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(data).__name__}")


def write_result(result: MinimizerResult, out_dir: str | Path, stem: str = "result") -> list[Path]:
    """Write ``<stem>.json`` and ``<stem>_<label>.gpd``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    data = result_to_dict(result)
    snaps = {}
    for p in result.system.patches:
        path = out / f"{stem}_{p.label}.gpd"
        write_snapshot(path, p.rho)
        snaps[p.label] = path.name
        paths.append(path)
    data["snapshots"] = snaps
    json_path = out / f"{stem}.json"
    json_path.write_text(dumps(data))
    return [json_path] + paths
