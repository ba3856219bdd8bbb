"""Support geometry, scaling densities and mirror symmetry of grid densities."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ..eos import PolytropicEos
from ..field import GridDensity, moments

SUPPORT_FLOOR = 1e-9
_SIX_CONNECTED = ndimage.generate_binary_structure(3, 1)


@dataclass
class SupportStats:
    radius: float
    component_count: int
    max_gap: float
    linf: float


def occupied(rho: GridDensity, floor: float | None = None) -> np.ndarray:
    linf = float(rho.values.max())
    if not linf > 0:
        raise ValueError("empty patch has no support")
    floor = SUPPORT_FLOOR * linf if floor is None else floor
    return rho.values > floor


def _cell_points(rho: GridDensity, mask: np.ndarray) -> np.ndarray:
    idx = np.argwhere(mask)
    return rho.origin + rho.h * idx


def label_components(rho: GridDensity, floor: float | None = None) -> tuple[np.ndarray, int]:
    """6-connected components of the occupied cells."""
    labels, count = ndimage.label(occupied(rho, floor), structure=_SIX_CONNECTED)
    return labels, int(count)


def support_stats(rho: GridDensity, floor: float | None = None) -> SupportStats:
    """Radius about the center of mass, component count, largest inter-component gap, sup norm.

    The gap between two components is the smallest distance between their
    cell centers minus one spacing (the continuum gap up to sampling).
    """
    occ = occupied(rho, floor)
    _, xbar, _ = moments(rho)
    pts = _cell_points(rho, occ)
    radius = float(np.sqrt(np.max(np.sum((pts - xbar) ** 2, axis=1))))
    labels, count = label_components(rho, floor)
    max_gap = 0.0
    if count > 1:
        # only surface cells can realize the minimum distance
        trees = []
        for c in range(1, count + 1):
            comp = labels == c
            surface = comp & ~ndimage.binary_erosion(comp, structure=_SIX_CONNECTED)
            trees.append(cKDTree(_cell_points(rho, surface)))
        for a, b in combinations(trees, 2):
            dist, _ = b.query(a.data, k=1)
            max_gap = max(max_gap, float(dist.min()) - rho.h)
    return SupportStats(radius, count, max_gap, float(rho.values.max()))


def boundary_margin(rho: GridDensity, ball_center, ball_radius: float, floor: float | None = None) -> float:
    """Distance from the outermost occupied cell (padded by h/2) to the ball's boundary."""
    pts = _cell_points(rho, occupied(rho, floor))
    reach = np.sqrt(np.max(np.sum((pts - np.asarray(ball_center)) ** 2, axis=1)))
    return float(ball_radius - reach - 0.5 * np.sqrt(3.0) * rho.h)


def scaling_density(rho_m: GridDensity, m: float, eos: PolytropicEos) -> GridDensity:
    """A rho_m(B x) recentered so its center of mass is the origin; unit mass."""
    if not m > 0:
        raise ValueError("mass must be positive")
    A, B = eos.scaling_coeffs(m)
    _, xbar, _ = moments(rho_m)
    return GridDensity(rho_m.values * A, rho_m.h / B, (rho_m.origin - xbar) / B)


def l1_to_profile(rho: GridDensity, profile) -> float:
    """L1 distance between a grid density centered at the origin and a radial profile."""
    x, y, z = rho.coords()
    r = np.sqrt(x * x + y * y + z * z)
    ref = profile.exact_density(r.ravel()).reshape(r.shape)
    return float(np.abs(rho.values - ref).sum() * rho.h**3)


def symmetry_check(obj) -> dict:
    """Mirror deviation across z = 0 and the worst increase of rho away from the plane along z columns.

    Works on a GridDensity, a PatchSystem or anything with a ``system``;
    the grids must be laid out symmetrically about z = 0.
    """
    system = getattr(obj, "system", obj)
    grids = [system] if isinstance(system, GridDensity) else [p.rho for p in system.patches]
    diff = total = 0.0
    violation = 0.0
    peak = max(float(g.values.max()) for g in grids)
    for g in grids:
        nz = g.dims[2]
        top = g.origin[2] + g.h * (nz - 1)
        if abs(g.origin[2] + top) > 1e-9 * g.h:
            raise ValueError("grid is not symmetric about z = 0")
        v = g.values
        diff += float(np.abs(v - v[:, :, ::-1]).sum())
        total += float(v.sum())
        half = nz // 2
        upper = v[:, :, half:]
        lower = v[:, :, : nz - half][:, :, ::-1]
        for col in (upper, lower):
            if col.shape[2] > 1:
                violation = max(violation, float(np.max(np.diff(col, axis=2))))
    return {
        "mirror_deviation": diff / total if total > 0 else 0.0,
        "monotonicity_violation": violation / peak if peak > 0 else 0.0,
    }
