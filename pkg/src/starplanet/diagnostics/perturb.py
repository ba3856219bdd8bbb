"""Energy changes under structured perturbations of a computed equilibrium.

Two probes live here: the rigid approach of two planet components toward each
other (center of mass fixed), and small zero-mass bumps that test local
minimality. Both evaluate E_J differences exactly on the grid rather than by
expansion.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..eos import PolytropicEos
from ..field import GridDensity, Patch, PatchSystem, energies, moments, potential_values
from ..field.energy import _pair
from ..lane_emden import RadialProfile, rescale, solve_unit, to_grid
from ..minimizer.domains import make_domains
from .geometry import label_components, support_stats


def _system_and_params(obj, J, eos):
    system = getattr(obj, "system", obj)
    config = getattr(obj, "config", None)
    if J is None:
        if config is None:
            raise ValueError("J is required when passing a bare PatchSystem")
        J = config.J
    if eos is None:
        if config is None:
            raise ValueError("eos is required when passing a bare PatchSystem")
        eos = config.eos
    return system, float(J), eos


def component_threshold(m: float, J: float, gamma: float, radius_bound: float) -> float:
    """d* = 32 (1 - m)^5 R^3 m^((12 gamma - 18)/(3 gamma - 4)) / J^4."""
    p = (12.0 * gamma - 18.0) / (3.0 * gamma - 4.0)
    return 32.0 * (1.0 - m) ** 5 * radius_bound**3 * m**p / J**4


@dataclass
class ShiftRecord:
    gap: float
    delta_E: float
    threshold: float
    h_step: float
    h1: float
    h2: float
    m1: float
    m2: float
    center_distance: float
    com_shift: float


def _split(rho: GridDensity, plane, floor):
    if plane is not None:
        point, normal = (np.asarray(v, float) for v in plane)
        x, y, z = rho.coords()
        side = (x - point[0]) * normal[0] + (y - point[1]) * normal[1] + (z - point[2]) * normal[2]
        first = np.broadcast_to(side < 0, rho.dims)
        return first, ~first
    labels, count = label_components(rho, floor)
    if count != 2:
        return None
    # dust below the floor goes with the nearest labeled component
    _, idx = ndimage.distance_transform_edt(labels == 0, return_indices=True)
    full = labels[tuple(idx)]
    return full == 1, full == 2


def _moment_sum(parts):
    """Combined (mass, center, second central moment) of (mass, center, moment) pieces."""
    total = sum(p[0] for p in parts)
    c = sum(p[0] * p[1] for p in parts) / total
    q = sum(p[2] + p[0] * np.outer(p[1] - c, p[1] - c) for p in parts)
    return total, c, q


def component_shift_test(obj, h_step: float, J: float | None = None, eos: PolytropicEos | None = None,
                         label: str = "planet", plane=None, radius_bound: float | None = None,
                         floor: float | None = None) -> ShiftRecord | None:
    """Move the two components of one body toward each other by h1 + h2 = h_step with h1 m1 = h2 m2.

    Components are the 6-connected pieces of the support, or the two sides
    of ``plane = (point, normal)``. Returns None (record skipped) unless there
    are exactly two. ``delta_E`` is E_J(before) - E_J(after), computed from the
    exact change of the component-component interaction on the shifted lattice
    plus the exact moment-based changes of the cross coupling and T_J.
    """
    system, J, eos = _system_and_params(obj, J, eos)
    patch = system.by_label(label)
    rho = patch.rho
    split = _split(rho, plane, floor)
    if split is None:
        return None
    u = np.where(split[0], rho.values, 0.0)
    v = np.where(split[1], rho.values, 0.0)
    gu, gv = rho.with_values(u), rho.with_values(v)
    if not (gu.mass > 0 and gv.mass > 0):
        return None
    m1, c1, q1 = moments(gu)
    m2, c2, q2 = moments(gv)
    axis = (c2 - c1) / np.linalg.norm(c2 - c1)
    h1 = h_step * m2 / (m1 + m2)
    h2 = h_step * m1 / (m1 + m2)
    s1, s2 = h1 * axis, -h2 * axis

    vol = rho.h**3
    g12 = float(np.sum(u * potential_values(v, rho.h)) * vol)
    g12_new = float(np.sum(u * potential_values(v, rho.h, tuple(s1 - s2))) * vol)

    before = _moment_sum([(m1, c1, q1), (m2, c2, q2)])
    after = _moment_sum([(m1, c1 + s1, q1), (m2, c2 + s2, q2)])
    others = [moments(p.rho) for p in system.patches if p is not patch]

    def cross_and_inertia(planet_moments):
        mp, cp, qp = planet_moments
        cross = sum(_pair(mp, cp, qp, mo, co, qo, system.coupling).energy for mo, co, qo in others)
        _, _, q_all = _moment_sum([planet_moments] + others)
        return cross, q_all[0, 0] + q_all[1, 1]

    cross0, i0 = cross_and_inertia(before)
    cross1, i1 = cross_and_inertia(after)
    tj0 = J * J / (2.0 * i0) if J > 0 else 0.0
    tj1 = J * J / (2.0 * i1) if J > 0 else 0.0
    delta = (-g12 - cross0 + tj0) - (-g12_new - cross1 + tj1)

    proj_u = (np.argwhere(u > 0) * rho.h + rho.origin) @ axis
    proj_v = (np.argwhere(v > 0) * rho.h + rho.origin) @ axis
    gap = float(proj_v.min() - proj_u.max() - rho.h)

    m = before[0]
    if radius_bound is None:
        _, B = eos.scaling_coeffs(m)
        radius_bound = support_stats(rho, floor).radius / B
    return ShiftRecord(
        gap=gap, delta_E=float(delta), threshold=component_threshold(m, J, eos.gamma, radius_bound),
        h_step=float(h_step), h1=float(h1), h2=float(h2), m1=float(m1), m2=float(m2),
        center_distance=float(np.linalg.norm(c2 - c1)),
        com_shift=float(np.linalg.norm(after[1] - before[1])),
    )


def two_blob_system(m: float, J: float, eos: PolytropicEos, gap: float,
                    unit_profile: RadialProfile | None = None, cells_per_radius: int = 10,
                    star_cells_per_radius: int = 16, coupling: str = "monopole") -> tuple[PatchSystem, dict]:
    """Planet made of two equal-mass radial blobs separated along x by ``gap``, plus a radial star.

    Each blob is the non-rotating minimizer of mass m/2; the star is that of
    mass 1 - m. Everything sits at the ball centers of make_domains(J, m).
    """
    unit = unit_profile or solve_unit(eos)
    dom = make_domains(J, m)
    blob = rescale(unit, 0.5 * m)
    rb = blob.radius
    h = rb / cells_per_radius
    center = dom.center_planet
    offset = rb + 0.5 * gap
    nx = 2 * int(np.ceil((offset + rb) / h + 2))
    nyz = 2 * int(np.ceil(rb / h + 2))
    dims = np.array([nx, nyz, nyz])
    origin = center - 0.5 * h * (dims - 1)
    grid = GridDensity(np.zeros(tuple(dims)), h, origin)
    x, y, z = grid.coords()
    values = np.zeros(grid.dims)
    for sign in (-1.0, 1.0):
        c = center + np.array([sign * offset, 0.0, 0.0])
        r = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
        piece = blob.density_at(r)
        values += piece * (blob.mass / (piece.sum() * h**3))
    planet = Patch(grid.with_values(values), "planet", m, center.copy(), dom.ball_radius)
    star_prof = rescale(unit, 1.0 - m)
    hs = star_prof.radius / star_cells_per_radius
    n = 3 * star_cells_per_radius
    star_rho = to_grid(star_prof, dom.center_star, hs, (n, n, n))
    star = Patch(star_rho, "star", 1.0 - m, dom.center_star.copy(), dom.ball_radius)
    info = {"nominal_gap": gap, "blob_radius": rb, "plane": (center, np.array([1.0, 0.0, 0.0])),
            "domains": dom}
    return PatchSystem([planet, star], coupling), info


# ---------------------------------------------------------------- local probe


class EnergyDelta:
    """E_J(rho + sigma) - E_J(rho) for a perturbation of one patch, with cached base terms."""

    def __init__(self, system: PatchSystem, J: float, eos: PolytropicEos):
        self.system, self.J, self.eos = system, J, eos
        self._v = {p.label: potential_values(p.rho.values, p.rho.h) for p in system.patches}
        self._moments = {p.label: moments(p.rho) for p in system.patches}
        self.base = self._orbital(self._moments)

    def _orbital(self, stats: dict) -> float:
        """Cross coupling and T_J part of E_J from per-patch moments."""
        items = list(stats.values())
        cross = 0.0
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                a, b = items[i], items[j]
                cross += _pair(a[0], a[1], a[2], b[0], b[1], b[2], self.system.coupling).energy
        if self.J > 0:
            _, _, q = _moment_sum(items)
            tj = self.J * self.J / (2.0 * (q[0, 0] + q[1, 1]))
        else:
            tj = 0.0
        return -cross + tj

    def __call__(self, label: str, sigma: np.ndarray) -> float:
        p = self.system.by_label(label)
        rho, h = p.rho.values, p.rho.h
        vol = h**3
        new = rho + sigma
        du = float(np.sum(self.eos.a_of(np.maximum(new, 0.0)) - self.eos.a_of(rho)) * vol)
        dg = float((2.0 * np.sum(sigma * self._v[label]) + np.sum(sigma * potential_values(sigma, h))) * vol)
        stats = dict(self._moments)
        stats[label] = moments(p.rho.with_values(np.maximum(new, 0.0)))
        return du - 0.5 * dg + self._orbital(stats) - self.base


@dataclass
class ProbeReport:
    worst: float
    deltas: list[float]
    pair_sums: list[float] = field(default_factory=list)
    rejections: int = 0
    energy: float = 0.0


def _bump(rho: GridDensity, center: np.ndarray, radius: float) -> np.ndarray:
    x, y, z = rho.coords()
    r = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)
    return np.where(r < radius, 0.5 * (1.0 + np.cos(np.pi * r / radius)), 0.0)


def draw_perturbation(rho: GridDensity, radius: float, rng: np.random.Generator,
                      amplitude: float = 0.05) -> np.ndarray:
    """Zero-mass smooth bump: truncated cosine times a random sign pattern with its weighted mean removed."""
    occ = np.argwhere(rho.values > 0)
    center = rho.origin + rho.h * occ[rng.integers(len(occ))]
    b = _bump(rho, center, radius)
    xi = rng.standard_normal(rho.dims)
    weight = b.sum()
    if not weight > 0:
        return np.zeros(rho.dims)
    sigma = b * (xi - np.sum(b * xi) / weight)
    idx = tuple(np.round((center - rho.origin) / rho.h).astype(int))
    scale = amplitude * rho.values[idx] / max(np.abs(sigma).max(), 1e-300)
    return sigma * scale


def _feasible(patch: Patch, sigma: np.ndarray, cap: float | None) -> bool:
    new = patch.rho.values + sigma
    if np.any(new < 0):
        return False
    if cap is not None and np.any(new > cap):
        return False
    touched = sigma != 0
    return bool(np.all(patch.ball_mask()[touched]))


def local_min_probe(result, trials: int = 200, radius_frac: float = 0.1, seed: int = 0,
                    amplitude: float = 0.05, antithetic: bool = True) -> ProbeReport:
    """Worst energy change over random feasible zero-mass bumps of radius radius_frac times the support radius."""
    system, J, eos = _system_and_params(result, None, None)
    cap = result.config.cap
    rng = np.random.default_rng(seed)
    delta = EnergyDelta(system, J, eos)
    radii = {p.label: radius_frac * support_stats(p.rho).radius for p in system.patches}
    deltas, pairs = [], []
    rejections = 0
    while len(deltas) < trials:
        patch = system.patches[int(rng.integers(len(system.patches)))]
        sigma = draw_perturbation(patch.rho, radii[patch.label], rng, amplitude)
        if not _feasible(patch, sigma, cap):
            rejections += 1
            if rejections > 100 * trials:
                raise RuntimeError("too many infeasible perturbation draws")
            continue
        d = delta(patch.label, sigma)
        deltas.append(d)
        if antithetic and _feasible(patch, -sigma, cap):
            pairs.append(d + delta(patch.label, -sigma))
    energy = energies(system, J, eos).EJ
    return ProbeReport(min(deltas) if deltas else 0.0, deltas, pairs, rejections, energy)
