"""Self-consistent-field minimization of E_J over two balls with per-body mass constraints.

Each step inverts the Euler-Lagrange relation A'(rho) = [Phi + lambda]_+ on
every patch, with lambda fixed by the mass constraint, and mixes the result
into the current iterate.

The orbital separation is the one slow degree of freedom of that map (its
stiffness relative to self-gravity is of order (R/eta)**3), so it is handled
explicitly. The linear part of the external potential across each body (the
net force on it) is removed before the density update, and after the update
the separation is set to the exact minimizer of E_J over rigid relative
translations along the line of centers. At that minimizer the net forces
vanish, so fixed points of this scheme solve the unmodified Euler-Lagrange
equations.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ..eos import PolytropicEos
from ..field import (
    CrossField,
    EnergyBreakdown,
    GridDensity,
    GridField,
    Patch,
    PatchSystem,
    cross_interaction,
    energies,
    interpolation_check,
    make_grid,
    moments,
    potential_bound,
    potential_values,
)
from ..lane_emden import RadialProfile, rescale, solve_unit, to_grid
from .config import SolverConfig
from .domains import DomainPair, make_domains

log = logging.getLogger(__name__)


class InfeasibleCapError(RuntimeError):
    """The density cap cannot hold the target mass inside the ball."""


class InfeasibleGeometryError(ValueError):
    """A body does not fit in its admissible ball."""


# ---------------------------------------------------------------- seeding


def _unit_profile(eos: PolytropicEos) -> RadialProfile:
    return solve_unit(eos)


def _patch_for(profile: RadialProfile, center, ball_radius: float, config: SolverConfig,
               label: str, extent: float | None = None) -> Patch:
    extent = profile.radius if extent is None else extent
    half_cells = int(np.ceil(config.margin * config.cells_per_radius))
    h = extent / config.cells_per_radius
    _, origin = make_grid(center, half_cells * h, 2 * half_cells)
    n = 2 * half_cells
    rho = GridDensity(np.zeros((n, n, n)), h, origin)
    return Patch(rho, label, profile.mass, np.asarray(center, float), ball_radius)


def _uniform_ball(patch: Patch, radius: float, density: float) -> np.ndarray:
    x, y, z = patch.rho.coords()
    c = patch.ball_center
    inside = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2 <= radius**2
    return np.where(inside, density, 0.0)


def seed_density(domains: DomainPair | None, config: SolverConfig,
                 profile_unit: RadialProfile | None = None) -> PatchSystem:
    """Feasible initial system: Lane-Emden bodies at the ball centers, or uniform balls."""
    eos = config.eos
    unit = profile_unit or _unit_profile(eos)
    if domains is None:
        patch = _patch_for(unit, np.zeros(3), np.inf, config, "star")
        patch.rho = to_grid(unit, np.zeros(3), patch.rho.h, patch.rho.dims)
        return PatchSystem([patch], config.coupling)

    m = config.m
    bodies = [("planet", m, domains.center_planet), ("star", 1.0 - m, domains.center_star)]
    radii = {label: rescale(unit, mass).radius for label, mass, _ in bodies}
    too_big = max(radii.values())
    if too_big > domains.ball_radius:
        # eta/4 >= R needs J >= 2 mu sqrt(R)
        j_min = 2.0 * domains.mu * np.sqrt(too_big)
        raise InfeasibleGeometryError(
            f"body radius {too_big:.6g} exceeds ball radius {domains.ball_radius:.6g}; "
            f"need J >= {j_min:.6g} at m = {m}")
    patches = []
    seed_radius = domains.eta / 8.0
    for label, mass, center in bodies:
        prof = rescale(unit, mass)
        if config.seed == "uniform":
            extent = max(prof.radius, seed_radius)
            patch = _patch_for(prof, center, domains.ball_radius, config, label, extent)
            density = 384.0 * mass / (np.pi * domains.eta**3)
            values = _uniform_ball(patch, seed_radius, density)
        else:
            patch = _patch_for(prof, center, domains.ball_radius, config, label)
            values = to_grid(prof, center, patch.rho.h, patch.rho.dims).values
            if config.cap is not None and values.max() > config.cap:
                values = _uniform_ball(patch, seed_radius, 384.0 * mass / (np.pi * domains.eta**3))
        values = np.where(patch.ball_mask(), values, 0.0)
        values *= mass / (values.sum() * patch.rho.h**3)
        patch.rho = patch.rho.with_values(values)
        patches.append(patch)
    return PatchSystem(patches, config.coupling)


# ---------------------------------------------------------------- potentials


@dataclass
class FieldState:
    """Everything one SCF step needs about the current iterate."""

    self_potential: list[np.ndarray]
    cross: list[CrossField]
    ginter: float
    inertia: float
    xbar: np.ndarray
    omega2: float
    phi: list[np.ndarray]
    net_gradient: list[np.ndarray]


def evaluate_fields(sys: PatchSystem, J: float) -> FieldState:
    stats = [moments(p.rho) for p in sys.patches]
    total = sum(s[0] for s in stats)
    if not total > 0:
        raise ValueError("effective potential of a zero-mass system")
    xbar = sum(s[0] * s[1] for s in stats) / total
    inertia = sum(q[0, 0] + q[1, 1] + mass * ((c[0] - xbar[0]) ** 2 + (c[1] - xbar[1]) ** 2)
                  for mass, c, q in stats)
    omega2 = (J / inertia) ** 2 if J > 0 else 0.0
    vself = [potential_values(p.rho.values, p.rho.h) for p in sys.patches]
    if len(sys.patches) > 1:
        ginter, cross = cross_interaction(sys)
    else:
        ginter, cross = 0.0, [CrossField(stats[0][1], 0.0, np.zeros(3), np.zeros((3, 3)))]
    phi, net = [], []
    for p, v, cf, (_, c, _) in zip(sys.patches, vself, cross, stats):
        x, y, z = p.rho.coords()
        rot = 0.5 * omega2 * ((x - xbar[0]) ** 2 + (y - xbar[1]) ** 2)
        phi.append(v + cf.evaluate(p.rho) + rot)
        g = cf.b + omega2 * np.array([c[0] - xbar[0], c[1] - xbar[1], 0.0])
        net.append(g)
    return FieldState(vself, cross, float(ginter), float(inertia), xbar, omega2, phi, net)


def effective_potential(sys: PatchSystem, J: float) -> list[GridField]:
    """Phi = V + J^2/(2 I^2) r^2(x - xbar) on every patch, V including the cross-patch terms."""
    state = evaluate_fields(sys, J)
    return [GridField.like(p.rho, phi) for p, phi in zip(sys.patches, state.phi)]


def _pinned_phi(patch: Patch, phi: np.ndarray, net: np.ndarray) -> np.ndarray:
    """Phi minus its net-force linear part about the body's center of mass."""
    _, c, _ = moments(patch.rho)
    x, y, z = patch.rho.coords()
    return phi - (net[0] * (x - c[0]) + net[1] * (y - c[1]) + net[2] * (z - c[2]))


# ---------------------------------------------------------------- multiplier


def density_from_phi(phi_plus_lambda: np.ndarray, eos: PolytropicEos, cap: float | None) -> np.ndarray:
    rho = eos.a_prime_inv(np.maximum(phi_plus_lambda, 0.0))
    return rho if cap is None else np.minimum(rho, cap)


def solve_multiplier(phi: GridField | np.ndarray, target_mass: float, eos: PolytropicEos,
                     cap: float | None, h: float | None = None, mask: np.ndarray | None = None,
                     tol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Multiplier lambda with h^3 sum min(cap, (A')^-1([Phi + lambda]_+)) = target_mass.

    Cells outside ``mask`` stay empty. The mapped mass is nondecreasing in
    lambda, so a bracketed root search always converges.
    """
    if not target_mass > 0:
        raise ValueError("target mass must be positive")
    if isinstance(phi, GridField):
        values, h = phi.values, phi.h
    else:
        values = np.asarray(phi, float)
    if h is None:
        raise ValueError("cell size needed for a bare array")
    mask = np.ones(values.shape, bool) if mask is None else mask
    inside = values[mask]
    if not np.all(np.isfinite(inside)):
        raise ValueError("effective potential must be finite")
    vol = h**3

    def mass(lam):
        return density_from_phi(inside + lam, eos, cap).sum() * vol

    lo = -inside.max() - 1.0
    if cap is not None:
        hi = float(eos.a_prime(cap)) - inside.min() + 1.0
        if mass(hi) < target_mass * (1.0 - tol):
            raise InfeasibleCapError(
                f"cap {cap:.6g} holds at most {mass(hi):.6g} < {target_mass:.6g} in the ball")
    else:
        step = 1.0
        hi = lo + step
        for _ in range(200):
            if mass(hi) >= target_mass:
                break
            step *= 2.0
            hi = lo + step
    lam = brentq(lambda t: mass(t) - target_mass, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=200)
    out = np.zeros_like(values)
    out[mask] = density_from_phi(inside + lam, eos, cap)
    return float(lam), out


# ---------------------------------------------------------------- separation


def _occupied_shift_range(patch: Patch, axis: np.ndarray) -> tuple[float, float]:
    """Rigid shifts s (along ``axis``) that keep every occupied cell inside the ball."""
    if patch.ball_center is None or not np.isfinite(patch.ball_radius):
        return -np.inf, np.inf
    x, y, z = patch.rho.coords()
    occ = patch.rho.values > 0
    pts = np.stack(np.broadcast_arrays(x, y, z), axis=-1)[occ] - patch.ball_center
    along = pts @ axis
    perp2 = np.sum(pts * pts, axis=1) - along**2
    room = patch.ball_radius**2 - perp2
    if np.any(room < 0):
        return 0.0, 0.0
    root = np.sqrt(room)
    return float(np.max(-root - along)), float(np.min(root - along))


def relax_separation(sys: PatchSystem, J: float) -> float:
    """Move the two bodies rigidly along their line of centers to minimize E_J.

    The barycenter is kept fixed; only the cross interaction and T_J depend on
    the separation, both through the moments. Returns the separation change.
    """
    if len(sys.patches) != 2 or J <= 0:
        return 0.0
    a, b = sys.patches
    ma, ca, qa = moments(a.rho)
    mb, cb, qb = moments(b.rho)
    total = ma + mb
    d0 = ca - cb
    axis = np.array([1.0, 0.0, 0.0]) if abs(d0[0]) > 0 else d0 / np.linalg.norm(d0)
    i_int = qa[0, 0] + qa[1, 1] + qb[0, 0] + qb[1, 1]
    mu_r = ma * mb / total

    from ..field.energy import _pair

    def slope(delta):
        d = d0 + delta * axis
        pair = _pair(ma, d, qa, mb, np.zeros(3), qb, sys.coupling)
        inertia = i_int + mu_r * (d[0] ** 2 + d[1] ** 2)
        dtj = -J * J / (2.0 * inertia**2) * mu_r * 2.0 * (d[0] * axis[0] + d[1] * axis[1])
        return -pair.grad @ axis + dtj

    def energy(delta):
        d = d0 + delta * axis
        pair = _pair(ma, d, qa, mb, np.zeros(3), qb, sys.coupling)
        return -pair.energy + J * J / (2.0 * (i_int + mu_r * (d[0] ** 2 + d[1] ** 2)))

    # body a moves by +mb/total delta, body b by -ma/total delta
    sa = _occupied_shift_range(a, axis)
    sb = _occupied_shift_range(b, axis)
    lo = max(sa[0] * total / mb, -sb[1] * total / ma)
    hi = min(sa[1] * total / mb, -sb[0] * total / ma)
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    if hi - lo <= 0:
        return 0.0
    lo_s, hi_s = slope(lo), slope(hi)
    if lo_s < 0 < hi_s:
        delta = brentq(slope, lo, hi, xtol=1e-15 * np.linalg.norm(d0), rtol=1e-15, maxiter=200)
    else:
        delta = lo if energy(lo) < energy(hi) else hi
        log.warning("separation minimum sits on the ball boundary (delta = %.6g)", delta)
    a.rho = a.rho.translated(axis * delta * mb / total)
    b.rho = b.rho.translated(-axis * delta * ma / total)
    return float(delta)


# ---------------------------------------------------------------- iteration


@dataclass
class StepReport:
    multipliers: list[float]
    change: float
    changes: list[float]
    el_residuals: list[float]
    mass_errors: list[float]
    energy: float
    separation_shift: float = 0.0


def _el_residual_values(rho: np.ndarray, phi: np.ndarray, lam: float, eos: PolytropicEos,
                        cap: float | None, mask: np.ndarray) -> float:
    level = np.maximum(phi + lam, 0.0)
    if cap is not None:
        level = np.minimum(level, eos.a_prime(cap))
        occupied = rho > cap * 1e-6
    else:
        occupied = rho > 0
    res = 0.0
    sel = occupied & mask
    if np.any(sel):
        res = float(np.max(np.abs(eos.a_prime(rho[sel]) - level[sel])))
    empty = (rho == 0) & mask
    if np.any(empty):
        res = max(res, float(np.max(level[empty])))
    return res


def _energy_from_state(sys: PatchSystem, state: FieldState, J: float, eos: PolytropicEos) -> float:
    U = sum(float(eos.a_of(p.rho.values).sum() * p.rho.h**3) for p in sys.patches)
    G = sum(float(np.sum(p.rho.values * v) * p.rho.h**3) for p, v in zip(sys.patches, state.self_potential))
    G += 2.0 * state.ginter
    return U - 0.5 * G + (J * J / (2.0 * state.inertia) if J > 0 else 0.0)


def _check_potential_bound(sys: PatchSystem, state: FieldState) -> None:
    vals = np.concatenate([p.rho.values.ravel() * p.rho.h**3 for p in sys.patches])
    l1 = vals.sum()
    linf = max(p.rho.values.max() for p in sys.patches)
    bound = 1.5 * (4.0 * np.pi) ** (1.0 / 3.0) * l1 ** (2.0 / 3.0) * linf ** (1.0 / 3.0)
    vmax = max(float((v + cf.evaluate(p.rho)).max())
               for p, v, cf in zip(sys.patches, state.self_potential, state.cross))
    if vmax > bound:
        raise AssertionError(f"potential sup {vmax:.6g} exceeds the L-infinity bound {bound:.6g}")


def scf_step(sys: PatchSystem, J: float, eos: PolytropicEos, config: SolverConfig,
             mixing: float | None = None, state: FieldState | None = None) -> tuple[PatchSystem, StepReport]:
    """One damped fixed-point update of every patch; returns the new system and step metrics."""
    theta = config.mixing if mixing is None else mixing
    state = state or evaluate_fields(sys, J)
    _check_potential_bound(sys, state)
    new = sys.copy()
    lams, changes, residuals, mass_errors = [], [], [], []
    for p, q, phi, net in zip(sys.patches, new.patches, state.phi, state.net_gradient):
        mask = p.ball_mask()
        pinned = _pinned_phi(p, phi, net) if len(sys.patches) > 1 else phi
        lam, target = solve_multiplier(pinned, p.target_mass, eos, config.cap, p.rho.h, mask,
                                       config.tol_multiplier)
        residuals.append(_el_residual_values(p.rho.values, phi, lam, eos, config.cap, mask))
        mass_errors.append(abs(p.rho.mass - p.target_mass) / p.target_mass)
        target = target * (p.target_mass / (target.sum() * p.rho.h**3))
        mixed = target
        if theta < 1:
            mixed = (1.0 - theta) * p.rho.values + theta * target
            mixed = mixed * (p.target_mass / (mixed.sum() * p.rho.h**3))
        if config.cap is not None:
            mixed = np.minimum(mixed, config.cap)
        changes.append(float(np.abs(mixed - p.rho.values).sum() / p.rho.values.sum()))
        q.rho = p.rho.with_values(mixed)
        lams.append(lam)
    shift = relax_separation(new, J) if config.relax_separation else 0.0
    report = StepReport(lams, max(changes), changes, residuals, mass_errors,
                        _energy_from_state(sys, state, J, eos), shift)
    return new, report


# ---------------------------------------------------------------- driver


@dataclass
class MinimizerResult:
    system: PatchSystem
    multipliers: list[float]
    breakdown: EnergyBreakdown
    iterations: int
    converged: bool
    config: SolverConfig
    domains: DomainPair | None
    mass_errors: list[float]
    change: float
    el_residuals: list[float]
    seed_energy: float
    history: dict = field(default_factory=dict)

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.system.patches]

    def patch(self, label: str) -> Patch:
        return self.system.by_label(label)

    def multiplier(self, label: str) -> float:
        return self.multipliers[self.labels.index(label)]


def minimize(config: SolverConfig, seed: PatchSystem | None = None,
             profile_unit: RadialProfile | None = None) -> MinimizerResult:
    """Iterate scf_step to a fixed point of the Euler-Lagrange map, or until max_iter."""
    eos = config.eos
    domains = None if config.single_body else make_domains(config.J, config.m)
    sys = seed.copy() if seed is not None else seed_density(domains, config, profile_unit)
    J = config.J
    if config.relax_separation:
        relax_separation(sys, J)
    seed_energy = energies(sys, J, eos).EJ
    theta = config.mixing
    rising = 0
    history = {k: [] for k in ("change", "el_residual", "mass_error", "energy", "mixing", "multipliers")}
    converged = False
    report = None
    it = 0
    for it in range(1, config.max_iter + 1):
        state = evaluate_fields(sys, J)
        new, step = scf_step(sys, J, eos, config, theta, state)
        history["change"].append(step.change)
        history["el_residual"].append(step.el_residuals)
        history["mass_error"].append(max(step.mass_errors))
        history["energy"].append(step.energy)
        history["mixing"].append(theta)
        history["multipliers"].append(step.multipliers)
        report = step
        ok = (max(step.mass_errors) <= config.tol_mass and step.change <= config.tol_fixedpoint
              and all(r <= 10.0 * config.tol_fixedpoint * abs(lam)
                      for r, lam in zip(step.el_residuals, step.multipliers)))
        if ok:
            converged = True
            break
        prev = history["change"][-2] if len(history["change"]) > 1 else np.inf
        rising = rising + 1 if step.change > prev else 0
        if rising >= 3:
            theta = max(theta / 2.0, 1.0 / 64.0)
            rising = 0
        sys = new
    for p in sys.patches:
        if not interpolation_check(p.rho, 1.0, 4.0 / 3.0, np.inf):
            raise AssertionError("interpolation inequality violated by a stored density")
    breakdown = energies(sys, J, eos)
    if not converged:
        log.warning("SCF stopped after %d iterations (change %.3g)", it, report.change)
    return MinimizerResult(
        system=sys, multipliers=list(report.multipliers), breakdown=breakdown, iterations=it,
        converged=converged, config=config, domains=domains, mass_errors=list(report.mass_errors),
        change=report.change, el_residuals=list(report.el_residuals), seed_energy=seed_energy,
        history=history,
    )
