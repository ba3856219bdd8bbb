"""Rate-law checks: log-log exponent fits, multiplier and energy bounds, inertia and velocity rates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..field import GridDensity, energies, moment_of_inertia, moments
from .geometry import occupied, scaling_density


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    residual: float
    count: int


def exponent_fit(samples) -> ExponentFit:
    """Least-squares line through (log m, log value); residual is the RMS misfit in log space."""
    data = np.asarray(list(samples), float)
    if data.ndim != 2 or data.shape[1] != 2 or len(data) < 3:
        raise ValueError("need at least three (m, value) samples")
    m, v = data[:, 0], data[:, 1]
    if np.any(m <= 0) or np.any(v <= 0):
        raise ValueError("masses and values must be positive for a log-log fit")
    x, y = np.log(m), np.log(v)
    design = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    return ExponentFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))), len(data))


def lever_ok(masses, factor: float = 4.0) -> bool:
    """At least three distinct masses spanning ``factor``."""
    ms = sorted(set(float(m) for m in masses))
    return len(ms) >= 3 and ms[-1] >= factor * ms[0]


def multiplier_bound_check(result, unit_profile, label: str = "planet",
                           eps_frac: float = 0.1) -> tuple[bool, float]:
    """Whether A(m)^(gamma-1) lambda_m <= kappa_1 + eps with eps = eps_frac |kappa_1|; also the margin.

    kappa_1 is the multiplier of the unit-mass radial minimizer.
    """
    eos = result.config.eos
    labels = [p.label for p in result.system.patches]
    if label not in labels:
        label = labels[0]
    patch = result.system.by_label(label)
    lam = result.multipliers[labels.index(label)]
    A, _ = eos.scaling_coeffs(patch.target_mass)
    kappa = unit_profile.lam
    scaled = A ** (eos.gamma - 1.0) * lam
    margin = kappa + eps_frac * abs(kappa) - scaled
    return bool(margin >= 0), float(margin)


def scaled_energy_gap(rho_m: GridDensity, m: float, eos, e0_reference: float) -> float:
    """E_0 of the planet's scaling density minus the unit non-rotating minimum energy.

    Pass the grid minimum at the same resolution (cells per body radius) as
    ``e0_reference`` so the discretization offset cancels.
    """
    return energies(scaling_density(rho_m, m, eos), 0.0, eos).EJ - e0_reference


def energy_rate_check(gaps: dict, gamma: float) -> dict:
    """Fit C at the largest m in gap <= C m^p, p = (4 gamma - 6)/(3 gamma - 4), and test the smaller m."""
    p = (4.0 * gamma - 6.0) / (3.0 * gamma - 4.0)
    ms = sorted(gaps)
    m_top = ms[-1]
    C = gaps[m_top] / m_top**p
    rows = {m: (gaps[m], C * m**p) for m in ms}
    holds = all(g <= bound * (1.0 + 1e-12) + 1e-15 for g, bound in rows.values())
    return {"exponent": p, "C": float(C), "rows": rows, "holds": bool(holds)}


def inertia_rate_check(result) -> tuple[bool, float, float]:
    """I(rho) >= J^4/(4 mu^3); returns (holds, I, bound)."""
    J, m = result.config.J, result.config.m
    mu = m * (1.0 - m)
    inertia, _ = moment_of_inertia(result.system)
    bound = J**4 / (4.0 * mu**3)
    return bool(inertia >= bound), float(inertia), float(bound)


def velocity_check(result) -> tuple[bool, float, float]:
    """max over the support of J r(x - xbar)/I against J (3 eta/2)/(J^4/(4 mu^3))."""
    J, m = result.config.J, result.config.m
    mu = m * (1.0 - m)
    inertia, xbar = moment_of_inertia(result.system)
    vmax = 0.0
    for p in result.system.patches:
        x, y, _ = p.rho.coords()
        r = np.sqrt((x - xbar[0]) ** 2 + (y - xbar[1]) ** 2) + 0.0 * p.rho.values
        vmax = max(vmax, float(J * r[occupied(p.rho)].max() / inertia))
    bound = J * 1.5 * result.domains.eta / (J**4 / (4.0 * mu**3))
    return bool(vmax <= bound), vmax, float(bound)


def cap_slack(result) -> bool:
    """No converged cell sits at the density cap."""
    cap = result.config.cap
    if cap is None:
        return True
    return all(float(p.rho.values.max()) < cap * (1.0 - 1e-12) for p in result.system.patches)


def center_offsets(result) -> dict:
    """Per-component center of mass minus its ball center."""
    out = {}
    for p in result.system.patches:
        if p.ball_center is not None:
            out[p.label] = moments(p.rho)[1] - p.ball_center
    return out
