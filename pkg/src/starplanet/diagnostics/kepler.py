"""Point-mass Kepler energy, the separation functions g_eps and g_0, and the separation ratio."""
from __future__ import annotations

import numpy as np

from ..field import moments


def kepler_energy(d, mu: float, J: float):
    """-mu/d + J^2/(2 mu d^2), the energy of two point masses at separation d."""
    d = np.asarray(d, float)
    if np.any(d <= 0):
        raise ValueError("separation must be positive")
    if not mu > 0 or J < 0:
        raise ValueError("need mu > 0 and J >= 0")
    out = -mu / d + J * J / (2.0 * mu * d * d)
    return float(out) if out.ndim == 0 else out


def kepler_argmin(mu: float, J: float) -> float:
    """J^2/mu^2; +inf when J = 0 (the energy then decreases monotonically in d)."""
    if not mu > 0 or J < 0:
        raise ValueError("need mu > 0 and J >= 0")
    return float(J * J / (mu * mu)) if J > 0 else np.inf


def g_functions(z, eps: float, R: float, J: float):
    """(g_eps(z), g_0(z)) for z >= 1/2.

    g_0(z) = -1/z + 1/(2 z^2) + 1/2 = (z - 1)^2/(2 z^2) vanishes only at z = 1.
    """
    z = np.asarray(z, float)
    if np.any(z < 0.5):
        raise ValueError("g functions are only considered for z >= 1/2")
    if eps < 0 or R < 0 or not J > 0:
        raise ValueError("need eps >= 0, R >= 0, J > 0")
    g0 = -1.0 / z + 1.0 / (2.0 * z * z) + 0.5
    geps = (-1.0 / (z - 2.0 * eps) + 1.0 / (2.0 * (z * z + eps**1.5 * np.sqrt(R) / J))
            + 1.0 / (1.0 + 2.0 * eps) - 0.5)
    if z.ndim == 0:
        return float(geps), float(g0)
    return geps, g0


def uniform_gap(eps: float, R: float, J: float, samples: int = 4001) -> float:
    """sup over z in [1/2, 3/2] of |g_eps(z) - g_0(z)| on a fine uniform mesh."""
    z = np.linspace(0.5, 1.5, samples)
    geps, g0 = g_functions(z, eps, R, J)
    return float(np.max(np.abs(geps - g0)))


def component_centers(result, planet: str = "planet", star: str = "star"):
    system = getattr(result, "system", result)
    try:
        pl, st = system.by_label(planet), system.by_label(star)
    except KeyError as exc:
        raise ValueError(f"separation needs both components; missing {exc}") from None
    return moments(pl.rho)[1], moments(st.rho)[1]


def separation_ratio(result, eta: float | None = None) -> float:
    """|xbar(planet) - xbar(star)| / eta."""
    if eta is None:
        if getattr(result, "domains", None) is None:
            raise ValueError("separation ratio needs eta or a two-body result")
        eta = result.domains.eta
    cp, cs = component_centers(result)
    return float(np.linalg.norm(cp - cs) / eta)


def g_gate(result, radius: float) -> tuple[float, float, float]:
    """(x, eps, g_eps(x)) with x = d/eta and eps = radius/eta for a converged two-body result."""
    eta = result.domains.eta
    x = separation_ratio(result)
    eps = radius / eta
    geps, _ = g_functions(x, eps, radius, result.config.J)
    return x, eps, geps
