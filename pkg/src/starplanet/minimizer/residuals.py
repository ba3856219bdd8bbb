"""Euler-Lagrange and stationary Euler-Poisson residuals of a computed equilibrium."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import binary_erosion

from ..eos import PolytropicEos
from ..field import GridDensity
from .scf import MinimizerResult, evaluate_fields


def el_residual_values(rho: np.ndarray, phi: np.ndarray, lam: float, eos: PolytropicEos,
                       cap: float | None = None, mask: np.ndarray | None = None) -> float:
    """sup |A'(rho) - min(A'(cap), [Phi + lam]_+)| on the support, sup [Phi + lam]_+ off it.

    With a cap, "support" means rho > 1e-6 cap. Cells outside ``mask`` are
    not constrained by the equation and are skipped.
    """
    rho = np.asarray(rho, float)
    mask = np.ones(rho.shape, bool) if mask is None else mask
    level = np.maximum(phi + lam, 0.0)
    if cap is not None:
        level = np.minimum(level, eos.a_prime(cap))
        occupied = rho > 1e-6 * cap
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


def el_residual(result: MinimizerResult) -> list[float]:
    """Per-component Euler-Lagrange residual at the stored multipliers, with the true Phi."""
    cfg = result.config
    state = evaluate_fields(result.system, cfg.J)
    return [el_residual_values(p.rho.values, phi, lam, cfg.eos, cfg.cap, p.ball_mask())
            for p, phi, lam in zip(result.system.patches, state.phi, result.multipliers)]


def _central_gradient(f: np.ndarray, h: float) -> list[np.ndarray]:
    out = []
    for axis in range(3):
        g = np.zeros_like(f)
        sl_c = [slice(None)] * 3
        sl_p = [slice(None)] * 3
        sl_m = [slice(None)] * 3
        sl_c[axis], sl_p[axis], sl_m[axis] = slice(1, -1), slice(2, None), slice(None, -2)
        g[tuple(sl_c)] = (f[tuple(sl_p)] - f[tuple(sl_m)]) / (2.0 * h)
        out.append(g)
    return out


def interior_support(rho: np.ndarray, cells: float = 2.0) -> np.ndarray:
    """Support cells farther than ``cells`` spacings from the free boundary and the grid edge."""
    r = int(np.ceil(cells))
    ax = np.arange(-r, r + 1)
    ball = (ax[:, None, None] ** 2 + ax[None, :, None] ** 2 + ax[None, None, :] ** 2) <= cells**2
    return binary_erosion(rho > 0, structure=ball, border_value=0)


def ep_residual_parts(rho: GridDensity, eos: PolytropicEos, self_potential: np.ndarray,
                      external_gradient=None, omega2: float = 0.0,
                      xbar=(0.0, 0.0, 0.0)) -> tuple[float, float]:
    """L2 norms over the interior support of grad P - rho grad V - omega^2 rho P12(x - xbar) and of rho grad V.

    ``self_potential`` is differenced numerically; ``external_gradient`` (the
    gradient of any analytically known part of V, as three arrays) is added
    as given.
    """
    h = rho.h
    values = rho.values
    mask = interior_support(values)
    grad_p = _central_gradient(eos.pressure(values), h)
    grad_v = _central_gradient(self_potential, h)
    if external_gradient is not None:
        grad_v = [g + e for g, e in zip(grad_v, external_gradient)]
    x, y, _ = rho.coords()
    rot = [omega2 * (x - xbar[0]), omega2 * (y - xbar[1]), 0.0]
    res2 = 0.0
    ref2 = 0.0
    for a in range(3):
        force = values * grad_v[a]
        r = grad_p[a] - force - values * rot[a]
        res2 += float(np.sum(np.broadcast_to(r, values.shape)[mask] ** 2))
        ref2 += float(np.sum(force[mask] ** 2))
    return np.sqrt(res2 * h**3), np.sqrt(ref2 * h**3)


def ep_residual(result: MinimizerResult, eos: PolytropicEos | None = None) -> float:
    """Normalized reduced Euler-Poisson residual with omega = J/I, pooled over all patches."""
    eos = eos or result.config.eos
    state = evaluate_fields(result.system, result.config.J)
    res2 = ref2 = 0.0
    for p, v, cf in zip(result.system.patches, state.self_potential, state.cross):
        ext = [np.broadcast_to(g, p.rho.dims) for g in cf.gradient(p.rho)]
        res, ref = ep_residual_parts(p.rho, eos, v, ext, state.omega2, state.xbar)
        res2 += res * res
        ref2 += ref * ref
    return float(np.sqrt(res2 / ref2))
