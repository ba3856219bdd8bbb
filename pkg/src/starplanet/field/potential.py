"""Newtonian potential of grid densities.

The self potential is a zero-padded FFT convolution of the cell masses with
the point kernel 1/|x - y|. The coincident-cell term uses the exact average of
1/|u| over one cube, which keeps the scheme second order.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft
from scipy.special import roots_legendre

from .grid import GridDensity, GridField

# Threads handed to scipy.fft; pocketfft splits whole 1D transforms, so results
# do not depend on this number.
FFT_WORKERS = 1

POTENTIAL_BOUND_CONSTANT = 1.5 * (4.0 * np.pi) ** (1.0 / 3.0)


@lru_cache(maxsize=None)
def unit_cube_inverse_distance() -> float:
    """Integral of 1/|u| over the unit cube centered at the origin.

    Uses div(u/|u|) = 2/|u|, which turns the singular volume integral into a
    smooth integral over the six faces.
    """
    nodes, weights = roots_legendre(64)
    t, w = 0.5 * nodes, 0.5 * weights
    face = 1.0 / np.sqrt(0.25 + t[:, None] ** 2 + t[None, :] ** 2)
    return float(1.5 * w @ face @ w)


def self_cell_kernel(h: float) -> float:
    """Cell-averaged kernel w(0) = h**-3 * integral of 1/|u| over a cube of side h."""
    return unit_cube_inverse_distance() / h


def _lags(n: int) -> np.ndarray:
    k = np.arange(2 * n)
    return np.where(k < n, k, k - 2 * n).astype(float)


@lru_cache(maxsize=16)
def _kernel_hat(shape: tuple[int, int, int], h: float, offset: tuple[float, float, float]):
    lx, ly, lz = (_lags(n) for n in shape)
    dx = lx[:, None, None] * h + offset[0]
    dy = ly[None, :, None] * h + offset[1]
    dz = lz[None, None, :] * h + offset[2]
    r = np.sqrt(dx * dx + dy * dy + dz * dz)
    tiny = r < 1e-12 * h
    kern = np.where(tiny, self_cell_kernel(h), 1.0 / np.where(tiny, 1.0, r))
    return scipy.fft.rfftn(kern, workers=FFT_WORKERS)


def potential_values(values: np.ndarray, h: float, offset=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Potential of cell densities ``values`` at the cell centers shifted by ``offset``.

    With a zero offset this is the grid potential; a nonzero offset gives the
    potential on a translated copy of the lattice (used for exact interaction
    energies between rigidly moved pieces).
    """
    shape = values.shape
    off = tuple(float(o) for o in offset)
    khat = _kernel_hat(shape, float(h), off)
    padded = tuple(2 * n for n in shape)
    rhat = scipy.fft.rfftn(values, s=padded, workers=FFT_WORKERS)
    full = scipy.fft.irfftn(rhat * khat, s=padded, workers=FFT_WORKERS)
    return full[: shape[0], : shape[1], : shape[2]] * h**3


def potential(rho: GridDensity) -> GridField:
    """Discrete Newtonian potential V(x) = sum_y rho(y) w(x - y) h**3 with free-space boundaries."""
    return GridField.like(rho, potential_values(rho.values, rho.h))


def direct_sum_potential(rho: GridDensity, points=None) -> np.ndarray:
    """Reference O(N**2) summation; at cell centers when ``points`` is None."""
    x, y, z = np.meshgrid(*rho.axes(), indexing="ij")
    src = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    w = rho.values.ravel() * rho.h**3
    keep = w != 0
    src, w = src[keep], w[keep]
    at_cells = points is None
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1) if at_cells else np.atleast_2d(points)
    out = np.empty(len(pts))
    w0 = self_cell_kernel(rho.h)
    for i, p in enumerate(pts):
        r = np.sqrt(((src - p) ** 2).sum(axis=1))
        same = r < 1e-12 * rho.h
        inv = np.where(same, w0, 1.0 / np.where(same, 1.0, r))
        out[i] = np.dot(w, inv)
    return out.reshape(rho.dims) if at_cells else out


def moments(rho: GridDensity) -> tuple[float, np.ndarray, np.ndarray]:
    """Mass, center of mass and second central moment tensor sum rho (x - xbar)(x - xbar)^T h**3."""
    m = rho.mass
    if not m > 0:
        raise ValueError("moments of a zero-mass density are undefined")
    w = rho.values * rho.h**3
    x, y, z = rho.axes()
    wx, wy, wz = w.sum(axis=(1, 2)), w.sum(axis=(0, 2)), w.sum(axis=(0, 1))
    xbar = np.array([wx @ x, wy @ y, wz @ z]) / m
    dx, dy, dz = x - xbar[0], y - xbar[1], z - xbar[2]
    q = np.empty((3, 3))
    q[0, 0], q[1, 1], q[2, 2] = wx @ dx**2, wy @ dy**2, wz @ dz**2
    q[0, 1] = q[1, 0] = dx @ w.sum(axis=2) @ dy
    q[0, 2] = q[2, 0] = dx @ w.sum(axis=1) @ dz
    q[1, 2] = q[2, 1] = dy @ w.sum(axis=0) @ dz
    return m, xbar, q


def tidal_tensor(d) -> np.ndarray:
    """Hessian of 1/|d|: (3 d d^T - |d|^2 I)/|d|^5."""
    d = np.asarray(d, float)
    r2 = d @ d
    return (3.0 * np.outer(d, d) - r2 * np.eye(3)) / r2**2.5


def potential_at_external(rho: GridDensity, points, order: str = "monopole") -> np.ndarray:
    """Far-field potential of ``rho`` at points outside its box, by multipole expansion.

    The expansion is about the center of mass; the truncation error is of
    order (R/d)**(k+1) * m/d with k = 0 for "monopole" and k = 2 for
    "quadrupole" (the dipole vanishes about the center of mass).
    """
    if order not in ("monopole", "quadrupole"):
        raise ValueError(f"unknown multipole order {order!r}")
    pts = np.atleast_2d(np.asarray(points, float))
    lo, hi = rho.bounds()
    pad = 2.0 * rho.h
    inside = np.all((pts > lo - pad) & (pts < hi + pad), axis=1)
    if np.any(inside):
        raise ValueError("far-field evaluation point lies within the inflated patch box")
    m, xbar, q = moments(rho)
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        d = p - xbar
        out[i] = m / np.sqrt(d @ d)
        if order == "quadrupole":
            out[i] += 0.5 * np.sum(q * tidal_tensor(d))
    return out


def far_field_error_bound(rho: GridDensity, points, order: str = "monopole") -> np.ndarray:
    """Order-of-magnitude truncation bound (R/d)**(k+1) m/d for ``potential_at_external``."""
    m, xbar, _ = moments(rho)
    x, y, z = rho.coords()
    occupied = rho.values > 0
    r2 = (x - xbar[0]) ** 2 + (y - xbar[1]) ** 2 + (z - xbar[2]) ** 2
    radius = np.sqrt(r2[occupied].max()) + rho.h
    d = np.linalg.norm(np.atleast_2d(points) - xbar, axis=1)
    k = 1 if order == "monopole" else 3
    return (radius / d) ** k * m / d


def potential_bound(rho_values: np.ndarray, h: float) -> float:
    """Right side k ||rho||_1^(2/3) ||rho||_inf^(1/3) of the sup-norm bound on V."""
    l1 = float(rho_values.sum() * h**3)
    linf = float(rho_values.max()) if rho_values.size else 0.0
    return POTENTIAL_BOUND_CONSTANT * l1 ** (2.0 / 3.0) * linf ** (1.0 / 3.0)
