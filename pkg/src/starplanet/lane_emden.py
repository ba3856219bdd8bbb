"""Non-rotating polytropes: Lane-Emden solutions, the unit-mass minimizer and its rescalings.

The ODE is integrated once together with the radial integrals needed for the
mass, the potential and both energy terms, so the profile quantities come from
the same high-accuracy solve rather than from post-hoc quadrature of samples.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import PchipInterpolator

from .eos import PolytropicEos, UnsupportedGammaError
from .field.grid import GridDensity

N_SAMPLES = 2048
_XI_START = 1e-3


@dataclass(frozen=True)
class LaneEmdenSolution:
    """Dimensionless solution theta(xi) of theta'' + 2 theta'/xi + theta**n = 0.

    Attributes ending in ``1`` are the accumulated integrals at the first zero
    ``xi1``: mu = int xi^2 theta^n, psi = int xi theta^n, u = int xi^2 theta^(n+1),
    w = int mu(xi) theta^n xi.
    """

    n: float
    xi1: float
    dtheta1: float
    mu1: float
    psi1: float
    u1: float
    w1: float
    dense: object

    def state(self, xi) -> np.ndarray:
        """ODE state [theta, theta', mu, psi, u, w] at ``xi`` (series branch near the center)."""
        xi = np.atleast_1d(np.asarray(xi, float))
        out = np.empty((6, xi.size))
        small = xi < _XI_START
        if np.any(small):
            out[:, small] = _series(xi[small], self.n)
        if np.any(~small):
            out[:, ~small] = self.dense(np.minimum(xi[~small], self.xi1))
        return out

    def theta(self, xi) -> np.ndarray:
        return self.state(xi)[0]


def _series(xi, n):
    x2 = xi * xi
    return np.array([
        1.0 - x2 / 6.0 + n * x2 * x2 / 120.0,
        -xi / 3.0 + n * xi * x2 / 30.0,
        xi * x2 / 3.0 - n * xi * x2 * x2 / 30.0,
        x2 / 2.0 - n * x2 * x2 / 24.0,
        xi * x2 / 3.0 - (n + 1.0) * xi * x2 * x2 / 30.0,
        xi * x2 * x2 / 15.0,
    ])


def solve_lane_emden(n: float, rtol: float = 1e-12, atol: float = 1e-14) -> LaneEmdenSolution:
    """Integrate to the first zero of theta with event detection."""
    if not 0 <= n < 5:
        raise UnsupportedGammaError(f"index n = {n} has no finite radius")

    def rhs(xi, y):
        th, dth, mu = y[0], y[1], y[2]
        tn = max(th, 0.0) ** n
        return [dth, -2.0 * dth / xi - tn, xi * xi * tn, xi * tn, xi * xi * tn * max(th, 0.0), mu * tn * xi]

    def surface(xi, y):
        return y[0]

    surface.terminal = True
    surface.direction = -1
    y0 = _series(np.array([_XI_START]), n)[:, 0]
    sol = solve_ivp(rhs, (_XI_START, 50.0), y0, method="DOP853", events=surface,
                    dense_output=True, rtol=rtol, atol=atol)
    if sol.status != 1 or not len(sol.t_events[0]):
        raise RuntimeError("Lane-Emden integration did not reach the surface")
    xi1 = float(sol.t_events[0][0])
    y1 = sol.y_events[0][0]
    return LaneEmdenSolution(n, xi1, float(y1[1]), float(y1[2]), float(y1[3]), float(y1[4]),
                             float(y1[5]), sol.sol)


@dataclass(frozen=True)
class RadialProfile:
    """Radial non-rotating minimizer of a given mass.

    ``r``, ``rho`` and ``V`` are samples on a uniform mesh over [0, radius];
    ``U`` and ``G`` are the internal energy and G(sigma, sigma).
    """

    eos: PolytropicEos
    mass: float
    radius: float
    central_density: float
    r: np.ndarray
    rho: np.ndarray
    V: np.ndarray
    lam: float
    U: float
    G: float
    solution: LaneEmdenSolution
    length_scale: float

    @cached_property
    def _interpolant(self) -> PchipInterpolator:
        return PchipInterpolator(self.r, self.rho)

    @property
    def e0(self) -> float:
        return self.U - 0.5 * self.G

    def density_at(self, radius) -> np.ndarray:
        """Monotone cubic interpolation of the samples; zero outside the support."""
        rr = np.asarray(radius, float)
        out = self._interpolant(np.clip(rr, 0.0, self.radius))
        return np.where(rr < self.radius, np.maximum(out, 0.0), 0.0)

    def exact_density(self, radius) -> np.ndarray:
        """Density straight from the ODE solution, rho_c theta(r / alpha)**n."""
        rr = np.atleast_1d(np.asarray(radius, float))
        out = np.zeros_like(rr)
        inside = rr < self.radius
        th = np.maximum(self.solution.theta(rr[inside] / self.length_scale), 0.0)
        out[inside] = self.central_density * th**self.solution.n
        return out

    def mass_integral(self) -> float:
        """4 pi int rho r^2 dr by adaptive quadrature of the exact density."""
        val, _ = quad(lambda r: self.exact_density(r)[0] * r * r, 0.0, self.radius,
                      epsabs=0.0, epsrel=1e-12, limit=400)
        return 4.0 * np.pi * val

    def el0_residual(self) -> float:
        """sup over the mesh of |A'(rho) - [V + lambda]_+| divided by |lambda|."""
        lhs = self.eos.a_prime(self.rho)
        rhs = np.maximum(self.V + self.lam, 0.0)
        return float(np.max(np.abs(lhs - rhs)) / abs(self.lam))


def profile_from_central_density(eos: PolytropicEos, rho_c: float,
                                 solution: LaneEmdenSolution | None = None) -> RadialProfile:
    """Physical polytrope with the given central density (its mass is whatever results)."""
    le = solution or solve_lane_emden(eos.n)
    n = eos.n
    alpha = np.sqrt((n + 1.0) * eos.K * rho_c ** (1.0 / n - 1.0) / (4.0 * np.pi))
    xi = np.linspace(0.0, le.xi1, N_SAMPLES)
    st = le.state(xi)
    theta = np.maximum(st[0], 0.0)
    theta[-1] = 0.0
    rho = rho_c * theta**n
    mass = 4.0 * np.pi * alpha**3 * rho_c * le.mu1
    radius = alpha * le.xi1
    # V = m(r)/r + 4 pi int_r^R rho s ds; the first term tends to zero at the center
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(xi > 0, st[2] / np.where(xi > 0, xi, 1.0), 0.0)
    V = 4.0 * np.pi * alpha**2 * rho_c * (inner + le.psi1 - st[3])
    U = 4.0 * np.pi * alpha**3 * eos.K / (eos.gamma - 1.0) * rho_c**eos.gamma * le.u1
    G = 32.0 * np.pi**2 * alpha**5 * rho_c**2 * le.w1
    return RadialProfile(eos, float(mass), float(radius), float(rho_c), alpha * xi, rho, V,
                         float(-mass / radius), float(U), float(G), le, float(alpha))


def _scaled(profile: RadialProfile, A: float, B: float, mass: float) -> RadialProfile:
    """Apply sigma -> sigma(x / B) / A to every stored quantity."""
    g = profile.eos.gamma
    return replace(
        profile,
        mass=float(mass),
        radius=profile.radius * B,
        central_density=profile.central_density / A,
        r=profile.r * B,
        rho=profile.rho / A,
        V=profile.V * B * B / A,
        lam=profile.lam * B * B / A,
        U=profile.U * B**3 / A**g,
        G=profile.G * B**5 / A**2,
        length_scale=profile.length_scale * B,
    )


def solve_unit(eos: PolytropicEos) -> RadialProfile:
    """Unit-mass non-rotating minimizer, normalized through the scaling coefficients."""
    if eos.gamma <= 1.2:
        raise UnsupportedGammaError("gamma <= 6/5 gives an unbounded polytrope")
    raw = profile_from_central_density(eos, 1.0)
    A, B = eos.scaling_coeffs(raw.mass)
    # sigma_1(x) = A sigma_M(B x) is the inverse of sigma_M(x) = sigma_1(x / B) / A
    return _scaled(raw, 1.0 / A, 1.0 / B, 1.0)


def rescale(profile: RadialProfile, m: float) -> RadialProfile:
    """Mass-m minimizer sigma_m(x) = sigma(x / B) / A from the unit-mass one."""
    if not m > 0:
        raise ValueError("mass must be positive")
    if abs(profile.mass - 1.0) > 1e-10:
        raise ValueError("rescale expects a unit-mass profile")
    A, B = profile.eos.scaling_coeffs(m)
    return _scaled(profile, A, B, m)


def lambda_of_mass(profile_unit: RadialProfile, m: float) -> float:
    """Closed form lambda_m = -(5 gamma - 6) m**((2 gamma - 2)/(3 gamma - 4)) U(sigma)."""
    if m < 0:
        raise ValueError("mass must be non-negative")
    g = profile_unit.eos.gamma
    return float(-(5.0 * g - 6.0) * m ** ((2.0 * g - 2.0) / (3.0 * g - 4.0)) * profile_unit.U)


def e0_of_mass(profile_unit: RadialProfile, m: float) -> float:
    return rescale(profile_unit, m).e0


def to_grid(profile: RadialProfile, center, h: float, dims, min_cells: int = 8) -> GridDensity:
    """Sample rho(|x - center|) on a grid of ``dims`` cells of side h centered at ``center``.

    The grid mass is renormalized to the profile mass.
    """
    if profile.radius < min_cells * h:
        raise ValueError(f"radius {profile.radius:.4g} resolved by fewer than {min_cells} cells")
    dims = tuple(int(d) for d in dims)
    center = np.asarray(center, float)
    origin = center - 0.5 * h * (np.asarray(dims) - 1)
    grid = GridDensity(np.zeros(dims), h, origin)
    x, y, z = grid.coords()
    dist = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)
    values = profile.density_at(dist)
    total = values.sum() * h**3
    if not total > 0:
        raise ValueError("grid does not overlap the profile support")
    grid.values = values * (profile.mass / total)
    return grid


def write_csv(profile: RadialProfile, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "rho", "V"])
        for r, rho, v in zip(profile.r, profile.rho, profile.V):
            w.writerow([f"{r:.17g}", f"{rho:.17g}", f"{v:.17g}"])
