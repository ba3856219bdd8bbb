"""Energy functionals on single grids and on multi-patch systems.

The total energy is E_J = U - G(rho, rho)/2 + J**2/(2 I). In a patch system
each patch carries its own FFT self potential, and distinct patches interact
through a two-center multipole expansion that depends only on the patch
masses, centers of mass and second moments. Because that interaction energy is
an explicit function of those moments, the potential each patch feels is its
exact variational derivative (a quadratic polynomial per patch) and the net
forces on the two bodies are equal and opposite.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..eos import PolytropicEos
from .grid import GridDensity
from .potential import moments, potential_at_external, potential_values, tidal_tensor

COUPLINGS = ("monopole", "quadrupole")


@dataclass
class Patch:
    """One body on its own grid, optionally confined to a ball."""

    rho: GridDensity
    label: str
    target_mass: float
    ball_center: np.ndarray | None = None
    ball_radius: float = np.inf

    def ball_mask(self) -> np.ndarray:
        if self.ball_center is None or not np.isfinite(self.ball_radius):
            return np.ones(self.rho.dims, dtype=bool)
        x, y, z = self.rho.coords()
        c = self.ball_center
        return (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2 <= self.ball_radius**2


@dataclass
class PatchSystem:
    patches: list[Patch]
    coupling: str = "monopole"

    def __post_init__(self):
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}")
        for i, a in enumerate(self.patches):
            for b in self.patches[i + 1:]:
                alo, ahi = a.rho.bounds()
                blo, bhi = b.rho.bounds()
                if np.all(alo < bhi) and np.all(blo < ahi):
                    raise ValueError(f"patch boxes {a.label!r} and {b.label!r} overlap")

    @property
    def masses(self) -> list[float]:
        return [p.rho.mass for p in self.patches]

    def by_label(self, label: str) -> Patch:
        for p in self.patches:
            if p.label == label:
                return p
        raise KeyError(label)

    def copy(self) -> "PatchSystem":
        return PatchSystem(
            [Patch(p.rho.copy(), p.label, p.target_mass,
                   None if p.ball_center is None else p.ball_center.copy(), p.ball_radius)
             for p in self.patches],
            self.coupling,
        )


@dataclass
class EnergyBreakdown:
    U: float
    Gself: float
    Ginter: float
    TJ: float
    EJ: float
    I: float
    xbar: np.ndarray
    masses: list[float]
    J: float = 0.0
    component_energies: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "U": self.U, "Gself": self.Gself, "Ginter": self.Ginter, "TJ": self.TJ,
            "EJ": self.EJ, "I": self.I, "xbar": [float(v) for v in self.xbar],
            "masses": list(self.masses), "J": self.J,
            "component_energies": list(self.component_energies),
        }


def rotational_energy(J: float, inertia: float) -> float:
    """T_J = J**2 / (2 I)."""
    return J * J / (2.0 * inertia)


def internal_energy(rho: GridDensity, eos: PolytropicEos) -> float:
    return float(eos.a_of(rho.values).sum() * rho.h**3)


def self_interaction(rho: GridDensity) -> tuple[float, np.ndarray]:
    """G(rho, rho) on one grid and the potential it was computed from."""
    v = potential_values(rho.values, rho.h)
    return float(np.sum(rho.values * v) * rho.h**3), v


def moment_of_inertia(obj: GridDensity | PatchSystem) -> tuple[float, np.ndarray]:
    """Moment of inertia about the z axis through the center of mass, and that center."""
    if isinstance(obj, GridDensity):
        _, xbar, q = moments(obj)
        return float(q[0, 0] + q[1, 1]), xbar
    stats = [moments(p.rho) for p in obj.patches]
    total = sum(s[0] for s in stats)
    xbar = sum(s[0] * s[1] for s in stats) / total
    inertia = 0.0
    for m, c, q in stats:
        d = c - xbar
        inertia += q[0, 0] + q[1, 1] + m * (d[0] ** 2 + d[1] ** 2)
    return float(inertia), xbar


def inertia_expansion(rho: GridDensity, sigma: GridDensity) -> float:
    """I(rho) + I(sigma) + m1 m2/(m1 + m2) r^2(xbar(rho) - xbar(sigma))."""
    i1, c1 = moment_of_inertia(rho)
    i2, c2 = moment_of_inertia(sigma)
    m1, m2 = rho.mass, sigma.mass
    d = c1 - c2
    return i1 + i2 + m1 * m2 / (m1 + m2) * (d[0] ** 2 + d[1] ** 2)


@dataclass
class _PairTerms:
    energy: float
    grad: np.ndarray  # derivative of the pair energy with respect to D = xbar_p - xbar_q


def _pair(mp, cp, qp, mq, cq, qq, coupling: str) -> _PairTerms:
    d = cp - cq
    r = np.sqrt(d @ d)
    energy = mp * mq / r
    grad = -mp * mq * d / r**3
    if coupling == "quadrupole":
        t = tidal_tensor(d)
        s = mq * qp + mp * qq
        energy += 0.5 * np.sum(s * t)
        grad = grad + 0.5 * (6.0 * (s @ d) / r**5 - 15.0 * (d @ s @ d) * d / r**7
                             + 3.0 * np.trace(s) * d / r**5)
    return _PairTerms(float(energy), grad)


@dataclass
class CrossField:
    """Quadratic cross potential a + b.(x - c) + (x - c)^T H (x - c)/2 on one patch."""

    center: np.ndarray
    a: float
    b: np.ndarray
    H: np.ndarray

    def evaluate(self, rho: GridDensity, include_linear: bool = True) -> np.ndarray:
        x, y, z = rho.coords()
        dx, dy, dz = x - self.center[0], y - self.center[1], z - self.center[2]
        out = self.a + 0.0 * (dx + dy + dz)
        if include_linear:
            out = out + self.b[0] * dx + self.b[1] * dy + self.b[2] * dz
        H = self.H
        if np.any(H):
            out = out + 0.5 * (H[0, 0] * dx * dx + H[1, 1] * dy * dy + H[2, 2] * dz * dz) \
                + H[0, 1] * dx * dy + H[0, 2] * dx * dz + H[1, 2] * dy * dz
        return out

    def gradient(self, rho: GridDensity) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x, y, z = rho.coords()
        d = (x - self.center[0], y - self.center[1], z - self.center[2])
        return tuple(self.b[a] + sum(self.H[a, c] * d[c] for c in range(3)) for a in range(3))


def cross_interaction(sys: PatchSystem) -> tuple[float, list[CrossField]]:
    """Inter-patch interaction energy and the cross potential felt by each patch."""
    stats = [moments(p.rho) for p in sys.patches]
    fields = [CrossField(s[1], 0.0, np.zeros(3), np.zeros((3, 3))) for s in stats]
    total = 0.0
    for i in range(len(stats)):
        mi, ci, qi = stats[i]
        for j in range(i + 1, len(stats)):
            mj, cj, qj = stats[j]
            pair = _pair(mi, ci, qi, mj, cj, qj, sys.coupling)
            total += pair.energy
            d = ci - cj
            r = np.sqrt(d @ d)
            fields[i].b = fields[i].b + pair.grad / mi
            fields[j].b = fields[j].b - pair.grad / mj
            if sys.coupling == "quadrupole":
                t = tidal_tensor(d)
                fields[i].a += mj / r + 0.5 * np.sum(qj * t)
                fields[j].a += mi / r + 0.5 * np.sum(qi * t)
                fields[i].H = fields[i].H + mj * t
                fields[j].H = fields[j].H + mi * t
            else:
                fields[i].a += mj / r
                fields[j].a += mi / r
    return total, fields


def pair_interaction_via_far_field(sys: PatchSystem) -> float:
    """Same interaction energy assembled from far-field potentials at the centers of mass."""
    total = 0.0
    stats = [moments(p.rho) for p in sys.patches]
    for i, a in enumerate(sys.patches):
        for j in range(i + 1, len(sys.patches)):
            b = sys.patches[j]
            total += stats[i][0] * potential_at_external(b.rho, [stats[i][1]], sys.coupling)[0]
            if sys.coupling == "quadrupole":
                total += 0.5 * stats[j][0] * np.sum(stats[i][2] * tidal_tensor(stats[i][1] - stats[j][1]))
    return float(total)


def energies(obj: GridDensity | PatchSystem, J: float, eos: PolytropicEos) -> EnergyBreakdown:
    """Energy breakdown of a single grid density or of a patch system."""
    if J < 0:
        raise ValueError("angular momentum must be non-negative")
    if isinstance(obj, GridDensity):
        patches = [Patch(obj, "body", obj.mass)]
        coupling = "monopole"
    else:
        patches, coupling = obj.patches, obj.coupling
    masses = [p.rho.mass for p in patches]
    if J > 0 and not sum(masses) > 0:
        raise ValueError("rotational energy needs positive mass")
    u_parts = [internal_energy(p.rho, eos) for p in patches]
    g_parts = [self_interaction(p.rho)[0] for p in patches]
    ginter = 0.0
    if len(patches) > 1:
        ginter, _ = cross_interaction(PatchSystem(patches, coupling))
    U = float(sum(u_parts))
    gself = float(sum(g_parts) + 2.0 * ginter)
    if sum(masses) > 0:
        inertia, xbar = moment_of_inertia(obj)
    else:
        inertia, xbar = 0.0, np.zeros(3)
    tj = rotational_energy(J, inertia) if J > 0 else 0.0
    return EnergyBreakdown(
        U=U, Gself=gself, Ginter=float(ginter), TJ=float(tj), EJ=U - 0.5 * gself + tj,
        I=inertia, xbar=xbar, masses=masses, J=J,
        component_energies=[u - 0.5 * g for u, g in zip(u_parts, g_parts)],
    )


def lp_norm(values: np.ndarray, h: float, p: float) -> float:
    a = np.abs(values)
    if np.isinf(p):
        return float(a.max()) if a.size else 0.0
    return float((np.sum(a**p) * h**3) ** (1.0 / p))


def interpolation_check(rho: GridDensity, p: float, r: float, q: float, rtol: float = 1e-12) -> bool:
    """Whether ||f||_r <= ||f||_p**alpha ||f||_q**(1 - alpha) with 1/r = alpha/p + (1 - alpha)/q."""
    if not (1 <= p <= r <= q):
        raise ValueError("need 1 <= p <= r <= q")
    inv = lambda s: 0.0 if np.isinf(s) else 1.0 / s
    alpha = 1.0 if p == q else (inv(r) - inv(q)) / (inv(p) - inv(q))
    lhs = lp_norm(rho.values, rho.h, r)
    rhs = lp_norm(rho.values, rho.h, p) ** alpha * lp_norm(rho.values, rho.h, q) ** (1.0 - alpha)
    return lhs <= rhs * (1.0 + rtol) + 1e-300
