"""Polytropic equation of state P = K s**gamma and its internal-energy density.

Units throughout the package: G = 1 and total fluid mass 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_NOISE_FLOOR = 1e-14


class UnsupportedGammaError(ValueError):
    """Adiabatic exponent outside the range the variational method handles."""


def _nonnegative(s, name: str = "density"):
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise ValueError(f"{name} must be finite and non-negative")
    return arr


def _out(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


@dataclass(frozen=True)
class PolytropicEos:
    """Pressure law P(s) = K s**gamma with gamma > 4/3.

    Parameters
    ----------
    K : float
        Pressure coefficient, positive.
    gamma : float
        Adiabatic exponent. Values at or below 4/3 make every scaling exponent
        degenerate and are rejected.
    """

    K: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if not (np.isfinite(self.K) and self.K > 0):
            raise ValueError(f"K must be positive, got {self.K}")
        if not (np.isfinite(self.gamma) and self.gamma > 4.0 / 3.0):
            raise UnsupportedGammaError(f"gamma must exceed 4/3, got {self.gamma}")

    @property
    def n(self) -> float:
        """Lane-Emden index 1/(gamma - 1)."""
        return 1.0 / (self.gamma - 1.0)

    @property
    def supports_star_planet(self) -> bool:
        return self.gamma > 1.5

    @property
    def shrinking_planet(self) -> bool:
        return self.gamma > 2.0

    def pressure(self, s):
        arr = _nonnegative(s)
        return _out(self.K * arr**self.gamma, s)

    def a_of(self, s):
        """Internal-energy density K/(gamma-1) s**gamma (convex, zero at zero)."""
        arr = _nonnegative(s)
        return _out(self.K / (self.gamma - 1.0) * arr**self.gamma, s)

    def a_prime(self, s):
        """Enthalpy K gamma/(gamma-1) s**(gamma-1)."""
        arr = _nonnegative(s)
        return _out(self.K * self.gamma / (self.gamma - 1.0) * arr ** (self.gamma - 1.0), s)

    def a_prime_inv(self, y):
        """Density whose enthalpy is y; tiny negative noise is treated as zero."""
        arr = np.asarray(y, dtype=float)
        arr = np.where((arr < 0) & (arr > -_NOISE_FLOOR), 0.0, arr)
        arr = _nonnegative(arr, "enthalpy")
        base = (self.gamma - 1.0) * arr / (self.K * self.gamma)
        return _out(base ** (1.0 / (self.gamma - 1.0)), y)

    def scaling_coeffs(self, m: float) -> tuple[float, float]:
        """Coefficients (A, B) mapping the unit-mass minimizer to mass m.

        The mass-m minimizer is sigma_m(x) = sigma(x / B) / A with
        A = m**(-2/(3 gamma - 4)) and B = m**((gamma - 2)/(3 gamma - 4)).
        """
        if not m > 0:
            raise ValueError(f"mass must be positive, got {m}")
        d = 3.0 * self.gamma - 4.0
        return float(m ** (-2.0 / d)), float(m ** ((self.gamma - 2.0) / d))

    def energy_exponent(self) -> float:
        """Exponent p in e0(m) = m**p e0(1)."""
        return (5.0 * self.gamma - 6.0) / (3.0 * self.gamma - 4.0)


def pressure(eos: PolytropicEos, s):
    return eos.pressure(s)


def a_of(eos: PolytropicEos, s):
    return eos.a_of(s)


def a_prime(eos: PolytropicEos, s):
    return eos.a_prime(s)


def a_prime_inv(eos: PolytropicEos, y):
    return eos.a_prime_inv(y)


def scaling_coeffs(eos: PolytropicEos, m: float) -> tuple[float, float]:
    return eos.scaling_coeffs(m)
