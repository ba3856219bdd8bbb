"""The two admissible balls around the Kepler point-mass configuration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DomainPair:
    """Balls of radius eta/4 around the planet and star point-mass positions.

    The centers sit on the x axis at distance eta apart, with the point-mass
    barycenter at the origin.
    """

    J: float
    m: float
    eta: float
    center_planet: np.ndarray
    center_star: np.ndarray

    @property
    def mu(self) -> float:
        return self.m * (1.0 - self.m)

    @property
    def ball_radius(self) -> float:
        return self.eta / 4.0

    @property
    def gap(self) -> float:
        """Distance between the two balls, eta/2."""
        return float(np.linalg.norm(self.center_planet - self.center_star) - 2.0 * self.ball_radius)

    @property
    def diameter(self) -> float:
        """Diameter of the union of the balls, 3 eta/2."""
        return float(np.linalg.norm(self.center_planet - self.center_star) + 2.0 * self.ball_radius)

    def nonempty_threshold(self) -> float:
        """Cap above which the doubly constrained class is nonempty: 384/(pi eta^3)."""
        return 384.0 / (np.pi * self.eta**3)


def make_domains(J: float, m: float) -> DomainPair:
    if not J > 0:
        raise ValueError("angular momentum must be positive")
    if not 0 < m < 1:
        raise ValueError(f"planet mass must lie in (0, 1), got {m}")
    mu = m * (1.0 - m)
    eta = J * J / (mu * mu)
    # planet at +(1-m) eta, star at -m eta puts the barycenter at the origin
    planet = np.array([(1.0 - m) * eta, 0.0, 0.0])
    star = np.array([-m * eta, 0.0, 0.0])
    return DomainPair(J, m, eta, planet, star)
