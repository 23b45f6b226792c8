"""First-order resonance formulas around the principal wedge (omega near 2)."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ResonancePrediction:
    omega: float
    epsilon: float
    damping: float
    q: float | None
    omega_max: float
    band: tuple[float, float]

    @property
    def damped_exponent(self) -> float | None:
        return None if self.q is None else self.q - self.damping

    @property
    def unstable(self) -> bool:
        return self.damped_exponent is not None and self.damped_exponent > 0


def detuning(omega: float) -> float:
    """``delta`` with ``|omega - 2| = 2 delta``."""
    return abs(omega - 2.0) / 2.0


def growth_exponent(omega: float, eps: float) -> float | None:
    """Growing root ``sqrt(eps^2 / (4 omega^2) - delta^2)``, or None off resonance."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    disc = eps * eps / (4.0 * omega * omega) - detuning(omega) ** 2
    if disc < 0:
        return None
    return math.sqrt(disc)


def optimal_frequency(eps: float) -> float:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return 2.0 - eps * eps / 4.0


def resonance_band(eps: float) -> tuple[float, float]:
    """``|omega - 2| <= eps/2 + eps^2/32``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    w = eps / 2.0 + eps * eps / 32.0
    return (2.0 - w, 2.0 + w)


def damped_growth(omega: float, eps: float, gamma: float) -> float | None:
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    q = growth_exponent(omega, eps)
    return None if q is None else q - gamma


def predict(omega: float, eps: float, gamma: float = 0.0) -> ResonancePrediction:
    return ResonancePrediction(omega, eps, gamma, growth_exponent(omega, eps),
                               optimal_frequency(eps), resonance_band(eps))
