"""Floquet analysis of the (damped) Mathieu equation.

``u'' + gamma u' + lam0^2 (1 + eps cos(omega t)) u = 0`` is integrated in
first-order form over one drive period from the two canonical initial
conditions; the resulting fundamental matrix is the monodromy matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .integrate import IntegratorConfig, integrate
from .models import DynamicalState, ModelKind, ModelParams, TrapModulation

FLOQUET_CONFIG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, h_init=1e-3, h_max=0.1)
NUMERICAL_ZERO = 1e-10
_LINEAR = ModelParams(0.0)


@dataclass(frozen=True)
class FloquetResult:
    monodromy: np.ndarray
    multipliers: tuple[complex, complex]
    growth_exponent: float
    period: float

    @property
    def stable(self) -> bool:
        return self.growth_exponent <= NUMERICAL_ZERO

    @property
    def spectral_radius(self) -> float:
        return max(abs(m) for m in self.multipliers)

    @property
    def trace(self) -> float:
        return float(np.trace(self.monodromy))

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.monodromy))


@dataclass(frozen=True)
class Classification:
    stable: bool
    growth_exponent: float


@dataclass
class WedgeBoundary:
    """Instability interval ``[omega_lower, omega_upper]`` per epsilon.

    Rows where no instability was found carry ``omega_lower > omega_upper``.
    """

    index: int
    eps_values: np.ndarray
    omega_lower: np.ndarray
    omega_upper: np.ndarray
    tip: tuple[float, float]
    damping: float = 0.0
    base_strength: float = 1.0
    centers: np.ndarray = field(default=None)

    def is_empty(self) -> np.ndarray:
        return self.omega_lower > self.omega_upper

    def contains(self, omega, row) -> bool:
        return bool(self.omega_lower[row] <= omega <= self.omega_upper[row])


def _mathieu_trap(omega, eps, gamma, lam0):
    return TrapModulation((lam0,) * 3, (eps,) * 3, omega, gamma)


def monodromy(trap: TrapModulation, channel: int = 0,
              config: IntegratorConfig | None = None) -> FloquetResult:
    """Monodromy matrix of one trap channel's Mathieu equation."""
    omega = trap.drive_frequency
    if not omega > 0:
        raise ValueError("drive frequency must be positive")
    config = config or FLOQUET_CONFIG
    one = trap.channel(channel)
    T = 2.0 * math.pi / omega
    cols = []
    for y0 in ((1.0, 0.0), (0.0, 1.0)):
        traj = integrate(ModelKind.MATHIEU, _LINEAR, one, DynamicalState((y0[0],), (y0[1],)), T,
                         config, t_eval=[T])
        cols.append(traj.y[-1])
    M = np.column_stack(cols)
    mu = np.linalg.eigvals(M)
    growth = max(math.log(abs(m)) for m in mu if m != 0) / T if np.all(mu != 0) else -math.inf
    return FloquetResult(M, (complex(mu[0]), complex(mu[1])), float(growth), T)


def classify(omega, eps, gamma=0.0, lam0=1.0, config=None) -> Classification:
    """Unstable iff the spectral radius exceeds ``1 + 1e-10``."""
    res = monodromy(_mathieu_trap(omega, eps, gamma, lam0), config=config)
    return Classification(res.spectral_radius <= 1.0 + NUMERICAL_ZERO, res.growth_exponent)


def _instability_margin(omega, eps, gamma, lam0, n, config):
    """Smooth proxy that is positive exactly inside wedge ``n``.

    For a 2x2 monodromy with ``det = exp(-gamma T)`` the multipliers are
    ``sqrt(det) (t +- sqrt(t^2 - 1))`` with ``t`` the normalised trace, so
    ``log(rho) = acosh|t| - gamma T / 2`` once ``|t| >= 1``.
    """
    res = monodromy(_mathieu_trap(omega, eps, gamma, lam0), config=config)
    t = (-1) ** n * res.trace / (2.0 * math.sqrt(max(res.determinant, 1e-300)))
    lead = math.acosh(t) if t >= 1.0 else t - 1.0
    return lead - 0.5 * gamma * res.period


def _unstable(omega, eps, gamma, lam0, config):
    return not classify(omega, eps, gamma, lam0, config).stable


def _bisect(stable_end, unstable_end, eps, gamma, lam0, config, tol):
    a, b = stable_end, unstable_end
    while abs(b - a) > tol:
        mid = 0.5 * (a + b)
        if _unstable(mid, eps, gamma, lam0, config):
            b = mid
        else:
            a = mid
    return b


def _outer_stable(center, direction, eps, gamma, lam0, config, first_step, limit):
    step = first_step
    while True:
        probe = center + direction * step
        if direction < 0 and probe <= limit:
            probe = 0.5 * (center + limit)
        if direction > 0 and probe >= limit:
            probe = 0.5 * (center + limit)
        if not _unstable(probe, eps, gamma, lam0, config):
            return probe
        if abs(probe - limit) < 1e-6:
            return limit
        step *= 2.0


def trace_wedge(n: int, eps_grid, gamma: float = 0.0, lam0: float = 1.0,
                config: IntegratorConfig | None = None, omega_tol: float = 1e-5) -> WedgeBoundary:
    """Trace both edges of the ``n``-th instability wedge (tip at ``2 lam0 / n``)."""
    if n not in (1, 2, 3):
        raise ValueError("only the first three wedges are traced")
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.size == 0 or np.any(np.diff(eps_grid) <= 0):
        raise ValueError("eps_grid must be non-empty and strictly increasing")
    if eps_grid.max() > 0.8 or eps_grid.min() < 0:
        raise ValueError("eps_grid must lie in [0, 0.8]")
    if omega_tol > 1e-4:
        raise ValueError("omega_tol must be <= 1e-4")
    config = config or FLOQUET_CONFIG
    tip = 2.0 * lam0 / n
    # keep the search inside the phase window that belongs to this wedge
    lo_lim = 2.0 * lam0 / (n + 0.5)
    hi_lim = 2.0 * lam0 / (n - 0.5)
    lower = np.empty_like(eps_grid)
    upper = np.empty_like(eps_grid)
    centers = np.empty_like(eps_grid)
    for i, eps in enumerate(eps_grid):
        if eps == 0.0:
            centers[i] = tip
            if gamma == 0.0:
                lower[i] = upper[i] = tip
            else:
                lower[i], upper[i] = tip + omega_tol, tip - omega_tol
            continue
        best = minimize_scalar(lambda w: -_instability_margin(w, eps, gamma, lam0, n, config),
                               bounds=(lo_lim, hi_lim), method="bounded",
                               options={"xatol": 1e-10})
        center = float(best.x)
        centers[i] = center
        if not _unstable(center, eps, gamma, lam0, config):
            lower[i], upper[i] = center + omega_tol, center - omega_tol
            continue
        first = max(4 * omega_tol, 0.6 * eps * tip / 2.0 ** n)
        s_lo = _outer_stable(center, -1, eps, gamma, lam0, config, first, lo_lim)
        s_hi = _outer_stable(center, +1, eps, gamma, lam0, config, first, hi_lim)
        lower[i] = _bisect(s_lo, center, eps, gamma, lam0, config, omega_tol)
        upper[i] = _bisect(s_hi, center, eps, gamma, lam0, config, omega_tol)
    nonempty = np.flatnonzero(lower <= upper)
    if nonempty.size:
        j = nonempty[0]
        tip_point = (float(0.5 * (lower[j] + upper[j])), float(eps_grid[j]))
    else:
        tip_point = (float("nan"), float("nan"))
    return WedgeBoundary(n, eps_grid, lower, upper, tip_point, gamma, lam0, centers)


def damped_tip(n: int, gamma: float, lam0: float = 1.0, eps_hi: float = 0.8,
               tol: float = 1e-4, config=None) -> float | None:
    """Smallest epsilon at which wedge ``n`` exists for damping ``gamma``."""
    config = config or FLOQUET_CONFIG
    window = (2.0 * lam0 / (n + 0.5), 2.0 * lam0 / (n - 0.5))

    def exists(eps):
        best = minimize_scalar(lambda w: -_instability_margin(w, eps, gamma, lam0, n, config),
                               bounds=window, method="bounded", options={"xatol": 1e-9})
        return -best.fun > 0 and _unstable(best.x, eps, gamma, lam0, config)

    if gamma == 0:
        return 0.0
    if not exists(eps_hi):
        return None
    lo, hi = 0.0, eps_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if exists(mid):
            hi = mid
        else:
            lo = mid
    return hi
