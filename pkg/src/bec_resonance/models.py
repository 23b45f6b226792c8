"""Width equations for a parametrically driven condensate.

All quantities are dimensionless: lengths in units of the oscillator length
a0, time in units of the inverse radial trap frequency.  A state vector is
laid out as ``[q_0, ..., q_{d-1}, p_0, ..., p_{d-1}]`` with ``p = dq/dt``.

The right-hand side lives in a numba kernel (:func:`accel_kernel`) so the
integrator and the public :func:`rhs` share a single implementation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np


class WidthDomainError(ValueError):
    """A width coordinate reached zero or became negative."""


class UnsupportedModelError(ValueError):
    """The requested operation is not defined for this model kind."""


class ModelKind(enum.Enum):
    VARIATIONAL_3D = "variational3d"
    RADIAL = "radial"
    IMPACT_OSCILLATOR = "impact"
    MATHIEU = "mathieu"
    CENTER_OF_MASS = "com"

    @property
    def dimension(self) -> int:
        return 3 if self is ModelKind.VARIATIONAL_3D else 1

    @property
    def is_width_model(self) -> bool:
        return self in (ModelKind.VARIATIONAL_3D, ModelKind.RADIAL, ModelKind.IMPACT_OSCILLATOR)

    @property
    def is_singular(self) -> bool:
        """True when the right-hand side blows up at zero width."""
        return self in (ModelKind.VARIATIONAL_3D, ModelKind.RADIAL)

    @property
    def code(self) -> int:
        return _KIND_CODES[self]


_KIND_CODES = {
    ModelKind.VARIATIONAL_3D: 0,
    ModelKind.RADIAL: 1,
    ModelKind.IMPACT_OSCILLATOR: 2,
    ModelKind.MATHIEU: 3,
    ModelKind.CENTER_OF_MASS: 4,
}


class Barrier(enum.Enum):
    """Shape of the repulsive part of the radial equation.

    ``FULL`` is the variational form ``1/v^3 + P/v^4``.  The two single-power
    variants keep the same total strength at v = 1, i.e. ``(1 + P)/v^k``.
    They only apply to the radial model.
    """

    FULL = "full"
    INVERSE_CUBE = "inverse_cube"
    INVERSE_QUARTIC = "inverse_quartic"

    @property
    def code(self) -> int:
        return {Barrier.FULL: 0, Barrier.INVERSE_CUBE: 1, Barrier.INVERSE_QUARTIC: 2}[self]


@dataclass(frozen=True)
class TrapModulation:
    """Trap strengths ``lambda_eta^2(t) = lambda_0eta^2 (1 + eps_eta cos(omega t))``."""

    base_strengths: tuple[float, float, float] = (1.0, 1.0, 1.0)
    amplitudes: tuple[float, float, float] = (0.0, 0.0, 0.0)
    drive_frequency: float = 2.0
    damping: float = 0.0

    def __post_init__(self):
        base = tuple(float(x) for x in self.base_strengths)
        amps = tuple(float(x) for x in self.amplitudes)
        if len(base) != 3 or len(amps) != 3:
            raise ValueError("base_strengths and amplitudes need three entries")
        object.__setattr__(self, "base_strengths", base)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "drive_frequency", float(self.drive_frequency))
        object.__setattr__(self, "damping", float(self.damping))
        if any(not (b > 0) for b in base):
            raise ValueError(f"trap base strengths must be positive, got {base}")
        if any(not (abs(a) < 1) for a in amps):
            raise ValueError(f"drive amplitudes must satisfy |eps| < 1, got {amps}")
        if any(a != 0 for a in amps) and not (self.drive_frequency > 0):
            raise ValueError("drive frequency must be positive when the trap is modulated")
        if not (self.damping >= 0):
            raise ValueError(f"damping must be non-negative, got {self.damping}")

    @classmethod
    def isotropic(cls, epsilon=0.0, omega=2.0, damping=0.0, base=1.0):
        return cls((base,) * 3, (epsilon,) * 3, omega, damping)

    @classmethod
    def m0(cls, epsilon, omega, base_strengths=(1.0, 1.0, 1.0), damping=0.0):
        """Breathing-type drive: ``eps_x = eps_y``, ``eps_z = 0``."""
        return cls(base_strengths, (epsilon, epsilon, 0.0), omega, damping)

    @classmethod
    def m2(cls, epsilon, omega, base_strengths=(1.0, 1.0, 1.0), damping=0.0):
        """Quadrupole drive: ``eps_x = -eps_y``, ``eps_z = 0``."""
        return cls(base_strengths, (epsilon, -epsilon, 0.0), omega, damping)

    @property
    def is_static(self) -> bool:
        return all(a == 0 for a in self.amplitudes)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.drive_frequency

    def evaluate(self, t) -> np.ndarray:
        """Return the three squared strengths at time ``t``."""
        base = np.asarray(self.base_strengths) ** 2
        amps = np.asarray(self.amplitudes)
        return base * (1.0 + amps * math.cos(self.drive_frequency * t))

    def channel(self, index: int) -> "TrapModulation":
        """Copy with channel ``index`` moved into the x slot (for 1D models)."""
        b = self.base_strengths[index]
        a = self.amplitudes[index]
        return TrapModulation((b, b, b), (a, a, a), self.drive_frequency, self.damping)

    def replace(self, **changes) -> "TrapModulation":
        values = dict(base_strengths=self.base_strengths, amplitudes=self.amplitudes,
                      drive_frequency=self.drive_frequency, damping=self.damping)
        values.update(changes)
        return TrapModulation(**values)

    def kernel_args(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        lam0sq = np.ascontiguousarray(np.asarray(self.base_strengths[:dim]) ** 2)
        eps = np.ascontiguousarray(np.asarray(self.amplitudes[:dim], dtype=float))
        return lam0sq, eps


@dataclass(frozen=True)
class ModelParams:
    """Interaction strength ``P`` and, optionally, the physical inputs behind it."""

    interaction: float = 0.0
    particle_number: float | None = None
    scattering_length: float | None = None
    oscillator_length: float | None = None
    barrier: Barrier = Barrier.FULL

    def __post_init__(self):
        object.__setattr__(self, "interaction", float(self.interaction))
        if isinstance(self.barrier, str):
            object.__setattr__(self, "barrier", Barrier(self.barrier))
        if not (self.interaction >= 0):
            raise ValueError(f"interaction P must be >= 0 (repulsive gas), got {self.interaction}")
        triple = (self.particle_number, self.scattering_length, self.oscillator_length)
        if any(x is not None for x in triple):
            if any(x is None for x in triple):
                raise ValueError("particle_number, scattering_length and oscillator_length go together")
            expected = interaction_from_physical(*triple)
            if abs(expected - self.interaction) > 1e-12 * max(abs(expected), 1e-300):
                raise ValueError(f"P={self.interaction} is inconsistent with N, a, a0 (expected {expected})")

    @classmethod
    def from_physical(cls, particle_number, scattering_length, oscillator_length, **kw):
        P = interaction_from_physical(particle_number, scattering_length, oscillator_length)
        return cls(P, particle_number, scattering_length, oscillator_length, **kw)


def interaction_from_physical(particle_number, scattering_length, oscillator_length) -> float:
    """``P = sqrt(2/pi) N a / a0``."""
    if oscillator_length <= 0:
        raise ValueError("oscillator length must be positive")
    return math.sqrt(2.0 / math.pi) * particle_number * scattering_length / oscillator_length


@dataclass(frozen=True)
class DynamicalState:
    coordinates: tuple[float, ...]
    velocities: tuple[float, ...]
    time: float = 0.0

    def __post_init__(self):
        q = tuple(float(x) for x in np.atleast_1d(self.coordinates))
        p = tuple(float(x) for x in np.atleast_1d(self.velocities))
        if len(q) != len(p) or len(q) not in (1, 3):
            raise ValueError(f"coordinates/velocities must have equal length 1 or 3, got {len(q)}, {len(p)}")
        object.__setattr__(self, "coordinates", q)
        object.__setattr__(self, "velocities", p)
        object.__setattr__(self, "time", float(self.time))

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    def as_array(self) -> np.ndarray:
        return np.array(self.coordinates + self.velocities, dtype=float)

    @classmethod
    def from_array(cls, y, time=0.0) -> "DynamicalState":
        y = np.asarray(y, dtype=float)
        d = y.size // 2
        return cls(tuple(y[:d]), tuple(y[d:]), time)


# -- kernels -----------------------------------------------------------------

@numba.njit(cache=True)
def barrier_force(form, P, v):
    if form == 0:
        return 1.0 / v**3 + P / v**4
    if form == 1:
        return (1.0 + P) / v**3
    return (1.0 + P) / v**4


@numba.njit(cache=True)
def barrier_potential(form, P, v):
    if form == 0:
        return 0.5 / v**2 + P / (3.0 * v**3)
    if form == 1:
        return 0.5 * (1.0 + P) / v**2
    return (1.0 + P) / (3.0 * v**3)


@numba.njit(cache=True)
def accel_kernel(kind, form, P, gamma, lam0sq, eps, omega, t, y, dy):
    """Fill ``dy`` with the time derivative of ``y``; return False on v <= 0."""
    d = y.size // 2
    c = math.cos(omega * t)
    for i in range(d):
        dy[i] = y[d + i]
    if kind == 0:
        prod = y[0] * y[1] * y[2]
        if y[0] <= 0.0 or y[1] <= 0.0 or y[2] <= 0.0:
            return False
        for i in range(3):
            v = y[i]
            lam2 = lam0sq[i] * (1.0 + eps[i] * c)
            dy[3 + i] = -lam2 * v - gamma * y[3 + i] + 1.0 / v**3 + P / (v * prod)
        return True
    lam2 = lam0sq[0] * (1.0 + eps[0] * c)
    if kind == 1:
        v = y[0]
        if v <= 0.0:
            return False
        dy[1] = -lam2 * v - gamma * y[1] + barrier_force(form, P, v)
        return True
    dy[1] = -lam2 * y[0] - gamma * y[1]
    return True


@numba.njit(cache=True)
def energy_kernel(kind, form, P, lam0sq, eps, omega, t, y):
    d = y.size // 2
    c = math.cos(omega * t)
    if kind == 0:
        e = 0.0
        for i in range(3):
            lam2 = lam0sq[i] * (1.0 + eps[i] * c)
            e += 0.5 * (y[3 + i] ** 2 + lam2 * y[i] ** 2) + 0.5 / y[i] ** 2
        return e + P / (y[0] * y[1] * y[2])
    lam2 = lam0sq[0] * (1.0 + eps[0] * c)
    v = y[0]
    return 0.5 * y[d] ** 2 + 0.5 * lam2 * v * v + barrier_potential(form, P, v)


def _check_dims(kind: ModelKind, state: DynamicalState):
    if state.dimension != kind.dimension:
        raise ValueError(f"{kind.value} expects dimension {kind.dimension}, got {state.dimension}")


def rhs(kind: ModelKind, params: ModelParams, trap: TrapModulation, state: DynamicalState) -> np.ndarray:
    """Accelerations of ``state`` under model ``kind`` at ``state.time``."""
    _check_dims(kind, state)
    y = state.as_array()
    if kind.is_singular and any(q <= 0 for q in state.coordinates):
        raise WidthDomainError(f"non-positive width {state.coordinates} for {kind.value} model")
    dy = np.empty_like(y)
    lam0sq, eps = trap.kernel_args(kind.dimension)
    accel_kernel(kind.code, params.barrier.code, params.interaction, trap.damping,
                 lam0sq, eps, trap.drive_frequency, state.time, y, dy)
    return dy[kind.dimension:].copy()


def energy(kind: ModelKind, params: ModelParams, trap: TrapModulation, state: DynamicalState,
           at_time: float | None = None) -> float:
    """Frozen-trap energy; a first integral when the trap is static and undamped."""
    if kind not in (ModelKind.RADIAL, ModelKind.VARIATIONAL_3D):
        raise UnsupportedModelError(f"energy is only defined for the singular width models, not {kind.value}")
    _check_dims(kind, state)
    if any(q <= 0 for q in state.coordinates):
        raise WidthDomainError(f"non-positive width {state.coordinates}")
    t = state.time if at_time is None else at_time
    lam0sq, eps = trap.kernel_args(kind.dimension)
    return float(energy_kernel(kind.code, params.barrier.code, params.interaction,
                               lam0sq, eps, trap.drive_frequency, t, state.as_array()))


def equilibrium_width(params: ModelParams, lam0: float = 1.0) -> float:
    """Positive root of ``lam0^2 v^5 - v - P`` (or the barrier variant's analogue)."""
    P = params.interaction
    if not lam0 > 0:
        raise ValueError("lam0 must be positive")
    lam2 = lam0 * lam0
    if params.barrier is Barrier.INVERSE_CUBE:
        return ((1.0 + P) / lam2) ** 0.25
    if params.barrier is Barrier.INVERSE_QUARTIC:
        return ((1.0 + P) / lam2) ** 0.2

    def f(v):
        return lam2 * v**5 - v - P

    lo = max(P ** 0.2 / lam0 ** 0.4, 1e-6)
    hi = (1.0 + P) ** 0.2 / lam0 ** 0.4 + 2.0
    while f(hi) <= 0:  # only for very weak traps
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def linearized_frequency(params: ModelParams, lam0: float = 1.0) -> float:
    """Small-oscillation frequency of the radial model about its equilibrium."""
    v = equilibrium_width(params, lam0)
    P = params.interaction
    if params.barrier is Barrier.FULL:
        stiff = 3.0 / v**4 + 4.0 * P / v**5
    elif params.barrier is Barrier.INVERSE_CUBE:
        stiff = 3.0 * (1.0 + P) / v**4
    else:
        stiff = 4.0 * (1.0 + P) / v**5
    return math.sqrt(lam0 * lam0 + stiff)


def equilibrium_widths_3d(params: ModelParams, base_strengths) -> np.ndarray:
    """Stationary widths of the anisotropic model for a static trap."""
    from scipy.optimize import fsolve

    lam2 = np.asarray(base_strengths, dtype=float) ** 2
    P = params.interaction
    if np.allclose(lam2, lam2[0]):
        return np.full(3, equilibrium_width(params, math.sqrt(lam2[0])))

    def resid(logv):
        v = np.exp(logv)
        return lam2 * v - 1.0 / v**3 - P / (v * np.prod(v))

    guess = np.log([equilibrium_width(params, math.sqrt(l)) for l in lam2])
    sol, info, ier, msg = fsolve(resid, guess, full_output=True, xtol=1e-14)
    if ier != 1:
        raise RuntimeError(f"3D equilibrium did not converge: {msg}")
    return np.exp(sol)


def fold_to_width(u):
    """Map a Mathieu coordinate onto the impact-oscillator width, ``v = |u|``."""
    return np.abs(u)
