"""Crank-Nicolson solver for the dimensionless Gross-Pitaevskii equation.

Two geometries share one tridiagonal core:

* ``radial3d`` -- spherically symmetric 3D condensate.  The solver works on
  ``chi = r psi`` so the radial Laplacian becomes a plain second difference
  with ``chi(0) = chi(R) = 0``; ``|psi|^2 = |chi|^2 / r^2``.
* ``cartesian1d`` -- a 1D cloud on ``[-R, R]`` with Dirichlet ends, used for
  the exact centre-of-mass test.

Units: lengths in a0, time in 1/nu, ``psi`` normalised to one.  The radial
nonlinearity that reproduces the variational width equation is
``g = (2 pi)^{3/2} P``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .models import ModelParams, TrapModulation, equilibrium_width

GEOMETRIES = ("radial3d", "cartesian1d")


class GpeError(RuntimeError):
    def __init__(self, message, run=None):
        super().__init__(message)
        self.run = run


class DomainEscapeError(GpeError):
    """Density reached the edge of the grid."""


class NormDriftError(GpeError):
    """Cumulative norm drift exceeded the allowed budget."""


class ConvergenceError(GpeError):
    pass


def nonlinearity_from_interaction(P: float) -> float:
    return (2.0 * math.pi) ** 1.5 * P


@dataclass(frozen=True)
class GpeConfig:
    geometry: str = "radial3d"
    extent: float = 16.0
    points: int = 2048
    dt: float = 1e-3
    nonlinearity: float = 0.0
    trap: TrapModulation = field(default_factory=TrapModulation)
    channel: int = 0
    output_interval: float = 0.05
    corrector_sweeps: int = 1
    escape_cells: int = 5
    escape_density: float = 1e-8
    norm_budget: float = 1e-8

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}")
        if not self.extent > 0:
            raise ValueError("extent must be positive")
        if self.points < 256:
            raise ValueError("need at least 256 grid points")
        if not (0 < self.dt <= 1e-2):
            raise ValueError("dt must lie in (0, 1e-2]")
        if self.nonlinearity < 0:
            raise ValueError("nonlinearity must be >= 0")
        if self.corrector_sweeps < 1:
            raise ValueError("corrector_sweeps must be >= 1")

    @classmethod
    def for_model(cls, params: ModelParams, trap: TrapModulation | None = None,
                  expected_max_width: float | None = None, **kw) -> "GpeConfig":
        """Radial configuration with ``g = (2 pi)^{3/2} P`` and ``R = 8 max(width, v*)``."""
        vstar = equilibrium_width(params)
        extent = 8.0 * max(expected_max_width or 0.0, vstar)
        kw.setdefault("extent", extent)
        return cls(geometry="radial3d", nonlinearity=nonlinearity_from_interaction(params.interaction),
                   trap=trap or TrapModulation(), **kw)

    @property
    def spacing(self) -> float:
        span = self.extent if self.geometry == "radial3d" else 2.0 * self.extent
        return span / self.points

    def grid(self) -> np.ndarray:
        if self.geometry == "radial3d":
            return np.linspace(0.0, self.extent, self.points + 1)
        return np.linspace(-self.extent, self.extent, self.points + 1)

    def replace(self, **kw) -> "GpeConfig":
        return replace(self, **kw)


@dataclass
class WaveField:
    """Field on the full grid including the zero boundary values.

    For ``radial3d`` the stored amplitudes are ``chi = r psi``.
    """

    values: np.ndarray
    geometry: str
    grid: np.ndarray
    time: float = 0.0

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def radial(self) -> bool:
        return self.geometry == "radial3d"

    def psi(self) -> np.ndarray:
        if not self.radial:
            return self.values.copy()
        out = np.empty_like(self.values)
        out[1:] = self.values[1:] / self.grid[1:]
        out[0] = self.values[1] / self.grid[1]
        return out

    def density(self) -> np.ndarray:
        return np.abs(self.psi()) ** 2

    def _integrate(self, f) -> float:
        # end points carry zero amplitude, so the rectangle and trapezoid rules agree
        h = self.spacing
        if self.radial:
            return float(4.0 * math.pi * h * np.sum(f * np.abs(self.values) ** 2))
        return float(h * np.sum(f * np.abs(self.values) ** 2))

    def norm(self) -> float:
        return self._integrate(1.0)

    def mean_square(self) -> float:
        """``<r^2>`` (radial) or ``<x^2>`` (cartesian)."""
        return self._integrate(self.grid ** 2)

    def width(self) -> float:
        return math.sqrt(self.mean_square())

    def mean_position(self) -> float:
        if self.radial:
            return 0.0
        return self._integrate(self.grid)

    def energy(self, trap_strength: float, g: float) -> float:
        """Discrete energy consistent with the Crank-Nicolson Hamiltonian."""
        h = self.spacing
        u = self.values
        kin = 0.5 * np.sum(np.abs(np.diff(u)) ** 2) / h
        a2 = np.abs(u[1:-1]) ** 2
        x2 = self.grid[1:-1] ** 2
        pot = 0.5 * trap_strength * h * np.sum(x2 * a2)
        if self.radial:
            inter = 0.5 * g * h * np.sum(a2 * a2 / x2)
            return float(4.0 * math.pi * (kin + pot + inter))
        inter = 0.5 * g * h * np.sum(a2 * a2)
        return float(kin + pot + inter)

    def chemical_potential(self, trap_strength: float, g: float) -> float:
        h = self.spacing
        u = self.values
        kin = 0.5 * np.sum(np.abs(np.diff(u)) ** 2) / h
        a2 = np.abs(u[1:-1]) ** 2
        x2 = self.grid[1:-1] ** 2
        pot = 0.5 * trap_strength * h * np.sum(x2 * a2)
        w = 1.0 / x2 if self.radial else 1.0
        inter = g * h * np.sum(a2 * a2 * w)
        scale = 4.0 * math.pi if self.radial else 1.0
        return float(scale * (kin + pot + inter) / self.norm())

    def normalized(self) -> "WaveField":
        return WaveField(self.values / math.sqrt(self.norm()), self.geometry, self.grid, self.time)

    def copy(self) -> "WaveField":
        return WaveField(self.values.copy(), self.geometry, self.grid, self.time)


def gaussian_overlap(field: WaveField) -> float:
    """Weight of the amplitude profile on a Gaussian of the same rms size.

    Returns 1 for a Gaussian cloud; values below one measure how much of the
    cloud lives in other (higher) modes.
    """
    amp = np.abs(field.psi())
    x = field.grid
    if field.radial:
        w2 = 2.0 * field.mean_square() / 3.0
        gauss = np.exp(-x ** 2 / (2.0 * w2)) / (math.pi * w2) ** 0.75
        ov = 4.0 * math.pi * field.spacing * np.sum(x ** 2 * amp * gauss)
    else:
        mu = field.mean_position()
        w2 = 2.0 * (field.mean_square() - mu * mu)
        gauss = np.exp(-(x - mu) ** 2 / (2.0 * w2)) / (math.pi * w2) ** 0.25
        ov = field.spacing * np.sum(amp * gauss)
    return float(ov ** 2)


# -- tridiagonal core ------------------------------------------------------------

@numba.njit(cache=True)
def _recip(z):
    # one real division instead of numba's branchy complex division
    s = 1.0 / (z.real * z.real + z.imag * z.imag)
    return complex(z.real * s, -z.imag * s)


@numba.njit(cache=True)
def _thomas(diag, off, rhs, out, cp, dp):
    """Solve a symmetric tridiagonal system with constant off-diagonal ``off``.

    ``cp`` and ``dp`` are caller-provided work arrays of the system size.
    """
    n = diag.size
    inv = _recip(diag[0])
    cp[0] = off * inv
    dp[0] = rhs[0] * inv
    for i in range(1, n):
        inv = _recip(diag[i] - off * cp[i - 1])
        cp[i] = off * inv
        dp[i] = (rhs[i] - off * dp[i - 1]) * inv
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]


@numba.njit(cache=True)
def _cn_steps(u, x2, w, lam0sq, eps, omega, t, g, h, dt, nsteps, sweeps, imaginary, shift=0.0):
    """Advance the interior amplitudes ``u`` by ``nsteps`` steps in place.

    Real time: ``(1 + i dt/2 H) u' = (1 - i dt/2 H) u`` with the density in
    ``H`` taken at the step midpoint (predictor plus ``sweeps`` corrector
    passes).  Imaginary time drops the ``i`` and uses the old density.
    ``shift`` is subtracted from the diagonal; it only changes the global
    phase but keeps the Crank-Nicolson phase error, which grows with the
    square of the energy measured from zero, small for strongly interacting
    clouds.  Returns (new time, largest corrector change).
    """
    n = u.size
    kin_d = 1.0 / (h * h)
    kin_o = -0.5 / (h * h)
    fac = dt + 0j if imaginary else 0.5j * dt
    off = fac * kin_o
    diag = np.empty(n, dtype=np.complex128)
    rhs = np.empty(n, dtype=np.complex128)
    new = np.empty(n, dtype=np.complex128)
    prev = np.empty(n, dtype=np.complex128)
    rho_old = np.empty(n)
    cp = np.empty(n, dtype=np.complex128)
    dp = np.empty(n, dtype=np.complex128)
    resid = 0.0
    for step in range(nsteps):
        lam2 = lam0sq * (1.0 + eps * math.cos(omega * (t + 0.5 * dt)))
        for i in range(n):
            rho_old[i] = (u[i].real ** 2 + u[i].imag ** 2) * w[i]
        passes = 1 if imaginary else 1 + sweeps
        for p in range(passes):
            for i in range(n):
                if p == 0:
                    rho = rho_old[i]
                else:
                    rho = 0.5 * (rho_old[i] + (new[i].real ** 2 + new[i].imag ** 2) * w[i])
                hd = kin_d + 0.5 * lam2 * x2[i] + g * rho - shift
                diag[i] = 1.0 + fac * hd
                if imaginary:
                    rhs[i] = u[i]
                    continue
                r = (1.0 - fac * hd) * u[i]
                if i > 0:
                    r -= off * u[i - 1]
                if i < n - 1:
                    r -= off * u[i + 1]
                rhs[i] = r
            if p > 0:
                for i in range(n):
                    prev[i] = new[i]
            _thomas(diag, off, rhs, new, cp, dp)
            if p > 0 and p == passes - 1:
                d = 0.0
                for i in range(n):
                    dd = abs(new[i] - prev[i])
                    if dd > d:
                        d = dd
                if d > resid:
                    resid = d
        for i in range(n):
            u[i] = new[i]
        t += dt
    return t, resid


def _weights(field_: WaveField):
    x = field_.grid[1:-1]
    x2 = np.ascontiguousarray(x * x)
    w = 1.0 / x2 if field_.radial else np.ones_like(x2)
    return x2, np.ascontiguousarray(w)


def _check_field(field_: WaveField, config: GpeConfig):
    if field_.geometry != config.geometry or field_.grid.size != config.points + 1:
        raise ValueError("field does not live on this configuration's grid")


def gaussian_field(config: GpeConfig, width: float = 1.0, center: float = 0.0) -> WaveField:
    """Normalised Gaussian ``exp(-x^2 / (2 width^2))``."""
    x = config.grid()
    psi = np.exp(-(x - center) ** 2 / (2.0 * width ** 2)).astype(np.complex128)
    vals = x * psi if config.geometry == "radial3d" else psi
    vals[0] = vals[-1] = 0.0
    return WaveField(vals, config.geometry, x).normalized()


def ground_state(config: GpeConfig, tol: float = 1e-10, imaginary_dt: float = 1e-2,
                 max_steps: int = 1_000_000, guess: WaveField | None = None) -> WaveField:
    """Imaginary-time relaxation in the static trap of ``config``."""
    ch = config.channel
    lam0sq = config.trap.base_strengths[ch] ** 2
    g = config.nonlinearity
    if guess is None:
        if config.geometry == "radial3d":
            P = g / (2.0 * math.pi) ** 1.5
            width = equilibrium_width(ModelParams(P), math.sqrt(lam0sq))
        else:
            width = max(1.0 / math.sqrt(math.sqrt(lam0sq)), 0.5 * (1.5 * g / lam0sq) ** (1 / 3))
        guess = gaussian_field(config, width)
    _check_field(guess, config)
    fld = guess.normalized()
    x2, w = _weights(fld)
    u = np.ascontiguousarray(fld.values[1:-1].astype(np.complex128))
    h = fld.spacing
    mu_old = fld.chemical_potential(lam0sq, g)
    # mu is stationary to second order in the state error, so the state change is tested as well
    for _ in range(max_steps):
        prev = u.copy()
        _cn_steps(u, x2, w, lam0sq, 0.0, 0.0, 0.0, g, h, imaginary_dt, 1, 1, True)
        u /= math.sqrt((4.0 * math.pi if fld.radial else 1.0) * h * np.sum(np.abs(u) ** 2))
        fld.values[1:-1] = u
        mu = fld.chemical_potential(lam0sq, g)
        d_mu = abs(mu - mu_old)
        d_u = float(np.max(np.abs(u - prev)))
        if d_mu < tol and d_u < tol:
            fld.values[1:-1] = u.real  # ground state is real up to a global phase
            return fld.normalized()
        mu_old = mu
    raise ConvergenceError(f"imaginary-time relaxation did not converge; last mu change {d_mu:.3e}, "
                           f"state change {d_u:.3e}")


def dilate(field_: WaveField, factor: float) -> WaveField:
    """Rescale the cloud size by ``factor`` (norm preserved)."""
    x = field_.grid
    psi = field_.psi()
    src = x / factor
    new_psi = np.interp(src, x, psi.real) + 1j * np.interp(src, x, psi.imag)
    vals = x * new_psi if field_.radial else new_psi
    vals[0] = vals[-1] = 0.0
    return WaveField(vals.astype(np.complex128), field_.geometry, x, field_.time).normalized()


def displace(field_: WaveField, d: float) -> WaveField:
    """Rigid translation ``psi(x) -> psi(x - d)`` (cartesian only)."""
    from scipy.interpolate import CubicSpline

    if field_.radial:
        raise ValueError("a radial field cannot be displaced")
    x = field_.grid
    re = CubicSpline(x, field_.values.real)(x - d, extrapolate=False)
    im = CubicSpline(x, field_.values.imag)(x - d, extrapolate=False)
    vals = np.nan_to_num(re) + 1j * np.nan_to_num(im)
    vals[0] = vals[-1] = 0.0
    return WaveField(vals, field_.geometry, x, field_.time).normalized()


@dataclass
class GpeRun:
    times: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    width: list = field(default_factory=list)
    mean_position: list = field(default_factory=list)
    overlap: list = field(default_factory=list)
    corrector_residual: float = 0.0
    snapshots: list = field(default_factory=list)
    status: str = "completed"
    final: WaveField | None = None

    def as_arrays(self) -> dict:
        return {k: np.asarray(getattr(self, k)) for k in
                ("times", "norm", "energy", "width", "mean_position", "overlap")}


def _escaped(fld: WaveField, config: GpeConfig) -> bool:
    rho = fld.density()
    k = config.escape_cells + 1
    edge = rho[-k:-1]
    if not fld.radial:
        edge = np.concatenate([edge, rho[1:k]])
    return bool(np.max(edge) > config.escape_density)


def evolve(field_: WaveField, config: GpeConfig, tau_end: float, snapshot_every: float | None = None,
           track_overlap: bool = False) -> GpeRun:
    """Real-time evolution, recording observables every ``output_interval``.

    Raises :class:`DomainEscapeError` or :class:`NormDriftError` with the
    partial :class:`GpeRun` attached as ``run``.
    """
    _check_field(field_, config)
    n0 = field_.norm()
    if abs(n0 - 1.0) > 1e-8:
        raise ValueError(f"field must be normalised (norm={n0})")
    ch = config.channel
    trap = config.trap
    lam0sq = trap.base_strengths[ch] ** 2
    eps = trap.amplitudes[ch]
    omega = trap.drive_frequency
    g = config.nonlinearity
    fld = field_.copy()
    x2, w = _weights(fld)
    u = np.ascontiguousarray(fld.values[1:-1].astype(np.complex128))
    h = fld.spacing
    per_record = max(1, int(round(config.output_interval / config.dt)))
    total = int(round((tau_end - fld.time) / config.dt))
    snap_stride = None
    if snapshot_every:
        snap_stride = max(1, int(round(snapshot_every / (per_record * config.dt))))
    # gauge shift: measure energies from the initial chemical potential
    shift = fld.chemical_potential(lam0sq * (1.0 + eps * math.cos(omega * fld.time)), g)
    run = GpeRun()

    def record(k):
        lam2 = lam0sq * (1.0 + eps * math.cos(omega * fld.time))
        run.times.append(fld.time)
        run.norm.append(fld.norm())
        run.energy.append(fld.energy(lam2, g))
        run.width.append(fld.width())
        run.mean_position.append(fld.mean_position())
        if track_overlap:
            run.overlap.append(gaussian_overlap(fld))
        if snap_stride and k % snap_stride == 0:
            run.snapshots.append(fld.copy())

    record(0)
    done = 0
    k = 0
    t = fld.time
    while done < total:
        n = min(per_record, total - done)
        t, resid = _cn_steps(u, x2, w, lam0sq, eps, omega, t, g, h, config.dt, n,
                             config.corrector_sweeps, False, shift)
        done += n
        k += 1
        # accumulate times from the integer step count to avoid drift
        fld.time = field_.time + done * config.dt
        t = fld.time
        fld.values[1:-1] = u
        run.corrector_residual = max(run.corrector_residual, resid)
        record(k)
        if abs(run.norm[-1] - n0) > config.norm_budget:
            run.status = "norm_drift"
            run.final = fld
            raise NormDriftError(f"norm drifted by {run.norm[-1] - n0:.3e} at t={fld.time}", run)
        if _escaped(fld, config):
            run.status = "escaped"
            run.final = fld
            raise DomainEscapeError(f"density reached the grid edge at t={fld.time:.3f}", run)
    run.final = fld
    return run


# -- centre of mass -------------------------------------------------------------------

@dataclass
class ComCheck:
    times: np.ndarray
    pde: np.ndarray
    ode: np.ndarray
    max_deviation: float
    escaped: bool
    window: float = 2.0 * math.pi

    def envelopes(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-window maxima of ``|<x>|`` for the PDE and the ODE reference."""
        idx = np.floor((self.times - self.times[0]) / self.window).astype(int)
        n = idx.max() + 1 if idx.size else 0
        pde = np.zeros(n)
        ode = np.zeros(n)
        np.maximum.at(pde, idx, np.abs(self.pde))
        np.maximum.at(ode, idx, np.abs(self.ode))
        return pde, ode

    def envelope_deviation(self) -> float:
        """Largest relative mismatch of the two envelopes."""
        pde, ode = self.envelopes()
        return float(np.max(np.abs(pde - ode) / ode))

    def amplification(self) -> float:
        pde, _ = self.envelopes()
        return float(pde[-1] / abs(self.pde[0]))


def center_of_mass_check(config: GpeConfig, displacement: float, tau_end: float,
                         ground: WaveField | None = None) -> ComCheck:
    """Compare the PDE centre of mass with the Mathieu equation it must obey."""
    from .integrate import IntegratorConfig, integrate
    from .models import DynamicalState, ModelKind

    if config.geometry != "cartesian1d":
        raise ValueError("centre-of-mass check needs the cartesian1d geometry")
    static = config.replace(trap=config.trap.replace(amplitudes=(0.0, 0.0, 0.0)))
    gs = ground if ground is not None else ground_state(static)
    start = displace(gs, displacement)
    escaped = False
    try:
        run = evolve(start, config, tau_end)
    except DomainEscapeError as exc:
        run = exc.run
        escaped = True
    times = np.asarray(run.times)
    pde = np.asarray(run.mean_position)
    trap1 = config.trap.channel(config.channel)
    ode_cfg = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13)
    if times[-1] > times[0]:
        traj = integrate(ModelKind.CENTER_OF_MASS, ModelParams(0.0), trap1,
                         DynamicalState((displacement,), (0.0,), times[0]), times[-1], ode_cfg,
                         t_eval=times)
        ode = traj.coordinates[:, 0]
    else:
        ode = np.array([displacement])
    window = 2.0 * math.pi / config.trap.base_strengths[config.channel]
    return ComCheck(times, pde, ode, float(np.max(np.abs(pde - ode))), escaped, window)


# -- snapshots ------------------------------------------------------------------------

_MAGIC = b"BECW"
_HEADER = struct.Struct("<4sHBxIdd")  # magic, version, geometry, size, extent, time


def write_snapshot(path, fld: WaveField) -> None:
    """Binary dump: fixed little-endian header then complex128 amplitudes."""
    geo = GEOMETRIES.index(fld.geometry)
    extent = float(fld.grid[-1])
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, geo, fld.values.size, extent, fld.time))
        fh.write(np.ascontiguousarray(fld.values, dtype="<c16").tobytes())


def read_snapshot(path) -> WaveField:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, geo, size, extent, time = _HEADER.unpack(head)
        if magic != _MAGIC or version != 1:
            raise ValueError(f"{path}: not a wave-field snapshot")
        values = np.frombuffer(fh.read(16 * size), dtype="<c16").astype(np.complex128)
    geometry = GEOMETRIES[geo]
    if geometry == "radial3d":
        grid = np.linspace(0.0, extent, size)
    else:
        grid = np.linspace(-extent, extent, size)
    return WaveField(values, geometry, grid, time)


# -- resonance probe --------------------------------------------------------------------

@dataclass
class GpeVerdict:
    omega: float
    eps: float
    verdict: str
    slope: float
    r_squared: float
    escaped: bool
    max_width: float
    duration: float


def classify_gpe_point(omega: float, eps: float, params: ModelParams, tau_max: float = 400.0,
                       offset: float = 0.01, config: GpeConfig | None = None,
                       criteria=None) -> GpeVerdict:
    """Resonance verdict for the radial PDE, judged like the variational model.

    The width is expressed in variational units ``v = sqrt(2 <r^2> / 3)``;
    domain escape counts as resonance.
    """
    from .sweep import GrowthCriteria, judge_series

    criteria = criteria or GrowthCriteria(tau_max=tau_max)
    trap = TrapModulation.isotropic(eps, omega)
    config = config or GpeConfig.for_model(params, trap, expected_max_width=3.0)
    config = config.replace(trap=trap)
    gs = ground_state(config.replace(trap=trap.replace(amplitudes=(0.0, 0.0, 0.0))))
    start = dilate(gs, 1.0 + offset)
    v_ref = math.sqrt(2.0 * gs.mean_square() / 3.0)
    escaped = False
    try:
        run = evolve(start, config.replace(output_interval=2 * math.pi / omega / 8), tau_max)
    except DomainEscapeError as exc:
        run, escaped = exc.run, True
    times = np.asarray(run.times)
    widths = np.sqrt(2.0 * np.asarray(run.width) ** 2 / 3.0)
    # stroboscopic samples: every 8th record is a multiple of the drive period
    stride = 8
    ts, vs = times[::stride], widths[::stride]
    j = judge_series(ts, np.abs(vs - v_ref), escaped, 0.0, criteria)
    return GpeVerdict(omega, eps, j.verdict.value, j.slope, j.r_squared, escaped,
                      float(widths.max()), float(times[-1]))
