"""Adaptive time integration for the width and Mathieu models.

The workhorse is the 7-stage Dormand-Prince 5(4) pair with PI step control and
its 4th-order continuous extension.  Width models get a floor guard: a step
whose stages would push a width below ``width_floor`` is rejected and retried
at half the step.  A run of consecutive rejections hands the integration to
an L-stable two-stage SDIRK method (Newton iteration, finite-difference
Jacobian) until the step size has recovered.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .models import (DynamicalState, ModelKind, ModelParams, TrapModulation,
                     accel_kernel, energy_kernel)

log = logging.getLogger(__name__)

# Dormand & Prince (1980), with the continuous extension from Hairer, Norsett & Wanner.
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
B_HAT = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B - B_HAT
D = np.array([-12715105075 / 11282082432, 0, 87487479700 / 32700410799,
              -10690763975 / 1880347072, 701980252875 / 199316789632,
              -1453857185 / 822651844, 69997945 / 29380423])

# two-stage SDIRK, order 2, L-stable
SD_G = 1.0 - 1.0 / math.sqrt(2.0)
SD_A = np.array([[SD_G, 0.0], [1.0 - SD_G, SD_G]])
SD_C = np.array([SD_G, 1.0])
SD_B = np.array([1.0 - SD_G, SD_G])
SD_BHAT = np.array([0.5, 0.5])

OK, FLOOR_HIT = 0, 1


class IntegrationError(RuntimeError):
    """Integration could not be completed; ``trajectory`` holds what was computed."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-14
    h_max: float = 0.25
    width_floor: float = 1e-4
    stiff_switch_threshold: int = 8
    max_steps: int = 20_000_000

    def __post_init__(self):
        if not (0 < self.h_min <= self.h_init <= self.h_max):
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.width_floor > 0:
            raise ValueError("width_floor must be positive")
        if self.stiff_switch_threshold < 1 or self.max_steps < 1:
            raise ValueError("stiff_switch_threshold and max_steps must be >= 1")

    def with_tolerance(self, rel_tol, abs_tol=None) -> "IntegratorConfig":
        from dataclasses import replace
        return replace(self, rel_tol=rel_tol, abs_tol=rel_tol * 1e-2 if abs_tol is None else abs_tol)


@dataclass
class Diagnostics:
    accepted_steps: int = 0
    rejected_steps: int = 0
    floor_rejections: int = 0
    stiff_steps: int = 0
    max_energy_drift: float = 0.0
    max_coordinate: float = 0.0
    regime_history: list = field(default_factory=list)
    termination: str = "completed"

    @property
    def stiff_fraction(self) -> float:
        return self.stiff_steps / self.accepted_steps if self.accepted_steps else 0.0


@dataclass
class Trajectory:
    """Samples of an integration run.

    ``y`` rows use the state layout ``[q..., p...]``.  When the run was made
    with ``dense=True``, :meth:`sol` evaluates the continuous extension.
    """

    kind: ModelKind
    t: np.ndarray
    y: np.ndarray
    event_times: list = field(default_factory=list)
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    dense: bool = False
    _pieces: tuple | None = None

    @property
    def dimension(self) -> int:
        return self.y.shape[1] // 2

    @property
    def coordinates(self) -> np.ndarray:
        return self.y[:, :self.dimension]

    @property
    def velocities(self) -> np.ndarray:
        return self.y[:, self.dimension:]

    @property
    def final_state(self) -> DynamicalState:
        return DynamicalState.from_array(self.y[-1], self.t[-1])

    def states(self) -> list[DynamicalState]:
        return [DynamicalState.from_array(row, t) for t, row in zip(self.t, self.y)]

    def sol(self, t) -> np.ndarray:
        if self._pieces is None:
            raise ValueError("trajectory was not computed with dense output")
        starts, steps, rconts = self._pieces
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1)
        out = np.empty((t.size, rconts.shape[2]))
        for j, (ti, i) in enumerate(zip(t, idx)):
            out[j] = _dense_eval(rconts[i], (ti - starts[i]) / steps[i])
        return out


# -- kernels -----------------------------------------------------------------

@numba.njit(cache=True)
def _dopri_step(kind, form, P, gamma, lam0sq, eps, omega, t, y, h, k, ynew,
                guard, floor, rtol, atol):
    """One trial step.  ``k[0]`` must hold f(t, y); fills k[1:], ``ynew``.

    Returns (status, scaled error norm).
    """
    n = y.size
    d = n // 2
    tmp = np.empty(n)
    for s in range(1, 7):
        for i in range(n):
            acc = 0.0
            for j in range(s):
                acc += A[s, j] * k[j, i]
            tmp[i] = y[i] + h * acc
        if guard:
            for i in range(d):
                if tmp[i] < floor:
                    return FLOOR_HIT, 0.0
        if not accel_kernel(kind, form, P, gamma, lam0sq, eps, omega, t + C[s] * h, tmp, k[s]):
            return FLOOR_HIT, 0.0
        if s == 6:
            for i in range(n):
                ynew[i] = tmp[i]
    err = 0.0
    for i in range(n):
        e = 0.0
        for j in range(7):
            e += E[j] * k[j, i]
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        err = max(err, abs(h * e / sc))
    return OK, err


@numba.njit(cache=True)
def _dopri_dense(y, ynew, k, h, rc):
    n = y.size
    for i in range(n):
        dy = ynew[i] - y[i]
        bspl = h * k[0, i] - dy
        rc[0, i] = y[i]
        rc[1, i] = dy
        rc[2, i] = bspl
        rc[3, i] = dy - h * k[6, i] - bspl
        acc = 0.0
        for j in range(7):
            acc += D[j] * k[j, i]
        rc[4, i] = h * acc


@numba.njit(cache=True)
def _dense_eval(rc, theta):
    th1 = 1.0 - theta
    return rc[0] + theta * (rc[1] + th1 * (rc[2] + theta * (rc[3] + th1 * rc[4])))


def _hermite_dense(y, ynew, f0, f1, h):
    rc = np.zeros((5, y.size))
    dy = ynew - y
    rc[0] = y
    rc[1] = dy
    rc[2] = h * f0 - dy
    rc[3] = dy - h * f1 - rc[2]
    return rc


# -- driver ------------------------------------------------------------------

class _Problem:
    """Bundles model arguments in the form the kernels want."""

    def __init__(self, kind: ModelKind, params: ModelParams, trap: TrapModulation):
        self.kind = kind
        self.params = params
        self.trap = trap
        self.dim = kind.dimension
        lam0sq, eps = trap.kernel_args(self.dim)
        self.args = (kind.code, params.barrier.code, params.interaction, trap.damping,
                     lam0sq, eps, trap.drive_frequency)
        self.eargs = (kind.code, params.barrier.code, params.interaction, lam0sq, eps,
                      trap.drive_frequency)
        self.guard = kind.is_singular
        self.has_energy = kind in (ModelKind.RADIAL, ModelKind.VARIATIONAL_3D)

    def f(self, t, y, out=None):
        out = np.empty_like(y) if out is None else out
        ok = accel_kernel(*self.args, t, y, out)
        return out if ok else None

    def energy(self, t, y):
        return energy_kernel(*self.eargs, t, y)


class _Stepper:
    """Single-use adaptive stepper.  ``advance`` performs one accepted step."""

    SAFETY, FAC_MIN, FAC_MAX, BETA = 0.8, 0.2, 10.0, 0.04

    def __init__(self, problem: _Problem, t0, y0, t_end, config: IntegratorConfig):
        self.p = problem
        self.cfg = config
        self.t = float(t0)
        self.y = np.array(y0, dtype=float)
        self.t_end = float(t_end)
        self.h = min(config.h_init, config.h_max, max(self.t_end - self.t, config.h_min))
        self.k = np.zeros((7, self.y.size))
        self.diag = Diagnostics()
        self.err_old = 1e-4
        self.stiff = False
        self.h_switch = 0.0
        self.consecutive_rejects = 0
        self.e0 = problem.energy(self.t, self.y) if problem.has_energy else None
        self._reset_derivative()
        # results of the last accepted step
        self.t_old = self.t
        self.y_old = self.y.copy()
        self.rcont = None

    def _reset_derivative(self):
        if self.p.f(self.t, self.y, self.k[0]) is None:
            raise IntegrationError(f"state at t={self.t} lies outside the model domain")

    def restart(self, t, y):
        """Continue from a new state (after an event), keeping the step size."""
        self.t = float(t)
        self.y = np.array(y, dtype=float)
        self.err_old = 1e-4
        self._reset_derivative()

    def _fail(self, msg):
        raise IntegrationError(msg)

    def advance(self):
        cfg = self.cfg
        while True:
            if self.diag.accepted_steps + self.diag.rejected_steps >= cfg.max_steps:
                self.diag.termination = "max_steps"
                self._fail(f"max_steps={cfg.max_steps} exceeded at t={self.t}")
            h = min(self.h, self.t_end - self.t)
            if self.stiff:
                accepted = self._try_sdirk(h)
            else:
                accepted = self._try_dopri(h)
            if accepted:
                self.consecutive_rejects = 0
                return
            self.consecutive_rejects += 1
            if not self.stiff and (self.consecutive_rejects >= cfg.stiff_switch_threshold
                                   or self.h < cfg.h_min):
                self.stiff = True
                self.h_switch = max(self.h, cfg.h_min)
                self.h = max(self.h, cfg.h_min)
                self.diag.regime_history.append((self.t, "implicit"))
                self.consecutive_rejects = 0
                log.debug("switching to implicit stepping at t=%g", self.t)
            elif self.stiff and self.h < cfg.h_min:
                self.diag.termination = "step_underflow"
                self._fail(f"step size underflow (h={self.h:.3e}) at t={self.t}")

    def _accept(self, ynew, h, rc):
        self.t_old, self.y_old = self.t, self.y
        self.t = self.t + h
        if self.t_end - self.t < 1e-14 * max(1.0, abs(self.t_end)):
            self.t = self.t_end
        self.y = ynew
        self.rcont = rc
        self.diag.accepted_steps += 1
        if self.p.has_energy and self.e0:
            drift = abs(self.p.energy(self.t, ynew) - self.e0) / abs(self.e0)
            if drift > self.diag.max_energy_drift:
                self.diag.max_energy_drift = drift

    def _reject(self, factor):
        self.diag.rejected_steps += 1
        self.h *= factor

    def _try_dopri(self, h):
        cfg = self.cfg
        ynew = np.empty_like(self.y)
        status, err = _dopri_step(*self.p.args, self.t, self.y, h, self.k, ynew,
                                  self.p.guard, cfg.width_floor, cfg.rel_tol, cfg.abs_tol)
        if status == FLOOR_HIT:
            self.diag.floor_rejections += 1
            self._reject(0.5)
            return False
        if not np.isfinite(err):
            self._reject(0.25)
            return False
        if err <= 1.0:
            # PI controller (Hairer's dopri5)
            expo = 0.2 - self.BETA * 0.75
            fac = err ** expo / self.err_old ** self.BETA if err > 0 else 1.0 / self.FAC_MAX
            fac = min(1.0 / self.FAC_MIN, max(1.0 / self.FAC_MAX, fac / self.SAFETY))
            self.err_old = max(err, 1e-4)
            rc = np.empty((5, ynew.size))
            _dopri_dense(self.y, ynew, self.k, h, rc)
            self._accept(ynew, h, rc)
            self.k[0] = self.k[6]
            self.h = min(h / fac, cfg.h_max)
            return True
        fac = min(1.0 / self.FAC_MIN, err ** 0.2 / self.SAFETY)
        self._reject(1.0 / fac)
        self.h = min(self.h, h / fac)
        return False

    def _jacobian(self, t, y, f0):
        n = y.size
        J = np.empty((n, n))
        for j in range(n):
            dy = 1e-7 * max(1.0, abs(y[j]))
            yp = y.copy()
            yp[j] += dy
            fp = self.p.f(t, yp)
            if fp is None:
                yp[j] = y[j] - dy
                fp = self.p.f(t, yp)
                if fp is None:
                    return None
                dy = -dy
            J[:, j] = (fp - f0) / dy
        return J

    def _try_sdirk(self, h):
        cfg = self.cfg
        y, t, n = self.y, self.t, self.y.size
        f0 = self.k[0].copy()
        J = self._jacobian(t, y, f0)
        if J is None:
            self.diag.floor_rejections += 1
            self._reject(0.5)
            return False
        M = np.eye(n) - h * SD_G * J
        try:
            lu = np.linalg.inv(M)
        except np.linalg.LinAlgError:
            self._reject(0.5)
            return False
        ks = []
        d = self.p.dim
        for i in range(2):
            base = y + h * sum(SD_A[i, j] * ks[j] for j in range(i)) if i else y.copy()
            z = base + h * SD_G * f0  # explicit predictor
            converged = False
            for _ in range(12):
                if self.p.guard and np.any(z[:d] < cfg.width_floor):
                    break
                fz = self.p.f(t + SD_C[i] * h, z)
                if fz is None:
                    break
                res = z - h * SD_G * fz - base
                dz = -lu @ res
                z = z + dz
                if np.sqrt(np.mean((dz / (cfg.abs_tol + cfg.rel_tol * np.abs(z))) ** 2)) < 1e-3:
                    converged = True
                    break
            if not converged:
                self.diag.floor_rejections += 1
                self._reject(0.5)
                return False
            if self.p.guard and np.any(z[:d] < cfg.width_floor):
                self.diag.floor_rejections += 1
                self._reject(0.5)
                return False
            fz = self.p.f(t + SD_C[i] * h, z)
            if fz is None:
                self._reject(0.5)
                return False
            ks.append(fz)
        ynew = y + h * (SD_B[0] * ks[0] + SD_B[1] * ks[1])
        errv = h * ((SD_B[0] - SD_BHAT[0]) * ks[0] + (SD_B[1] - SD_BHAT[1]) * ks[1])
        sc = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(ynew))
        err = float(np.sqrt(np.mean((errv / sc) ** 2)))
        fac = min(5.0, max(0.2, self.SAFETY * (1.0 / max(err, 1e-10)) ** 0.5))
        if err > 1.0:
            self._reject(fac)
            return False
        f1 = self.p.f(t + h, ynew)
        if f1 is None:
            self._reject(0.5)
            return False
        rc = _hermite_dense(y, ynew, f0, f1, h)
        self._accept(ynew, h, rc)
        self.k[0] = f1
        self.diag.stiff_steps += 1
        self.h = min(h * fac, cfg.h_max)
        if self.h >= 10.0 * self.h_switch:
            self.stiff = False
            self.err_old = 1e-4
            self.diag.regime_history.append((self.t, "explicit"))
        return True

    def interpolate(self, t):
        """State at ``t`` inside the last accepted step."""
        h = self.t - self.t_old
        if h <= 0:
            return self.y.copy()
        return _dense_eval(self.rcont, (t - self.t_old) / h)


class _Recorder:
    def __init__(self, t_eval, keep_dense):
        self.t_eval = None if t_eval is None else np.asarray(t_eval, dtype=float)
        self.next = 0
        self.ts, self.ys = [], []
        self.keep_dense = keep_dense
        self.pieces = ([], [], [])

    def start(self, t0, y0):
        if self.t_eval is None:
            self.ts.append(t0)
            self.ys.append(y0.copy())
        else:
            self.flush_upto(t0, lambda t: y0)

    def flush_upto(self, t_hi, interp, inclusive=True):
        te = self.t_eval
        while self.next < te.size and (te[self.next] < t_hi or (inclusive and te[self.next] == t_hi)):
            self.ts.append(te[self.next])
            self.ys.append(np.array(interp(te[self.next])))
            self.next += 1

    def step(self, st: _Stepper):
        if self.t_eval is None:
            self.ts.append(st.t)
            self.ys.append(st.y.copy())
        else:
            self.flush_upto(st.t, st.interpolate)
        if self.keep_dense:
            self.pieces[0].append(st.t_old)
            self.pieces[1].append(st.t - st.t_old)
            self.pieces[2].append(st.rcont)

    def build(self, kind, diag, events=()):
        n = len(self.ts)
        y = np.array(self.ys) if n else np.empty((0, 2 * kind.dimension))
        pieces = None
        if self.keep_dense and self.pieces[0]:
            pieces = (np.array(self.pieces[0]), np.array(self.pieces[1]), np.array(self.pieces[2]))
        return Trajectory(kind, np.array(self.ts), y, list(events), diag, self.keep_dense, pieces)


def _validate(kind, state0, tau_end):
    if state0.dimension != kind.dimension:
        raise ValueError(f"{kind.value} expects dimension {kind.dimension}, got {state0.dimension}")
    if not tau_end > state0.time:
        raise ValueError("tau_end must exceed the initial time")
    if kind.is_singular and any(q <= 0 for q in state0.coordinates):
        raise ValueError("initial widths must be positive")


def integrate(kind: ModelKind, params: ModelParams, trap: TrapModulation,
              state0: DynamicalState, tau_end: float, config: IntegratorConfig | None = None,
              t_eval=None, dense=False, stop_above: float | None = None) -> Trajectory:
    """Integrate ``kind`` from ``state0`` to ``tau_end``.

    Without ``t_eval`` every accepted step is recorded; otherwise the dense
    output is sampled at the given times.  ``stop_above`` ends the run early
    (``termination == "threshold"``) once any coordinate exceeds it in
    magnitude.
    """
    config = config or IntegratorConfig()
    _validate(kind, state0, tau_end)
    problem = _Problem(kind, params, trap)
    rec = _Recorder(t_eval, dense)
    y0 = state0.as_array()
    rec.start(state0.time, y0)
    st = _Stepper(problem, state0.time, y0, tau_end, config)
    st.diag.max_coordinate = float(np.max(np.abs(y0[:kind.dimension])))
    d = kind.dimension
    try:
        while st.t < tau_end:
            st.advance()
            rec.step(st)
            peak = np.max(np.abs(st.y[:d]))
            if peak > st.diag.max_coordinate:
                st.diag.max_coordinate = float(peak)
            if stop_above is not None and peak > stop_above:
                st.diag.termination = "threshold"
                break
    except IntegrationError as exc:
        exc.trajectory = rec.build(kind, st.diag)
        raise
    return rec.build(kind, st.diag)


def integrate_with_bounce(params: ModelParams, trap: TrapModulation, state0: DynamicalState,
                          tau_end: float, config: IntegratorConfig | None = None,
                          t_eval=None, dense=False, max_events: int = 1_000_000) -> Trajectory:
    """Impact oscillator: linear flight with elastic reflection at ``v = 0``."""
    config = config or IntegratorConfig()
    kind = ModelKind.IMPACT_OSCILLATOR
    _validate(kind, state0, tau_end)
    v0, w0 = state0.coordinates[0], state0.velocities[0]
    if v0 < 0 or (v0 == 0 and w0 <= 0):
        raise ValueError("impact oscillator needs v(0) > 0, or v(0) = 0 with positive velocity")
    problem = _Problem(kind, params, trap)
    rec = _Recorder(t_eval, dense)
    y0 = state0.as_array()
    rec.start(state0.time, y0)
    st = _Stepper(problem, state0.time, y0, tau_end, config)
    events = []
    try:
        while st.t < tau_end:
            st.advance()
            if st.y[0] < 0.0:
                tc, yc = _locate_zero(st)
                # keep the part of the step before the impact
                if rec.t_eval is not None:
                    rec.flush_upto(tc, st.interpolate, inclusive=False)
                    rec.flush_upto(tc, lambda t: np.array([0.0, -yc[1]]))
                else:
                    rec.ts.append(tc)
                    rec.ys.append(np.array([0.0, -yc[1]]))
                if rec.keep_dense:
                    _keep_partial_piece(rec, st, tc)
                events.append(tc)
                if len(events) > max_events:
                    st.diag.termination = "chattering"
                    raise IntegrationError(f"more than {max_events} impacts; chattering")
                st.restart(tc, np.array([0.0, -yc[1]]))
                if tc >= tau_end:
                    break
                continue
            rec.step(st)
    except IntegrationError as exc:
        exc.trajectory = rec.build(kind, st.diag, events)
        raise
    return rec.build(kind, st.diag, events)


def _locate_zero(st: _Stepper, tol=1e-12):
    """Bisect the dense output of the last step for the sign change of v."""
    lo, hi = st.t_old, st.t
    ylo = st.y_old
    if ylo[0] == 0.0:
        # left a bounce moving up and came straight back down within one step
        lo = lo + 1e-15 * max(1.0, abs(lo))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ym = st.interpolate(mid)
        if abs(ym[0]) < tol and ym[1] < 0:
            return mid, ym
        if ym[0] > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * max(1.0, abs(hi)):
            break
    ym = st.interpolate(hi)
    return hi, ym


def _keep_partial_piece(rec, st, tc):
    h = st.t - st.t_old
    if tc <= st.t_old:
        return
    # re-express the truncated step as a Hermite piece on [t_old, tc]
    y_a = st.y_old
    y_b = st.interpolate(tc)
    eps = 1e-7 * h
    fa = (st.interpolate(st.t_old + eps) - y_a) / eps
    fb = (y_b - st.interpolate(tc - eps)) / eps
    rec.pieces[0].append(st.t_old)
    rec.pieces[1].append(tc - st.t_old)
    rec.pieces[2].append(_hermite_dense(y_a, y_b, fa, fb, tc - st.t_old))


def stroboscopic_times(t0, omega, n_periods) -> np.ndarray:
    return t0 + np.arange(n_periods + 1) * (2.0 * math.pi / omega)


def stroboscopic_map(kind: ModelKind, params: ModelParams, trap: TrapModulation,
                     state0: DynamicalState, n_periods: int,
                     config: IntegratorConfig | None = None) -> list[DynamicalState]:
    """States at ``t0 + n 2 pi / omega`` for ``n = 0..n_periods`` (dense output)."""
    if not trap.drive_frequency > 0:
        raise ValueError("stroboscopic sampling needs a positive drive frequency")
    times = stroboscopic_times(state0.time, trap.drive_frequency, n_periods)
    if kind is ModelKind.IMPACT_OSCILLATOR:
        traj = integrate_with_bounce(params, trap, state0, times[-1], config, t_eval=times)
    else:
        traj = integrate(kind, params, trap, state0, times[-1], config, t_eval=times)
    return traj.states()


def iter_stroboscopic(kind: ModelKind, params: ModelParams, trap: TrapModulation,
                      state0: DynamicalState, config: IntegratorConfig | None = None,
                      max_periods: int = 100_000):
    """Yield stroboscopic states one drive period at a time (lazy, open-ended)."""
    config = config or IntegratorConfig()
    period = trap.period
    t0 = state0.time
    t_end = t0 + max_periods * period
    st = _Stepper(_Problem(kind, params, trap), t0, state0.as_array(), t_end, config)
    yield state0
    for n in range(1, max_periods + 1):
        target = t0 + n * period
        while st.t < target:
            st.advance()
        yield DynamicalState.from_array(st.interpolate(target), target)
