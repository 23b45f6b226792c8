"""Resonance classification of the nonlinear models by direct integration.

A point ``(omega, eps)`` is integrated for ``tau_max`` starting a small offset
away from equilibrium.  The stroboscopic deviation ``a_n = |v(tau_n) - v*|``
is fitted with a straight line in log space over the second half of the run;
a steep enough, clean enough slope (or outright escape) means resonance.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .integrate import (IntegrationError, IntegratorConfig, integrate, integrate_with_bounce,
                        iter_stroboscopic, stroboscopic_times)
from .models import (DynamicalState, ModelKind, ModelParams, TrapModulation,
                     equilibrium_width, equilibrium_widths_3d)

SWEEP_CONFIG = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11, h_init=1e-3, h_max=0.25)


class Verdict(str, enum.Enum):
    STABLE = "stable"
    RESONANT = "resonant"
    LIMIT_CYCLE = "limit_cycle"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class GrowthCriteria:
    tau_max: float = 400.0
    q_thresh: float = 0.005
    r2_min: float = 0.9
    escape_factor: float = 50.0
    cycle_tol: float = 1e-6
    min_periods: int = 10


@dataclass(frozen=True)
class PointSetup:
    """Everything about a sweep cell except ``(omega, eps)``.

    ``drive`` picks the amplitude pattern across the three trap channels:
    ``isotropic`` modulates all of them, ``m0`` and ``m2`` follow the
    usual breathing/quadrupole patterns.  One-dimensional models only see
    the x channel.
    """

    kind: ModelKind = ModelKind.RADIAL
    params: ModelParams = field(default_factory=lambda: ModelParams(9.2))
    damping: float = 0.0
    base_strengths: tuple = (1.0, 1.0, 1.0)
    drive: str = "isotropic"
    initial: DynamicalState | None = None
    offset: float = 0.01
    criteria: GrowthCriteria = field(default_factory=GrowthCriteria)
    integrator: IntegratorConfig = SWEEP_CONFIG

    def __post_init__(self):
        if self.drive not in ("isotropic", "m0", "m2"):
            raise ValueError(f"unknown drive pattern {self.drive!r}")

    def trap(self, omega, eps) -> TrapModulation:
        amps = {"isotropic": (eps, eps, eps), "m0": (eps, eps, 0.0), "m2": (eps, -eps, 0.0)}[self.drive]
        return TrapModulation(tuple(self.base_strengths), amps, omega, self.damping)

    def reference(self) -> np.ndarray:
        """Equilibrium coordinates (zero for the linear models)."""
        if self.kind is ModelKind.VARIATIONAL_3D:
            return equilibrium_widths_3d(self.params, self.base_strengths)
        if self.kind is ModelKind.RADIAL:
            return np.array([equilibrium_width(self.params, self.base_strengths[0])])
        return np.zeros(self.kind.dimension)

    def initial_state(self) -> DynamicalState:
        if self.initial is not None:
            return self.initial
        ref = self.reference()
        if self.kind.is_singular:
            q = ref * (1.0 + self.offset)
        else:
            q = np.ones(self.kind.dimension)
        return DynamicalState(tuple(q), (0.0,) * self.kind.dimension)

    def scale(self) -> float:
        """Length scale used by the escape criterion."""
        if self.kind.is_singular:
            return float(np.max(self.reference()))
        return float(np.max(np.abs(self.initial_state().coordinates)))


@dataclass
class PointVerdict:
    omega: float
    eps: float
    verdict: Verdict
    fitted_exponent: float = float("nan")
    exponent_stderr: float = float("nan")
    r_squared: float = float("nan")
    max_amplitude: float = float("nan")
    cycle_state: tuple | None = None
    channel_verdicts: tuple | None = None
    note: str = ""

    def as_row(self) -> dict:
        row = asdict(self)
        row["verdict"] = self.verdict.value
        if self.channel_verdicts is not None:
            row["channel_verdicts"] = [v.value for v in self.channel_verdicts]
        return row

    @classmethod
    def from_row(cls, row: dict) -> "PointVerdict":
        row = dict(row)
        row["verdict"] = Verdict(row["verdict"])
        if row.get("channel_verdicts") is not None:
            row["channel_verdicts"] = tuple(Verdict(v) for v in row["channel_verdicts"])
        if row.get("cycle_state") is not None:
            row["cycle_state"] = tuple(row["cycle_state"])
        return cls(**row)


@dataclass(frozen=True)
class SeriesJudgement:
    verdict: Verdict
    slope: float
    stderr: float
    r_squared: float


def fit_log_slope(times, amplitudes):
    """Least-squares slope of ``log a`` against time: (slope, stderr, r^2)."""
    t = np.asarray(times, dtype=float)
    a = np.maximum(np.asarray(amplitudes, dtype=float), 1e-300)
    if t.size < 3:
        return float("nan"), float("nan"), float("nan")
    res = stats.linregress(t, np.log(a))
    return float(res.slope), float(res.stderr), float(res.rvalue ** 2)


def judge_series(times, amplitudes, escaped: bool, damping: float, criteria: GrowthCriteria,
                 last_step: float | None = None) -> SeriesJudgement:
    """Apply the growth criteria to a stroboscopic deviation series.

    ``last_step`` is the sup-norm change between the last two stroboscopic
    states; it only matters for the limit-cycle test (damped runs).
    """
    times = np.asarray(times, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    half = times.size // 2
    slope, stderr, r2 = fit_log_slope(times[half:], amplitudes[half:])
    if escaped:
        return SeriesJudgement(Verdict.RESONANT, slope, stderr, r2)
    if np.isfinite(slope) and slope > criteria.q_thresh and r2 > criteria.r2_min:
        return SeriesJudgement(Verdict.RESONANT, slope, stderr, r2)
    if damping > 0 and last_step is not None and last_step < criteria.cycle_tol:
        return SeriesJudgement(Verdict.LIMIT_CYCLE, slope, stderr, r2)
    if not np.isfinite(slope) or slope <= criteria.q_thresh:
        return SeriesJudgement(Verdict.STABLE, slope, stderr, r2)
    return SeriesJudgement(Verdict.INCONCLUSIVE, slope, stderr, r2)


def classify_point(omega: float, eps: float, setup: PointSetup | None = None) -> PointVerdict:
    setup = setup or PointSetup()
    crit = setup.criteria
    trap = setup.trap(omega, eps)
    ref = setup.reference()
    state0 = setup.initial_state()
    d = setup.kind.dimension
    n_periods = int(math.floor(crit.tau_max / trap.period + 1e-9))
    times = stroboscopic_times(state0.time, omega, n_periods)
    escape_at = crit.escape_factor * setup.scale()
    note = ""
    try:
        if setup.kind is ModelKind.IMPACT_OSCILLATOR:
            traj = integrate_with_bounce(setup.params, trap, state0, times[-1], setup.integrator,
                                         t_eval=times)
        else:
            traj = integrate(setup.kind, setup.params, trap, state0, times[-1], setup.integrator,
                             t_eval=times, stop_above=escape_at)
    except IntegrationError as exc:
        traj = exc.trajectory
        note = f"integration failure: {exc}"
        if traj is None or traj.t.size <= crit.min_periods:
            return PointVerdict(omega, eps, Verdict.INCONCLUSIVE, note=note)
    q = traj.coordinates
    dev = np.abs(q - ref)
    peak = max(traj.diagnostics.max_coordinate, float(np.max(np.abs(q))) if q.size else 0.0)
    escaped = peak > escape_at
    last_step = float(np.max(np.abs(traj.y[-1] - traj.y[-2]))) if traj.t.size >= 2 else None
    overall = judge_series(traj.t, dev.max(axis=1), escaped, trap.damping, crit, last_step)
    verdict = overall.verdict
    if note and verdict is not Verdict.RESONANT:
        verdict = Verdict.INCONCLUSIVE
    channels = None
    if d > 1:
        channels = []
        for i in range(d):
            ch_escaped = np.max(np.abs(q[:, i])) > escape_at
            ch_step = float(np.max(np.abs(traj.y[-1, [i, d + i]] - traj.y[-2, [i, d + i]])))
            channels.append(judge_series(traj.t, dev[:, i], ch_escaped, trap.damping, crit,
                                         ch_step).verdict)
        channels = tuple(channels)
    cycle = tuple(traj.y[-1]) if verdict is Verdict.LIMIT_CYCLE else None
    return PointVerdict(float(omega), float(eps), verdict, overall.slope, overall.stderr,
                        overall.r_squared, peak, cycle, channels, note)


@dataclass(frozen=True)
class SweepGrid:
    omegas: tuple
    epsilons: tuple
    setup: PointSetup = field(default_factory=PointSetup)

    def __post_init__(self):
        om = tuple(float(w) for w in self.omegas)
        ep = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "epsilons", ep)
        if not om or not ep:
            raise ValueError("sweep ranges must be non-empty")
        if min(om) <= 0:
            raise ValueError("drive frequencies must be positive")
        if self.setup.criteria.tau_max < 10 * 2 * math.pi / min(om):
            raise ValueError("tau_max must cover at least 10 drive periods")

    @classmethod
    def from_ranges(cls, omega_range, omega_step, eps_range, eps_step, setup=None):
        if omega_step <= 0 or eps_step <= 0:
            raise ValueError("steps must be positive")
        return cls(_arange(*omega_range, omega_step), _arange(*eps_range, eps_step),
                   setup or PointSetup())

    def cells(self):
        """Row-major cell list: rows are epsilons, columns omegas."""
        return [(i, j, w, e) for i, e in enumerate(self.epsilons) for j, w in enumerate(self.omegas)]


def _arange(lo, hi, step):
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(round(lo + k * step, 12) for k in range(n))


@dataclass
class ResonanceMap:
    omegas: tuple
    epsilons: tuple
    points: list  # rows (eps) of lists (omega) of PointVerdict
    metadata: dict = field(default_factory=dict)

    def verdicts(self) -> np.ndarray:
        return np.array([[p.verdict.value for p in row] for row in self.points])

    def resonant_mask(self) -> np.ndarray:
        return self.verdicts() == Verdict.RESONANT.value

    def rows(self):
        for row in self.points:
            for p in row:
                yield p


def _classify_cell(args):
    omega, eps, setup = args
    return classify_point(omega, eps, setup)


def default_workers() -> int:
    env = os.environ.get("BEC_RESONANCE_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def resonance_map(grid: SweepGrid, workers: int | None = None, done: dict | None = None,
                  on_result=None) -> ResonanceMap:
    """Classify every cell of ``grid``.

    ``done`` maps ``(i, j)`` to already computed verdicts (resumed sweeps);
    ``on_result(i, j, verdict)`` is called in this process as cells finish.
    Output order is row-major whatever the schedule.
    """
    workers = default_workers() if workers is None else max(1, workers)
    done = dict(done or {})
    todo = [c for c in grid.cells() if (c[0], c[1]) not in done]
    results = dict(done)
    jobs = [(w, e, grid.setup) for (_, _, w, e) in todo]
    if workers == 1 or len(todo) <= 1:
        it = map(_classify_cell, jobs)
        for (i, j, _, _), verdict in zip(todo, it):
            results[(i, j)] = verdict
            if on_result:
                on_result(i, j, verdict)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (i, j, _, _), verdict in zip(todo, pool.map(_classify_cell, jobs, chunksize=4)):
                results[(i, j)] = verdict
                if on_result:
                    on_result(i, j, verdict)
    points = [[results[(i, j)] for j in range(len(grid.omegas))] for i in range(len(grid.epsilons))]
    s = grid.setup
    meta = {
        "model": s.kind.value, "P": s.params.interaction, "barrier": s.params.barrier.value,
        "damping": s.damping, "base_strengths": list(s.base_strengths), "drive": s.drive,
        "criteria": asdict(s.criteria), "rel_tol": s.integrator.rel_tol,
    }
    return ResonanceMap(grid.omegas, grid.epsilons, points, meta)


@dataclass
class ThresholdResult:
    eps_min: float | None
    tip_omega: float | None
    resonant_omegas: tuple = ()
    rows: dict = field(default_factory=dict)  # eps -> tuple of resonant omegas


DEFAULT_EPS_GRID = tuple(round(0.02 * k, 12) for k in range(1, 31))


def threshold_scan(setup: PointSetup | None = None, eps_grid=DEFAULT_EPS_GRID,
                   omega_window=(1.8, 2.2), omega_step=0.01,
                   eps_resolution=0.005, omega_fixed: float | None = None) -> ThresholdResult:
    """Smallest resonant epsilon, tracking the resonance over an omega window.

    Each epsilon row is scanned across the window (or at ``omega_fixed``);
    the first resonant row of ``eps_grid`` is then refined by bisection to
    ``eps_resolution``.  The tip frequency is the centre of the resonant
    omegas at the refined threshold.
    """
    setup = setup or PointSetup()
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.any(np.diff(eps_grid) <= 0):
        raise ValueError("eps_grid must be increasing")
    omegas = (omega_fixed,) if omega_fixed is not None else _arange(*omega_window, omega_step)
    rows: dict = {}

    def resonant_row(eps):
        eps = round(float(eps), 12)
        if eps not in rows:
            hits = tuple(w for w in omegas
                         if classify_point(w, eps, setup).verdict is Verdict.RESONANT)
            rows[eps] = hits
        return rows[eps]

    lo = 0.0
    hi = None
    for eps in eps_grid:
        if resonant_row(eps):
            hi = float(eps)
            break
        lo = float(eps)
    if hi is None:
        return ThresholdResult(None, None, (), rows)
    while hi - lo > eps_resolution:
        mid = 0.5 * (lo + hi)
        if resonant_row(mid):
            hi = mid
        else:
            lo = mid
    hits = resonant_row(hi)
    tip = 0.5 * (min(hits) + max(hits))
    return ThresholdResult(round(hi, 12), tip, hits, rows)


@dataclass
class LimitCycle:
    status: str  # converged | not_converged | diverged
    state: DynamicalState | None
    amplitude: float | None
    periods: int
    seed_states: tuple = ()
    seed_mismatch: float | None = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _iterate_to_fixed_point(setup, trap, seed, tol, max_periods, escape_at):
    prev = None
    for n, st in enumerate(iter_stroboscopic(setup.kind, setup.params, trap, seed,
                                             setup.integrator, max_periods)):
        y = st.as_array()
        if np.max(np.abs(y[:setup.kind.dimension])) > escape_at:
            return "diverged", st, n
        if prev is not None and np.max(np.abs(y - prev)) < tol:
            return "converged", st, n
        prev = y
    return "not_converged", st, n


def find_limit_cycle(omega: float, eps: float, setup: PointSetup | None = None,
                     tol: float = 1e-8, max_periods: int = 5000,
                     seed_tol: float = 1e-6, second_seed: DynamicalState | None = None) -> LimitCycle:
    """Fixed point of the stroboscopic map and the width swing of its cycle."""
    setup = setup or PointSetup(damping=0.15)
    if not setup.damping > 0:
        raise ValueError("limit cycles need damping > 0")
    trap = setup.trap(omega, eps)
    escape_at = setup.criteria.escape_factor * setup.scale()
    seed1 = setup.initial_state()
    if second_seed is None:
        ref = setup.reference()
        d = setup.kind.dimension
        second_seed = DynamicalState(tuple(ref * 0.9 if setup.kind.is_singular else ref - 0.5),
                                     (0.05 * float(np.max(ref)) + 0.05,) * d)
    status, fixed, n = _iterate_to_fixed_point(setup, trap, seed1, tol, max_periods, escape_at)
    if status != "converged":
        return LimitCycle(status, None, None, n, (seed1, second_seed))
    status2, fixed2, _ = _iterate_to_fixed_point(setup, trap, second_seed, tol, max_periods, escape_at)
    if status2 != "converged":
        return LimitCycle(status2, None, None, n, (seed1, second_seed))
    # compare the two fixed points at the same drive phase
    mismatch = float(np.max(np.abs(fixed.as_array() - fixed2.as_array())))
    if mismatch > seed_tol:
        return LimitCycle("seed_dependent", fixed, None, n, (seed1, second_seed), mismatch)
    start = DynamicalState(fixed.coordinates, fixed.velocities, 0.0)
    fine = np.linspace(0.0, trap.period, 2001)
    one = integrate(setup.kind, setup.params, trap, start, trap.period, setup.integrator, t_eval=fine)
    q = one.coordinates
    amplitude = float(np.max(q.max(axis=0) - q.min(axis=0)))
    return LimitCycle("converged", fixed, amplitude, n, (seed1, second_seed), mismatch)
