"""Command-line front end.

Usage::

    bec-resonance <simulate|sweep|floquet|asymptote|gpe|verify> [--config FILE]
                  [--block.key VALUE ...]

The configuration file is YAML or JSON.  Every config key can also be set
with a long flag of the same dotted name (``--trap.omega 2.04``); flag values
are parsed as YAML scalars or lists.  Unknown keys abort with the offending
field and line.  Exit codes: 0 ok, 1 invalid configuration, 2 computation
failed, 3 acceptance failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import io
import json
import math
import os
import sys
import types
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__, acceptance, asymptotics, floquet, gpe
from .integrate import IntegrationError, IntegratorConfig, integrate, integrate_with_bounce
from .models import (Barrier, DynamicalState, ModelKind, ModelParams, TrapModulation,
                     UnsupportedModelError, WidthDomainError, energy, equilibrium_width,
                     equilibrium_widths_3d)
from .sweep import GrowthCriteria, PointSetup, PointVerdict, SweepGrid, resonance_map

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_ACCEPTANCE = 0, 1, 2, 3
COMMANDS = ("simulate", "sweep", "floquet", "asymptote", "gpe", "verify")
WORKERS_ENV = "BEC_RESONANCE_WORKERS"


class ConfigError(ValueError):
    def __init__(self, key: str, message: str, line: int | str | None = None):
        where = f" (line {line})" if isinstance(line, int) else (f" ({line})" if line else "")
        super().__init__(f"{key}{where}: {message}")
        self.key = key
        self.line = line
        self.message = message


# -- configuration blocks -----------------------------------------------------------------

@dataclass
class ModelBlock:
    kind: str = "radial"
    interaction: float | None = 9.2
    barrier: str = "full"
    particle_number: float | None = None
    scattering_length: float | None = None
    oscillator_length: float | None = None

    def validate(self):
        _choice("model.kind", self.kind, [k.value for k in ModelKind])
        _choice("model.barrier", self.barrier, [b.value for b in Barrier])

    def params(self) -> ModelParams:
        triple = (self.particle_number, self.scattering_length, self.oscillator_length)
        barrier = Barrier(self.barrier)
        if any(x is not None for x in triple):
            if any(x is None for x in triple):
                raise ConfigError("model", "particle_number, scattering_length and oscillator_length go together")
            if self.interaction is None:
                return ModelParams.from_physical(*triple, barrier=barrier)
            return ModelParams(self.interaction, *triple, barrier=barrier)
        if self.interaction is None:
            raise ConfigError("model.interaction", "required unless the physical triple is given")
        return ModelParams(self.interaction, barrier=barrier)


@dataclass
class TrapBlock:
    base_strengths: list[float] = field(default_factory=lambda: [1.0, 1.0, 1.0])
    epsilon: float = 0.0
    omega: float = 2.0
    damping: float = 0.0
    drive: str = "isotropic"

    def validate(self):
        _choice("trap.drive", self.drive, ["isotropic", "m0", "m2"])
        if len(self.base_strengths) != 3:
            raise ConfigError("trap.base_strengths", "needs three entries")

    def setup_kwargs(self) -> dict:
        return {"damping": self.damping, "base_strengths": tuple(self.base_strengths), "drive": self.drive}

    def trap(self, omega=None, eps=None) -> TrapModulation:
        omega = self.omega if omega is None else omega
        eps = self.epsilon if eps is None else eps
        return PointSetup(**self.setup_kwargs()).trap(omega, eps)


@dataclass
class IntegratorBlock:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-14
    h_max: float = 0.25
    width_floor: float = 1e-4
    stiff_switch_threshold: int = 8
    max_steps: int = 20_000_000

    def config(self) -> IntegratorConfig:
        return IntegratorConfig(**asdict(self))


@dataclass
class SimulateBlock:
    coordinates: list[float] | None = None
    velocities: list[float] | None = None
    tau_end: float = 100.0
    samples: int = 2001
    escape: float | None = None

    def validate(self):
        if self.samples < 2:
            raise ConfigError("simulate.samples", "need at least two samples")
        if not self.tau_end > 0:
            raise ConfigError("simulate.tau_end", "must be positive")


@dataclass
class SweepBlock:
    omega_min: float = 1.8
    omega_max: float = 2.2
    omega_step: float = 0.01
    eps_min: float = 0.0
    eps_max: float = 0.3
    eps_step: float = 0.01
    tau_max: float = 400.0
    offset: float = 0.01
    q_thresh: float = 0.005
    r2_min: float = 0.9
    escape_factor: float = 50.0
    cycle_tol: float = 1e-6
    workers: int | None = None

    def validate(self):
        if self.omega_max < self.omega_min or self.eps_max < self.eps_min:
            raise ConfigError("sweep", "range maxima must not be below minima")
        if self.eps_min < 0:
            raise ConfigError("sweep.eps_min", "must be >= 0")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("sweep.workers", "must be >= 1")


@dataclass
class FloquetBlock:
    wedges: list[int] = field(default_factory=lambda: [1, 2, 3])
    eps_max: float = 0.5
    eps_count: int = 51
    omega_tol: float = 1e-5

    def validate(self):
        for n in self.wedges:
            if n not in (1, 2, 3):
                raise ConfigError("floquet.wedges", f"wedge index {n} not in 1..3")
        if not 0 < self.eps_max <= 0.8:
            raise ConfigError("floquet.eps_max", "must lie in (0, 0.8]")
        if self.eps_count < 1:
            raise ConfigError("floquet.eps_count", "must be >= 1")


@dataclass
class AsymptoteBlock:
    eps_values: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.15, 0.2])
    omegas: list[float] = field(default_factory=list)


@dataclass
class GpeBlock:
    geometry: str = "radial3d"
    extent: float | None = None
    points: int = 2048
    dt: float = 1e-3
    nonlinearity: float | None = None
    tau_end: float = 50.0
    output_interval: float = 0.05
    corrector_sweeps: int = 1
    dilation: float = 1.0
    displacement: float = 0.0
    expected_max_width: float | None = None
    snapshot_every: float | None = None
    snapshot_dir: str | None = None

    def validate(self):
        _choice("gpe.geometry", self.geometry, list(gpe.GEOMETRIES))
        if self.displacement and self.geometry != "cartesian1d":
            raise ConfigError("gpe.displacement", "only the cartesian1d geometry can be displaced")
        if not self.dilation > 0:
            raise ConfigError("gpe.dilation", "must be positive")
        if self.snapshot_every and not self.snapshot_dir:
            raise ConfigError("gpe.snapshot_dir", "required when snapshot_every is set")


@dataclass
class VerifyBlock:
    full: bool = False
    criteria: list[int] | None = None

    def validate(self):
        for n in self.criteria or []:
            if n not in acceptance.ALL:
                raise ConfigError("verify.criteria", f"no criterion {n}")


@dataclass
class OutputBlock:
    path: str | None = None
    format: str = "csv"

    def validate(self):
        _choice("output.format", self.format, ["csv", "json"])


@dataclass
class RunConfig:
    model: ModelBlock = field(default_factory=ModelBlock)
    trap: TrapBlock = field(default_factory=TrapBlock)
    integrator: IntegratorBlock = field(default_factory=IntegratorBlock)
    simulate: SimulateBlock = field(default_factory=SimulateBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    floquet: FloquetBlock = field(default_factory=FloquetBlock)
    asymptote: AsymptoteBlock = field(default_factory=AsymptoteBlock)
    gpe: GpeBlock = field(default_factory=GpeBlock)
    verify: VerifyBlock = field(default_factory=VerifyBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    seed: int = 0  # reserved: every pipeline here is deterministic

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict, lines: dict | None = None) -> "RunConfig":
        lines = lines or {}
        cfg = _build(cls, data, "", lines)
        try:
            cfg.validate()
        except ConfigError as exc:
            if exc.line is None and exc.key in lines:
                raise ConfigError(exc.key, exc.message, lines[exc.key]) from None
            raise
        return cfg

    def validate(self):
        for f in fields(self):
            block = getattr(self, f.name)
            if hasattr(block, "validate"):
                block.validate()


def _choice(key, value, allowed):
    if value not in allowed:
        raise ConfigError(key, f"{value!r} is not one of {', '.join(map(str, allowed))}")


# -- strict loading ------------------------------------------------------------------------

def _coerce(tp, value, key, line):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, key, line)
    if origin is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key, f"expected a list, got {value!r}", line)
        return [_coerce(args[0], v, key, line) for v in value]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true/false, got {value!r}", line)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(key, f"expected an integer, got {value!r}", line)
        return value
    if tp is float:
        if isinstance(value, str):
            # YAML 1.1 resolves exponent forms without a dot (1e-4) as strings
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(key, f"expected a number, got {value!r}", line) from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}", line)
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(key, "must be finite", line)
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}", line)
        return value
    raise TypeError(f"unsupported config type {tp}")


def _build(cls, data, prefix, lines):
    where = prefix or "config"
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(where, "expected a mapping", lines.get(prefix))
    hints = typing.get_type_hints(cls)
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        dotted = f"{prefix}.{key}" if prefix else str(key)
        if key not in names:
            raise ConfigError(dotted, "unknown key", lines.get(dotted))
        tp = hints[key]
        if is_dataclass(tp):
            kwargs[key] = _build(tp, value, dotted, lines)
        else:
            kwargs[key] = _coerce(tp, value, dotted, lines.get(dotted))
    return cls(**kwargs)


def _line_map(node, prefix="", out=None) -> dict:
    """Dotted key -> 1-based source line, from a composed YAML node tree."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            dotted = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[dotted] = k.start_mark.line + 1
            _line_map(v, dotted, out)
    return out


def load_config_text(text: str) -> tuple[dict, dict]:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("config", f"cannot parse: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    return (data or {}), (_line_map(node) if node is not None else {})


def _leaf_keys(cls, prefix=""):
    hints = typing.get_type_hints(cls)
    for f in fields(cls):
        dotted = f"{prefix}.{f.name}" if prefix else f.name
        if is_dataclass(hints[f.name]):
            yield from _leaf_keys(hints[f.name], dotted)
        else:
            yield dotted


def apply_overrides(data: dict, lines: dict, overrides: dict) -> None:
    for dotted, raw in overrides.items():
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            value = raw
        node = data
        parts = dotted.split(".")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[parts[-1]] = value
        lines[dotted] = "command line"


def resolve_config(path: str | None, overrides: dict) -> RunConfig:
    data, lines = {}, {}
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        data, lines = load_config_text(text)
    apply_overrides(data, lines, overrides)
    try:
        return RunConfig.from_dict(data, lines)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("config", str(exc)) from None


# -- output --------------------------------------------------------------------------------

def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (list, tuple)):
        return ";".join(_cell(v) for v in x)
    return str(x)


def _json_safe(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    return x


def metadata(command: str, config: RunConfig, extra: dict | None = None) -> dict:
    meta = {
        "program": f"bec_resonance {__version__}",
        "command": command,
        "config": config.to_dict(),
    }
    if extra:
        meta.update(extra)
    # excluded from determinism comparisons
    meta["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return meta


def render_table(fmt: str, columns, rows, meta: dict) -> str:
    if fmt == "json":
        doc = {"metadata": _json_safe(meta), "columns": list(columns),
               "rows": [_json_safe(list(r)) for r in rows]}
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    for k, v in meta.items():
        text = v if isinstance(v, str) else json.dumps(_json_safe(v), sort_keys=True, separators=(",", ":"))
        buf.write(f"# {k}: {text}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


def write_table(config: RunConfig, command: str, columns, rows, extra=None) -> None:
    text = render_table(config.output.format, columns, rows, metadata(command, config, extra))
    if config.output.path:
        Path(config.output.path).write_text(text)
    else:
        sys.stdout.write(text)


# -- subcommands -----------------------------------------------------------------------------

def _initial_state(config: RunConfig, kind: ModelKind, params: ModelParams) -> DynamicalState:
    s = config.simulate
    d = kind.dimension
    if s.coordinates is None:
        if kind is ModelKind.RADIAL:
            q = [equilibrium_width(params, config.trap.base_strengths[0]) * 1.01]
        elif kind is ModelKind.VARIATIONAL_3D:
            q = list(equilibrium_widths_3d(params, config.trap.base_strengths) * 1.01)
        else:
            q = [1.0]
    else:
        q = list(s.coordinates)
    v = list(s.velocities) if s.velocities is not None else [0.0] * d
    if len(q) != d or len(v) != d:
        raise ConfigError("simulate.coordinates", f"model {kind.value} needs {d} coordinate(s) and velocities")
    return DynamicalState(tuple(q), tuple(v))


def _energy_column(kind, params, trap, traj):
    if kind in (ModelKind.RADIAL, ModelKind.VARIATIONAL_3D):
        return [energy(kind, params, trap, s) for s in traj.states()]
    # oscillator energy of the linear models, with the instantaneous trap
    lam2 = np.array([trap.evaluate(t)[0] for t in traj.t])
    u = traj.coordinates[:, 0]
    du = traj.velocities[:, 0]
    return list(0.5 * du * du + 0.5 * lam2 * u * u)


def cmd_simulate(config: RunConfig) -> int:
    kind = ModelKind(config.model.kind)
    params = config.model.params()
    trap = config.trap.trap()
    state = _initial_state(config, kind, params)
    s = config.simulate
    times = np.linspace(0.0, s.tau_end, s.samples)
    icfg = config.integrator.config()
    status = EXIT_OK
    note = "completed"
    try:
        if kind is ModelKind.IMPACT_OSCILLATOR:
            traj = integrate_with_bounce(params, trap, state, s.tau_end, icfg, t_eval=times)
        else:
            traj = integrate(kind, params, trap, state, s.tau_end, icfg, t_eval=times, stop_above=s.escape)
            note = traj.diagnostics.termination or note
    except IntegrationError as exc:
        traj = exc.trajectory
        status = EXIT_COMPUTE
        note = f"failed: {exc}"
        print(f"error: {exc}", file=sys.stderr)
    if traj is None or len(traj.t) == 0:
        return EXIT_COMPUTE
    d = kind.dimension
    names = ["v"] if d == 1 and kind.is_width_model else (["u"] if d == 1 else ["v_x", "v_y", "v_z"])
    columns = ["tau", *names, *[f"d{n}" for n in names], "energy"]
    E = _energy_column(kind, params, trap, traj)
    rows = [(t, *q, *v, e) for t, q, v, e in zip(traj.t, traj.coordinates, traj.velocities, E)]
    extra = {"status": note, "events": len(traj.event_times)}
    write_table(config, "simulate", columns, rows, extra)
    return status


def _sweep_setup(config: RunConfig) -> PointSetup:
    sw = config.sweep
    crit = GrowthCriteria(tau_max=sw.tau_max, q_thresh=sw.q_thresh, r2_min=sw.r2_min,
                          escape_factor=sw.escape_factor, cycle_tol=sw.cycle_tol)
    return PointSetup(kind=ModelKind(config.model.kind), params=config.model.params(),
                      offset=sw.offset, criteria=crit, integrator=config.integrator.config(),
                      **config.trap.setup_kwargs())


def _config_hash(config: RunConfig) -> str:
    d = config.to_dict()
    d.pop("output")
    d["sweep"].pop("workers")
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _read_manifest(path: Path, digest: str) -> dict:
    if not path.exists():
        return {}
    done = {}
    with path.open() as fh:
        head = fh.readline()
        if not head:
            return {}
        if json.loads(head).get("config_hash") != digest:
            raise ConfigError("output.path", f"{path} belongs to a different configuration; remove it to restart")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                break  # torn final line from an interrupted run
            done[(rec["i"], rec["j"])] = PointVerdict.from_row(rec["row"])
    return done


def _manifest_writer(fh):
    def record(i, j, verdict):
        fh.write(json.dumps({"i": i, "j": j, "row": _json_safe(verdict.as_row())}) + "\n")
        fh.flush()
    return record


def cmd_sweep(config: RunConfig) -> int:
    sw = config.sweep
    setup = _sweep_setup(config)
    grid = SweepGrid.from_ranges((sw.omega_min, sw.omega_max), sw.omega_step,
                                 (sw.eps_min, sw.eps_max), sw.eps_step, setup)
    done = {}
    record = fh = None
    if config.output.path:
        manifest = Path(config.output.path + ".manifest.jsonl")
        digest = _config_hash(config)
        done = _read_manifest(manifest, digest)
        fresh = not manifest.exists() or manifest.stat().st_size == 0
        fh = manifest.open("a")
        if fresh:
            fh.write(json.dumps({"config_hash": digest}) + "\n")
            fh.flush()

        record = _manifest_writer(fh)

    try:
        rmap = resonance_map(grid, workers=sw.workers, done=done, on_result=record)
    finally:
        if fh:
            fh.close()
    columns = ["omega", "eps", "verdict", "fitted_exponent", "exponent_stderr", "r_squared",
               "max_amplitude", "note"]
    rows = [(r["omega"], r["eps"], r["verdict"], r["fitted_exponent"], r["exponent_stderr"],
             r["r_squared"], r["max_amplitude"], r["note"]) for r in (v.as_row() for v in rmap.rows())]
    write_table(config, "sweep", columns, rows, {"resumed_cells": len(done)})
    return EXIT_OK


def cmd_floquet(config: RunConfig) -> int:
    fq = config.floquet
    lam0 = config.trap.base_strengths[0]
    eps_grid = np.linspace(0.0, fq.eps_max, fq.eps_count)
    rows = []
    for n in fq.wedges:
        w = floquet.trace_wedge(n, eps_grid, gamma=config.trap.damping, lam0=lam0, omega_tol=fq.omega_tol)
        for k, eps in enumerate(eps_grid):
            if n == 1 and lam0 == 1.0:
                band = asymptotics.resonance_band(float(eps))
            else:
                band = (None, None)
            empty = bool(w.is_empty()[k])
            rows.append((n, float(eps), None if empty else float(w.omega_lower[k]),
                         None if empty else float(w.omega_upper[k]), *band))
    columns = ["wedge", "eps", "omega_lower", "omega_upper", "band_lower", "band_upper"]
    write_table(config, "floquet", columns, rows)
    return EXIT_OK


def cmd_asymptote(config: RunConfig) -> int:
    a = config.asymptote
    gamma = config.trap.damping
    rows = []
    for eps in a.eps_values:
        omegas = a.omegas or [asymptotics.optimal_frequency(eps)]
        for om in omegas:
            p = asymptotics.predict(om, eps, gamma)
            rows.append((om, eps, gamma, p.q, p.damped_exponent, p.omega_max, *p.band))
    columns = ["omega", "eps", "damping", "q", "damped_exponent", "omega_max", "band_lower", "band_upper"]
    write_table(config, "asymptote", columns, rows)
    return EXIT_OK


def _gpe_config(config: RunConfig) -> gpe.GpeConfig:
    b = config.gpe
    params = config.model.params()
    g = b.nonlinearity if b.nonlinearity is not None else gpe.nonlinearity_from_interaction(params.interaction)
    lam0 = config.trap.base_strengths[0]
    trap = TrapModulation((lam0,) * 3, (config.trap.epsilon,) * 3, config.trap.omega, 0.0)
    extent = b.extent
    if extent is None:
        vstar = equilibrium_width(params, lam0)
        extent = 8.0 * max(b.expected_max_width or 0.0, vstar, 1.0 + abs(b.displacement))
    return gpe.GpeConfig(geometry=b.geometry, extent=extent, points=b.points, dt=b.dt, nonlinearity=g,
                         trap=trap, output_interval=b.output_interval, corrector_sweeps=b.corrector_sweeps)


def cmd_gpe(config: RunConfig) -> int:
    b = config.gpe
    gcfg = _gpe_config(config)
    static = gcfg.replace(trap=gcfg.trap.replace(amplitudes=(0.0, 0.0, 0.0)))
    start = gpe.ground_state(static)
    if b.dilation != 1.0:
        start = gpe.dilate(start, b.dilation)
    if b.displacement:
        start = gpe.displace(start, b.displacement)
    status = EXIT_OK
    note = "completed"
    try:
        run = gpe.evolve(start, gcfg, b.tau_end, snapshot_every=b.snapshot_every)
    except gpe.GpeError as exc:
        run = exc.run
        status = EXIT_COMPUTE
        note = f"failed: {exc}"
        print(f"error: {exc}", file=sys.stderr)
    if b.snapshot_dir and run.snapshots:
        out = Path(b.snapshot_dir)
        out.mkdir(parents=True, exist_ok=True)
        for k, snap in enumerate(run.snapshots):
            gpe.write_snapshot(out / f"field_{k:05d}.bin", snap)
    columns = ["tau", "norm", "energy", "width"]
    data = [run.times, run.norm, run.energy, run.width]
    if b.geometry == "cartesian1d":
        columns.append("mean_x")
        data.append(run.mean_position)
    write_table(config, "gpe", columns, list(zip(*data)),
                {"status": note, "extent": gcfg.extent, "nonlinearity": gcfg.nonlinearity})
    return status


def cmd_verify(config: RunConfig) -> int:
    v = config.verify
    numbers = v.criteria or [n for n in acceptance.ALL if v.full or n not in acceptance.SLOW]
    results = acceptance.run(numbers, echo=lambda line: print(line, file=sys.stderr))
    report = {
        "program": f"bec_resonance {__version__}",
        "passed": all(r.passed for r in results),
        "criteria": [r.as_dict() for r in results],
    }
    text = json.dumps(_json_safe(report), indent=1, default=str) + "\n"
    if config.output.path:
        Path(config.output.path).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if report["passed"] else EXIT_ACCEPTANCE


def preflight(command: str, config: RunConfig) -> None:
    """Build the domain objects a command needs so range errors surface before any work."""
    try:
        config.model.params()
        config.trap.trap()
        config.integrator.config()
        if command == "simulate":
            _initial_state(config, ModelKind(config.model.kind), config.model.params())
        elif command == "sweep":
            env = os.environ.get(WORKERS_ENV)
            if env and not (env.isdigit() and int(env) > 0):
                raise ConfigError(WORKERS_ENV, f"expected a positive integer, got {env!r}")
            sw = config.sweep
            SweepGrid.from_ranges((sw.omega_min, sw.omega_max), sw.omega_step,
                                  (sw.eps_min, sw.eps_max), sw.eps_step, _sweep_setup(config))
        elif command == "gpe":
            _gpe_config(config)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(command, str(exc)) from None


HANDLERS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "floquet": cmd_floquet,
            "asymptote": cmd_asymptote, "gpe": cmd_gpe, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bec-resonance",
                                     description="Parametric resonance toolkit for trapped condensates.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    keys = list(_leaf_keys(RunConfig))
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML or JSON run configuration")
        if name == "sweep":
            p.add_argument("--workers", type=int, help="worker processes (overrides sweep.workers)")
        if name == "verify":
            p.add_argument("--full", action="store_true", help="include the slow PDE comparison")
        for key in keys:
            p.add_argument(f"--{key}", dest=f"set:{key}", metavar="VALUE", default=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags, which would read as a computational failure
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("set:")}
    if getattr(args, "workers", None) is not None:
        overrides["sweep.workers"] = str(args.workers)
    if getattr(args, "full", False):
        overrides["verify.full"] = "true"
    try:
        config = resolve_config(args.config, overrides)
        preflight(args.command, config)
        return HANDLERS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnsupportedModelError, WidthDomainError, IntegrationError, gpe.GpeError,
            FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
