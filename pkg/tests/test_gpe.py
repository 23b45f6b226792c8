import math

import numpy as np
import pytest

from bec_resonance import gpe
from bec_resonance.models import (DynamicalState, ModelKind, ModelParams, TrapModulation, energy,
                                  equilibrium_width)

P = 9.2
G = gpe.nonlinearity_from_interaction(P)


def radial(points=1024, extent=8.0, **kw):
    return gpe.GpeConfig(extent=extent, points=points, **kw)


def test_nonlinearity_mapping():
    assert G == pytest.approx((2 * math.pi) ** 1.5 * P, rel=1e-15)
    cfg = gpe.GpeConfig.for_model(ModelParams(P))
    assert cfg.nonlinearity == G
    assert cfg.extent == pytest.approx(8 * equilibrium_width(ModelParams(P)))
    assert gpe.GpeConfig.for_model(ModelParams(P), expected_max_width=3.0).extent == 24.0


@pytest.mark.parametrize("v", [1.0, 1.61, 2.5])
def test_gaussian_energy_matches_variational_energy(v):
    # a Gaussian of width v carries 3/2 of the radial model's energy when g = (2 pi)^{3/2} P
    cfg = radial(points=4096, extent=12.0, nonlinearity=G)
    fld = gpe.gaussian_field(cfg, width=v)
    model = energy(ModelKind.RADIAL, ModelParams(P), TrapModulation(), DynamicalState((v,), (0.0,)))
    assert fld.energy(1.0, G) == pytest.approx(1.5 * model, rel=1e-4)
    assert fld.width() == pytest.approx(v * math.sqrt(1.5), rel=1e-6)


def test_free_radial_ground_state():
    gs = gpe.ground_state(radial())
    assert gs.width() == pytest.approx(math.sqrt(1.5), abs=1e-4)
    assert gs.norm() == pytest.approx(1.0, abs=1e-10)
    assert gs.values[0] == 0 and gs.values[-1] == 0
    assert gs.chemical_potential(1.0, 0.0) == pytest.approx(1.5, abs=1e-4)
    assert gpe.gaussian_overlap(gs) == pytest.approx(1.0, abs=1e-6)


def test_free_cartesian_ground_state():
    gs = gpe.ground_state(gpe.GpeConfig(geometry="cartesian1d", extent=8.0, points=1024))
    assert gs.width() == pytest.approx(1 / math.sqrt(2), abs=1e-4)
    assert gs.mean_position() == pytest.approx(0.0, abs=1e-12)
    assert gs.norm() == pytest.approx(1.0, abs=1e-10)
    assert gs.values[0] == 0 and gs.values[-1] == 0


def test_interacting_ground_state_near_variational_width():
    gs = gpe.ground_state(radial(extent=12.0, nonlinearity=G))
    v = gs.width() / math.sqrt(1.5)
    assert v == pytest.approx(equilibrium_width(ModelParams(P)), rel=0.10)
    assert gs.norm() == pytest.approx(1.0, abs=1e-10)
    # the true ground state beats the Gaussian trial state
    trial = gpe.gaussian_field(radial(extent=12.0), width=equilibrium_width(ModelParams(P)))
    assert gs.energy(1.0, G) < trial.energy(1.0, G)


def test_ground_state_convergence_failure():
    with pytest.raises(gpe.ConvergenceError):
        gpe.ground_state(radial(points=256), max_steps=10)


@pytest.mark.parametrize("g", [0.0, G])
def test_ground_state_is_stationary(g):
    cfg = radial(points=512, extent=12.0, nonlinearity=g, dt=2e-3)
    gs = gpe.ground_state(cfg)
    run = gpe.evolve(gs, cfg, 50.0)
    w = np.asarray(run.width)
    assert np.max(np.abs(w - w[0])) < 1e-6


def test_conservation_of_norm_and_energy():
    cfg = radial(points=512, extent=12.0, nonlinearity=G, dt=2e-3)
    gs = gpe.ground_state(cfg)
    run = gpe.evolve(gpe.dilate(gs, 1.2), cfg, 10.0)
    N = np.asarray(run.norm)
    E = np.asarray(run.energy)
    assert np.max(np.abs(N - 1.0)) < 1e-12
    assert np.max(np.abs(E - E[0])) / E[0] < 1e-6
    w = np.asarray(run.width)
    assert w.max() - w.min() > 0.1


def test_time_step_convergence_is_second_order():
    cfg = radial(points=512, extent=12.0, nonlinearity=G)
    start = gpe.dilate(gpe.ground_state(cfg), 1.2)
    trap = TrapModulation.isotropic(0.15, 2.04)
    widths = []
    for dt in (4e-3, 2e-3, 1e-3):
        run = gpe.evolve(start, cfg.replace(dt=dt, trap=trap, output_interval=0.5), 4.0)
        widths.append(run.width[-1])
    ratio = (widths[0] - widths[1]) / (widths[1] - widths[2])
    assert 3.5 < ratio < 4.5


def test_breathing_mode_of_free_gas():
    cfg = radial(points=1024, output_interval=0.01)
    run = gpe.evolve(gpe.dilate(gpe.ground_state(cfg), 1.2), cfg, 10.0)
    t = np.asarray(run.times)
    z = np.asarray(run.width) ** 2
    z = z - z.mean()
    k = np.flatnonzero((z[:-1] < 0) & (z[1:] >= 0))
    crossings = t[k] - z[k] * (t[k + 1] - t[k]) / (z[k + 1] - z[k])
    assert 2 * math.pi / np.mean(np.diff(crossings)) == pytest.approx(2.0, rel=0.01)


def test_domain_escape_raises_with_partial_run():
    cfg = radial(points=512, extent=3.0)
    gs = gpe.gaussian_field(cfg, 1.0)
    with pytest.raises(gpe.DomainEscapeError) as info:
        gpe.evolve(gs, cfg, 5.0)
    run = info.value.run
    assert run.status == "escaped"
    assert run.final is not None and len(run.times) >= 2


def test_norm_budget_violation_raises():
    cfg = radial(points=512, nonlinearity=G, norm_budget=1e-18)
    gs = gpe.gaussian_field(cfg, 1.6)
    with pytest.raises(gpe.NormDriftError) as info:
        gpe.evolve(gs, cfg, 5.0)
    assert info.value.run.status == "norm_drift"


def test_evolve_requires_normalised_field():
    cfg = radial(points=256)
    fld = gpe.gaussian_field(cfg, 1.0)
    fld.values *= 2.0
    with pytest.raises(ValueError):
        gpe.evolve(fld, cfg, 1.0)


def test_config_validation():
    for bad in ({"geometry": "slab"}, {"extent": 0.0}, {"points": 128}, {"dt": 0.02},
                {"nonlinearity": -1.0}, {"corrector_sweeps": 0}):
        with pytest.raises(ValueError):
            gpe.GpeConfig(**bad)


def test_dilation_and_overlap():
    cfg = radial(points=1024)
    g = gpe.gaussian_field(cfg, 1.0)
    d = gpe.dilate(g, 1.3)
    assert d.width() == pytest.approx(1.3 * g.width(), rel=1e-4)
    assert d.norm() == pytest.approx(1.0, abs=1e-12)
    assert gpe.gaussian_overlap(d) == pytest.approx(1.0, abs=1e-6)
    # a two-component cloud has weight outside the matched Gaussian
    mix = gpe.WaveField(g.values + gpe.gaussian_field(cfg, 2.5).values, g.geometry, g.grid).normalized()
    assert gpe.gaussian_overlap(mix) < 0.99


def test_displacement():
    cfg = gpe.GpeConfig(geometry="cartesian1d", extent=8.0, points=1024)
    g = gpe.gaussian_field(cfg, 1.0)
    moved = gpe.displace(g, 0.5)
    assert moved.mean_position() == pytest.approx(0.5, abs=1e-8)
    assert moved.width() ** 2 == pytest.approx(0.25 + 0.5, abs=1e-6)
    with pytest.raises(ValueError):
        gpe.displace(gpe.gaussian_field(radial(points=256), 1.0), 0.5)


def test_snapshot_round_trip(tmp_path):
    cfg = radial(points=256, output_interval=0.1)
    run = gpe.evolve(gpe.dilate(gpe.gaussian_field(cfg, 1.0), 1.1), cfg, 1.0, snapshot_every=0.5)
    assert len(run.snapshots) == 3
    snap = run.snapshots[-1]
    path = tmp_path / "field.bin"
    gpe.write_snapshot(path, snap)
    back = gpe.read_snapshot(path)
    assert back.geometry == snap.geometry and back.time == snap.time
    assert np.array_equal(back.values, snap.values)
    np.testing.assert_allclose(back.grid, snap.grid, rtol=1e-15)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX" + path.read_bytes()[4:])
    with pytest.raises(ValueError):
        gpe.read_snapshot(bad)


def test_centre_of_mass_follows_oscillator():
    cfg = gpe.GpeConfig(geometry="cartesian1d", extent=8.0, points=1024, dt=2e-3)
    check = gpe.center_of_mass_check(cfg, 0.5, 10.0)
    assert not check.escaped
    assert check.max_deviation < 5e-4
    np.testing.assert_allclose(check.ode, 0.5 * np.cos(check.times), atol=1e-8)
    with pytest.raises(ValueError):
        gpe.center_of_mass_check(radial(points=256), 0.5, 1.0)
