import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from bec_resonance.models import (Barrier, DynamicalState, ModelKind, ModelParams, TrapModulation,
                                  UnsupportedModelError, WidthDomainError, energy, equilibrium_width,
                                  equilibrium_widths_3d, fold_to_width, interaction_from_physical,
                                  linearized_frequency, rhs)

STATIC = TrapModulation()


def radial_accel(v, dv, P, lam2=1.0, gamma=0.0):
    return -lam2 * v - gamma * dv + 1.0 / v**3 + P / v**4


def test_free_equilibrium_has_zero_force():
    a = rhs(ModelKind.RADIAL, ModelParams(0.0), STATIC, DynamicalState((1.0,), (0.0,)))
    assert a[0] == 0.0


@given(v=st.floats(0.05, 20.0), dv=st.floats(-5, 5), P=st.floats(0, 200), t=st.floats(0, 50))
@settings(max_examples=50, deadline=None)
def test_radial_rhs_matches_closed_form(v, dv, P, t):
    trap = TrapModulation.isotropic(0.2, 2.1, damping=0.1)
    a = rhs(ModelKind.RADIAL, ModelParams(P), trap, DynamicalState((v,), (dv,), t))
    lam2 = 1.0 + 0.2 * math.cos(2.1 * t)
    assert a[0] == pytest.approx(radial_accel(v, dv, P, lam2, 0.1), rel=1e-12, abs=1e-12)


@given(v=st.floats(0.2, 10.0), dv=st.floats(-3, 3), P=st.floats(0, 50), t=st.floats(0, 20))
@settings(max_examples=40, deadline=None)
def test_isotropic_3d_reduces_to_radial(v, dv, P, t):
    trap = TrapModulation.isotropic(0.1, 1.9)
    params = ModelParams(P)
    a3 = rhs(ModelKind.VARIATIONAL_3D, params, trap, DynamicalState((v,) * 3, (dv,) * 3, t))
    a1 = rhs(ModelKind.RADIAL, params, trap, DynamicalState((v,), (dv,), t))
    np.testing.assert_allclose(a3, a1[0], rtol=1e-13)


def test_3d_coupling_term():
    P = 2.0
    v = np.array([1.0, 2.0, 0.5])
    a = rhs(ModelKind.VARIATIONAL_3D, ModelParams(P), STATIC, DynamicalState(tuple(v), (0.0,) * 3))
    expected = -v + 1 / v**3 + P / (v * np.prod(v))
    np.testing.assert_allclose(a, expected, rtol=1e-14)


def test_linear_models_ignore_interaction():
    trap = TrapModulation.isotropic(0.3, 2.0, damping=0.05)
    s = DynamicalState((-0.7,), (0.2,), 1.3)
    for kind in (ModelKind.MATHIEU, ModelKind.CENTER_OF_MASS):
        a = rhs(kind, ModelParams(50.0), trap, s)
        lam2 = 1.0 + 0.3 * math.cos(2.0 * 1.3)
        assert a[0] == pytest.approx(-lam2 * -0.7 - 0.05 * 0.2, rel=1e-14)


def test_nonpositive_width_rejected():
    with pytest.raises(WidthDomainError):
        rhs(ModelKind.RADIAL, ModelParams(1.0), STATIC, DynamicalState((0.0,), (1.0,)))
    with pytest.raises(WidthDomainError):
        rhs(ModelKind.VARIATIONAL_3D, ModelParams(1.0), STATIC, DynamicalState((1.0, -0.1, 1.0), (0, 0, 0)))


def test_energy_closed_form():
    P = 9.2
    s = DynamicalState((1.3,), (0.4,))
    E = energy(ModelKind.RADIAL, ModelParams(P), STATIC, s)
    assert E == pytest.approx(0.5 * 0.16 + 0.5 * 1.69 + 1 / (2 * 1.69) + P / (3 * 1.3**3), rel=1e-14)
    v = np.array([1.0, 1.5, 2.0])
    E3 = energy(ModelKind.VARIATIONAL_3D, ModelParams(P), STATIC, DynamicalState(tuple(v), (0.1, 0, 0)))
    assert E3 == pytest.approx(0.005 + 0.5 * np.sum(v**2) + np.sum(1 / (2 * v**2)) + P / np.prod(v), rel=1e-14)


def test_energy_not_defined_for_linear_models():
    with pytest.raises(UnsupportedModelError):
        energy(ModelKind.MATHIEU, ModelParams(0.0), STATIC, DynamicalState((1.0,), (0.0,)))


def test_force_is_minus_energy_gradient():
    # central differences of the potential part of the energy
    P = 9.2
    params = ModelParams(P)
    for v in (0.7, 1.6, 4.0):
        h = 1e-6
        Ep = energy(ModelKind.RADIAL, params, STATIC, DynamicalState((v + h,), (0.0,)))
        Em = energy(ModelKind.RADIAL, params, STATIC, DynamicalState((v - h,), (0.0,)))
        a = rhs(ModelKind.RADIAL, params, STATIC, DynamicalState((v,), (0.0,)))[0]
        assert a == pytest.approx(-(Ep - Em) / (2 * h), rel=1e-7)


@pytest.mark.parametrize("P", [0.0, 0.5, 9.2, 184.0, 1e4])
def test_equilibrium_against_root_finder(P):
    oracle = brentq(lambda v: v**5 - v - P, 1e-3, 100.0, xtol=1e-15)
    assert equilibrium_width(ModelParams(P)) == pytest.approx(oracle, rel=1e-12)


def test_equilibrium_reference_value():
    assert equilibrium_width(ModelParams(9.2)) == pytest.approx(1.610, abs=1e-3)
    assert equilibrium_width(ModelParams(0.0)) == pytest.approx(1.0, abs=1e-14)


def test_equilibrium_with_trap_strength():
    lam0 = 1.7
    v = equilibrium_width(ModelParams(3.0), lam0)
    assert lam0**2 * v**5 - v - 3.0 == pytest.approx(0.0, abs=1e-10)


def test_linearized_frequency_free_gas_is_two():
    assert linearized_frequency(ModelParams(0.0)) == 2.0


@pytest.mark.parametrize("barrier", list(Barrier))
@pytest.mark.parametrize("P", [0.0, 9.2, 184.0])
def test_linearized_frequency_against_finite_difference(P, barrier):
    params = ModelParams(P, barrier=barrier)
    v = equilibrium_width(params)
    h = 1e-5 * v

    def f(x):
        return rhs(ModelKind.RADIAL, params, STATIC, DynamicalState((x,), (0.0,)))[0]

    assert abs(f(v)) < 1e-9
    k = -(f(v + h) - f(v - h)) / (2 * h)
    assert linearized_frequency(params) == pytest.approx(math.sqrt(k), rel=1e-7)


def test_barrier_variants_share_strength_at_unit_width():
    s = DynamicalState((1.0,), (0.0,))
    forces = [rhs(ModelKind.RADIAL, ModelParams(9.2, barrier=b), STATIC, s)[0] for b in Barrier]
    assert forces == pytest.approx([forces[0]] * 3, rel=1e-14)


def test_inverse_cube_variant_is_isochronous():
    # the 1/v^3 barrier gives a breathing frequency of exactly 2 for every strength
    for P in (0.0, 9.2, 184.0):
        assert linearized_frequency(ModelParams(P, barrier=Barrier.INVERSE_CUBE)) == pytest.approx(2.0, rel=1e-14)


def test_equilibrium_3d_anisotropic():
    lam = (1.0, 1.0, math.sqrt(8.0))
    P = 9.2
    v = equilibrium_widths_3d(ModelParams(P), lam)
    a = rhs(ModelKind.VARIATIONAL_3D, ModelParams(P), TrapModulation(lam), DynamicalState(tuple(v), (0, 0, 0)))
    np.testing.assert_allclose(a, 0.0, atol=1e-10)
    assert v[0] == pytest.approx(v[1], rel=1e-12)
    assert v[2] < v[0]


def test_equilibrium_3d_isotropic_matches_radial():
    v = equilibrium_widths_3d(ModelParams(9.2), (1.0, 1.0, 1.0))
    np.testing.assert_allclose(v, equilibrium_width(ModelParams(9.2)))


def test_physical_parameters():
    P = interaction_from_physical(1e4, 5e-9, 1e-6)
    assert P == pytest.approx(math.sqrt(2 / math.pi) * 1e4 * 5e-3, rel=1e-14)
    params = ModelParams.from_physical(1e4, 5e-9, 1e-6)
    assert params.interaction == P
    with pytest.raises(ValueError):
        ModelParams(P * 1.01, 1e4, 5e-9, 1e-6)
    with pytest.raises(ValueError):
        ModelParams(1.0, particle_number=10.0)


def test_parameter_validation():
    with pytest.raises(ValueError):
        ModelParams(-1.0)
    with pytest.raises(ValueError):
        TrapModulation.isotropic(1.0, 2.0)
    with pytest.raises(ValueError):
        TrapModulation.isotropic(0.1, 0.0)
    with pytest.raises(ValueError):
        TrapModulation.isotropic(0.1, 2.0, damping=-0.1)
    with pytest.raises(ValueError):
        TrapModulation((1.0, 0.0, 1.0))


def test_drive_patterns():
    m0 = TrapModulation.m0(0.1, 2.0)
    m2 = TrapModulation.m2(0.1, 2.0)
    assert m0.amplitudes == (0.1, 0.1, 0.0)
    assert m2.amplitudes == (0.1, -0.1, 0.0)
    lam2 = m2.evaluate(0.0)
    np.testing.assert_allclose(lam2, [1.1, 0.9, 1.0])


def test_fold_to_width():
    np.testing.assert_array_equal(fold_to_width(np.array([-2.0, 0.0, 3.0])), [2.0, 0.0, 3.0])


def test_state_layout_round_trip():
    s = DynamicalState((1.0, 2.0, 3.0), (4.0, 5.0, 6.0), 0.5)
    assert DynamicalState.from_array(s.as_array(), 0.5) == s
    with pytest.raises(ValueError):
        DynamicalState((1.0, 2.0), (0.0, 0.0))


def test_reference_values():
    a = rhs(ModelKind.RADIAL, ModelParams(9.2), STATIC, DynamicalState((1.6,), (0.0,)))[0]
    assert a == pytest.approx(-1.6 + 1 / 1.6**3 + 9.2 / 1.6**4, rel=1e-14)
    assert a == pytest.approx(0.04795, abs=1e-5)
    assert rhs(ModelKind.MATHIEU, ModelParams(0.0), STATIC, DynamicalState((1.0,), (0.0,)))[0] == -1.0
    # 1/2 v^2 + 1/(2 v^2) at the free equilibrium
    assert energy(ModelKind.RADIAL, ModelParams(0.0), STATIC, DynamicalState((1.0,), (0.0,))) == 1.0
    assert energy(ModelKind.RADIAL, ModelParams(9.2), STATIC,
                  DynamicalState((1.6,), (0.0,))) == pytest.approx(2.224, abs=1e-3)
    assert energy(ModelKind.VARIATIONAL_3D, ModelParams(0.0), STATIC,
                  DynamicalState((1.0,) * 3, (0.0,) * 3)) == 3.0


@pytest.mark.parametrize("P", [0.0, 9.2, 184.0])
@pytest.mark.parametrize("lam0", [0.5, 1.0, 2.0])
def test_equilibrium_residual(P, lam0):
    params = ModelParams(P)
    v = equilibrium_width(params, lam0)
    oracle = brentq(lambda x: lam0**2 * x**5 - x - P, 1e-3, 100.0, xtol=1e-15)
    assert v == pytest.approx(oracle, abs=1e-12)
    trap = TrapModulation((lam0,) * 3)
    assert abs(rhs(ModelKind.RADIAL, params, trap, DynamicalState((v,), (0.0,)))[0]) < 1e-10


def test_linearized_frequency_values():
    assert linearized_frequency(ModelParams(9.2)) == pytest.approx(2.202, abs=1e-3)
    # strong interaction: omega_lin^2 -> 5 lam0^2
    assert linearized_frequency(ModelParams(1e12)) ** 2 == pytest.approx(5.0, rel=1e-4)
    assert linearized_frequency(ModelParams(1e12), 2.0) ** 2 == pytest.approx(20.0, rel=1e-4)
