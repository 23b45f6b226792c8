import math

import pytest
from hypothesis import given, settings, strategies as st

from bec_resonance.asymptotics import (damped_growth, detuning, growth_exponent, optimal_frequency,
                                       predict, resonance_band)
from bec_resonance.floquet import monodromy
from bec_resonance.models import TrapModulation


def test_growth_exponent_on_resonance():
    assert growth_exponent(2.0, 0.4) == pytest.approx(0.1, abs=1e-15)


def test_growth_exponent_absent_off_resonance():
    assert growth_exponent(2.2, 0.1) is None
    assert growth_exponent(1.7, 0.0) is None
    assert growth_exponent(2.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        growth_exponent(2.0, -0.1)


def test_detuning():
    assert detuning(2.3) == pytest.approx(0.15)
    assert detuning(1.7) == pytest.approx(0.15)


@pytest.mark.parametrize("eps,expected", [(0.0, 2.0), (0.4, 1.96), (0.15, 1.994375)])
def test_optimal_frequency(eps, expected):
    assert optimal_frequency(eps) == pytest.approx(expected, abs=1e-15)


def test_resonance_band():
    assert resonance_band(0.0) == (2.0, 2.0)
    lo, hi = resonance_band(0.15)
    assert lo == pytest.approx(1.9243, abs=1e-4) and hi == pytest.approx(2.0757, abs=1e-4)
    assert lo < 2.04 < hi
    lo, hi = resonance_band(0.32)
    assert (hi - lo) / 2 == pytest.approx(0.1632, abs=1e-12)


def test_damped_growth():
    assert damped_growth(2.0, 0.4, 0.1) == pytest.approx(0.0, abs=1e-15)
    assert damped_growth(2.0, 0.4, 0.15) == pytest.approx(-0.05, abs=1e-15)
    assert damped_growth(2.2, 0.1, 0.1) is None
    with pytest.raises(ValueError):
        damped_growth(2.0, 0.1, -1.0)


@given(omega=st.floats(1.5, 2.5), eps=st.floats(0.0, 0.8))
def test_undamped_reduces_to_growth_exponent(omega, eps):
    assert damped_growth(omega, eps, 0.0) == growth_exponent(omega, eps)


@given(omega=st.floats(1.5, 2.5), eps=st.floats(0.0, 0.3))
def test_defined_exactly_inside_first_order_band(omega, eps):
    inside = abs(omega - 2.0) / 2 <= eps / (2 * omega)
    q = growth_exponent(omega, eps)
    if abs(abs(omega - 2.0) / 2 - eps / (2 * omega)) > 1e-12:
        assert (q is not None) == inside
    if inside:
        lo, hi = resonance_band(eps)
        assert lo <= omega <= hi


@given(eps=st.floats(0.0, 0.5), d=st.floats(1e-3, 0.5))
def test_monotonicity(eps, d):
    assert growth_exponent(2.0, eps + d) > growth_exponent(2.0, eps)
    q = growth_exponent(2.0 + d, eps)
    assert q is None or q <= growth_exponent(2.0, eps) + 1e-15


def test_prediction_bundle():
    p = predict(2.0, 0.4, 0.15)
    assert p.q == pytest.approx(0.1)
    assert p.damped_exponent == pytest.approx(-0.05)
    assert not p.unstable
    assert predict(2.0, 0.4).unstable
    assert predict(2.5, 0.1).damped_exponent is None
    for eps in (0.1, 0.3, 0.5):
        lo, hi = predict(2.0, eps).band
        assert lo <= optimal_frequency(eps) <= hi


@pytest.mark.parametrize("eps", [0.02, 0.05, 0.1])
def test_agrees_with_floquet_at_two(eps):
    res = monodromy(TrapModulation((1.0,) * 3, (eps,) * 3, 2.0))
    q = growth_exponent(2.0, eps)
    assert abs(q - res.growth_exponent) <= 0.15 * q
    assert q == pytest.approx(eps / 4, rel=1e-14)
    assert math.isfinite(res.growth_exponent)
