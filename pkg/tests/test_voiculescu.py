import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gtdyn.voiculescu import (
    DomainError,
    OmegaPoint,
    check_total_positivity,
    default_window,
    phi_coeffs_contour,
    phi_coeffs_series,
    phi_eval,
    validate_q_case,
)

GRID = {
    "beta": OmegaPoint(beta_plus=(0.4, 0.2), beta_minus=(0.3,)),
    "alpha": OmegaPoint(alpha_plus=(0.3,), alpha_minus=(0.25,)),
    "gamma": OmegaPoint(gamma_plus=0.7, gamma_minus=0.4),
    "mixed": OmegaPoint(alpha_plus=(0.2,), beta_plus=(0.3,), alpha_minus=(0.1,), beta_minus=(0.2,), gamma_plus=0.3),
}

omegas = st.builds(
    OmegaPoint,
    alpha_plus=st.lists(st.floats(0, 0.5), max_size=2).map(lambda v: tuple(sorted(v, reverse=True))),
    beta_plus=st.lists(st.floats(0, 0.5), max_size=2).map(lambda v: tuple(sorted(v, reverse=True))),
    alpha_minus=st.lists(st.floats(0, 0.5), max_size=2).map(lambda v: tuple(sorted(v, reverse=True))),
    beta_minus=st.lists(st.floats(0, 0.5), max_size=1).map(lambda v: tuple(sorted(v, reverse=True))),
    gamma_plus=st.floats(0, 1),
    gamma_minus=st.floats(0, 1),
)


def test_phi_eval_examples():
    assert phi_eval(OmegaPoint(), 0.3 + 2j) == 1
    assert phi_eval(OmegaPoint(beta_plus=(0.5,)), -1) == pytest.approx(0)


@given(omegas)
def test_phi_at_one(om):
    assert abs(phi_eval(om, 1.0) - 1) <= 1e-15


def test_phi_pole_is_a_domain_error():
    with pytest.raises(DomainError):
        phi_eval(OmegaPoint(alpha_plus=(0.5,)), 3.0)


def test_series_examples():
    w = phi_coeffs_series(OmegaPoint(gamma_plus=1.0), -3, 8)
    for n in range(-3, 9):
        want = math.exp(-1) / math.factorial(n) if n >= 0 else 0.0
        assert w(n) == pytest.approx(want, abs=1e-15)
    b = 0.35
    w = phi_coeffs_series(OmegaPoint(beta_plus=(b,)), -2, 3)
    assert w(0) == pytest.approx(1 - b) and w(1) == pytest.approx(b) and w(2) == 0 and w(-1) == 0
    a = 0.4
    w = phi_coeffs_series(OmegaPoint(alpha_minus=(a,)), -10, 2)
    for n in range(0, 11):
        assert w(-n) == pytest.approx(a**n / (1 + a) ** (n + 1), rel=1e-12)


def test_contour_examples():
    w = phi_coeffs_contour(OmegaPoint(), -3, 3)
    assert np.allclose(w.coeffs, [0, 0, 0, 1, 0, 0, 0], atol=1e-15)
    om = OmegaPoint(gamma_plus=1.0, gamma_minus=1.0)
    w = phi_coeffs_contour(om, -6, 6)
    for n in range(-6, 7):
        want = math.exp(-2) * sum(1 / (math.factorial(k) * math.factorial(k - n)) for k in range(max(0, n), 40))
        assert w(n) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("name", sorted(GRID))
def test_engines_agree(name):
    om = GRID[name]
    s = phi_coeffs_series(om, -25, 25)
    c = phi_coeffs_contour(om, -25, 25)
    assert np.abs(s.coeffs - c.coeffs).max() <= 1e-10


@pytest.mark.parametrize("name", sorted(GRID))
def test_window_mass_and_positivity(name):
    w = default_window(GRID[name])
    assert abs(w.coeffs.sum() + w.tail_mass - 1) <= 1e-12
    assert w.coeffs.min() >= -1e-16


def test_support_prediction():
    om = OmegaPoint(beta_plus=(0.3, 0.2), alpha_minus=(0.2,))
    lo, hi = om.support_bounds()
    assert hi == 2 and lo == -np.inf
    w = phi_coeffs_series(om, -10, 6)
    assert all(w(n) == 0 for n in range(3, 7))
    assert w(2) > 0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_total_positivity_gamma(k):
    w = phi_coeffs_series(OmegaPoint(gamma_plus=1.0), -4, 16)
    assert check_total_positivity(w, k, 200, rng=1).passed


def test_total_positivity_detects_corruption():
    w = phi_coeffs_series(OmegaPoint(gamma_plus=1.0), -4, 16)
    c = w.coeffs.copy()
    c[np.argmax(c)] *= -1
    assert not check_total_positivity(w.with_coeffs(c), 1, 1).passed


@given(omegas, st.integers(1, 3))
def test_power_is_pointwise_power(om, k):
    z = 0.8 + 0.3j
    assert phi_eval(om.power(k), z) == pytest.approx(phi_eval(om, z) ** k, rel=1e-10)


@given(omegas, st.floats(0.7, 1.4))
def test_tilt(om, r):
    try:
        t = om.tilt(r)
    except DomainError:
        return
    z = 0.9 - 0.2j
    assert phi_eval(t, z) == pytest.approx(phi_eval(om, r * z) / phi_eval(om, r), rel=1e-9)


def test_validate_q_case():
    validate_q_case(OmegaPoint(beta_plus=(0.3,)), 3, 0.5)
    with pytest.raises(DomainError, match="annulus"):
        validate_q_case(OmegaPoint(alpha_plus=(0.5,)), 3, 0.5)
    with pytest.raises(DomainError):
        validate_q_case(OmegaPoint(), 2, 1.0)


def test_parameter_domain():
    with pytest.raises(ValueError):
        OmegaPoint(beta_plus=(0.7,), beta_minus=(0.6,))
    with pytest.raises(ValueError):
        OmegaPoint(gamma_plus=-1.0)
    om = GRID["mixed"]
    assert OmegaPoint.from_json(om.to_json()) == om
