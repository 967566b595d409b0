import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from zilcrm.circular_core import (
    FULL_CIRCLE,
    ArcInterval,
    Cov2,
    DomainError,
    UndefinedDirectionError,
    atan2_paper,
    joint_density_r_theta,
    mean_direction_and_resultant,
    pn_density,
    slope_diagnostics,
    tpn_mass,
    tpn_mass_many,
    wrap,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)
coef = st.floats(-10, 10, allow_nan=False)


def bvn_polar_oracle(r, theta, mu, cov):
    """Bivariate normal density at r(cos, sin) times the Jacobian r."""
    y = np.array([r * math.cos(theta), r * math.sin(theta)]) - np.asarray(mu)
    S = cov.matrix
    q = y @ np.linalg.solve(S, y)
    return r * math.exp(-0.5 * q) / (2 * math.pi * math.sqrt(np.linalg.det(S)))


# -- wrap / atan2 -----------------------------------------------------------

@pytest.mark.parametrize("raw, expected", [(0.0, 0.0), (3 * math.pi, math.pi), (-math.pi, math.pi),
                                           (2 * math.pi, 0.0), (-3 * math.pi / 2, math.pi / 2)])
def test_wrap_examples(raw, expected):
    assert wrap(raw) == pytest.approx(expected, abs=1e-12)


def test_wrap_rejects_nonfinite():
    with pytest.raises(DomainError):
        wrap(float("inf"))
    with pytest.raises(DomainError):
        wrap(float("nan"))


@given(finite)
def test_wrap_range_and_idempotence(t):
    w = wrap(t)
    assert -math.pi < w <= math.pi
    assert wrap(w) == w


@given(st.floats(-100, 100, allow_nan=False), st.integers(-50, 50))
def test_wrap_shift_equivariance(t, k):
    a, b = wrap(t), wrap(t + 2 * math.pi * k)
    d = abs(a - b)
    assert min(d, 2 * math.pi - d) < 1e-9


@pytest.mark.parametrize("S, C, expected", [(1, 0, math.pi / 2), (0, -1, math.pi), (1, 1, math.pi / 4),
                                            (-1, 0, -math.pi / 2), (0, 2, 0.0), (-1, -1, -3 * math.pi / 4)])
def test_atan2_examples(S, C, expected):
    assert atan2_paper(S, C) == pytest.approx(expected, abs=1e-15)


def test_atan2_undefined_at_origin():
    with pytest.raises(UndefinedDirectionError):
        atan2_paper(0.0, 0.0)


def test_atan2_negative_zero_sine_counts_as_zero():
    # sgn(0) = +1 puts the negative x-axis at +pi
    assert atan2_paper(-0.0, -1.0) == math.pi


@given(finite, finite)
def test_atan2_matches_platform_off_boundary(S, C):
    if S == 0 or C == 0:
        return
    assert atan2_paper(S, C) == pytest.approx(math.atan2(S, C), abs=1e-12)


# -- densities --------------------------------------------------------------

def test_joint_density_examples():
    I = Cov2(1.0, 1.0, 0.0)
    assert joint_density_r_theta(1.0, 0.0, (0, 0), I) == pytest.approx(math.exp(-0.5) / (2 * math.pi), abs=1e-12)
    v = joint_density_r_theta(2.0, math.pi / 2, (0, 1), I)
    assert v == pytest.approx(0.193064, abs=1e-6)
    assert v == pytest.approx(bvn_polar_oracle(2.0, math.pi / 2, (0, 1), I), rel=1e-12)


@pytest.mark.parametrize("mu, cov", [((0.5, -1.0), Cov2(2.0, 0.5, 0.4)), ((3.0, 1.0), Cov2(1.0, 3.0, -0.7))])
def test_joint_density_matches_polar_oracle(mu, cov):
    for r, t in [(0.3, -2.0), (1.7, 0.4), (4.0, 3.0)]:
        assert joint_density_r_theta(r, t, mu, cov) == pytest.approx(bvn_polar_oracle(r, t, mu, cov), rel=1e-12)


def test_joint_density_normalizes():
    mu, cov = (0.8, -0.3), Cov2(1.5, 0.7, 0.2)
    val, _ = integrate.dblquad(lambda r, t: joint_density_r_theta(r, t, mu, cov),
                               -math.pi, math.pi, 0, 30, epsabs=1e-11)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_joint_density_rejects_nonpositive_radius():
    with pytest.raises(DomainError):
        joint_density_r_theta(0.0, 0.0, (0, 0), Cov2(1, 1, 0))


def test_pn_uniform_case_exact():
    for t in np.linspace(-3, 3, 7):
        assert pn_density(t, (0.0, 0.0), Cov2(1, 1, 0)) == 1 / (2 * math.pi)


def test_pn_density_against_radial_integral():
    # oracle: integrate the joint density over r
    oracle, _ = integrate.quad(lambda r: bvn_polar_oracle(r, 0.0, (1, 0), Cov2(1, 1, 0)), 0, np.inf,
                               epsabs=1e-13)
    assert pn_density(0.0, (1.0, 0.0)) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(0.43218, abs=5e-6)


def test_pn_density_general_cov_against_radial_integral():
    mu, cov = (-1.2, 2.5), Cov2(3.0, 0.4, 0.6)
    for t in (-2.5, 0.0, 1.1, math.pi):
        oracle, _ = integrate.quad(lambda r: bvn_polar_oracle(r, t, mu, cov), 0, np.inf, epsabs=1e-13)
        assert pn_density(t, mu, cov) == pytest.approx(oracle, rel=1e-9, abs=1e-13)


def test_pn_density_large_mean_is_finite():
    v = pn_density(np.linspace(-math.pi, math.pi, 101), (40.0, 10.0))
    assert np.all(np.isfinite(v)) and np.all(v >= 0)
    total, _ = integrate.quad(lambda t: pn_density(t, (40.0, 10.0)), -math.pi, math.pi,
                              points=[math.atan2(10, 40)], limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_pn_density_rejects_singular_covariance():
    with pytest.raises(DomainError):
        pn_density(0.0, (1, 0), Cov2(1.0, 1.0, 1.0))


def test_scale_identity_example():
    B, G = (1.3, -0.4), Cov2(2.0, 0.8, 0.35)
    c = 3.0
    cG = Cov2(c * c * G.s11, c * c * G.s22, G.rho)
    for t in np.linspace(-3, 3, 13):
        assert abs(pn_density(t, (c * B[0], c * B[1]), cG) - pn_density(t, B, G)) < 1e-12


# -- arc masses ------------------------------------------------------------

def test_tpn_mass_full_circle():
    for mu in [(0, 0), (3, -2), (-7, 1)]:
        assert tpn_mass(mu, FULL_CIRCLE) == pytest.approx(1.0, abs=1e-10)


def test_tpn_mass_uniform_case():
    for d in (0.035, 0.5, 2.0):
        assert tpn_mass((0, 0), ArcInterval.symmetric(d)) == pytest.approx(d / math.pi, abs=1e-12)


def test_tpn_mass_matches_rejection_estimate():
    rng = np.random.default_rng(11)
    n = 2_000_000
    y = rng.standard_normal((n, 2)) + [1.0, 0.0]
    hit = np.abs(np.arctan2(y[:, 1], y[:, 0])) < 0.035
    p = hit.mean()
    se = math.sqrt(p * (1 - p) / n)
    assert abs(tpn_mass((1.0, 0.0), ArcInterval.symmetric(0.035)) - p) < 3 * se


@settings(max_examples=40, deadline=None)
@given(coef, coef, st.floats(-3.0, 2.9), st.floats(0.01, 0.99))
def test_tpn_mass_additive_over_adjacent_arcs(m1, m2, lo, frac):
    hi = min(lo + 0.1 + frac * (math.pi - lo - 0.1), math.pi)
    mid = lo + frac * (hi - lo)
    whole = tpn_mass((m1, m2), ArcInterval(lo, hi))
    parts = tpn_mass((m1, m2), ArcInterval(lo, mid)) + tpn_mass((m1, m2), ArcInterval(mid, hi))
    assert whole == pytest.approx(parts, abs=1e-9)


def test_tpn_mass_many_agrees_with_adaptive():
    rng = np.random.default_rng(2)
    mu = rng.normal(0, 4, (50, 2))
    fast = tpn_mass_many(mu[:, 0], mu[:, 1], -0.14, 0.14)
    slow = [tpn_mass(m, ArcInterval.symmetric(0.14)) for m in mu]
    np.testing.assert_allclose(fast, slow, atol=1e-10)


def test_arc_contains_is_open():
    arc = ArcInterval(-0.1, 0.2)
    assert list(arc.contains(np.array([-0.1, 0.0, 0.2]))) == [False, True, False]


def test_arc_requires_order():
    with pytest.raises(DomainError):
        ArcInterval(0.2, -0.1)


# -- interpretation diagnostics -------------------------------------------

def test_mean_direction_uniform_is_undefined():
    direction, res = mean_direction_and_resultant((0, 0), Cov2(1, 1, 0))
    assert direction is None and res == pytest.approx(0.0, abs=1e-12)


def test_mean_direction_symmetric_case():
    direction, res = mean_direction_and_resultant((5, 0))
    assert direction == pytest.approx(0.0, abs=1e-10)
    assert 0 < res < 1


def test_resultant_grows_with_mean_norm():
    assert mean_direction_and_resultant((2, 0))[1] < mean_direction_and_resultant((5, 0))[1]


def test_mean_direction_matches_sample_moments():
    mu, cov = (1.0, 2.0), Cov2(1.5, 0.6, -0.3)
    rng = np.random.default_rng(5)
    y = rng.multivariate_normal(mu, cov.matrix, 400_000)
    t = np.arctan2(y[:, 1], y[:, 0])
    c, s = np.cos(t).mean(), np.sin(t).mean()
    direction, res = mean_direction_and_resultant(mu, cov)
    assert direction == pytest.approx(math.atan2(s, c), abs=5e-3)
    assert res == pytest.approx(math.hypot(c, s), abs=5e-3)


def test_slope_example_from_coefficients():
    m, mp, rate = slope_diagnostics((1, 3), (-2, 2), 0.0)
    assert mp == pytest.approx(1.6)
    assert m == pytest.approx(math.atan2(-2, 1))
    assert rate == pytest.approx(2 * (1 * 3 + (-2) * 2))


def test_slope_zero_when_no_slopes():
    for x in (-3.0, 0.0, 5.0):
        assert slope_diagnostics((1.5, 0.0), (-0.5, 0.0), x)[1] == 0.0


def test_slope_collinear_direction():
    # b10*b21 - b11*b20 = 0 with b21 > 0: direction pinned to atan2(b21, b11)
    b10, b11, b20, b21 = 2.0, 1.0, 4.0, 2.0
    for x in (-1.5, 0.0, 3.0):
        m, mp, _ = slope_diagnostics((b10, b11), (b20, b21), x)
        assert mp == pytest.approx(0.0, abs=1e-15)
        assert m == pytest.approx(atan2_paper(b21, b11))


def test_slope_numerical_derivative():
    b1, b2 = (0.3, -1.1), (2.0, 0.7)
    h = 1e-6
    x = 0.4
    m_plus = slope_diagnostics(b1, b2, x + h)[0]
    m_minus = slope_diagnostics(b1, b2, x - h)[0]
    assert slope_diagnostics(b1, b2, x)[1] == pytest.approx((m_plus - m_minus) / (2 * h), rel=1e-6)


def test_slope_undefined_at_zero_mean():
    with pytest.raises(UndefinedDirectionError):
        slope_diagnostics((1.0, 1.0), (1.0, 1.0), -1.0)
