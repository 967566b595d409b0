import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from zilcrm.circular_core import FULL_CIRCLE, ArcInterval, Cov2, DomainError, pn_density, tpn_mass
from zilcrm.samplers import (
    DegenerateIntervalError,
    RngStream,
    TpnMode,
    radius_exact_many,
    radius_slice_many,
    sample_bernoulli,
    sample_beta,
    sample_gamma,
    sample_mvn2,
    sample_pn_many,
    sample_radius_exact,
    sample_radius_slice,
    sample_tpn,
    sample_tpn_many,
    sample_trinomial,
    sample_truncated_normal,
    truncnorm_std_many,
)

MODES = [TpnMode.EXACT_REJECTION, TpnMode.PAPER_COMPOSITE]


def gen(seed=0, stream=0):
    return RngStream(seed, stream).generator()


def tpn_cdf(mu, arc):
    mass = tpn_mass(mu, arc)

    def cdf(t):
        t = np.atleast_1d(t)
        return np.array([integrate.quad(lambda s: pn_density(s, mu), arc.delta1, min(max(v, arc.delta1), arc.delta2),
                                        epsabs=1e-12)[0] for v in t]) / mass
    return cdf


def equal_mass_edges(mu, arc, k=20):
    cdf = tpn_cdf(mu, arc)
    inner = [optimize.brentq(lambda t, q=q: cdf(t)[0] - q, arc.delta1, arc.delta2, xtol=1e-12)
             for q in np.arange(1, k) / k]
    return np.concatenate(([arc.delta1], inner, [arc.delta2]))


def radius_pdf(a):
    norm, _ = integrate.quad(lambda r: r * math.exp(-0.5 * (r - a) ** 2), 0, np.inf)
    return lambda r: r * np.exp(-0.5 * (r - a) ** 2) / norm


def radius_rejection(rng, a, n):
    """Independent draws from r exp(-(r-a)^2/2) by uniform-envelope rejection."""
    hi = max(a, 0) + 9.0
    f = radius_pdf(a)
    peak = f(0.5 * (a + math.sqrt(a * a + 4)))
    out = []
    while len(out) < n:
        r = rng.uniform(0, hi, 4 * n)
        keep = rng.uniform(0, peak, 4 * n) < f(r)
        out.extend(r[keep].tolist())
    return np.array(out[:n])


# -- streams ---------------------------------------------------------------

def test_stream_reproducible():
    a = gen(42, 3).standard_normal(5)
    b = gen(42, 3).standard_normal(5)
    c = gen(42, 4).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_tpn_deterministic_given_stream():
    arc = ArcInterval.symmetric(0.2)
    for mode in MODES:
        a = sample_tpn_many(gen(7), np.full(50, 1.0), np.full(50, 0.3), arc, mode)
        b = sample_tpn_many(gen(7), np.full(50, 1.0), np.full(50, 0.3), arc, mode)
        assert np.array_equal(a, b)


# -- truncated normal --------------------------------------------------------

def test_truncnorm_untruncated_moments():
    rng = gen(1)
    x = np.array([sample_truncated_normal(rng, 0.0, 1.0) for _ in range(100_000)])
    assert abs(x.mean()) < 3 / math.sqrt(1e5)
    assert x.var() == pytest.approx(1.0, abs=0.015)


def test_truncnorm_half_normal_mean():
    x = truncnorm_std_many(gen(2), np.zeros(100_000), np.full(100_000, np.inf))
    se = math.sqrt(1 - 2 / math.pi) / math.sqrt(1e5)
    assert abs(x.mean() - math.sqrt(2 / math.pi)) < 3.5 * se


def test_truncnorm_far_interval_ks():
    rng = gen(3)
    x = np.array([sample_truncated_normal(rng, 5.0, 1.0, -1.0, 1.0) for _ in range(5000)])
    assert np.all((x > -1) & (x < 1))
    ref = stats.truncnorm(-6.0, -4.0, loc=5.0, scale=1.0)
    assert stats.kstest(x, ref.cdf).pvalue > 0.01


def test_truncnorm_deep_tail_matches_oracle():
    rng = gen(4)
    x = np.array([sample_truncated_normal(rng, 0.0, 1.0, 12.0, np.inf) for _ in range(5000)])
    ref = stats.truncnorm(12.0, np.inf)
    assert np.all(x > 12)
    assert stats.kstest(x, ref.cdf).pvalue > 0.01


def test_truncnorm_scaled_variance():
    rng = gen(5)
    x = np.array([sample_truncated_normal(rng, 2.0, 4.0, 0.0, 3.0) for _ in range(5000)])
    ref = stats.truncnorm(-1.0, 0.5, loc=2.0, scale=2.0)
    assert stats.kstest(x, ref.cdf).pvalue > 0.01


def test_truncnorm_errors():
    rng = gen()
    with pytest.raises(DomainError):
        sample_truncated_normal(rng, 0, 1, 1.0, 0.0)
    with pytest.raises(DegenerateIntervalError):
        sample_truncated_normal(rng, 0, 1, 40.0, 41.0)
    with pytest.raises(DomainError):
        sample_truncated_normal(rng, 0, -1.0, 0.0, 1.0)


# -- TPN ---------------------------------------------------------------------

@pytest.mark.parametrize("mode", MODES)
def test_tpn_full_circle_uniform(mode):
    t = sample_tpn_many(gen(8), np.zeros(10_000), np.zeros(10_000), FULL_CIRCLE, mode)
    assert math.hypot(np.cos(t).mean(), np.sin(t).mean()) < 0.02


def test_tpn_small_arc_ks():
    arc = ArcInterval.symmetric(0.035)
    t = sample_tpn_many(gen(9), np.ones(10_000), np.zeros(10_000), arc)
    assert np.all(arc.contains(t))
    cdf = tpn_cdf((1.0, 0.0), arc)
    grid = np.linspace(arc.delta1, arc.delta2, 401)
    F = cdf(grid)
    assert stats.kstest(t, lambda v: np.interp(v, grid, F)).pvalue > 0.01


def _random_configs(seed, k=10):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(k):
        mu = tuple(rng.normal(0, 2.5, 2))
        lo = rng.uniform(-math.pi, math.pi - 0.05)
        hi = rng.uniform(lo + 0.05, math.pi)
        out.append((mu, ArcInterval(lo, hi)))
    return out


@pytest.mark.parametrize("k, config", list(enumerate(_random_configs(2024))))
def test_tpn_rejection_chi_square(k, config):
    mu, arc = config
    edges = equal_mass_edges(mu, arc)
    t = sample_tpn_many(gen(100 + k), np.full(10_000, mu[0]), np.full(10_000, mu[1]), arc)
    counts = np.histogram(t, edges)[0]
    assert stats.chisquare(counts).pvalue > 0.01


# the seven branches of the composite algorithm, by arc location
SEVEN_ARCS = [
    ArcInterval(-1.0, 1.2),                    # inside the right half-plane
    ArcInterval(-2.5, 0.5),                    # lower end in the left half-plane
    ArcInterval(-0.5, 2.7),                    # upper end in the left half-plane
    ArcInterval(1.8, 3.0),                     # both ends upper-left
    ArcInterval(-3.0, -1.9),                   # both ends lower-left
    ArcInterval(-2.9, 2.9),                    # spans the negative axis
    ArcInterval(-math.pi / 2, math.pi / 2),    # exactly on the half-plane edges
]


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("arc", SEVEN_ARCS)
def test_tpn_inside_arc_all_cases(mode, arc):
    rng = np.random.default_rng(0)
    mu = rng.normal(0, 3, (500, 2))
    t = sample_tpn_many(gen(11), mu[:, 0], mu[:, 1], arc, mode)
    assert np.all(arc.contains(t))


@settings(max_examples=30, deadline=None)
@given(st.floats(-6, 6), st.floats(-6, 6), st.floats(-3.1, 3.0), st.floats(0.01, 1.0),
       st.sampled_from(MODES))
def test_tpn_inside_arc_property(m1, m2, lo, frac, mode):
    hi = lo + 0.02 + frac * (math.pi - lo - 0.02)
    arc = ArcInterval(lo, hi)
    t = sample_tpn_many(gen(12), np.full(20, m1), np.full(20, m2), arc, mode)
    assert np.all(arc.contains(t))


def test_tpn_tiny_arc_far_from_mean_uses_fallback():
    # acceptance probability far below the attempt cap
    arc = ArcInterval(3.1, 3.12)
    t = sample_tpn(gen(13), (9.0, 0.0), arc)
    assert arc.contains(t)


def test_tpn_zero_mass_arc_is_degenerate():
    with pytest.raises(DegenerateIntervalError):
        sample_tpn(gen(), (60.0, 0.0), ArcInterval(3.1, 3.12))


def test_pn_draws_match_density():
    t = sample_pn_many(gen(14), np.full(20_000, 1.5), np.full(20_000, -0.5))
    cdf = lambda v: np.array([integrate.quad(lambda s: pn_density(s, (1.5, -0.5)), -math.pi, x)[0]
                              for x in np.atleast_1d(v)])
    grid = np.linspace(-math.pi, math.pi, 301)
    F = cdf(grid)
    assert stats.kstest(t, lambda v: np.interp(v, grid, F)).pvalue > 0.01


# -- radius kernels ------------------------------------------------------------

def test_radius_slice_rayleigh_at_zero():
    rng = gen(15)
    r = np.array([1.0])
    out = np.empty(100_000)
    for k in range(out.size):
        r = radius_slice_many(rng, r, np.zeros(1))
        out[k] = r[0]
    # every tenth state keeps serial correlation negligible for the KS test
    assert stats.kstest(out[::10], stats.rayleigh.cdf).pvalue > 0.01


def test_radius_slice_mean_far_from_origin():
    rng = gen(16)
    r = np.full(100, 10.0)
    draws = []
    for _ in range(1000):
        r = radius_slice_many(rng, r, np.full(100, 10.0))
        draws.append(r.copy())
    f = radius_pdf(10.0)
    target, _ = integrate.quad(lambda x: x * f(x), 0, np.inf)
    assert np.mean(draws) == pytest.approx(target, abs=0.05)


@pytest.mark.parametrize("a", [0.0, -1.5, 2.0, 6.0])
def test_radius_slice_leaves_target_invariant(a):
    rng = gen(17, int(10 * a) % 97)
    start = radius_rejection(rng, a, 1000)
    after = radius_slice_many(rng, start, np.full(1000, a))
    edges = np.quantile(start, np.linspace(0, 1, 11))
    edges[0], edges[-1] = 0.0, np.inf
    table = np.vstack([np.histogram(start, edges)[0], np.histogram(after, edges)[0]])
    assert stats.chi2_contingency(table).pvalue > 0.01


@given(st.floats(1e-6, 50), st.floats(-20, 20))
@settings(max_examples=200)
def test_radius_slice_positive(r0, a):
    assert sample_radius_slice(gen(18), r0, a) > 0


def test_radius_slice_rejects_nonpositive_state():
    with pytest.raises(DomainError):
        sample_radius_slice(gen(), 0.0, 1.0)


@pytest.mark.parametrize("a", [-2.0, 0.0, 1.5, 8.0])
def test_radius_exact_ks(a):
    r = radius_exact_many(gen(19), np.full(5000, a))
    f = radius_pdf(a)
    grid = np.linspace(0, max(a, 0) + 8, 2001)
    F = integrate.cumulative_trapezoid(f(grid), grid, initial=0.0)
    assert stats.kstest(r, lambda v: np.interp(v, grid, F / F[-1])).pvalue > 0.01
    assert sample_radius_exact(gen(20), a) > 0


# -- standard laws -----------------------------------------------------------

def test_gamma_shape_rate_mean():
    rng = gen(21)
    x = np.array([sample_gamma(rng, 51.5, 10.0) for _ in range(100_000)])
    assert x.mean() == pytest.approx(5.15, abs=3 * math.sqrt(51.5) / 10 / math.sqrt(1e5))


def test_beta_uniform_mean():
    rng = gen(22)
    x = np.array([sample_beta(rng, 1.0, 1.0) for _ in range(20_000)])
    assert x.mean() == pytest.approx(0.5, abs=0.01)
    assert np.all((x > 0) & (x < 1))


def test_trinomial_degenerate_and_frequencies():
    rng = gen(23)
    assert all(sample_trinomial(rng, 1.0, 0.0) == (1, 0) for _ in range(100))
    draws = np.array([sample_trinomial(rng, 0.2, 0.5) for _ in range(20_000)])
    assert np.all(draws.sum(axis=1) <= 1)
    counts = [draws[:, 0].sum(), draws[:, 1].sum(), (draws.sum(axis=1) == 0).sum()]
    assert stats.chisquare(counts, np.array([0.2, 0.5, 0.3]) * 20_000).pvalue > 0.01


def test_bernoulli_and_mvn2():
    rng = gen(24)
    assert sample_bernoulli(rng, 0.0) == 0 and sample_bernoulli(rng, 1.0) == 1
    cov = Cov2(2.0, 0.5, -0.6)
    x = np.array([sample_mvn2(rng, (1.0, -1.0), cov) for _ in range(20_000)])
    np.testing.assert_allclose(np.cov(x.T), cov.matrix, atol=0.06)
    np.testing.assert_allclose(x.mean(axis=0), [1.0, -1.0], atol=0.04)


@pytest.mark.parametrize("fn, args", [(sample_gamma, (0.0, 1.0)), (sample_gamma, (1.0, -1.0)),
                                      (sample_beta, (0.0, 1.0)), (sample_bernoulli, (1.5,)),
                                      (sample_trinomial, (0.7, 0.6))])
def test_standard_laws_reject_bad_parameters(fn, args):
    with pytest.raises(DomainError):
        fn(gen(), *args)
