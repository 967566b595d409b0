import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special, stats

from zilcrm.checks import enumeration_posterior
from zilcrm.circular_core import ArcInterval, DomainError
from zilcrm.gibbs import ChainConfig, run_chain
from zilcrm.model import ModelVariant
from zilcrm.samplers import RngStream
from zilcrm.simulate import fit_censoring, generate_dataset, preset
from zilcrm.zero_mixture import (
    MixtureZeroState,
    eta_posterior,
    update_eta,
    update_theta_star_mixture,
    update_z,
    update_z_given_angle,
    z_probability,
)

ARC = ArcInterval.symmetric(0.2)
prob = st.floats(1e-6, 1 - 1e-6)


def gen(seed=0):
    return RngStream(seed).generator()


def test_z_probability_two_component_rule():
    assert z_probability(0.5, 0.5) == pytest.approx(2 / 3)
    # oracle: enumerate the two ways a zero can arise
    eta, c = 0.3, 0.12
    random_zero, censored_zero = eta * 1.0, (1 - eta) * c
    assert z_probability(eta, c) == pytest.approx(random_zero / (random_zero + censored_zero))


def test_z_probability_limits():
    assert z_probability(0.0, 0.4) == 0.0
    assert z_probability(1.0, 0.4) == 1.0


@given(prob, prob, st.floats(1e-6, 1.0))
def test_z_probability_monotone_in_eta(e1, e2, c):
    lo, hi = sorted((e1, e2))
    assert z_probability(lo, c) <= z_probability(hi, c) + 1e-15


@given(prob, st.floats(1e-6, 1.0), st.floats(1e-6, 1.0))
def test_z_probability_decreasing_in_mass(eta, c1, c2):
    lo, hi = sorted((c1, c2))
    assert z_probability(eta, hi) <= z_probability(eta, lo) + 1e-15


def test_update_z_extremes():
    mu1, mu2 = np.full(500, 1.0), np.full(500, 0.5)
    assert update_z(gen(1), mu1, mu2, ARC, 1e-12).sum() == 0
    assert update_z(gen(1), mu1, mu2, ARC, 0.0).sum() == 0
    assert update_z(gen(2), mu1, mu2, ARC, 1 - 1e-12).sum() == 500


def test_update_z_frequency():
    from zilcrm.circular_core import tpn_mass
    c = tpn_mass((1.0, 0.5), ARC)
    p = z_probability(0.3, c)
    z = update_z(gen(3), np.full(40_000, 1.0), np.full(40_000, 0.5), ARC, 0.3)
    assert z.mean() == pytest.approx(p, abs=3.5 * math.sqrt(p * (1 - p) / 40_000))


def test_update_z_given_angle():
    theta = np.array([0.0, 0.1, 1.0, -2.0])
    z = update_z_given_angle(gen(4), np.repeat(theta, 5000), ARC, 0.25).reshape(4, 5000)
    assert np.all(z[2:] == 1)
    assert z[:2].mean() == pytest.approx(0.25, abs=0.02)


@pytest.mark.parametrize("z_sum, n, c, d, expected", [(0, 10, 1, 1, (1, 11)), (4, 10, 2, 3, (6, 9)),
                                                      (0, 7, 2.5, 1.5, (2.5, 8.5))])
def test_eta_posterior_counting(z_sum, n, c, d, expected):
    assert eta_posterior(z_sum, n, c, d) == expected


def test_eta_posterior_rejects_bad_counts():
    with pytest.raises(DomainError):
        eta_posterior(11, 10, 1, 1)


def test_update_eta_law():
    g = gen(5)
    draws = np.array([update_eta(g, 4, 10, 2, 3) for _ in range(5000)])
    assert stats.kstest(draws, stats.beta(6, 9).cdf).pvalue > 0.01
    assert update_eta(g, 0, 10, 0.0, 1.0) == 0.0


def test_theta_star_mixture_branches():
    n = 10_000
    z = np.zeros(n, dtype=np.int8)
    t0 = update_theta_star_mixture(gen(6), np.full(n, 2.0), np.full(n, -1.0), z, ARC)
    assert np.all(ARC.contains(t0))
    t1 = update_theta_star_mixture(gen(7), np.zeros(n), np.zeros(n), np.ones(n, dtype=np.int8), ARC)
    assert math.hypot(np.cos(t1).mean(), np.sin(t1).mean()) < 0.05
    assert np.any(~ARC.contains(t1))


def test_state_requires_open_unit_interval():
    MixtureZeroState(np.zeros(3), np.zeros(1), 0.2, 0.4)
    with pytest.raises(DomainError):
        MixtureZeroState(np.zeros(3), np.zeros(1), 0.0, 0.4)


def test_enumeration_posterior_marginal_closed_form():
    """Marginal over z from the Beta-function identity."""
    masses = np.array([0.3, 0.05, 0.6])
    c, d = 2.0, 3.0
    probs = enumeration_posterior(masses, c, d, np.linspace(0, 1, 6)).sum(axis=1)
    w = []
    for z in itertools.product((0, 1), repeat=3):
        z = np.array(z)
        s = z.sum()
        w.append(math.exp(special.betaln(c + s, d + 3 - s) - special.betaln(c, d))
                 * np.prod(masses[z == 0]))
    np.testing.assert_allclose(probs, np.array(w) / sum(w), rtol=1e-8)


def test_point_mass_prior_reproduces_base_chain():
    spec = preset("table1", n=20)
    d = generate_dataset(RngStream(11), spec)
    cs = fit_censoring(spec)
    cfg = ChainConfig(iterations=300, burn_in=100, thin=2, seed=4)
    base = run_chain(d, cs, ModelVariant.model1(), spec.priors(), cfg)
    from dataclasses import replace
    pm = replace(spec.priors(), c_y=0.0, c_x=0.0)
    mixed = run_chain(d, cs, ModelVariant.model1(random_zeros=True), pm, cfg)
    k = base.draws.shape[1]
    assert np.array_equal(base.draws, mixed.draws[:, :k])
    assert np.all(mixed["eta_y"] == 0) and np.all(mixed["eta_x"] == 0)


def test_eta_recovered_at_n500():
    spec = preset("table7", n=500, random_zeros=True)
    d = generate_dataset(RngStream(21), spec)
    post = run_chain(d, fit_censoring(spec), ModelVariant.model1(random_zeros=True), spec.priors(),
                     ChainConfig(iterations=3000, burn_in=1000, thin=2, seed=3))
    for name, truth in (("eta_y", spec.eta_y), ("eta_x", spec.eta_x)):
        draws = post[name]
        assert abs(draws.mean() - truth) < 3 * draws.std(), (name, draws.mean(), draws.std())
