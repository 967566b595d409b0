"""Self-checks of the sampler against independent computations.

``joint_distribution_check`` runs the successive-conditional test: a chain
alternating "regenerate latents and data from the model given the current
parameters" with one Gibbs sweep has the prior as the parameter marginal,
so its moments must match those of direct prior draws.

``enumeration_check`` compares long-run frequencies of the random-zero
indicators and binned zero proportions with the exact posterior on a
two-subject instance, computed by enumeration over indicators and
quadrature over the proportion.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .circular_core import ArcInterval, tpn_mass
from .gibbs import ChainConfig, GibbsSampler
from .model import (
    CensoringSpec,
    Dataset,
    LatentState,
    ModelVariant,
    ParameterState,
    PriorSpec,
    stage1_design,
    stage2_design,
)
from .samplers import RngStream

__all__ = [
    "MomentComparison",
    "JointCheckResult",
    "tiny_dataset",
    "tiny_priors",
    "draw_prior",
    "draw_latents_and_data",
    "joint_distribution_check",
    "EnumerationResult",
    "enumeration_posterior",
    "enumeration_check",
    "batch_means_se",
]

TRACKED = ("beta1_0", "beta1_1", "beta1_C", "beta1_S", "beta2_0", "beta2_1", "beta2_C",
           "beta2_S", "alpha1_0", "alpha1_1", "alpha2_0", "alpha2_1", "s1", "tau")


def batch_means_se(x: np.ndarray, n_batches: int = 50) -> float:
    """Standard error of the mean of an autocorrelated series by batch means."""
    x = np.asarray(x, dtype=float)
    size = x.size // n_batches
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


# ---------------------------------------------------------------------------
# joint-distribution (successive-conditional) check
# ---------------------------------------------------------------------------

def tiny_dataset(n: int = 3, m: int = 2, seed: int = 0) -> Dataset:
    """Covariate skeleton with one linear covariate and one instrument."""
    rng = RngStream(seed, 99).generator()
    return Dataset(
        subject_ids=np.array([f"s{i}" for i in range(n)]),
        subject_index=np.repeat(np.arange(n), m),
        occasion=np.tile(np.arange(1, m + 1), n),
        theta_y=np.full(n * m, 1.0),
        x=rng.normal(0.0, 1.0, (n * m, 1)),
        theta_x=np.full(n, 1.0),
        v=rng.normal(0.0, 1.0, (n, 1)),
    )


def tiny_priors(c: float = 2.0, d: float = 3.0) -> PriorSpec:
    """Proper, light-tailed priors so prior moments are estimable."""
    return PriorSpec(
        mu_beta1=np.array([0.5, 0.0, 0.0, 0.0]), mu_beta2=np.array([0.0, 0.3, 0.0, 0.0]),
        cov_beta1=np.eye(4), cov_beta2=np.eye(4),
        mu_alpha1=np.array([0.5, 0.0]), mu_alpha2=np.array([0.0, 0.0]),
        cov_alpha1=np.eye(2), cov_alpha2=np.eye(2),
        lambda0=1.0, nu0=3.0, kappa0=3.0, c_y=c, d_y=d, c_x=c, d_x=d,
    )


def draw_prior(rng, priors: PriorSpec, random_zeros: bool) -> ParameterState:
    """One draw of every parameter from its prior."""
    mvn = rng.multivariate_normal
    tau = rng.gamma(priors.nu0, 1.0 / priors.kappa0)
    s1 = rng.normal(0.0, 1.0 / math.sqrt(priors.lambda0 * tau))
    eta_y = eta_x = None
    if random_zeros:
        eta_y = rng.beta(priors.c_y, priors.d_y)
        eta_x = rng.beta(priors.c_x, priors.d_x)
    return ParameterState(mvn(priors.mu_beta1, priors.cov_beta1),
                          mvn(priors.mu_beta2, priors.cov_beta2),
                          mvn(priors.mu_alpha1, priors.cov_alpha1),
                          mvn(priors.mu_alpha2, priors.cov_alpha2),
                          float(s1), float(tau), eta_y, eta_x)


def draw_latents_and_data(rng, params: ParameterState, skeleton: Dataset, spec: CensoringSpec,
                          variant: ModelVariant) -> tuple[LatentState, Dataset]:
    """Forward-simulate every latent and the observed angles given parameters."""
    n, N = skeleton.n, skeleton.n_obs
    V = stage2_design(skeleton)
    xs = rng.standard_normal((n, 2)) + np.column_stack([V @ params.alpha1, V @ params.alpha2])
    tx_star = np.arctan2(xs[:, 1], xs[:, 0])
    b = rng.multivariate_normal(np.zeros(2), params.sigma_b.matrix, n)
    X = stage1_design(skeleton, tx_star)
    ys = (rng.standard_normal((N, 2)) + np.column_stack([X @ params.beta1, X @ params.beta2])
          + b[skeleton.subject_index])
    ty_star = np.arctan2(ys[:, 1], ys[:, 0])
    z_y = np.zeros(N, dtype=np.int8)
    z_x = np.zeros(n, dtype=np.int8)
    if variant.random_zeros:
        z_y = (rng.random(N) < params.eta_y).astype(np.int8)
        z_x = (rng.random(n) < params.eta_x).astype(np.int8)
    zero_y = (z_y == 1) | spec.arc_y.contains(ty_star)
    zero_x = (z_x == 1) | spec.arc_x.contains(tx_star)
    d = skeleton.with_responses(np.where(zero_y, 0.0, ty_star), np.where(zero_x, 0.0, tx_star))
    lat = LatentState(ty_star, np.hypot(ys[:, 0], ys[:, 1]), tx_star, np.hypot(xs[:, 0], xs[:, 1]),
                      b, z_y, z_x)
    return lat, d


def _tracked(params: ParameterState) -> np.ndarray:
    return np.concatenate([params.beta1, params.beta2, params.alpha1, params.alpha2,
                           [params.s1, params.tau]])


@dataclass(frozen=True)
class MomentComparison:
    name: str
    moment: int
    forward: float
    forward_se: float
    gibbs: float
    gibbs_se: float

    @property
    def z(self) -> float:
        return (self.gibbs - self.forward) / math.hypot(self.forward_se, self.gibbs_se)


@dataclass
class JointCheckResult:
    comparisons: list[MomentComparison] = field(default_factory=list)
    iterations: int = 0
    seconds: float = 0.0

    @property
    def max_abs_z(self) -> float:
        return max(abs(c.z) for c in self.comparisons)

    def passed(self, threshold: float = 3.0) -> bool:
        return self.max_abs_z < threshold

    def render(self) -> str:
        lines = [f"{'parameter':10s} {'k':>2s} {'forward':>10s} {'gibbs':>10s} {'z':>7s}"]
        for c in self.comparisons:
            lines.append(f"{c.name:10s} {c.moment:2d} {c.forward:10.4f} {c.gibbs:10.4f} {c.z:7.2f}")
        return "\n".join(lines)


def joint_distribution_check(iterations: int = 100_000, seed: int = 1,
                             variant: ModelVariant | None = None,
                             cfg: ChainConfig | None = None,
                             arc: float = 0.5) -> JointCheckResult:
    """Successive-conditional test of the whole sweep on a tiny instance.

    Parameters
    ----------
    iterations
        Number of forward draws and of successive-conditional iterations.
    variant
        Defaults to zero inflation in both stages.
    cfg
        Chain settings; defaults to ``ChainConfig.exact`` since the
        published-conditional shortcuts are only approximately invariant.
    arc
        Half-width of both censoring arcs; wide so that zeros are common.
    """
    variant = variant or ModelVariant.model1()
    cfg = cfg or ChainConfig.exact(iterations=2, burn_in=0, thin=1, seed=seed)
    spec = CensoringSpec(ArcInterval.symmetric(arc), ArcInterval.symmetric(arc))
    priors = tiny_priors()
    skeleton = tiny_dataset()
    rng_fwd = RngStream(seed, 1).generator()
    rng_gen = RngStream(seed, 2).generator()
    t0 = time.perf_counter()

    fwd = np.array([_tracked(draw_prior(rng_fwd, priors, variant.random_zeros))
                    for _ in range(iterations)])

    params = draw_prior(rng_gen, priors, variant.random_zeros)
    lat, d = draw_latents_and_data(rng_gen, params, skeleton, spec, variant)
    sampler = GibbsSampler(d, spec, variant, priors, cfg, state=(params, lat))
    chain = np.empty_like(fwd)
    for it in range(iterations):
        sampler.sweep()
        chain[it] = _tracked(sampler.params)
        lat, d = draw_latents_and_data(rng_gen, sampler.params, skeleton, spec, variant)
        sampler.set_data(d, lat)

    out = JointCheckResult(iterations=iterations)
    for j, name in enumerate(TRACKED):
        for k in (1, 2):
            f, g = fwd[:, j] ** k, chain[:, j] ** k
            out.comparisons.append(MomentComparison(
                name, k, float(f.mean()), float(f.std(ddof=1) / math.sqrt(f.size)),
                float(g.mean()), batch_means_se(g)))
    out.seconds = time.perf_counter() - t0
    return out


# ---------------------------------------------------------------------------
# enumeration oracle for the random-zero conditionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnumerationResult:
    stage: str
    cells: tuple[str, ...]
    expected: np.ndarray
    observed: np.ndarray
    statistic: float
    p_value: float

    def passed(self, level: float = 0.01) -> bool:
        return self.p_value > level


def enumeration_posterior(masses, c: float, d: float, bins) -> np.ndarray:
    """Exact posterior probabilities of (z configuration, eta bin).

    Every observation is a zero; ``masses`` are the censoring masses C_j.
    Returns an array of shape (2**len(masses), len(bins) - 1) whose rows
    follow ``itertools.product((0, 1), repeat=len(masses))``.
    """
    masses = np.asarray(masses, dtype=float)
    beta = stats.beta(c, d)
    configs = list(itertools.product((0, 1), repeat=masses.size))
    out = np.empty((len(configs), len(bins) - 1))
    for r, z in enumerate(configs):
        z = np.asarray(z)

        def dens(eta, z=z):
            return beta.pdf(eta) * np.prod(np.where(z == 1, eta, (1.0 - eta) * masses))

        for k in range(len(bins) - 1):
            out[r, k] = integrate.quad(dens, bins[k], bins[k + 1], epsabs=1e-13, epsrel=1e-11)[0]
    return out / out.sum()


def enumeration_check(iterations: int = 200_000, thin: int = 10, seed: int = 3,
                      n_bins: int = 5, c: float = 2.0, d: float = 3.0,
                      full_conditional_x: bool = False) -> list[EnumerationResult]:
    """Chi-square comparison of Gibbs frequencies with the enumerated posterior.

    Two subjects with one occasion each; every response and covariate angle
    is zero.  Regression parameters and random effects are held fixed and
    the circular-covariate slopes are zero, so the two stages decouple and
    each has a closed-form posterior over (z, eta).
    """
    skeleton = tiny_dataset(n=2, m=1, seed=seed)
    d0 = skeleton.with_responses(np.zeros(2), np.zeros(2))
    arc = ArcInterval.symmetric(0.3)
    spec = CensoringSpec(arc, arc)
    priors = tiny_priors(c, d)
    variant = ModelVariant.model1(random_zeros=True)
    params = ParameterState(np.array([1.2, 0.8, 0.0, 0.0]), np.array([0.1, 0.6, 0.0, 0.0]),
                            np.array([0.4, -0.9]), np.array([0.3, 0.2]),
                            0.0, 1.0, 0.5, 0.5)
    b = np.array([[0.3, -0.2], [-0.5, 0.4]])
    lat = LatentState(np.zeros(2), np.ones(2), np.zeros(2), np.ones(2), b,
                      np.zeros(2, dtype=np.int8), np.zeros(2, dtype=np.int8))
    frozen = {"beta1", "beta2", "b", "s1", "tau", "alpha1", "alpha2"}
    cfg = ChainConfig.exact(iterations=iterations, burn_in=0, thin=1, seed=seed,
                            full_conditional_x=full_conditional_x, frozen=frozen)
    sampler = GibbsSampler(d0, spec, variant, priors, cfg, state=(params, lat))

    mu_y = sampler.mean_y()
    mu_x = sampler.mean_x()
    masses = {
        "y": [tpn_mass((mu_y[0][j], mu_y[1][j]), arc) for j in range(2)],
        "x": [tpn_mass((mu_x[0][j], mu_x[1][j]), arc) for j in range(2)],
    }
    bins = np.linspace(0.0, 1.0, n_bins + 1)
    kept = iterations // thin
    rec = {s: np.empty((kept, 3)) for s in ("y", "x")}
    row = 0
    for it in range(iterations):
        sampler.sweep()
        if (it + 1) % thin == 0:
            lt, pr = sampler.lat, sampler.params
            rec["y"][row] = (lt.z_y[0], lt.z_y[1], pr.eta_y)
            rec["x"][row] = (lt.z_x[0], lt.z_x[1], pr.eta_x)
            row += 1

    results = []
    configs = list(itertools.product((0, 1), repeat=2))
    for stage in ("y", "x"):
        probs = enumeration_posterior(masses[stage], c, d, bins)
        r = rec[stage]
        cfg_idx = (r[:, 0] * 2 + r[:, 1]).astype(int)
        bin_idx = np.clip(np.searchsorted(bins, r[:, 2], side="right") - 1, 0, n_bins - 1)
        observed = np.zeros_like(probs)
        np.add.at(observed, (cfg_idx, bin_idx), 1)
        expected = probs * kept
        keep = expected.ravel() > 0
        chi2 = float((((observed.ravel() - expected.ravel()) ** 2)[keep] / expected.ravel()[keep]).sum())
        dof = int(keep.sum()) - 1
        labels = tuple(f"z={z} eta in [{bins[k]:.1f},{bins[k + 1]:.1f})"
                       for z in configs for k in range(n_bins))
        results.append(EnumerationResult(stage, labels, expected, observed, chi2,
                                         float(stats.chi2.sf(chi2, dof))))
    return results

