"""Gibbs sampler for the two-stage zero-inflated circular regression model.

All per-observation updates are vectorised over observations; one call to
:meth:`GibbsSampler.sweep` performs one full scan in a fixed order.

Besides the plain conditionals the sampler offers three exactness switches
(all off by default):

``radius_mode="exact"``
    independent draws of every latent radius instead of one slice move.
``tau_mode="exact"``
    the ``tau`` conditional including the density of the first random-effect
    component, a generalised inverse Gaussian law.
``full_conditional_x=True``
    Metropolis correction of the covariate latent angles for the Stage-I
    likelihood they enter through the design row.
"""

from __future__ import annotations

import enum
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import linalg, stats

from .circular_core import Cov2, DomainError
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
from .samplers import (
    RngStream,
    TpnMode,
    as_generator,
    radius_exact_many,
    radius_slice_many,
    sample_tpn_many,
)
from .zero_mixture import (
    update_eta,
    update_theta_star_mixture,
    update_z,
    update_z_given_angle,
)

__all__ = [
    "FitError",
    "RadiusMode",
    "TauMode",
    "BLOCKS",
    "ChainConfig",
    "PosteriorSamples",
    "GibbsSampler",
    "init_state",
    "run_chain",
    "parameter_names",
    "linear_conditional",
    "b_conditional",
    "s1_conditional",
    "tau_conditional",
    "tau_conditional_exact",
    "sample_gig",
]


class FitError(RuntimeError):
    """The sampler could not continue (numerical breakdown)."""


class RadiusMode(str, enum.Enum):
    SLICE = "slice"
    EXACT = "exact"


class TauMode(str, enum.Enum):
    PAPER = "paper"
    EXACT = "exact"


BLOCKS = ("z_y", "theta_y", "r_y", "beta1", "beta2", "b", "s1", "tau",
          "z_x", "theta_x", "r_x", "alpha1", "alpha2", "eta_y", "eta_x")


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 100_000
    burn_in: int = 40_000
    thin: int = 10
    seed: int = 0
    tpn_mode: TpnMode = TpnMode.EXACT_REJECTION
    radius_mode: RadiusMode = RadiusMode.SLICE
    tau_mode: TauMode = TauMode.PAPER
    full_conditional_x: bool = False
    frozen: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "tpn_mode", TpnMode(self.tpn_mode))
        object.__setattr__(self, "radius_mode", RadiusMode(self.radius_mode))
        object.__setattr__(self, "tau_mode", TauMode(self.tau_mode))
        object.__setattr__(self, "frozen", frozenset(self.frozen))
        if self.iterations < 1 or self.burn_in < 0 or self.burn_in >= self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        unknown = self.frozen - set(BLOCKS)
        if unknown:
            raise ValueError(f"unknown blocks {sorted(unknown)}")

    @property
    def n_kept(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    @classmethod
    def desk(cls, **kw) -> "ChainConfig":
        return cls(**{"iterations": 20_000, "burn_in": 8_000, "thin": 10, **kw})

    @classmethod
    def real_data(cls, **kw) -> "ChainConfig":
        return cls(**{"iterations": 700_000, "burn_in": 150_000, "thin": 10, **kw})

    @classmethod
    def exact(cls, **kw) -> "ChainConfig":
        """All exactness switches on."""
        base = dict(tpn_mode=TpnMode.EXACT_REJECTION, radius_mode=RadiusMode.EXACT,
                    tau_mode=TauMode.EXACT, full_conditional_x=True)
        return cls(**{**base, **kw})

    def as_dict(self) -> dict:
        out = asdict(self)
        out["tpn_mode"] = self.tpn_mode.value
        out["radius_mode"] = self.radius_mode.value
        out["tau_mode"] = self.tau_mode.value
        out["frozen"] = sorted(self.frozen)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ChainConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


# ---------------------------------------------------------------------------
# closed-form conditionals
# ---------------------------------------------------------------------------

def linear_conditional(design, response, prior_mu, prior_cov):
    """Mean and covariance of a normal-linear coefficient posterior.

    Unit error variance; ``prior_cov`` is the prior covariance.
    """
    design = np.atleast_2d(np.asarray(design, dtype=float))
    prior_prec = np.linalg.inv(np.asarray(prior_cov, dtype=float))
    G = design.T @ design + prior_prec
    rhs = design.T @ np.asarray(response, dtype=float) + prior_prec @ np.asarray(prior_mu, float)
    cf = linalg.cho_factor(G, lower=True)
    mean = linalg.cho_solve(cf, rhs)
    cov = linalg.cho_solve(cf, np.eye(G.shape[0]))
    return mean, cov


def b_conditional(resid_sum, m, sigma_b: Cov2):
    """Per-subject mean and covariance of the random effects.

    ``resid_sum`` has shape (n, 2): the within-subject sums of the latent
    vector minus its fixed-effect mean.
    """
    resid_sum = np.atleast_2d(np.asarray(resid_sum, dtype=float))
    m = np.asarray(m, dtype=float)
    s11, s22 = sigma_b.s11, sigma_b.s22
    s12 = sigma_b.rho * math.sqrt(s11 * s22)
    det = s11 * s22 - s12 * s12
    # S = m I + Sigma_b^{-1}
    a = m + s22 / det
    c = m + s11 / det
    off = -s12 / det
    sdet = a * c - off * off
    cov = np.empty((m.size, 2, 2))
    cov[:, 0, 0] = c / sdet
    cov[:, 1, 1] = a / sdet
    cov[:, 0, 1] = cov[:, 1, 0] = -off / sdet
    mean = np.einsum("nij,nj->ni", cov, resid_sum)
    return mean, cov


def s1_conditional(b, tau: float, lambda0: float) -> tuple[float, float]:
    b = np.asarray(b, dtype=float)
    sb1 = float(np.dot(b[:, 0], b[:, 0]))
    sb12 = float(np.dot(b[:, 0], b[:, 1]))
    return sb12 / (lambda0 + sb1), 1.0 / (tau * (lambda0 + sb1))


def tau_conditional(b, s1: float, nu0: float, kappa0: float, lambda0: float) -> tuple[float, float]:
    """Shape and rate of the gamma conditional as stated in the model."""
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    resid = b[:, 1] - s1 * b[:, 0]
    return nu0 + 0.5 * (n + 1), kappa0 + 0.5 * (float(np.dot(resid, resid)) + lambda0 * s1 * s1)


def tau_conditional_exact(b, s1: float, nu0: float, kappa0: float,
                          lambda0: float) -> tuple[float, float, float]:
    """GIG(p, a, b) parameters of the conditional including N(b1; 0, tau)."""
    b = np.asarray(b, dtype=float)
    shape, rate = tau_conditional(b, s1, nu0, kappa0, lambda0)
    return shape - 0.5 * b.shape[0], 2.0 * rate, float(np.dot(b[:, 0], b[:, 0]))


def sample_gig(rng, p: float, a: float, b: float) -> float:
    """Draw from density proportional to x^(p-1) exp(-(a x + b / x) / 2)."""
    rng = as_generator(rng)
    if b <= 0.0:
        return float(rng.gamma(p, 2.0 / a))
    omega = math.sqrt(a * b)
    return float(math.sqrt(b / a) * stats.geninvgauss.rvs(p, omega, random_state=rng))


def _chol_draw(rng, cf, mean):
    """mean + L^{-T} z for precision factor L L^T."""
    z = rng.standard_normal(mean.shape[0])
    return mean + linalg.solve_triangular(cf[0], z, lower=True, trans="T")


# ---------------------------------------------------------------------------
# state initialisation and naming
# ---------------------------------------------------------------------------

def _censored_masks(d: Dataset, variant: ModelVariant):
    cens_y = d.zero_y & variant.zero_inflated_response
    cens_x = d.zero_x & variant.zero_inflated_covariate
    return cens_y, cens_x


def init_state(rng, d: Dataset, spec: CensoringSpec, variant: ModelVariant,
               priors: PriorSpec) -> tuple[ParameterState, LatentState]:
    """Prior-mean parameters, unit radii, zero random effects."""
    rng = as_generator(rng)
    cens_y, cens_x = _censored_masks(d, variant)
    ty = d.theta_y.copy()
    ty[cens_y] = rng.uniform(spec.arc_y.delta1, spec.arc_y.delta2, int(cens_y.sum()))
    tx = d.theta_x.copy()
    tx[cens_x] = rng.uniform(spec.arc_x.delta1, spec.arc_x.delta2, int(cens_x.sum()))
    z_y = np.zeros(d.n_obs, dtype=np.int8)
    z_x = np.zeros(d.n, dtype=np.int8)
    eta_y = eta_x = None
    if variant.random_zeros:
        # a point-mass prior at eta = 0 pins the indicators at 0
        if priors.c_y > 0:
            z_y[cens_y] = rng.random(int(cens_y.sum())) < 0.5
        if priors.c_x > 0:
            z_x[cens_x] = rng.random(int(cens_x.sum())) < 0.5
        eta_y = priors.c_y / (priors.c_y + priors.d_y)
        eta_x = priors.c_x / (priors.c_x + priors.d_x)
    params = ParameterState(priors.mu_beta1.copy(), priors.mu_beta2.copy(),
                            priors.mu_alpha1.copy(), priors.mu_alpha2.copy(),
                            0.0, 1.0, eta_y, eta_x)
    latents = LatentState(ty, np.ones(d.n_obs), tx, np.ones(d.n), np.zeros((d.n, 2)), z_y, z_x)
    return params, latents


def parameter_names(d: Dataset, variant: ModelVariant) -> tuple[str, ...]:
    s1 = ["0"] + [str(k + 1) for k in range(d.p)] + ["C", "S"]
    s2 = ["0"] + [str(k + 1) for k in range(d.q)] + (["C", "S"] if d.has_theta_v else [])
    names = [f"beta1_{s}" for s in s1] + [f"beta2_{s}" for s in s1]
    names += [f"alpha1_{s}" for s in s2] + [f"alpha2_{s}" for s in s2]
    names += ["s1", "tau", "rho", "sigma1_sq", "sigma2_sq"]
    if variant.random_zeros:
        names += ["eta_y", "eta_x"]
    return tuple(names)


# ---------------------------------------------------------------------------
# sampler
# ---------------------------------------------------------------------------

class GibbsSampler:
    """Holds data, priors and the current state of one chain."""

    def __init__(self, d: Dataset, spec: CensoringSpec, variant: ModelVariant,
                 priors: PriorSpec, cfg: ChainConfig,
                 state: tuple[ParameterState, LatentState] | None = None):
        self.d, self.spec, self.variant, self.priors, self.cfg = d, spec, variant, priors, cfg
        self.V = stage2_design(d)
        if priors.dim_beta != d.p + 3:
            raise ValueError(f"beta prior has dimension {priors.dim_beta}, design needs {d.p + 3}")
        if priors.dim_alpha != self.V.shape[1]:
            raise ValueError(f"alpha prior has dimension {priors.dim_alpha}, "
                             f"design needs {self.V.shape[1]}")
        self.rng = RngStream(cfg.seed).generator()
        if state is None:
            state = init_state(self.rng, d, spec, variant, priors)
        self.params = state[0].copy()

        def prec(cov, mu):
            P = np.linalg.inv(cov)
            return P, P @ mu

        self._pb = [prec(priors.cov_beta1, priors.mu_beta1), prec(priors.cov_beta2, priors.mu_beta2)]
        self._pa = [prec(priors.cov_alpha1, priors.mu_alpha1),
                    prec(priors.cov_alpha2, priors.mu_alpha2)]
        self.set_data(d, state[1])
        self.mh_proposed = 0
        self.mh_accepted = 0
        self._schedule = self._build_schedule()

    def set_data(self, d: Dataset, latents: LatentState):
        """Replace the dataset and latent state, keeping parameters and the RNG.

        The new dataset must have the same covariate dimensions.  Used by
        joint-distribution checks that regenerate data between sweeps.
        """
        self.d = d
        self.lat = latents.copy()
        self.V = stage2_design(d)
        self.sub = d.subject_index
        self.m = d.m
        self.cens_y, self.cens_x = _censored_masks(d, self.variant)
        self.idx_y = np.flatnonzero(self.cens_y)
        self.idx_x = np.flatnonzero(self.cens_x)
        VtV = self.V.T @ self.V
        self._ha = [linalg.cho_factor(VtV + P, lower=True) for P, _ in self._pa]
        self._refresh_design()

    # -- helpers ----------------------------------------------------------
    def _refresh_design(self):
        self.X = stage1_design(self.d, self.lat.theta_x_star)

    def _y_star(self):
        r, t = self.lat.r_y, self.lat.theta_y_star
        return r * np.cos(t), r * np.sin(t)

    def _x_star(self):
        r, t = self.lat.r_x, self.lat.theta_x_star
        return r * np.cos(t), r * np.sin(t)

    def mean_y(self, with_b: bool = True):
        mu1 = self.X @ self.params.beta1
        mu2 = self.X @ self.params.beta2
        if with_b:
            b = self.lat.b[self.sub]
            mu1 = mu1 + b[:, 0]
            mu2 = mu2 + b[:, 1]
        return mu1, mu2

    def mean_x(self):
        return self.V @ self.params.alpha1, self.V @ self.params.alpha2

    def _radius(self, r_cur, theta, mu1, mu2):
        a = np.cos(theta) * mu1 + np.sin(theta) * mu2
        if self.cfg.radius_mode is RadiusMode.EXACT:
            return radius_exact_many(self.rng, a)
        return radius_slice_many(self.rng, r_cur, a)

    # -- Stage I ----------------------------------------------------------
    def update_z_y(self):
        if not self.idx_y.size:
            return
        mu1, mu2 = self.mean_y()
        k = self.idx_y
        self.lat.z_y[k] = update_z(self.rng, mu1[k], mu2[k], self.spec.arc_y, self.params.eta_y)

    def update_theta_y_star(self):
        if not self.idx_y.size:
            return
        mu1, mu2 = self.mean_y()
        k = self.idx_y
        if self.variant.random_zeros:
            self.lat.theta_y_star[k] = update_theta_star_mixture(
                self.rng, mu1[k], mu2[k], self.lat.z_y[k], self.spec.arc_y, self.cfg.tpn_mode)
        else:
            self.lat.theta_y_star[k] = sample_tpn_many(
                self.rng, mu1[k], mu2[k], self.spec.arc_y, self.cfg.tpn_mode)

    def update_r_y(self):
        mu1, mu2 = self.mean_y()
        self.lat.r_y = self._radius(self.lat.r_y, self.lat.theta_y_star, mu1, mu2)

    def update_beta(self, k: int):
        y = self._y_star()[k - 1] - self.lat.b[self.sub, k - 1]
        P, Pmu = self._pb[k - 1]
        G = self.X.T @ self.X + P
        try:
            cf = linalg.cho_factor(G, lower=True)
        except linalg.LinAlgError as exc:
            raise FitError(f"beta{k} precision matrix is singular") from exc
        mean = linalg.cho_solve(cf, self.X.T @ y + Pmu)
        draw = _chol_draw(self.rng, cf, mean)
        if k == 1:
            self.params.beta1 = draw
        else:
            self.params.beta2 = draw

    def update_b(self):
        y1, y2 = self._y_star()
        f1, f2 = self.mean_y(with_b=False)
        n = self.d.n
        rs = np.column_stack([np.bincount(self.sub, y1 - f1, minlength=n),
                              np.bincount(self.sub, y2 - f2, minlength=n)])
        mean, cov = b_conditional(rs, self.m, self.params.sigma_b)
        l11 = np.sqrt(cov[:, 0, 0])
        l21 = cov[:, 1, 0] / l11
        l22 = np.sqrt(np.maximum(cov[:, 1, 1] - l21 * l21, 0.0))
        z = self.rng.standard_normal((n, 2))
        self.lat.b = np.column_stack([mean[:, 0] + l11 * z[:, 0],
                                      mean[:, 1] + l21 * z[:, 0] + l22 * z[:, 1]])

    def update_s1(self):
        mean, var = s1_conditional(self.lat.b, self.params.tau, self.priors.lambda0)
        self.params.s1 = mean + math.sqrt(var) * self.rng.standard_normal()

    def update_tau(self):
        pr = self.priors
        if self.cfg.tau_mode is TauMode.EXACT:
            p, a, b = tau_conditional_exact(self.lat.b, self.params.s1, pr.nu0, pr.kappa0, pr.lambda0)
            tau = sample_gig(self.rng, p, a, b)
        else:
            shape, rate = tau_conditional(self.lat.b, self.params.s1, pr.nu0, pr.kappa0, pr.lambda0)
            tau = self.rng.gamma(shape, 1.0 / rate)
        if not (tau > 0 and math.isfinite(tau)):
            raise FitError(f"tau draw {tau!r} is not positive and finite")
        self.params.tau = float(tau)

    # -- Stage II ---------------------------------------------------------
    def _stage1_loglik(self, theta_x):
        """Per-subject Stage-I log-likelihood as a function of the covariate angle."""
        y1, y2 = self._y_star()
        t = theta_x[self.sub]
        p = self.d.p
        X = self.X
        b = self.lat.b[self.sub]
        out = 0.0
        for beta, y, bk in ((self.params.beta1, y1, b[:, 0]), (self.params.beta2, y2, b[:, 1])):
            lin = X[:, :p + 1] @ beta[:p + 1] + beta[p + 1] * np.cos(t) + beta[p + 2] * np.sin(t)
            out = out + (y - lin - bk) ** 2
        return -0.5 * np.bincount(self.sub, out, minlength=self.d.n)

    def update_z_x(self):
        if not self.idx_x.size:
            return
        k = self.idx_x
        if self.cfg.full_conditional_x:
            self.lat.z_x[k] = update_z_given_angle(
                self.rng, self.lat.theta_x_star[k], self.spec.arc_x, self.params.eta_x)
        else:
            mu1, mu2 = self.mean_x()
            self.lat.z_x[k] = update_z(self.rng, mu1[k], mu2[k], self.spec.arc_x, self.params.eta_x)

    def update_theta_x_star(self):
        if not self.idx_x.size:
            return
        mu1, mu2 = self.mean_x()
        k = self.idx_x
        if self.variant.random_zeros:
            prop = update_theta_star_mixture(self.rng, mu1[k], mu2[k], self.lat.z_x[k],
                                             self.spec.arc_x, self.cfg.tpn_mode)
        else:
            prop = sample_tpn_many(self.rng, mu1[k], mu2[k], self.spec.arc_x, self.cfg.tpn_mode)
        if self.cfg.full_conditional_x:
            cur = self.lat.theta_x_star
            new = cur.copy()
            new[k] = prop
            log_ratio = (self._stage1_loglik(new) - self._stage1_loglik(cur))[k]
            accept = np.log(1.0 - self.rng.random(k.size)) < log_ratio
            self.mh_proposed += k.size
            self.mh_accepted += int(accept.sum())
            prop = np.where(accept, prop, cur[k])
        self.lat.theta_x_star[k] = prop
        self._refresh_design()

    def update_r_x(self):
        mu1, mu2 = self.mean_x()
        self.lat.r_x = self._radius(self.lat.r_x, self.lat.theta_x_star, mu1, mu2)

    def update_alpha(self, k: int):
        y = self._x_star()[k - 1]
        _, Pmu = self._pa[k - 1]
        cf = self._ha[k - 1]
        mean = linalg.cho_solve(cf, self.V.T @ y + Pmu)
        draw = _chol_draw(self.rng, cf, mean)
        if k == 1:
            self.params.alpha1 = draw
        else:
            self.params.alpha2 = draw

    def update_eta_y(self):
        pr = self.priors
        self.params.eta_y = update_eta(self.rng, int(self.lat.z_y.sum()), self.d.n_obs, pr.c_y, pr.d_y)

    def update_eta_x(self):
        pr = self.priors
        self.params.eta_x = update_eta(self.rng, int(self.lat.z_x.sum()), self.d.n, pr.c_x, pr.d_x)

    # -- orchestration ----------------------------------------------------
    def _build_schedule(self) -> list[tuple[str, Callable[[], None]]]:
        rz = self.variant.random_zeros
        steps = [
            ("z_y", self.update_z_y if rz else None),
            ("theta_y", self.update_theta_y_star),
            ("r_y", self.update_r_y),
            ("beta1", lambda: self.update_beta(1)),
            ("beta2", lambda: self.update_beta(2)),
            ("b", self.update_b),
            ("s1", self.update_s1),
            ("tau", self.update_tau),
            ("z_x", self.update_z_x if rz else None),
            ("theta_x", self.update_theta_x_star),
            ("r_x", self.update_r_x),
            ("alpha1", lambda: self.update_alpha(1)),
            ("alpha2", lambda: self.update_alpha(2)),
            ("eta_y", self.update_eta_y if rz else None),
            ("eta_x", self.update_eta_x if rz else None),
        ]
        return [(name, fn) for name, fn in steps if fn is not None and name not in self.cfg.frozen]

    def sweep(self):
        for _, fn in self._schedule:
            fn()

    def current_row(self) -> np.ndarray:
        p = self.params
        cov = p.sigma_b
        row = [p.beta1, p.beta2, p.alpha1, p.alpha2,
               [p.s1, p.tau, cov.rho, cov.s11, cov.s22]]
        if self.variant.random_zeros:
            row.append([p.eta_y, p.eta_x])
        return np.concatenate([np.asarray(r, dtype=float) for r in row])

    def run(self, callback: Callable[[int, "GibbsSampler"], None] | None = None) -> "PosteriorSamples":
        cfg = self.cfg
        names = parameter_names(self.d, self.variant)
        out = np.empty((cfg.n_kept, len(names)))
        row = 0
        t0 = time.perf_counter()
        try:
            with np.errstate(over="ignore"):
                for it in range(cfg.iterations):
                    self.sweep()
                    if callback is not None:
                        callback(it, self)
                    if it >= cfg.burn_in and (it + 1 - cfg.burn_in) % cfg.thin == 0:
                        out[row] = self.current_row()
                        row += 1
        except DomainError as exc:
            raise FitError(f"sampler failed at iteration {it + 1}: {exc}") from exc
        elapsed = time.perf_counter() - t0
        run_stats = {"seconds": elapsed, "variant": self.variant.name}
        if self.mh_proposed:
            run_stats["theta_x_acceptance"] = self.mh_accepted / self.mh_proposed
        return PosteriorSamples(out, names, cfg, self.d.fingerprint(), run_stats)


def run_chain(d: Dataset, spec: CensoringSpec, variant: ModelVariant, priors: PriorSpec,
              cfg: ChainConfig, init: tuple[ParameterState, LatentState] | None = None,
              callback=None) -> "PosteriorSamples":
    """Run one chain and return its thinned post-burn-in draws."""
    return GibbsSampler(d, spec, variant, priors, cfg, init).run(callback)


# ---------------------------------------------------------------------------
# posterior draws
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PosteriorSamples:
    draws: np.ndarray
    names: tuple[str, ...]
    config: ChainConfig
    fingerprint: str
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        draws = np.array(self.draws, dtype=float, copy=True)
        if draws.ndim != 2 or draws.shape[1] != len(self.names):
            raise ValueError("draws must be (kept iterations, len(names))")
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)
        object.__setattr__(self, "names", tuple(self.names))

    def __len__(self) -> int:
        return self.draws.shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    def block(self, prefix: str) -> np.ndarray:
        cols = [k for k, n in enumerate(self.names) if n.startswith(prefix + "_")]
        return self.draws[:, cols]

    def mean(self) -> dict[str, float]:
        return dict(zip(self.names, self.draws.mean(axis=0)))

    def summary(self, level: float = 0.95) -> list[dict]:
        lo, hi = np.quantile(self.draws, [(1 - level) / 2, (1 + level) / 2], axis=0)
        return [{"name": n, "mean": float(m), "sd": float(s), "lower": float(a), "upper": float(b)}
                for n, m, s, a, b in zip(self.names, self.draws.mean(axis=0),
                                         self.draws.std(axis=0, ddof=1) if len(self) > 1
                                         else np.zeros(len(self.names)), lo, hi)]

    def to_csv(self, path) -> Path:
        """Write draws as CSV plus a JSON sidecar; returns the sidecar path.

        Wall-clock time is left out so that reruns give identical bytes.
        """
        path = Path(path)
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.names) + "\n")
            np.savetxt(fh, self.draws, fmt="%.17g", delimiter=",")
        sidecar = path.with_suffix(".json")
        sidecar.write_text(json.dumps({
            "names": list(self.names), "rows": len(self), "config": self.config.as_dict(),
            "dataset_sha256": self.fingerprint,
            "stats": {k: v for k, v in self.stats.items() if k != "seconds"}},
            indent=2, sort_keys=True))
        return sidecar

    @classmethod
    def from_csv(cls, path) -> "PosteriorSamples":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            draws = np.loadtxt(fh, delimiter=",", ndmin=2).reshape(-1, len(header))
        if header != meta["names"] or draws.shape[0] != meta["rows"]:
            raise ValueError(f"{path} does not match its sidecar")
        return cls(draws, tuple(header), ChainConfig.from_dict(meta["config"]),
                   meta["dataset_sha256"], meta.get("stats", {}))

