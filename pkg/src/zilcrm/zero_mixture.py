"""Random-zero extension: indicator and proportion updates.

A zero is either a censored draw (its latent angle fell inside the
censoring arc) or a structural zero produced with probability ``eta``.
Indicators ``z = 1`` mark structural zeros.  The functions here are pure:
they take current means and return draws, and the Gibbs sampler wires them
into a sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circular_core import ArcInterval, DomainError, tpn_mass_many
from .samplers import TpnMode, as_generator, sample_pn_many, sample_tpn_many

__all__ = [
    "MixtureZeroState",
    "z_probability",
    "update_z",
    "update_z_given_angle",
    "eta_posterior",
    "update_eta",
    "update_theta_star_mixture",
]


@dataclass(frozen=True)
class MixtureZeroState:
    """Snapshot of the indicators and zero proportions.

    ``z_y`` and ``z_x`` are stored for every observation; entries at
    nonzero observations are always 0.
    """

    z_y: np.ndarray
    z_x: np.ndarray
    eta_y: float
    eta_x: float

    def __post_init__(self):
        for name in ("eta_y", "eta_x"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise DomainError(f"{name} must lie in (0, 1)")


def z_probability(eta, censor_mass):
    """P(structural zero | observed zero) given eta and the arc mass C."""
    eta = np.asarray(eta, dtype=float)
    c = np.asarray(censor_mass, dtype=float)
    denom = eta + (1.0 - eta) * c
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(denom > 0, eta / np.where(denom > 0, denom, 1.0), 1.0)
    return p


def update_z(rng, mu1, mu2, arc: ArcInterval, eta: float) -> np.ndarray:
    """Indicators for observed zeros, with the latent angle integrated out."""
    if eta == 0.0:
        return np.zeros(np.shape(mu1), dtype=np.int8)
    rng = as_generator(rng)
    mass = tpn_mass_many(mu1, mu2, arc.delta1, arc.delta2)
    p = z_probability(eta, mass)
    return (rng.random(p.shape) < p).astype(np.int8)


def update_z_given_angle(rng, theta_star, arc: ArcInterval, eta: float) -> np.ndarray:
    """Indicators for observed zeros given the current latent angle.

    A latent angle outside the arc cannot have been censored, so the zero
    must be structural; inside the arc the odds reduce to the prior.
    """
    inside = arc.contains(np.asarray(theta_star, dtype=float))
    if eta == 0.0:
        return (~inside).astype(np.int8)
    rng = as_generator(rng)
    p = np.where(inside, eta, 1.0)
    return (rng.random(p.shape) < p).astype(np.int8)


def eta_posterior(z_sum: int, n_total: int, c: float, d: float) -> tuple[float, float]:
    if c < 0 or d <= 0:
        raise DomainError("Beta prior needs c >= 0 and d > 0")
    if z_sum < 0 or z_sum > n_total:
        raise DomainError("indicator count outside [0, N]")
    return c + z_sum, d + n_total - z_sum


def update_eta(rng, z_sum: int, n_total: int, c: float, d: float) -> float:
    """Beta draw for eta; a zero first shape is the point mass at 0 (no draw)."""
    a, b = eta_posterior(z_sum, n_total, c, d)
    if a == 0.0:
        return 0.0
    return float(as_generator(rng).beta(a, b))


def update_theta_star_mixture(rng, mu1, mu2, z, arc: ArcInterval,
                              mode: TpnMode = TpnMode.EXACT_REJECTION) -> np.ndarray:
    """Latent angles for observed zeros: TPN on the arc if censored, PN otherwise."""
    rng = as_generator(rng)
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    z = np.asarray(z).astype(bool)
    out = np.empty(mu1.shape)
    cens = ~z
    if np.any(cens):
        out[cens] = sample_tpn_many(rng, mu1[cens], mu2[cens], arc, mode)
    if np.any(z):
        out[z] = sample_pn_many(rng, mu1[z], mu2[z])
    return out
