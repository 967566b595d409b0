"""Angular arithmetic and projected-normal densities.

All angles are radians on the half-open interval (-pi, pi].  Means are
2-vectors ``(mu1, mu2)`` and covariances are either a :class:`Cov2` or a
2x2 symmetric positive-definite array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "DomainError",
    "UndefinedDirectionError",
    "Cov2",
    "ArcInterval",
    "FULL_CIRCLE",
    "wrap",
    "atan2_paper",
    "joint_density_r_theta",
    "pn_density",
    "pn_logdensity",
    "pn_logdensity_identity",
    "tpn_mass",
    "tpn_mass_many",
    "mean_direction_and_resultant",
    "slope_diagnostics",
    "log_phi_plus_u_Phi",
]

TWO_PI = 2.0 * math.pi
LOG_2PI = math.log(TWO_PI)
QUAD_TOL = 1e-10


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class UndefinedDirectionError(DomainError):
    """A mean direction was requested for a zero vector."""


@dataclass(frozen=True)
class Cov2:
    """2x2 covariance given by two variances and a correlation."""

    s11: float
    s22: float
    rho: float = 0.0

    def __post_init__(self):
        if not (self.s11 > 0 and self.s22 > 0 and -1.0 < self.rho < 1.0):
            raise DomainError(f"not positive definite: {self}")

    @property
    def matrix(self) -> np.ndarray:
        off = self.rho * math.sqrt(self.s11 * self.s22)
        return np.array([[self.s11, off], [off, self.s22]])

    @property
    def det(self) -> float:
        return self.s11 * self.s22 * (1.0 - self.rho ** 2)

    @classmethod
    def from_matrix(cls, m) -> "Cov2":
        m = np.asarray(m, dtype=float)
        return cls(m[0, 0], m[1, 1], m[0, 1] / math.sqrt(m[0, 0] * m[1, 1]))

    @classmethod
    def identity(cls) -> "Cov2":
        return cls(1.0, 1.0, 0.0)


@dataclass(frozen=True)
class ArcInterval:
    """Open arc ``(delta1, delta2)`` with ``-pi <= delta1 < delta2 <= pi``.

    ``delta1 = -pi`` together with ``delta2 = pi`` denotes the whole circle.
    """

    delta1: float
    delta2: float

    def __post_init__(self):
        if not (-math.pi <= self.delta1 < self.delta2 <= math.pi):
            raise DomainError(f"invalid arc ({self.delta1}, {self.delta2})")

    @classmethod
    def symmetric(cls, delta: float) -> "ArcInterval":
        return cls(-delta, delta)

    @property
    def width(self) -> float:
        return self.delta2 - self.delta1

    @property
    def is_full(self) -> bool:
        return self.delta1 <= -math.pi and self.delta2 >= math.pi

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.is_full:
            return np.ones(theta.shape, dtype=bool)
        return (theta > self.delta1) & (theta < self.delta2)


FULL_CIRCLE = ArcInterval(-math.pi, math.pi)


def _as_cov_matrix(sigma) -> np.ndarray:
    if isinstance(sigma, Cov2):
        return sigma.matrix
    m = np.asarray(sigma, dtype=float)
    if m.shape != (2, 2):
        raise DomainError("covariance must be 2x2")
    return m


def wrap(theta_raw):
    """Map angles onto (-pi, pi]; ``-pi`` maps to ``pi``.

    Accepts scalars or arrays.  Non-finite input raises :class:`DomainError`.
    """
    t = np.asarray(theta_raw, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("wrap requires finite angles")
    out = np.pi - np.mod(np.pi - t, TWO_PI)
    if out.ndim == 0:
        return float(out)
    return out


def atan2_paper(S, C):
    """Four-quadrant arctangent with the convention ``sgn(0) = +1``.

    Differs from :func:`numpy.arctan2` only on the ray ``S = -0.0, C < 0``,
    where this returns ``+pi``.  Raises when ``S == C == 0``.
    """
    S = np.asarray(S, dtype=float)
    C = np.asarray(C, dtype=float)
    if np.any((S == 0) & (C == 0)):
        raise UndefinedDirectionError("atan2 undefined at S = C = 0")
    sgn = np.where(S >= 0, 1.0, -1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.arctan(S / C)
    out = np.where(C > 0, base, np.where(C < 0, base + np.pi * sgn, 0.5 * np.pi * sgn))
    if out.ndim == 0:
        return float(out)
    return out


def joint_density_r_theta(r, theta, mu, sigma) -> float:
    """Joint density of the radius and angle of a bivariate normal vector."""
    if not r > 0:
        raise DomainError("radius must be positive")
    cov = _as_cov_matrix(sigma)
    det = np.linalg.det(cov)
    if det <= 0:
        raise DomainError("singular covariance")
    diff = r * np.array([math.cos(theta), math.sin(theta)]) - np.asarray(mu, dtype=float)
    quad = diff @ np.linalg.solve(cov, diff)
    return r / (TWO_PI * math.sqrt(det)) * math.exp(-0.5 * quad)


def log_phi_plus_u_Phi(u):
    """``log(phi(u) + u * Phi(u))`` evaluated without cancellation."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    pos = u >= 0
    up = u[pos]
    out[pos] = np.log(np.exp(-0.5 * up * up) / math.sqrt(TWO_PI) + up * special.ndtr(up))
    un = u[~pos]
    # Phi(u)/phi(u) = sqrt(pi/2) erfcx(-u/sqrt 2)
    ratio = math.sqrt(math.pi / 2.0) * special.erfcx(-un / math.sqrt(2.0))
    out[~pos] = -0.5 * un * un - 0.5 * LOG_2PI + np.log1p(un * ratio)
    return out


def pn_logdensity_identity(theta, mu1, mu2):
    """Vectorised log PN density for identity covariance.

    Broadcasts ``theta``, ``mu1`` and ``mu2`` against each other.
    """
    theta, mu1, mu2 = np.broadcast_arrays(
        np.asarray(theta, float), np.asarray(mu1, float), np.asarray(mu2, float))
    u = mu1 * np.cos(theta) + mu2 * np.sin(theta)
    perp2 = mu1 * mu1 + mu2 * mu2 - u * u
    return -LOG_2PI - 0.5 * perp2 + 0.5 * LOG_2PI + log_phi_plus_u_Phi(u)


def pn_logdensity(theta, mu, sigma):
    """Log of the projected-normal density of ``theta`` (vectorised in theta)."""
    cov = _as_cov_matrix(sigma)
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    if not det > 0 or not cov[0, 0] > 0:
        raise DomainError("covariance must be positive definite")
    prec = np.array([[cov[1, 1], -cov[0, 1]], [-cov[1, 0], cov[0, 0]]]) / det
    mu = np.asarray(mu, dtype=float)
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    pm = prec @ mu
    a1 = mu @ pm
    a2 = pm[0] * c + pm[1] * s
    a3 = prec[0, 0] * c * c + 2.0 * prec[0, 1] * c * s + prec[1, 1] * s * s
    u = a2 / np.sqrt(a3)
    # exp(-A1/2) / phi(u) folded into the perpendicular term
    out = (-LOG_2PI - 0.5 * math.log(det) - np.log(a3)
           - 0.5 * (a1 - u * u) + 0.5 * LOG_2PI + log_phi_plus_u_Phi(u))
    if out.ndim == 0:
        return float(out)
    return out


def pn_density(theta, mu, sigma=None):
    """Projected-normal density on (-pi, pi].

    Parameters
    ----------
    theta : float or array
        Angle(s) in radians.
    mu : sequence of 2 floats
        Mean of the underlying bivariate normal.
    sigma : Cov2 or 2x2 array, optional
        Covariance; identity when omitted.
    """
    if sigma is None:
        sigma = np.eye(2)
    cov = _as_cov_matrix(sigma)
    if not np.any(np.asarray(mu, dtype=float)) and cov[0, 1] == 0.0 and cov[0, 0] == cov[1, 1] > 0:
        # zero mean, isotropic covariance: exactly uniform (avoids cos^2 + sin^2 rounding)
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, 1.0 / TWO_PI)
        return float(out) if out.ndim == 0 else out
    return np.exp(pn_logdensity(theta, mu, sigma))


# Gauss-Legendre nodes reused by the vectorised arc integrator.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def tpn_mass_many(mu1, mu2, lo, hi, panels: int | None = None):
    """PN(mu, I) mass of arcs ``(lo, hi)``, vectorised over all arguments.

    Composite 32-point Gauss-Legendre; the panel count adapts to the
    largest ``|mu|`` so each panel spans at most a quarter of the angular
    spread of the density.
    """
    mu1, mu2, lo, hi = np.broadcast_arrays(
        np.asarray(mu1, float), np.asarray(mu2, float),
        np.asarray(lo, float), np.asarray(hi, float))
    if mu1.size == 0:
        return np.zeros(mu1.shape)
    if panels is None:
        scale = 1.0 / max(1.0, float(np.max(np.hypot(mu1, mu2))))
        width = float(np.max(hi - lo))
        panels = int(min(256, max(1, math.ceil(width / (4.0 * scale)))))
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    span = (hi - lo)[..., None]
    theta = lo[..., None] + span * t
    dens = np.exp(pn_logdensity_identity(theta, mu1[..., None], mu2[..., None]))
    return span[..., 0] * (dens @ w)


def tpn_mass(mu, arc: ArcInterval, tol: float = QUAD_TOL) -> float:
    """Mass that PN(mu, I) assigns to ``arc`` (adaptive Gauss-Kronrod)."""
    mu1, mu2 = float(mu[0]), float(mu[1])

    def f(t):
        return math.exp(float(pn_logdensity_identity(t, mu1, mu2)))

    # split at the mode so quad sees the peak on a panel boundary
    mode = math.atan2(mu2, mu1)
    pts = [mode] if arc.delta1 < mode < arc.delta2 else None
    val, _ = integrate.quad(f, arc.delta1, arc.delta2, epsabs=tol, epsrel=0.0,
                            limit=200, points=pts)
    return min(max(val, 0.0), 1.0)


def mean_direction_and_resultant(mu, sigma=None, tol: float = QUAD_TOL):
    """Mean direction and mean resultant length of PN(mu, sigma).

    Returns ``(direction, length)``; direction is ``None`` when the
    resultant length is numerically zero.
    """
    if sigma is None:
        sigma = np.eye(2)

    def moment(fn):
        val, _ = integrate.quad(lambda t: fn(t) * pn_density(t, mu, sigma),
                                -math.pi, math.pi, epsabs=tol, limit=200)
        return val

    c = moment(math.cos)
    s = moment(math.sin)
    length = math.hypot(c, s)
    if length < 1e-9:
        return None, 0.0
    return atan2_paper(s, c), min(length, 1.0)


def slope_diagnostics(beta1, beta2, x: float):
    """Mean direction and its sensitivities for a one-covariate PN regression.

    Parameters
    ----------
    beta1, beta2 : pairs
        ``(intercept, slope)`` for the two latent components.
    x : float
        Covariate value.

    Returns
    -------
    m : float
        Mean direction at ``x``.
    m_prime : float
        Derivative of the mean direction with respect to ``x``.
    conc_sq_rate : float
        Derivative of ``||mu(x)||^2`` with respect to ``x``.
    """
    b10, b11 = map(float, beta1)
    b20, b21 = map(float, beta2)
    c = b10 + b11 * x
    s = b20 + b21 * x
    norm2 = c * c + s * s
    if norm2 == 0:
        raise UndefinedDirectionError(f"mean vector vanishes at x={x}")
    m = atan2_paper(s, c)
    m_prime = (b10 * b21 - b11 * b20) / norm2
    conc_sq_rate = 2.0 * (b10 * b11 + b20 * b21) + 2.0 * (b11 ** 2 + b21 ** 2) * x
    return m, m_prime, conc_sq_rate
