"""Random-variate generation.

Every sampler takes either an :class:`RngStream` or a
:class:`numpy.random.Generator` as its first argument.  The ``*_many``
functions are vectorised versions used by the Gibbs sampler; the scalar
functions are thin wrappers around them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .circular_core import (
    FULL_CIRCLE,
    ArcInterval,
    Cov2,
    DomainError,
    pn_logdensity_identity,
    tpn_mass_many,
    wrap,
)

__all__ = [
    "RngStream",
    "TpnMode",
    "DegenerateIntervalError",
    "as_generator",
    "truncnorm_std_many",
    "sample_truncated_normal",
    "sample_pn_many",
    "sample_tpn_many",
    "sample_tpn",
    "radius_slice_many",
    "sample_radius_slice",
    "radius_exact_many",
    "sample_radius_exact",
    "sample_mvn2",
    "sample_gamma",
    "sample_beta",
    "sample_bernoulli",
    "sample_trinomial",
]

HALF_PI = 0.5 * math.pi
TAIL_CUTOFF = 6.0
MIN_MASS = 1e-300
# Attempts per draw before switching to inverse-CDF.  Failed attempts carry
# no information (the rejection count is memoryless), so the switch keeps
# draws exact; a low cap bounds work when the arc carries tiny mass.
REJECTION_CAP = 1024


class DegenerateIntervalError(DomainError):
    """Truncation region carries (numerically) no probability mass."""


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


class TpnMode(str, enum.Enum):
    EXACT_REJECTION = "exact_rejection"
    PAPER_COMPOSITE = "paper_composite"


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise TypeError(f"expected RngStream or Generator, got {type(rng).__name__}")


# ---------------------------------------------------------------------------
# truncated normal
# ---------------------------------------------------------------------------

def _log_mass(a, b):
    """log(Phi(b) - Phi(a)) for a < b, stable in both tails."""
    upper = a > -b  # a + b > 0 without inf - inf
    lo = np.where(upper, -b, a)
    hi = np.where(upper, -a, b)
    lhi = special.log_ndtr(hi)
    llo = special.log_ndtr(lo)
    with np.errstate(divide="ignore"):
        return lhi + np.log1p(-np.exp(llo - lhi))


def _tail_rejection(rng, alpha, beta):
    """Exact draws from N(0,1) restricted to [alpha, beta], alpha > 0 large."""
    out = np.empty(alpha.shape)
    pending = np.arange(alpha.size)
    while pending.size:
        a = alpha[pending]
        b = beta[pending]
        narrow = (b - a) * a < 1.0
        x = np.empty(a.shape)
        ok = np.empty(a.shape, dtype=bool)
        if np.any(narrow):
            an, bn = a[narrow], b[narrow]
            xn = an + rng.random(an.size) * (bn - an)
            ok[narrow] = np.log(rng.random(an.size)) < -0.5 * (xn * xn - an * an)
            x[narrow] = xn
        wide = ~narrow
        if np.any(wide):
            aw, bw = a[wide], b[wide]
            lam = 0.5 * (aw + np.sqrt(aw * aw + 4.0))
            xw = aw + rng.standard_exponential(aw.size) / lam
            ok[wide] = (np.log(rng.random(aw.size)) < -0.5 * (xw - lam) ** 2) & (xw <= bw)
            x[wide] = xw
        out[pending[ok]] = x[ok]
        pending = pending[~ok]
    return out


def truncnorm_std_many(rng, lo, hi):
    """Standard normal draws truncated to ``(lo, hi)``, elementwise.

    Central intervals use inversion; intervals lying beyond six standard
    deviations use exact exponential (or uniform, for narrow intervals)
    rejection.
    """
    rng = as_generator(rng)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lo, hi = np.broadcast_arrays(lo, hi)
    shape = lo.shape
    lo = lo.ravel()
    hi = hi.ravel()
    if np.any(~(lo < hi)):
        raise DomainError("truncation requires lo < hi")
    if np.any(_log_mass(lo, hi) < math.log(MIN_MASS)):
        raise DegenerateIntervalError("normal mass of truncation interval below 1e-300")
    return _truncnorm_std(rng, lo, hi).reshape(shape)


def _truncnorm_std(rng, lo, hi):
    # no mass guard: tail rejection is exact however far out the interval is
    # reflect so the bulk of each interval sits on the negative side
    flip = lo > -hi
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    x = np.empty(lo.shape)
    tail = b < -TAIL_CUTOFF
    if np.any(tail):
        x[tail] = -_tail_rejection(rng, -b[tail], -a[tail])
    mid = ~tail
    if np.any(mid):
        pa = special.ndtr(a[mid])
        pb = special.ndtr(b[mid])
        u = rng.random(pa.size)
        xm = special.ndtri(pa + u * (pb - pa))
        x[mid] = np.clip(xm, a[mid], b[mid])
    return np.where(flip, -x, x)


def sample_truncated_normal(rng, mu: float, var: float, a: float = -np.inf,
                            b: float = np.inf) -> float:
    """One draw from N(mu, var) conditioned on ``(a, b)``."""
    if not var > 0:
        raise DomainError("variance must be positive")
    if not a < b:
        raise DomainError("truncation requires a < b")
    sd = math.sqrt(var)
    z = truncnorm_std_many(rng, np.array([(a - mu) / sd]), np.array([(b - mu) / sd]))
    return float(mu + sd * z[0])


# ---------------------------------------------------------------------------
# projected normal / truncated projected normal (identity covariance)
# ---------------------------------------------------------------------------

def sample_pn_many(rng, mu1, mu2):
    """Angles of N((mu1, mu2), I) vectors."""
    rng = as_generator(rng)
    mu1, mu2 = np.broadcast_arrays(np.asarray(mu1, float), np.asarray(mu2, float))
    z = rng.standard_normal((2,) + mu1.shape)
    return wrap(np.arctan2(mu2 + z[1], mu1 + z[0]))


def _check_mass(mass):
    # rejection never needs the mass, so only the fallback paths pay for this check
    if np.any(mass <= 0):
        raise DegenerateIntervalError("arc carries zero PN mass")
    return mass


def _tpn_inverse_cdf(rng, mu1, mu2, arc, tol: float = 1e-13):
    """Inverse-CDF draws on the quadrature CDF.

    Newton steps on ``F(t) / F(delta2) - u``, falling back to bisection
    whenever a step leaves the current bracket.
    """
    u = rng.random(mu1.size)
    total = _check_mass(tpn_mass_many(mu1, mu2, arc.delta1, arc.delta2))
    lo = np.full(mu1.size, arc.delta1)
    hi = np.full(mu1.size, arc.delta2)
    t = lo + u * (hi - lo)
    active = np.arange(mu1.size)
    for _ in range(200):
        m1, m2, ta, tot = mu1[active], mu2[active], t[active], total[active]
        g = tpn_mass_many(m1, m2, arc.delta1, ta) / tot - u[active]
        above = g > 0
        hi[active] = np.where(above, ta, hi[active])
        lo[active] = np.where(above, lo[active], ta)
        dens = np.exp(pn_logdensity_identity(ta, m1, m2)) / tot
        with np.errstate(divide="ignore", invalid="ignore"):
            new = ta - g / dens
        bad = ~np.isfinite(new) | (new <= lo[active]) | (new >= hi[active])
        new = np.where(bad, 0.5 * (lo[active] + hi[active]), new)
        done = (np.abs(new - ta) < tol) | (hi[active] - lo[active] < tol)
        t[active] = new
        active = active[~done]
        if active.size == 0:
            break
    return t


def _tpn_rejection(rng, mu1, mu2, arc, cap=REJECTION_CAP):
    out = np.empty(mu1.shape)
    pending = np.arange(mu1.size)
    tries = np.zeros(mu1.size, dtype=np.int64)
    batch = 8
    while pending.size:
        m1 = mu1[pending][:, None]
        m2 = mu2[pending][:, None]
        z = rng.standard_normal((2, pending.size, batch))
        theta = wrap(np.arctan2(m2 + z[1], m1 + z[0]))
        hit = arc.contains(theta)
        got = hit.any(axis=1)
        first = hit.argmax(axis=1)
        out[pending[got]] = theta[got, first[got]]
        tries[pending] += batch
        pending = pending[~got]
        exhausted = tries[pending] >= cap
        if np.any(exhausted):
            idx = pending[exhausted]
            out[idx] = _tpn_inverse_cdf(rng, mu1[idx], mu2[idx], arc)
            pending = pending[~exhausted]
        # grow the batch but keep one round near 2M proposals
        batch = max(8, min(batch * 4, cap, (1 << 21) // max(pending.size, 1)))
    return out


def _region(d):
    if d < -HALF_PI:
        return "low"
    if d <= HALF_PI:
        return "mid"
    return "high"


def _tn_shifted(rng, mean, lo, hi):
    # the composite picks a branch without looking at z1, so the conditional
    # interval can sit far in a tail even when the arc itself has mass
    return mean + _truncnorm_std(as_generator(rng), lo - mean, hi - mean)


def _tpn_composite(rng, mu1, mu2, arc):
    """Composite z1/z2 construction, one branch per arc configuration."""
    d1, d2 = arc.delta1, arc.delta2
    k = mu1.size
    z1 = _tn_shifted(rng, mu1, np.zeros(k), np.full(k, np.inf))
    t1, t2 = math.tan(d1), math.tan(d2)
    r1, r2 = _region(d1), _region(d2)
    if r1 == r2:
        z2 = _tn_shifted(rng, mu2, z1 * t1, z1 * t2)
        offset = {"mid": 0.0, "high": math.pi, "low": -math.pi}[r1]
        theta = np.arctan2(z2, z1) + offset
    elif r1 == "low" and r2 == "mid":
        p1 = (tpn_mass_many(mu1, mu2, d1, -HALF_PI)
              / tpn_mass_many(mu1, mu2, d1, d2))
        h1 = rng.random(k) < p1
        z2 = np.where(h1,
                      _tn_shifted(rng, mu2, z1 * t1, np.full(k, np.inf)),
                      _tn_shifted(rng, mu2, np.full(k, -np.inf), z1 * t2))
        theta = np.arctan2(z2, z1) - np.where(h1, math.pi, 0.0)
    elif r1 == "mid" and r2 == "high":
        p2 = (tpn_mass_many(mu1, mu2, d1, HALF_PI)
              / tpn_mass_many(mu1, mu2, d1, d2))
        h2 = rng.random(k) < p2
        z2 = np.where(h2,
                      _tn_shifted(rng, mu2, z1 * t1, np.full(k, np.inf)),
                      _tn_shifted(rng, mu2, np.full(k, -np.inf), z1 * t2))
        theta = np.arctan2(z2, z1) + np.where(h2, 0.0, math.pi)
    else:  # low -> high
        total = tpn_mass_many(mu1, mu2, d1, d2)
        p1 = tpn_mass_many(mu1, mu2, d1, -HALF_PI) / total
        p2 = tpn_mass_many(mu1, mu2, -HALF_PI, HALF_PI) / total
        u = rng.random(k)
        h1 = u < p1
        h2 = (~h1) & (u < p1 + p2)
        inf = np.full(k, np.inf)
        z2 = np.where(h1, _tn_shifted(rng, mu2, z1 * t1, inf),
                      np.where(h2, mu2 + rng.standard_normal(k),
                               _tn_shifted(rng, mu2, -inf, z1 * t2)))
        offset = np.where(h1, -math.pi, np.where(h2, 0.0, math.pi))
        theta = np.arctan2(z2, z1) + offset
    # floating-point guard for draws landing exactly on an endpoint
    return np.clip(theta, np.nextafter(d1, math.inf), np.nextafter(d2, -math.inf))


def sample_tpn_many(rng, mu1, mu2, arc: ArcInterval,
                    mode: TpnMode = TpnMode.EXACT_REJECTION):
    """Truncated-PN(mu, I) draws on ``arc``, one per mean."""
    rng = as_generator(rng)
    mu1, mu2 = np.broadcast_arrays(np.asarray(mu1, float), np.asarray(mu2, float))
    shape = mu1.shape
    mu1, mu2 = mu1.ravel(), mu2.ravel()
    if mu1.size == 0:
        return np.zeros(shape)
    if arc.is_full:
        return sample_pn_many(rng, mu1, mu2).reshape(shape)
    if TpnMode(mode) is TpnMode.PAPER_COMPOSITE:
        _check_mass(tpn_mass_many(mu1, mu2, arc.delta1, arc.delta2))
        out = _tpn_composite(rng, mu1, mu2, arc)
    else:
        out = _tpn_rejection(rng, mu1, mu2, arc)
    return out.reshape(shape)


def sample_tpn(rng, mu, arc: ArcInterval = FULL_CIRCLE,
               mode: TpnMode = TpnMode.EXACT_REJECTION) -> float:
    """One angle from PN(mu, I) truncated to ``arc``."""
    return float(sample_tpn_many(rng, np.array([mu[0]]), np.array([mu[1]]), arc, mode)[0])


# ---------------------------------------------------------------------------
# latent radius: density proportional to r exp(-(r - a)^2 / 2) on r > 0
# ---------------------------------------------------------------------------

def radius_slice_many(rng, r_current, a_star):
    """One slice-sampling transition per element (vectorised)."""
    rng = as_generator(rng)
    r0, a = np.broadcast_arrays(np.asarray(r_current, float), np.asarray(a_star, float))
    if np.any(~(r0 > 0)):
        raise DomainError("radius must be positive")
    # -2 log t0 with t0 ~ U(0, exp(-(r0 - a)^2 / 2)); 1 - U keeps log finite
    spread = np.sqrt((r0 - a) ** 2 - 2.0 * np.log1p(-rng.random(r0.shape)))
    zeta1 = np.maximum(0.0, a - spread)
    zeta2 = a + spread
    kappa = 1.0 - rng.random(r0.shape)
    return np.sqrt((zeta2 ** 2 - zeta1 ** 2) * kappa + zeta1 ** 2)


def sample_radius_slice(rng, r_current: float, a_star: float) -> float:
    if not r_current > 0:
        raise DomainError("radius must be positive")
    return float(radius_slice_many(rng, np.array([r_current]), np.array([a_star]))[0])


def radius_exact_many(rng, a_star):
    """Independent exact draws from the radius conditional (rejection)."""
    rng = as_generator(rng)
    a_all = np.asarray(a_star, dtype=float)
    shape = a_all.shape
    a_all = a_all.ravel()
    out = np.empty(a_all.shape)
    pending = np.arange(a_all.size)
    while pending.size:
        a = a_all[pending]
        r = np.empty(a.shape)
        ok = np.empty(a.shape, dtype=bool)
        u = rng.random(a.size)
        pos = a >= 0
        if np.any(pos):
            ap = a[pos]
            w_ray = 1.0 / math.sqrt(2.0 * math.pi)
            w_norm = ap * special.ndtr(ap)
            use_ray = rng.random(ap.size) * (w_ray + w_norm) < w_ray
            ray = ap + np.sqrt(-2.0 * np.log1p(-rng.random(ap.size)))
            nrm = ap + truncnorm_std_many(rng, -ap, np.full(ap.size, np.inf))
            rp = np.where(use_ray, ray, nrm)
            r[pos] = rp
            ok[pos] = u[pos] * np.maximum(rp, ap) < rp
        mid = (a < 0) & (a >= -2.0)
        if np.any(mid):
            rm = np.sqrt(-2.0 * np.log1p(-rng.random(int(mid.sum()))))
            r[mid] = rm
            ok[mid] = np.log(u[mid]) < a[mid] * rm
        neg = a < -2.0
        if np.any(neg):
            rn = rng.gamma(2.0, 1.0 / -a[neg])
            r[neg] = rn
            ok[neg] = np.log(u[neg]) < -0.5 * rn * rn
        ok &= r > 0
        out[pending[ok]] = r[ok]
        pending = pending[~ok]
    return out.reshape(shape)


def sample_radius_exact(rng, a_star: float) -> float:
    return float(radius_exact_many(rng, np.array([a_star]))[0])


# ---------------------------------------------------------------------------
# standard laws
# ---------------------------------------------------------------------------

def sample_mvn2(rng, mu, cov) -> tuple[float, float]:
    rng = as_generator(rng)
    m = cov.matrix if isinstance(cov, Cov2) else np.asarray(cov, dtype=float)
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise DomainError("covariance not positive definite") from exc
    z = chol @ rng.standard_normal(2) + np.asarray(mu, dtype=float)
    return float(z[0]), float(z[1])


def sample_gamma(rng, shape: float, rate: float) -> float:
    """Gamma draw with mean ``shape / rate``."""
    if not (shape > 0 and rate > 0):
        raise DomainError("gamma requires positive shape and rate")
    return float(as_generator(rng).gamma(shape, 1.0 / rate))


def sample_beta(rng, a: float, b: float) -> float:
    if not (a > 0 and b > 0):
        raise DomainError("beta requires positive parameters")
    return float(as_generator(rng).beta(a, b))


def sample_bernoulli(rng, p: float) -> int:
    if not 0.0 <= p <= 1.0:
        raise DomainError("probability outside [0, 1]")
    return int(as_generator(rng).random() < p)


def sample_trinomial(rng, p1: float, p2: float) -> tuple[int, int]:
    """One trial over {H1, H2, neither}; returns the indicator pair."""
    if not (0.0 <= p1 and 0.0 <= p2 and p1 + p2 <= 1.0 + 1e-12):
        raise DomainError("invalid trinomial probabilities")
    u = as_generator(rng).random()
    if u < p1:
        return 1, 0
    if u < p1 + p2:
        return 0, 1
    return 0, 0
