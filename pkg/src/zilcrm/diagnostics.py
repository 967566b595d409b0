"""Post-fit summaries: convergence, credible sets, prediction and fit plots data."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .circular_core import TWO_PI, log_phi_plus_u_Phi, wrap
from .gibbs import PosteriorSamples
from .model import Dataset, stage1_design

__all__ = [
    "DiagnosticsError",
    "HpdInterval",
    "Ellipse",
    "PredictiveSpec",
    "geweke_z",
    "hpd",
    "equal_tailed",
    "significance_ellipse",
    "pn_density_general",
    "posterior_predictive_density",
    "predictive_mean_direction",
    "improvement",
    "fitted_directions",
    "donut_points",
    "diagnostics_summary",
    "curves_to_csv",
    "donut_to_csv",
]


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True)
class HpdInterval:
    lo: float
    hi: float
    mass: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise DiagnosticsError("hpd bounds out of order")
        if not 0.0 < self.mass < 1.0:
            raise DiagnosticsError("mass must lie in (0, 1)")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


def _spectrum0(x: np.ndarray) -> float:
    """Bartlett lag-window estimate of the spectral density at frequency zero."""
    n = x.size
    xc = x - x.mean()
    lags = int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))
    lags = min(lags, n - 1)
    s = float(np.dot(xc, xc)) / n
    for k in range(1, lags + 1):
        gk = float(np.dot(xc[:-k], xc[k:])) / n
        s += 2.0 * (1.0 - k / (lags + 1.0)) * gk
    return max(s, 0.0)


def geweke_z(samples, frac_a: float = 0.1, frac_b: float = 0.5) -> float:
    """Geweke convergence score comparing the early and late parts of a chain."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise DiagnosticsError("geweke_z needs at least 100 draws")
    if not (0 < frac_a and 0 < frac_b and frac_a + frac_b <= 1):
        raise DiagnosticsError("segment fractions must be positive and sum to at most 1")
    a = x[: int(math.floor(frac_a * x.size))]
    b = x[x.size - int(math.floor(frac_b * x.size)):]
    var = _spectrum0(a) / a.size + _spectrum0(b) / b.size
    diff = a.mean() - b.mean()
    if var <= 0.0:
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    return float(diff / math.sqrt(var))


def hpd(samples, mass: float = 0.95) -> HpdInterval:
    """Shortest interval ``[Q(p), Q(p + mass)]`` over ``p``.

    ``Q`` is the linearly interpolated empirical quantile, the same one
    :func:`equal_tailed` uses, so the two intervals are directly comparable.
    The width is piecewise linear in ``p``; only breakpoints are checked.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size < 100:
        raise DiagnosticsError("hpd needs at least 100 draws")
    last = x.size - 1
    span = mass * last
    starts = np.arange(int(math.floor(last - span)) + 1, dtype=float)
    ends = np.arange(int(math.ceil(span)), x.size, dtype=float)
    pos = np.unique(np.clip(np.concatenate([starts, ends - span]), 0.0, last - span))

    def q(at):
        i = np.minimum(np.floor(at).astype(int), last - 1)
        return x[i] + (at - i) * (x[i + 1] - x[i])

    widths = q(pos + span) - q(pos)
    k = int(np.argmin(widths))
    return HpdInterval(float(q(pos[k:k + 1])[0]), float(q(pos[k:k + 1] + span)[0]), mass)


def equal_tailed(samples, mass: float = 0.95) -> tuple[float, float]:
    lo, hi = np.quantile(np.asarray(samples, dtype=float), [(1 - mass) / 2, (1 + mass) / 2])
    return float(lo), float(hi)


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    cov: tuple[tuple[float, float], tuple[float, float]]
    radius_sq: float
    semi_axes: tuple[float, float]
    angle: float
    level: float

    def boundary(self, k: int = 100) -> np.ndarray:
        t = np.linspace(0.0, TWO_PI, k)
        L = np.linalg.cholesky(np.asarray(self.cov))
        pts = math.sqrt(self.radius_sq) * (L @ np.vstack([np.cos(t), np.sin(t)]))
        return pts.T + np.asarray(self.center)


def significance_ellipse(a, b, level: float = 0.95) -> tuple[Ellipse, bool]:
    """Normal-approximation region for a coefficient pair and whether it holds (0, 0)."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise DiagnosticsError("columns differ in length")
    if a.size < 3:
        raise DiagnosticsError("too few draws for a covariance estimate")
    center = np.array([a.mean(), b.mean()])
    cov = np.cov(np.vstack([a, b]))
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 1e-12 * max(evals[1], 1e-300):
        raise DiagnosticsError("sample covariance is rank deficient")
    c = float(stats.chi2.ppf(level, 2))
    d2 = float(center @ np.linalg.solve(cov, center))
    ell = Ellipse(
        center=(float(center[0]), float(center[1])),
        cov=((float(cov[0, 0]), float(cov[0, 1])), (float(cov[1, 0]), float(cov[1, 1]))),
        radius_sq=c,
        semi_axes=(float(math.sqrt(c * evals[1])), float(math.sqrt(c * evals[0]))),
        angle=float(math.atan2(evecs[1, 1], evecs[0, 1])),
        level=level,
    )
    return ell, d2 <= c


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PredictiveSpec:
    """Covariate profile of a hypothetical new subject.

    ``x`` holds the Stage-I linear covariates in design order.
    """

    initial_theta_x: float
    x: tuple[float, ...]
    label: str = ""

    def design_row(self) -> np.ndarray:
        t = self.initial_theta_x
        return np.concatenate(([1.0], np.asarray(self.x, float), [math.cos(t), math.sin(t)]))


def pn_density_general(theta, mu1, mu2, s11, s22, s12):
    """PN density on a grid for many (mean, covariance) draws.

    Means and covariance entries are arrays of length K; returns (K, G).
    """
    theta = np.asarray(theta, dtype=float)[None, :]
    mu1, mu2 = np.asarray(mu1)[:, None], np.asarray(mu2)[:, None]
    s11, s22, s12 = (np.asarray(v, dtype=float)[:, None] for v in (s11, s22, s12))
    det = s11 * s22 - s12 * s12
    i11, i22, i12 = s22 / det, s11 / det, -s12 / det
    c, s = np.cos(theta), np.sin(theta)
    A1 = i11 * mu1 ** 2 + 2 * i12 * mu1 * mu2 + i22 * mu2 ** 2
    A2 = c * (i11 * mu1 + i12 * mu2) + s * (i12 * mu1 + i22 * mu2)
    A3 = i11 * c * c + 2 * i12 * c * s + i22 * s * s
    u = A2 / np.sqrt(A3)
    logf = (-math.log(TWO_PI) - 0.5 * np.log(det) - np.log(A3) - 0.5 * (A1 - u * u)
            + 0.5 * math.log(TWO_PI) + log_phi_plus_u_Phi(u))
    return np.exp(logf)


def _stage1_columns(samples: PosteriorSamples):
    b1 = samples.block("beta1")
    b2 = samples.block("beta2")
    return b1, b2


def posterior_predictive_density(samples: PosteriorSamples, spec: PredictiveSpec, grid,
                                 integrate_b: bool = True, chunk: int = 2000) -> np.ndarray:
    """Average of Stage-I PN densities over kept draws.

    With ``integrate_b`` the random effect of a new subject is integrated
    out exactly, giving PN(mu, I + Sigma_b) per draw; otherwise b = 0.
    """
    b1, b2 = _stage1_columns(samples)
    row = spec.design_row()
    if row.size != b1.shape[1]:
        raise DiagnosticsError(f"profile gives {row.size} design entries, model has {b1.shape[1]}")
    mu1, mu2 = b1 @ row, b2 @ row
    if integrate_b:
        s11 = 1.0 + samples["sigma1_sq"]
        s22 = 1.0 + samples["sigma2_sq"]
        s12 = samples["rho"] * np.sqrt(samples["sigma1_sq"] * samples["sigma2_sq"])
    else:
        s11 = s22 = np.ones(len(samples))
        s12 = np.zeros(len(samples))
    grid = np.asarray(grid, dtype=float)
    total = np.zeros(grid.size)
    for start in range(0, len(samples), chunk):
        sl = slice(start, start + chunk)
        total += pn_density_general(grid, mu1[sl], mu2[sl], s11[sl], s22[sl], s12[sl]).sum(axis=0)
    return total / len(samples)


def predictive_mean_direction(grid, density) -> tuple[float, float]:
    """Mean direction and resultant length of a density tabulated on a uniform grid."""
    grid = np.asarray(grid, dtype=float)
    density = np.asarray(density, dtype=float)
    w = density / density.sum()
    c, s = float(np.dot(w, np.cos(grid))), float(np.dot(w, np.sin(grid)))
    return math.atan2(s, c), math.hypot(c, s)


def improvement(initial_theta: float, grid, density) -> float:
    """Reduction of the angular distance to 0, from the initial angle to the predictive mean."""
    mean_dir, _ = predictive_mean_direction(grid, density)
    return abs(float(wrap(initial_theta))) - abs(mean_dir)


def fitted_directions(samples: PosteriorSamples, d: Dataset) -> np.ndarray:
    """Plug-in predicted angle per observation from posterior-mean coefficients."""
    b1, b2 = _stage1_columns(samples)
    X = stage1_design(d, d.theta_x)
    return np.arctan2(X @ b2.mean(axis=0), X @ b1.mean(axis=0))


def donut_points(observed, predicted) -> tuple[np.ndarray, np.ndarray]:
    """Goodness-of-fit points and clockwise flags.

    Returns an (N, 2) array of points ``[1 + cos(pred - obs)] (cos pred, sin pred)``
    and a boolean array that is True where the prediction deviates clockwise.
    """
    obs = np.asarray(observed, dtype=float).ravel()
    pred = np.asarray(predicted, dtype=float).ravel()
    if obs.size != pred.size:
        raise DiagnosticsError("observed and predicted lengths differ")
    radius = 1.0 + np.cos(pred - obs)
    pts = np.column_stack([radius * np.cos(pred), radius * np.sin(pred)])
    clockwise = wrap(pred - obs) < 0 if obs.size else np.zeros(0, dtype=bool)
    return pts, np.asarray(clockwise, dtype=bool)


# ---------------------------------------------------------------------------
# bundles
# ---------------------------------------------------------------------------

def _pairs(names: Sequence[str]) -> list[tuple[str, str]]:
    out = []
    for n in names:
        for stem in ("beta", "alpha"):
            if n.startswith(stem + "1_"):
                other = stem + "2_" + n.split("_", 1)[1]
                if other in names:
                    out.append((n, other))
    return out


def diagnostics_summary(samples: PosteriorSamples, mass: float = 0.95) -> dict:
    """Geweke scores, HPD intervals and coefficient-pair ellipse flags."""
    out = {"geweke": {}, "hpd": {}, "ellipses": {}}
    for name in samples.names:
        col = samples[name]
        try:
            out["geweke"][name] = geweke_z(col)
            h = hpd(col, mass)
            out["hpd"][name] = {"lo": h.lo, "hi": h.hi, "mass": h.mass}
        except DiagnosticsError as exc:
            out["geweke"][name] = None
            out["hpd"][name] = {"error": str(exc)}
    for a, b in _pairs(samples.names):
        key = a.split("_", 1)[1]
        label = ("beta_" if a.startswith("beta") else "alpha_") + key
        try:
            ell, inside = significance_ellipse(samples[a], samples[b], mass)
            out["ellipses"][label] = {**asdict(ell), "contains_origin": bool(inside),
                                      "significant": not inside}
        except DiagnosticsError as exc:
            out["ellipses"][label] = {"error": str(exc)}
    return out


def curves_to_csv(grid, curves: dict[str, np.ndarray], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    labels = list(curves)
    w.writerow(["theta"] + labels)
    for k, t in enumerate(grid):
        w.writerow([repr(float(t))] + [repr(float(curves[c][k])) for c in labels])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def donut_to_csv(points, clockwise, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "clockwise"])
    for (px, py), cw in zip(points, clockwise):
        w.writerow([repr(float(px)), repr(float(py)), int(cw)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=float))
