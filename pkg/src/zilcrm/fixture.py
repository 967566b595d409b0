"""Synthetic stand-in for a post-operative astigmatism study.

56 patients with axes recorded on days 7, 30 and 90, a day-1 axis as the
circular covariate and a pre-operative axis as circular instrument.  The
generating seed was chosen so that exactly 57 of 168 responses and 20 of 56
covariate angles are zero.  Surgery has a large effect on the first latent
coordinate, so its coefficient pair is clearly nonzero.
"""

from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .circular_core import ArcInterval, Cov2
from .diagnostics import PredictiveSpec
from .model import CensoringSpec, Dataset
from .samplers import RngStream

__all__ = [
    "FIXTURE_SEED",
    "FIXTURE_TRUTH",
    "X_NAMES",
    "V_NAMES",
    "astigmatism_fixture",
    "load_bundled_fixture",
    "fixture_censoring",
    "predictive_profile",
    "DAY_CODES",
]

X_NAMES = ("Age", "Gender", "Surgery", "t1", "t2", "I1")
V_NAMES = ("I0",)
DAY_CODES = {7: (0.0, 0.0), 30: (1.0, 0.0), 90: (1.0, 1.0)}
DELTA = 0.035

FIXTURE_TRUTH = {
    #            int   Age   Gender Surgery t1   t2   I1    cos  sin
    "beta1": (6.2, 0.03, 0.2, 10.0, 2.0, 1.0, -1.5, 3.0, 0.0),
    "beta2": (-0.3, 0.01, 0.1, -0.2, 0.0, 0.0, 0.2, 0.0, 1.2),
    #             int   I0   cos  sin
    "alpha1": (10.0, 3.0, 2.0, 0.0),
    "alpha2": (0.2, 0.0, 0.0, 0.6),
    "rho": 0.3,
    "sigma2_sq": 1.0,
}

FIXTURE_SEED = 304


def _sigma_b() -> Cov2:
    rho, s2 = FIXTURE_TRUTH["rho"], FIXTURE_TRUTH["sigma2_sq"]
    return Cov2(1.0 / (s2 * (1.0 - rho * rho)), s2, rho)


def astigmatism_fixture(seed: int = FIXTURE_SEED) -> Dataset:
    """Generate the fixture; the default seed gives the pinned zero counts."""
    rng = RngStream(seed).generator()
    n, m = 56, 3
    age = np.round(rng.normal(62.0, 8.0, n))
    gender = (rng.random(n) < 0.5).astype(float)
    surgery = (rng.random(n) < 0.5).astype(float)
    i1 = np.round(np.abs(rng.normal(0.95, 0.45, n)), 2)
    i0 = np.round(np.abs(rng.normal(1.0, 0.5, n)), 2)
    g = rng.standard_normal((n, 2)) + [0.6, 0.3]
    theta_v = np.arctan2(g[:, 1], g[:, 0])
    V = np.column_stack([np.ones(n), i0, np.cos(theta_v), np.sin(theta_v)])
    xs = rng.standard_normal((n, 2)) + np.column_stack(
        [V @ FIXTURE_TRUTH["alpha1"], V @ FIXTURE_TRUTH["alpha2"]])
    theta_x_star = np.arctan2(xs[:, 1], xs[:, 0])
    b = rng.standard_normal((n, 2)) @ np.linalg.cholesky(_sigma_b().matrix).T
    sub = np.repeat(np.arange(n), m)
    day = np.tile([7, 30, 90], n)
    t1 = (day >= 30).astype(float)
    t2 = (day >= 90).astype(float)
    x = np.column_stack([age[sub], gender[sub], surgery[sub], t1, t2, i1[sub]])
    t = theta_x_star[sub]
    X = np.column_stack([np.ones(n * m), x, np.cos(t), np.sin(t)])
    ys = (rng.standard_normal((n * m, 2))
          + np.column_stack([X @ FIXTURE_TRUTH["beta1"], X @ FIXTURE_TRUTH["beta2"]]) + b[sub])
    theta_y_star = np.arctan2(ys[:, 1], ys[:, 0])
    theta_y = np.where(np.abs(theta_y_star) < DELTA, 0.0, theta_y_star)
    theta_x = np.where(np.abs(theta_x_star) < DELTA, 0.0, theta_x_star)
    return Dataset(
        subject_ids=np.array([f"P{i + 1:02d}" for i in range(n)]),
        subject_index=sub, occasion=np.tile(np.arange(1, m + 1), n),
        theta_y=theta_y, x=x, theta_x=theta_x, v=i0[:, None], theta_v=theta_v,
        x_names=X_NAMES, v_names=V_NAMES,
    )


def load_bundled_fixture() -> Dataset:
    """The fixture as shipped in the package data CSV."""
    from .io import read_dataset

    ref = resources.files("zilcrm") / "data" / "astigmatism_fixture.csv"
    with resources.as_file(ref) as path:
        return read_dataset(path)


def fixture_censoring() -> CensoringSpec:
    return CensoringSpec(ArcInterval.symmetric(DELTA), ArcInterval.symmetric(DELTA))


def predictive_profile(initial_deg: float, surgery: int, day: int = 30, age: float = 62.0,
                       gender: int = 0, i1: float = 0.95) -> PredictiveSpec:
    """New-patient covariate profile; ``initial_deg`` is the transformed day-1 axis."""
    t1, t2 = DAY_CODES[day]
    theta = math.remainder(math.radians(initial_deg), 2 * math.pi)
    if theta == -math.pi:
        theta = math.pi
    label = f"{'PECS' if surgery else 'SICS'} day {day} initial {initial_deg:g}deg"
    return PredictiveSpec(theta, (age, float(gender), float(surgery), t1, t2, i1), label)
