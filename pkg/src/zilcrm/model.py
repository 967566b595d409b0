"""Data, priors and state for the two-stage zero-inflated circular model."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .circular_core import ArcInterval, Cov2, DomainError

__all__ = [
    "ValidationError",
    "SubjectRecord",
    "Dataset",
    "CensoringSpec",
    "PriorSpec",
    "ModelVariant",
    "ParameterState",
    "LatentState",
    "ValidationReport",
    "build_design_row",
    "stage1_design",
    "stage2_design",
    "reconstruct_sigma_b",
    "sigma_b_to_s1_tau",
    "validate_dataset",
]


class ValidationError(ValueError):
    """Dataset is structurally inconsistent."""

    def __init__(self, issues: Sequence[str]):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


@dataclass(frozen=True)
class SubjectRecord:
    """One subject: repeated responses plus subject-level covariates.

    ``occasions`` is a sequence of ``(theta_y, x)`` pairs.
    """

    subject_id: str
    occasions: Sequence[tuple[float, Sequence[float]]]
    theta_x: float
    v: Sequence[float] = ()
    theta_v: float | None = None

    def __post_init__(self):
        if len(self.occasions) == 0:
            raise ValidationError([f"subject {self.subject_id} has no occasions"])
        widths = {len(np.atleast_1d(x)) for _, x in self.occasions}
        if len(widths) > 1:
            raise ValidationError([f"subject {self.subject_id} has covariate vectors of "
                                   f"lengths {sorted(widths)}"])


@dataclass(frozen=True, eq=False)
class Dataset:
    """Long-format storage: one row per (subject, occasion).

    Per-subject quantities (``theta_x``, ``v``, ``theta_v``) are stored once
    per subject; ``subject_index`` maps each row to its subject.
    """

    subject_ids: np.ndarray
    subject_index: np.ndarray
    occasion: np.ndarray
    theta_y: np.ndarray
    x: np.ndarray
    theta_x: np.ndarray
    v: np.ndarray
    theta_v: np.ndarray | None = None
    x_names: tuple[str, ...] = ()
    v_names: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.subject_ids)
        N = len(self.theta_y)
        problems = []
        if self.x.shape[0] != N or self.x.ndim != 2:
            problems.append(f"x must have shape (N, p); got {self.x.shape}")
        if len(self.subject_index) != N or len(self.occasion) != N:
            problems.append("subject_index/occasion length differs from theta_y")
        if len(self.theta_x) != n or self.v.shape[0] != n or self.v.ndim != 2:
            problems.append("subject-level arrays disagree with number of subjects")
        if self.theta_v is not None and len(self.theta_v) != n:
            problems.append("theta_v length differs from number of subjects")
        if N and (self.subject_index.min() < 0 or self.subject_index.max() >= n):
            problems.append("subject_index out of range")
        if problems:
            raise ValidationError(problems)
        if not self.x_names:
            object.__setattr__(self, "x_names", tuple(f"x{k + 1}" for k in range(self.p)))
        if not self.v_names:
            object.__setattr__(self, "v_names", tuple(f"v{k + 1}" for k in range(self.q)))

    @property
    def n(self) -> int:
        return len(self.subject_ids)

    @property
    def n_obs(self) -> int:
        return len(self.theta_y)

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.v.shape[1]

    @property
    def has_theta_v(self) -> bool:
        return self.theta_v is not None

    @property
    def m(self) -> np.ndarray:
        return np.bincount(self.subject_index, minlength=self.n)

    @property
    def zero_y(self) -> np.ndarray:
        return self.theta_y == 0.0

    @property
    def zero_x(self) -> np.ndarray:
        return self.theta_x == 0.0

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.subject_index, self.occasion, self.theta_y, self.x,
                    self.theta_x, self.v):
            h.update(np.ascontiguousarray(arr).tobytes())
        if self.theta_v is not None:
            h.update(np.ascontiguousarray(self.theta_v).tobytes())
        h.update("|".join(map(str, self.subject_ids)).encode())
        return h.hexdigest()

    @classmethod
    def from_subjects(cls, subjects: Sequence[SubjectRecord], x_names=(), v_names=()):
        problems = []
        if not subjects:
            raise ValidationError(["dataset has no subjects"])
        p = len(subjects[0].occasions[0][1]) if subjects[0].occasions else 0
        q = len(subjects[0].v)
        with_v = subjects[0].theta_v is not None
        rows = []
        for i, s in enumerate(subjects):
            if len(s.occasions) < 1:
                problems.append(f"subject {s.subject_id}: no occasions")
            if len(s.v) != q:
                problems.append(f"subject {s.subject_id}: v has length {len(s.v)}, expected {q}")
            if (s.theta_v is not None) != with_v:
                problems.append(f"subject {s.subject_id}: theta_v presence differs")
            for j, (ty, xv) in enumerate(s.occasions):
                if len(xv) != p:
                    problems.append(
                        f"subject {s.subject_id} occasion {j + 1}: x has length {len(xv)}, expected {p}")
                rows.append((i, j + 1, ty, xv))
        if problems:
            raise ValidationError(problems)
        return cls(
            subject_ids=np.array([str(s.subject_id) for s in subjects]),
            subject_index=np.array([r[0] for r in rows], dtype=np.int64),
            occasion=np.array([r[1] for r in rows], dtype=np.int64),
            theta_y=np.array([r[2] for r in rows], dtype=float),
            x=np.array([list(r[3]) for r in rows], dtype=float).reshape(len(rows), p),
            theta_x=np.array([s.theta_x for s in subjects], dtype=float),
            v=np.array([list(s.v) for s in subjects], dtype=float).reshape(len(subjects), q),
            theta_v=np.array([s.theta_v for s in subjects], dtype=float) if with_v else None,
            x_names=tuple(x_names), v_names=tuple(v_names),
        )

    def subjects(self) -> list[SubjectRecord]:
        out = []
        for i, sid in enumerate(self.subject_ids):
            rows = np.flatnonzero(self.subject_index == i)
            out.append(SubjectRecord(
                subject_id=str(sid),
                occasions=[(float(self.theta_y[r]), tuple(self.x[r])) for r in rows],
                theta_x=float(self.theta_x[i]),
                v=tuple(self.v[i]),
                theta_v=None if self.theta_v is None else float(self.theta_v[i]),
            ))
        return out

    def with_responses(self, theta_y=None, theta_x=None) -> "Dataset":
        return replace(self,
                       theta_y=self.theta_y if theta_y is None else np.asarray(theta_y, float),
                       theta_x=self.theta_x if theta_x is None else np.asarray(theta_x, float))


@dataclass(frozen=True)
class CensoringSpec:
    arc_y: ArcInterval
    arc_x: ArcInterval

    def __post_init__(self):
        for name, arc in (("arc_y", self.arc_y), ("arc_x", self.arc_x)):
            if not arc.delta1 < 0 < arc.delta2:
                raise DomainError(f"{name} must contain 0 in its interior")

    @classmethod
    def symmetric(cls, delta_y: float, delta_x: float | None = None) -> "CensoringSpec":
        delta_x = delta_y if delta_x is None else delta_x
        return cls(ArcInterval.symmetric(delta_y), ArcInterval.symmetric(delta_x))


def _spd(m, name):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.allclose(m, m.T):
        raise DomainError(f"{name} must be a symmetric square matrix")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"{name} is not positive definite") from exc
    return m


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Conjugate prior hyperparameters.

    ``mu_beta*``/``cov_beta*`` have the Stage-I design length and
    ``mu_alpha*``/``cov_alpha*`` the Stage-II design length.  Setting
    ``c_y = 0`` (or ``c_x = 0``) turns the Beta prior into a point mass at
    eta = 0, which switches random zeros off for that stage.
    """

    mu_beta1: np.ndarray
    mu_beta2: np.ndarray
    cov_beta1: np.ndarray
    cov_beta2: np.ndarray
    mu_alpha1: np.ndarray
    mu_alpha2: np.ndarray
    cov_alpha1: np.ndarray
    cov_alpha2: np.ndarray
    lambda0: float = 1.0
    nu0: float = 1.0
    kappa0: float = 0.01
    c_y: float = 1.0
    d_y: float = 1.0
    c_x: float = 1.0
    d_x: float = 1.0

    def __post_init__(self):
        for name in ("cov_beta1", "cov_beta2", "cov_alpha1", "cov_alpha2"):
            object.__setattr__(self, name, _spd(getattr(self, name), name))
        for name in ("mu_beta1", "mu_beta2", "mu_alpha1", "mu_alpha2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.mu_beta1.shape[0] != self.cov_beta1.shape[0] or \
                self.mu_alpha1.shape[0] != self.cov_alpha1.shape[0]:
            raise DomainError("prior mean/covariance dimensions disagree")
        for name in ("lambda0", "nu0", "kappa0", "d_y", "d_x"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        for name in ("c_y", "c_x"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be nonnegative")

    @property
    def dim_beta(self) -> int:
        return self.mu_beta1.shape[0]

    @property
    def dim_alpha(self) -> int:
        return self.mu_alpha1.shape[0]

    @classmethod
    def vague(cls, dim_beta: int, dim_alpha: int, scale: float = 100.0,
              lambda0: float = 1.0, nu0: float = 1.0, kappa0: float = 0.01, **kw):
        zb, za = np.zeros(dim_beta), np.zeros(dim_alpha)
        return cls(zb, zb, scale * np.eye(dim_beta), scale * np.eye(dim_beta),
                   za, za, scale * np.eye(dim_alpha), scale * np.eye(dim_alpha),
                   lambda0=lambda0, nu0=nu0, kappa0=kappa0, **kw)

    @classmethod
    def choice1(cls, dim_beta: int, dim_alpha: int, **kw) -> "PriorSpec":
        return cls.vague(dim_beta, dim_alpha, 100.0, 1.0, 1.0, 0.01, **kw)

    @classmethod
    def choice2(cls, dim_beta: int, dim_alpha: int, **kw) -> "PriorSpec":
        return cls.vague(dim_beta, dim_alpha, 1000.0, 1.0, 0.01, 0.01, **kw)

    @classmethod
    def for_dataset(cls, d: "Dataset", choice: str = "choice1", **kw) -> "PriorSpec":
        dims = (d.p + 3, d.q + (3 if d.has_theta_v else 1))
        return {"choice1": cls.choice1, "choice2": cls.choice2}[choice.lower()](*dims, **kw)


@dataclass(frozen=True)
class ModelVariant:
    """Which zero mechanisms the fitted model accounts for."""

    zero_inflated_response: bool = True
    zero_inflated_covariate: bool = True
    random_zeros: bool = False

    @classmethod
    def model1(cls, random_zeros: bool = False) -> "ModelVariant":
        return cls(True, True, random_zeros)

    @classmethod
    def model2(cls) -> "ModelVariant":
        return cls(False, False, False)

    @classmethod
    def model3(cls) -> "ModelVariant":
        return cls(True, False, False)

    @classmethod
    def from_name(cls, name: str, random_zeros: bool = False) -> "ModelVariant":
        key = name.lower().replace("-", "").replace("_", "")
        table = {"model1": cls.model1(random_zeros), "modeli": cls.model1(random_zeros),
                 "model2": cls.model2(), "modelii": cls.model2(),
                 "model3": cls.model3(), "modeliii": cls.model3()}
        if key not in table:
            raise ValueError(f"unknown model variant {name!r}")
        variant = table[key]
        if random_zeros and not variant.random_zeros:
            raise ValueError("random zeros need zero inflation in both stages (model1)")
        return variant

    @property
    def name(self) -> str:
        flags = (self.zero_inflated_response, self.zero_inflated_covariate)
        base = {(True, True): "model1", (False, False): "model2",
                (True, False): "model3"}.get(flags, "custom")
        return base + ("+random_zeros" if self.random_zeros else "")

    def __post_init__(self):
        if self.random_zeros and not (self.zero_inflated_response and self.zero_inflated_covariate):
            raise ValueError("random zeros need zero inflation in both stages")


def reconstruct_sigma_b(s1: float, tau: float) -> Cov2:
    """Random-effect covariance with unit determinant from ``(s1, tau)``."""
    if not tau > 0:
        raise DomainError("tau must be positive")
    sigma1_sq = tau
    sigma2_sq = 1.0 / tau + s1 * s1 * tau
    rho = s1 * math.sqrt(tau) / math.sqrt(sigma2_sq)
    return Cov2(sigma1_sq, sigma2_sq, rho)


def sigma_b_to_s1_tau(cov: Cov2) -> tuple[float, float]:
    """Inverse of :func:`reconstruct_sigma_b` via the definitional formulas."""
    s1 = cov.rho * math.sqrt(cov.s22) / math.sqrt(cov.s11)
    s2 = cov.s22 * (1.0 - cov.rho ** 2)
    return s1, 1.0 / s2


@dataclass
class ParameterState:
    beta1: np.ndarray
    beta2: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    s1: float = 0.0
    tau: float = 1.0
    eta_y: float | None = None
    eta_x: float | None = None

    @property
    def sigma_b(self) -> Cov2:
        return reconstruct_sigma_b(self.s1, self.tau)

    def copy(self) -> "ParameterState":
        return ParameterState(self.beta1.copy(), self.beta2.copy(), self.alpha1.copy(),
                              self.alpha2.copy(), self.s1, self.tau, self.eta_y, self.eta_x)


@dataclass
class LatentState:
    theta_y_star: np.ndarray
    r_y: np.ndarray
    theta_x_star: np.ndarray
    r_x: np.ndarray
    b: np.ndarray
    z_y: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    z_x: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))

    def copy(self) -> "LatentState":
        return LatentState(self.theta_y_star.copy(), self.r_y.copy(), self.theta_x_star.copy(),
                           self.r_x.copy(), self.b.copy(), self.z_y.copy(), self.z_x.copy())


def build_design_row(x, theta_x_star: float) -> np.ndarray:
    """Stage-I design row ``(1, x_1..x_p, cos theta, sin theta)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.concatenate(([1.0], x, [math.cos(theta_x_star), math.sin(theta_x_star)]))


def stage1_design(d: Dataset, theta_x_star) -> np.ndarray:
    """All Stage-I rows for the current circular-covariate latents."""
    t = np.asarray(theta_x_star, dtype=float)[d.subject_index]
    return np.column_stack([np.ones(d.n_obs), d.x, np.cos(t), np.sin(t)])


def stage2_design(d: Dataset) -> np.ndarray:
    cols = [np.ones(d.n), d.v]
    if d.theta_v is not None:
        cols += [np.cos(d.theta_v), np.sin(d.theta_v)]
    return np.column_stack(cols)


@dataclass
class ValidationReport:
    n_subjects: int
    n_observations: int
    zero_prop_y: float
    zero_prop_x: float
    issues: list[str]

    @property
    def ok(self) -> bool:
        return not self.issues

    def as_dict(self) -> dict:
        return {"n_subjects": self.n_subjects, "n_observations": self.n_observations,
                "zero_prop_y": self.zero_prop_y, "zero_prop_x": self.zero_prop_x,
                "issues": list(self.issues)}


def _angle_problems(values, label, ids):
    bad = ~np.isfinite(values) | (values <= -math.pi) | (values > math.pi)
    return [f"{label} of {ids[k]} is {values[k]!r}, outside (-pi, pi]" for k in np.flatnonzero(bad)]


def validate_dataset(d: Dataset, spec: CensoringSpec) -> ValidationReport:
    """Check a dataset against the censoring contract.

    Structural problems raise :class:`ValidationError`; nonzero angles inside
    a censoring arc are reported as issues.
    """
    row_ids = [f"subject {d.subject_ids[i]} occasion {o}"
               for i, o in zip(d.subject_index, d.occasion)]
    subj_ids = [f"subject {s}" for s in d.subject_ids]
    problems = _angle_problems(d.theta_y, "theta_y", row_ids)
    problems += _angle_problems(d.theta_x, "theta_x", subj_ids)
    if d.theta_v is not None:
        problems += _angle_problems(d.theta_v, "theta_v", subj_ids)
    if not np.all(np.isfinite(d.x)):
        problems += [f"non-finite x at {row_ids[k]}"
                     for k in np.flatnonzero(~np.isfinite(d.x).all(axis=1))]
    if not np.all(np.isfinite(d.v)):
        problems += [f"non-finite v at {subj_ids[k]}"
                     for k in np.flatnonzero(~np.isfinite(d.v).all(axis=1))]
    if d.n == 0:
        problems.append("dataset has no subjects")
    empty = np.flatnonzero(d.m == 0)
    problems += [f"{subj_ids[k]} has no occasions" for k in empty]
    if problems:
        raise ValidationError(problems)

    issues = []
    inside_y = (d.theta_y != 0) & spec.arc_y.contains(d.theta_y)
    issues += [f"theta_y={d.theta_y[k]:.6g} at {row_ids[k]} lies inside the censoring arc"
               for k in np.flatnonzero(inside_y)]
    inside_x = (d.theta_x != 0) & spec.arc_x.contains(d.theta_x)
    issues += [f"theta_x={d.theta_x[k]:.6g} at {subj_ids[k]} lies inside the censoring arc"
               for k in np.flatnonzero(inside_x)]
    return ValidationReport(
        n_subjects=d.n, n_observations=d.n_obs,
        zero_prop_y=float(np.mean(d.zero_y)) if d.n_obs else 0.0,
        zero_prop_x=float(np.mean(d.zero_x)) if d.n else 0.0,
        issues=issues,
    )
