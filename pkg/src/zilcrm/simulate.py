"""Synthetic data generation and replication studies."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .circular_core import ArcInterval, Cov2
from .gibbs import ChainConfig, FitError, PosteriorSamples, run_chain
from .model import CensoringSpec, Dataset, ModelVariant, PriorSpec
from .samplers import RngStream, as_generator

__all__ = [
    "PriorChoice",
    "ScenarioSpec",
    "ReplicateResult",
    "ReplicationReport",
    "PRESETS",
    "preset",
    "generate_dataset",
    "fit_censoring",
    "truth_vector",
    "run_replicate",
    "run_replication_study",
    "compare_models",
    "timing_table",
]

# arcs narrower than this are treated as "no censoring" at generation time
_MIN_FIT_DELTA = 1e-9


class PriorChoice(str, enum.Enum):
    CHOICE_I = "choice1"
    CHOICE_II = "choice2"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ScenarioSpec:
    """Generating parameters plus the fit that a replication study runs.

    ``sigma1_sq`` defaults to ``1 / (sigma2_sq (1 - rho^2))``.
    """

    name: str
    beta1: tuple[float, ...]
    beta2: tuple[float, ...]
    alpha1: tuple[float, ...]
    alpha2: tuple[float, ...]
    rho: float
    sigma2_sq: float
    sigma1_sq: float | None = None
    n: int = 100
    m: int = 3
    delta_y: float = 0.035
    delta_x: float = 0.035
    eta_y: float = 0.0
    eta_x: float = 0.0
    x_mean: float = 0.0
    x_sd: float = 1.0
    v_mean: float = 2.0
    v_sd: float = 1.0
    theta_v_mean: tuple[float, float] | None = None
    replications: int = 50
    variant: str = "model1"
    random_zeros: bool = False
    prior: PriorChoice = PriorChoice.CHOICE_I
    prior_scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "prior", PriorChoice(self.prior))
        for k in ("beta1", "beta2", "alpha1", "alpha2"):
            object.__setattr__(self, k, tuple(float(v) for v in getattr(self, k)))
        if self.theta_v_mean is not None:
            object.__setattr__(self, "theta_v_mean", tuple(self.theta_v_mean))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        for k in ("eta_y", "eta_x"):
            if not 0.0 <= getattr(self, k) < 1.0:
                raise ValueError(f"{k} must lie in [0, 1)")
        if len(self.beta1) != len(self.beta2) or len(self.beta1) < 3:
            raise ValueError("beta1/beta2 need equal length >= 3")
        if len(self.alpha1) != len(self.alpha2):
            raise ValueError("alpha1/alpha2 need equal length")
        if not -1.0 < self.rho < 1.0 or self.sigma2_sq <= 0:
            raise ValueError("need |rho| < 1 and sigma2_sq > 0")
        if not (0 <= self.delta_y < math.pi and 0 <= self.delta_x < math.pi):
            raise ValueError("censoring half-widths must lie in [0, pi)")
        ModelVariant.from_name(self.variant, self.random_zeros)

    @property
    def p(self) -> int:
        return len(self.beta1) - 3

    @property
    def q(self) -> int:
        return len(self.alpha1) - (3 if self.theta_v_mean is not None else 1)

    @property
    def sigma_b(self) -> Cov2:
        s11 = self.sigma1_sq if self.sigma1_sq is not None else \
            1.0 / (self.sigma2_sq * (1.0 - self.rho ** 2))
        return Cov2(s11, self.sigma2_sq, self.rho)

    @property
    def fit_variant(self) -> ModelVariant:
        return ModelVariant.from_name(self.variant, self.random_zeros)

    def priors(self) -> PriorSpec:
        dims = (self.p + 3, len(self.alpha1))
        if self.prior is PriorChoice.CHOICE_II:
            return PriorSpec.choice2(*dims)
        if self.prior is PriorChoice.CUSTOM and self.prior_scale is not None:
            return PriorSpec.vague(*dims, scale=self.prior_scale)
        return PriorSpec.choice1(*dims)

    def with_(self, **kw) -> "ScenarioSpec":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["prior"] = self.prior.value
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        base = d.pop("preset", None)
        if base is not None:
            return preset(base, **d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown scenario fields {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


_T12_ALPHA = dict(alpha1=(-8.4, 10.5))
PRESETS: dict[str, ScenarioSpec] = {
    "table1": ScenarioSpec("table1", (8.3, 4.6, 6.5, -5.1), (-1.3, 0.8, 2.1, 2.4),
                           (-6.4, 4.5), (1.8, -0.8), rho=0.5, sigma2_sq=2.0),
    "table2": ScenarioSpec("table2", (13.5, -8.6, 9.2, -8.1), (-1.3, 0.5, 1.2, 2.4),
                           (-8.4, 10.5), (1.8, -0.8), rho=0.9, sigma2_sq=1.0),
    "table3": ScenarioSpec("table3", (10.2, -5.6, 2.5, 2.1), (-1.3, 0.8, 2.6, 2.4),
                           (-8.4, 10.5), (1.8, 1.5), rho=0.0, sigma2_sq=8.0),
    "table4": ScenarioSpec("table4", (10.2, -5.6, 2.5, 2.1), (5.2, 3.8, 2.6, 2.4),
                           (-8.4, 10.5), (1.5, -1.2), rho=0.0, sigma2_sq=5.0),
    "table5": ScenarioSpec("table5", (5.3, 4.6, 2.5, 2.1), (2.5, 0.8, 2.6, 2.4),
                           (-5.4, 3.5), (1.8, 1.5), rho=0.8, sigma2_sq=1.0),
    "table6": ScenarioSpec("table6", (8.8, 5.2, 1.5, 1.2), (-1.6, 0.8, 1.2, 1.8),
                           (3.4, 4.5), (-1.2, 1.3), rho=0.8, sigma2_sq=5.0,
                           n=200, delta_y=0.14, delta_x=0.14, replications=30),
    "table7": ScenarioSpec("table7", (8.3, 5.2, 1.5, 1.2), (-1.3, 0.8, 2.1, 2.4),
                           (3.4, 4.5), (-1.2, 1.3), rho=0.25, sigma2_sq=1.0,
                           n=200, delta_y=0.14, delta_x=0.14, eta_y=0.05, eta_x=0.05,
                           replications=30),
    "table8": ScenarioSpec("table8", (8.3, 5.2, 1.5, 1.2), (-1.3, 0.8, 2.1, 2.4),
                           (3.4, 4.5), (-1.2, 1.3), rho=0.25, sigma2_sq=1.0,
                           n=200, delta_y=0.14, delta_x=0.14, eta_y=0.075, eta_x=0.075,
                           replications=30),
}


def preset(name: str, **overrides) -> ScenarioSpec:
    try:
        base = PRESETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides) if overrides else base


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def _censor(theta, delta):
    if delta <= 0:
        return theta.copy()
    out = theta.copy()
    out[(theta > -delta) & (theta < delta)] = 0.0
    return out


def generate_dataset(rng, spec: ScenarioSpec, return_latent: bool = False):
    """Simulate one dataset from the two-stage model.

    Stage II is generated first because its latent angle enters the Stage-I
    design.  Random-zero contamination is applied after censoring.
    """
    rng = as_generator(rng)
    n, m, p, q = spec.n, spec.m, spec.p, spec.q
    v = spec.v_mean + spec.v_sd * rng.standard_normal((n, q))
    theta_v = None
    cols = [np.ones(n), v]
    if spec.theta_v_mean is not None:
        g = rng.standard_normal((n, 2)) + np.asarray(spec.theta_v_mean)
        theta_v = np.arctan2(g[:, 1], g[:, 0])
        cols += [np.cos(theta_v), np.sin(theta_v)]
    V = np.column_stack(cols)
    xs = rng.standard_normal((n, 2)) + np.column_stack([V @ spec.alpha1, V @ spec.alpha2])
    theta_x_star = np.arctan2(xs[:, 1], xs[:, 0])
    theta_x = _censor(theta_x_star, spec.delta_x)

    sub = np.repeat(np.arange(n), m)
    x = spec.x_mean + spec.x_sd * rng.standard_normal((n * m, p))
    chol = np.linalg.cholesky(spec.sigma_b.matrix)
    b = rng.standard_normal((n, 2)) @ chol.T
    t = theta_x_star[sub]
    X = np.column_stack([np.ones(n * m), x, np.cos(t), np.sin(t)])
    ys = rng.standard_normal((n * m, 2)) + np.column_stack(
        [X @ spec.beta1, X @ spec.beta2]) + b[sub]
    theta_y_star = np.arctan2(ys[:, 1], ys[:, 0])
    theta_y = _censor(theta_y_star, spec.delta_y)

    # contamination draws are always consumed so streams stay aligned across eta
    uy = rng.random(n * m)
    ux = rng.random(n)
    theta_y[uy < spec.eta_y] = 0.0
    theta_x[ux < spec.eta_x] = 0.0

    d = Dataset(
        subject_ids=np.array([f"s{i + 1:04d}" for i in range(n)]),
        subject_index=sub, occasion=np.tile(np.arange(1, m + 1), n),
        theta_y=theta_y, x=x, theta_x=theta_x, v=v, theta_v=theta_v,
    )
    if return_latent:
        return d, {"theta_y_star": theta_y_star, "theta_x_star": theta_x_star, "b": b}
    return d


def fit_censoring(spec: ScenarioSpec) -> CensoringSpec:
    return CensoringSpec(ArcInterval.symmetric(max(spec.delta_y, _MIN_FIT_DELTA)),
                         ArcInterval.symmetric(max(spec.delta_x, _MIN_FIT_DELTA)))


def truth_vector(spec: ScenarioSpec, variant: ModelVariant | None = None) -> dict[str, float]:
    """True values keyed by posterior column name (reported coordinates only)."""
    variant = variant or spec.fit_variant
    s1 = ["0"] + [str(k + 1) for k in range(spec.p)] + ["C", "S"]
    s2 = ["0"] + [str(k + 1) for k in range(spec.q)] + (["C", "S"] if spec.theta_v_mean else [])
    out = {}
    for pre, vals, suf in (("beta1", spec.beta1, s1), ("beta2", spec.beta2, s1),
                           ("alpha1", spec.alpha1, s2), ("alpha2", spec.alpha2, s2)):
        out.update({f"{pre}_{s}": float(v) for s, v in zip(suf, vals)})
    out["rho"] = spec.rho
    out["sigma2_sq"] = spec.sigma2_sq
    if variant.random_zeros:
        out["eta_y"] = spec.eta_y
        out["eta_x"] = spec.eta_x
    return out


# ---------------------------------------------------------------------------
# replication
# ---------------------------------------------------------------------------

@dataclass
class ReplicateResult:
    index: int
    ok: bool
    means: dict[str, float] = field(default_factory=dict)
    lower: dict[str, float] = field(default_factory=dict)
    upper: dict[str, float] = field(default_factory=dict)
    zero_prop_y: float = float("nan")
    zero_prop_x: float = float("nan")
    seconds: float = float("nan")
    error: str = ""


def _chain_seed(master: int, index: int) -> int:
    return int(RngStream(master, 2 * index + 1).generator().integers(0, 2 ** 63))


def replicate_dataset(spec: ScenarioSpec, master_seed: int, index: int) -> Dataset:
    return generate_dataset(RngStream(master_seed, 2 * index), spec)


def run_replicate(spec: ScenarioSpec, cfg: ChainConfig, index: int,
                  variant: ModelVariant | None = None) -> ReplicateResult:
    """Fresh dataset and fresh chain for replicate ``index``."""
    variant = variant or spec.fit_variant
    d = replicate_dataset(spec, cfg.seed, index)
    zy, zx = float(np.mean(d.zero_y)), float(np.mean(d.zero_x))
    chain_cfg = replace(cfg, seed=_chain_seed(cfg.seed, index))
    t0 = time.perf_counter()
    try:
        post = run_chain(d, fit_censoring(spec), variant, spec.priors(), chain_cfg)
    except (FitError, ValueError, ArithmeticError) as exc:
        return ReplicateResult(index, False, zero_prop_y=zy, zero_prop_x=zx, error=str(exc))
    secs = time.perf_counter() - t0
    return _summarise(index, post, zy, zx, secs)


def _summarise(index: int, post: PosteriorSamples, zy: float, zx: float, secs: float):
    lo, hi = np.quantile(post.draws, [0.025, 0.975], axis=0)
    mean = post.draws.mean(axis=0)
    names = post.names
    return ReplicateResult(index, True, dict(zip(names, mean.tolist())),
                           dict(zip(names, lo.tolist())), dict(zip(names, hi.tolist())),
                           zy, zx, secs)


def _run_star(args):
    return run_replicate(*args)


def _map_replicates(tasks, jobs: int):
    if jobs <= 1:
        return [_run_star(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_star, tasks))


@dataclass
class ReplicationReport:
    scenario: str
    variant: str
    rows: list[dict]
    n_replicates: int
    n_failed: int
    zero_prop_y: float
    zero_prop_x: float
    seconds_per_fit: float
    failures: list[str] = field(default_factory=list)

    def row(self, name: str) -> dict:
        for r in self.rows:
            if r["name"] == name:
                return r
        raise KeyError(name)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "truth", "mean", "se", "rb", "rb_is_bias", "cp"])
        for r in self.rows:
            w.writerow([r["name"], repr(r["truth"]), repr(r["mean"]), repr(r["se"]),
                        repr(r["rb"]), int(r["rb_is_bias"]), repr(r["cp"])])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def render(self) -> str:
        head = (f"{self.scenario} / {self.variant}: {self.n_replicates - self.n_failed} of "
                f"{self.n_replicates} replicates, zeros y={100 * self.zero_prop_y:.1f}% "
                f"x={100 * self.zero_prop_x:.1f}%")
        lines = [head, f"{'Parameters':<22}{'Mean':>9}{'SE':>9}{'RB':>9}{'CP':>7}"]
        for r in self.rows:
            label = f"{r['name']} = {r['truth']:g}"
            rb = f"{r['rb']:.3f}" + ("*" if r["rb_is_bias"] else "")
            lines.append(f"{label:<22}{r['mean']:>9.3f}{r['se']:>9.3f}{rb:>9}{r['cp']:>7.2f}")
        if any(r["rb_is_bias"] for r in self.rows):
            lines.append("* bias in place of RB (truth is zero)")
        return "\n".join(lines)

    def as_dict(self, timing: bool = False) -> dict:
        """Plain-data view; timing is excluded unless asked for (it varies run to run)."""
        out = asdict(self)
        if not timing:
            out.pop("seconds_per_fit")
        return out


def aggregate(spec: ScenarioSpec, results: list[ReplicateResult],
              variant: ModelVariant) -> ReplicationReport:
    truth = truth_vector(spec, variant)
    good = [r for r in results if r.ok]
    rows = []
    for name, t in truth.items():
        means = np.array([r.means[name] for r in good])
        cover = np.array([r.lower[name] <= t <= r.upper[name] for r in good])
        mean = float(means.mean()) if good else float("nan")
        se = float(means.std(ddof=1)) if len(good) > 1 else float("nan")
        is_bias = t == 0.0
        rb = mean - t if is_bias else (mean - t) / t
        rows.append({"name": name, "truth": t, "mean": mean, "se": se, "rb": float(rb),
                     "rb_is_bias": is_bias, "cp": float(cover.mean()) if good else float("nan")})
    return ReplicationReport(
        scenario=spec.name, variant=variant.name, rows=rows, n_replicates=len(results),
        n_failed=len(results) - len(good),
        zero_prop_y=float(np.mean([r.zero_prop_y for r in results])),
        zero_prop_x=float(np.mean([r.zero_prop_x for r in results])),
        seconds_per_fit=float(np.mean([r.seconds for r in good])) if good else float("nan"),
        failures=[f"replicate {r.index}: {r.error}" for r in results if not r.ok],
    )


def run_replication_study(spec: ScenarioSpec, cfg: ChainConfig, jobs: int = 1,
                          variant: ModelVariant | None = None) -> ReplicationReport:
    """Mean/SE/RB/CP over ``spec.replications`` independent replicates."""
    variant = variant or spec.fit_variant
    tasks = [(spec, cfg, i, variant) for i in range(spec.replications)]
    return aggregate(spec, _map_replicates(tasks, jobs), variant)


def compare_models(spec: ScenarioSpec, cfg: ChainConfig, jobs: int = 1,
                   variants: tuple[str, ...] = ("model1", "model2", "model3")
                   ) -> dict[str, ReplicationReport]:
    """Fit several variants to identical replicate datasets and chain seeds."""
    return {name: run_replication_study(spec, cfg, jobs, ModelVariant.from_name(name))
            for name in variants}


def timing_table(reports: dict[str, ReplicationReport], label: str = "") -> str:
    """CSV with mean minutes per fit, one column per model."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(reports)
    w.writerow(["scenario"] + names)
    w.writerow([label or next(iter(reports.values())).scenario]
               + [f"{reports[k].seconds_per_fit / 60.0:.3f}" for k in names])
    return buf.getvalue()
