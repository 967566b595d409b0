"""Command-line interface.

Exit status: 0 success, 1 invalid input, 2 sampler failure, 3 file errors.
Every successful command writes ``manifest.json`` into its output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .circular_core import ArcInterval, DomainError
from .diagnostics import (
    PredictiveSpec,
    curves_to_csv,
    diagnostics_summary,
    donut_points,
    donut_to_csv,
    fitted_directions,
    improvement,
    posterior_predictive_density,
    predictive_mean_direction,
    write_json,
)
from .fixture import astigmatism_fixture
from .gibbs import ChainConfig, FitError, PosteriorSamples, run_chain
from .io import read_dataset, write_dataset
from .model import CensoringSpec, ModelVariant, PriorSpec, ValidationError, validate_dataset
from .simulate import (
    ScenarioSpec,
    compare_models,
    generate_dataset,
    preset,
    run_replication_study,
    timing_table,
    truth_vector,
)
from .samplers import RngStream

CONFIG_SCHEMA_VERSION = 1
EXIT_OK, EXIT_VALIDATION, EXIT_FIT, EXIT_IO = 0, 1, 2, 3

PRIOR_PRESETS = {"choice1": PriorSpec.choice1, "choice2": PriorSpec.choice2}


class UsageError(ValueError):
    pass


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(out: Path, command: str, config: dict, dataset_hash: str | None,
                   seed: int | None, started: float, outputs: list[Path]) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": _sha(_canonical(config)),
        "dataset_sha256": dataset_hash,
        "seed": seed,
        "tool_version": __version__,
        "wall_clock_seconds": round(time.perf_counter() - started, 3),
        "outputs": sorted(str(p.name) for p in outputs),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def load_scenario(arg: str, **overrides) -> ScenarioSpec:
    """Preset name or path to a scenario JSON file."""
    path = Path(arg)
    if path.suffix.lower() == ".json" or path.exists():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError([f"{path}: line {exc.lineno}: {exc.msg}"]) from None
        try:
            spec = ScenarioSpec.from_dict(data)
        except (TypeError, ValueError) as exc:
            raise ValidationError([f"{path}: {exc}"]) from None
    else:
        spec = preset(arg)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(spec, **overrides) if overrides else spec


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError([f"{p}: line {exc.lineno}: {exc.msg}"]) from None
    version = cfg.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ValidationError([f"{p}: unsupported schema_version {version}"])
    unknown = set(cfg) - {"schema_version", "chain", "prior", "censoring", "variant",
                          "random_zeros", "predict"}
    if unknown:
        raise ValidationError([f"{p}: unknown keys {sorted(unknown)}"])
    return cfg


def build_prior(spec, dim_beta: int, dim_alpha: int) -> PriorSpec:
    if spec is None:
        return PriorSpec.choice1(dim_beta, dim_alpha)
    if isinstance(spec, str):
        spec = {"name": spec}
    spec = dict(spec)
    name = spec.pop("name", "custom")
    if name in PRIOR_PRESETS:
        return PRIOR_PRESETS[name](dim_beta, dim_alpha, **spec)
    arrays = {k: np.asarray(v, dtype=float) for k, v in spec.items() if k.startswith(("mu_", "cov_"))}
    scalars = {k: float(v) for k, v in spec.items() if not k.startswith(("mu_", "cov_"))}
    return PriorSpec(**arrays, **scalars)


def build_censoring(cfg: dict, args) -> CensoringSpec:
    c = dict(cfg.get("censoring", {}))
    dy = args.delta_y if getattr(args, "delta_y", None) is not None else c.get("delta_y", 0.035)
    dx = args.delta_x if getattr(args, "delta_x", None) is not None else c.get("delta_x", dy)
    if "arc_y" in c and getattr(args, "delta_y", None) is None:
        arc_y = ArcInterval(*c["arc_y"])
    else:
        arc_y = ArcInterval.symmetric(dy)
    if "arc_x" in c and getattr(args, "delta_x", None) is None:
        arc_x = ArcInterval(*c["arc_x"])
    else:
        arc_x = ArcInterval.symmetric(dx)
    return CensoringSpec(arc_y, arc_x)


def build_chain(cfg: dict, args, base: ChainConfig) -> ChainConfig:
    chain = {**base.as_dict(), **cfg.get("chain", {})}
    for key in ("iterations", "burn_in", "thin", "seed", "tpn_mode", "radius_mode", "tau_mode"):
        val = getattr(args, key, None)
        if val is not None:
            chain[key] = val
    if getattr(args, "full_conditional_x", False):
        chain["full_conditional_x"] = True
    return ChainConfig.from_dict(chain)


def _add_chain_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("chain")
    g.add_argument("--iterations", type=int)
    g.add_argument("--burn-in", dest="burn_in", type=int)
    g.add_argument("--thin", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--tpn-mode", choices=["exact_rejection", "paper_composite"])
    g.add_argument("--radius-mode", choices=["slice", "exact"])
    g.add_argument("--tau-mode", choices=["paper", "exact"])
    g.add_argument("--full-conditional-x", action="store_true",
                   help="Metropolis correction of covariate latent angles")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    started = time.perf_counter()
    spec = load_scenario(args.scenario, n=args.n)
    seed = 0 if args.seed is None else args.seed
    out = _outdir(args.out)
    d = generate_dataset(RngStream(seed, 2 * args.replicate), spec)
    data_path = write_dataset(d, out / "dataset.csv")
    truth_path = out / "truth.json"
    truth_path.write_text(json.dumps({"scenario": spec.as_dict(), "truth": truth_vector(spec),
                                      "seed": seed, "replicate": args.replicate},
                                     indent=2, sort_keys=True))
    write_manifest(out, "simulate", {"scenario": spec.as_dict(), "replicate": args.replicate},
                   d.fingerprint(), seed, started, [data_path, truth_path])
    print(f"wrote {data_path} ({d.n} subjects, {100 * d.zero_y.mean():.1f}% response zeros, "
          f"{100 * d.zero_x.mean():.1f}% covariate zeros)")
    return EXIT_OK


def _read(args):
    return read_dataset(args.dataset, degrees=args.degrees, axis_times_4=args.axis_times_4)


def cmd_validate(args) -> int:
    d = _read(args)
    report = validate_dataset(d, build_censoring({}, args))
    print(json.dumps(report.as_dict(), indent=2))
    if args.out:
        out = _outdir(args.out)
        rp = out / "validation.json"
        rp.write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True))
        write_manifest(out, "validate", {}, d.fingerprint(), None, time.perf_counter(), [rp])
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _profiles(obj) -> list[PredictiveSpec]:
    """Predictive profiles from JSON: a list, or one entry with several initial angles."""
    entries = obj.get("profiles", [obj]) if isinstance(obj, dict) else obj
    out = []
    for e in entries:
        x = tuple(float(v) for v in e["x"])
        if "initial_deg" in e:
            angles = e["initial_deg"] if isinstance(e["initial_deg"], list) else [e["initial_deg"]]
            for a in angles:
                t = math.remainder(math.radians(float(a)), 2 * math.pi)
                label = f"{e.get('label', 'profile')} initial {float(a):g}deg"
                out.append(PredictiveSpec(math.pi if t == -math.pi else t, x, label))
        else:
            angles = e["initial_theta_x"]
            angles = angles if isinstance(angles, list) else [angles]
            for a in angles:
                out.append(PredictiveSpec(float(a), x, f"{e.get('label', 'profile')} initial {a:g}rad"))
    return out


def _predict(samples: PosteriorSamples, profiles, grid_size: int, integrate_b: bool, out: Path):
    grid = -math.pi + (np.arange(grid_size) + 1) * (2 * math.pi / grid_size)
    curves, summary = {}, []
    for k, prof in enumerate(profiles):
        label = prof.label or f"profile{k + 1}"
        dens = posterior_predictive_density(samples, prof, grid, integrate_b=integrate_b)
        curves[label] = dens
        mdir, res = predictive_mean_direction(grid, dens)
        summary.append({"label": label, "initial_theta_x": prof.initial_theta_x,
                        "mean_direction": mdir, "resultant_length": res,
                        "improvement": improvement(prof.initial_theta_x, grid, dens),
                        "grid_integral": float(dens.sum() * 2 * math.pi / grid_size)})
    cpath = out / "predictive_curves.csv"
    curves_to_csv(grid, curves, cpath)
    spath = out / "predictive_summary.json"
    write_json({"integrate_b": integrate_b, "profiles": summary}, spath)
    return [cpath, spath]


def cmd_fit(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    d = _read(args)
    spec = build_censoring(cfg, args)
    report = validate_dataset(d, spec)
    if not report.ok:
        raise ValidationError(report.issues)
    variant_name = args.variant or cfg.get("variant", "model1")
    variant = ModelVariant.from_name(variant_name, args.random_zeros or cfg.get("random_zeros", False))
    dim_alpha = d.q + (3 if d.has_theta_v else 1)
    priors = build_prior(args.prior or cfg.get("prior"), d.p + 3, dim_alpha)
    chain = build_chain(cfg, args, ChainConfig())
    out = _outdir(args.out)
    samples = run_chain(d, spec, variant, priors, chain)
    post_path = out / "posterior.csv"
    sidecar = samples.to_csv(post_path)
    diag_path = out / "diagnostics.json"
    write_json(diagnostics_summary(samples), diag_path)
    pts, cw = donut_points(d.theta_y, fitted_directions(samples, d))
    donut_path = out / "donut.csv"
    donut_to_csv(pts, cw, donut_path)
    outputs = [post_path, sidecar, diag_path, donut_path]
    pred = cfg.get("predict")
    if args.predict:
        pred = json.loads(Path(args.predict).read_text())
    if pred:
        outputs += _predict(samples, _profiles(pred), args.grid, not args.b_zero, out)
    effective = {"chain": chain.as_dict(), "variant": variant.name,
                 "censoring": {"arc_y": [spec.arc_y.delta1, spec.arc_y.delta2],
                               "arc_x": [spec.arc_x.delta1, spec.arc_x.delta2]},
                 "prior": args.prior or cfg.get("prior") or "choice1",
                 "degrees": args.degrees, "axis_times_4": args.axis_times_4}
    write_manifest(out, "fit", effective, d.fingerprint(), chain.seed, started, outputs)
    print(f"wrote {len(samples)} draws to {post_path} in {samples.stats['seconds']:.1f} s")
    return EXIT_OK


def cmd_predict(args) -> int:
    started = time.perf_counter()
    samples = PosteriorSamples.from_csv(args.posterior)
    profiles = _profiles(json.loads(Path(args.spec).read_text()))
    out = _outdir(args.out)
    outputs = _predict(samples, profiles, args.grid, not args.b_zero, out)
    write_manifest(out, "predict", {"grid": args.grid, "integrate_b": not args.b_zero,
                                    "profiles": [p.label for p in profiles]},
                   samples.fingerprint, samples.config.seed, started, outputs)
    print(f"wrote {len(profiles)} predictive curves to {outputs[0]}")
    return EXIT_OK


def _study_setup(args):
    spec = load_scenario(args.scenario, n=args.n, replications=args.replications)
    if args.paper_scale:
        if args.replications is None:
            spec = replace(spec, replications=500)
        base = ChainConfig()
    else:
        base = ChainConfig.desk()
    chain = build_chain({}, args, base)
    return spec, chain


def cmd_replicate(args) -> int:
    started = time.perf_counter()
    spec, chain = _study_setup(args)
    if args.variant:
        spec = replace(spec, variant=args.variant)
    if args.random_zeros:
        spec = replace(spec, random_zeros=True)
    out = _outdir(args.out)
    report = run_replication_study(spec, chain, jobs=args.jobs)
    csv_path = out / "report.csv"
    report.to_csv(csv_path)
    txt_path = out / "report.txt"
    txt_path.write_text(report.render() + "\n")
    json_path = out / "report.json"
    write_json(report.as_dict(), json_path)
    timing = out / "timing.csv"
    timing.write_text(timing_table({report.variant: report}, spec.name))
    write_manifest(out, "replicate", {"scenario": spec.as_dict(), "chain": chain.as_dict()},
                   None, chain.seed, started, [csv_path, txt_path, json_path, timing])
    print(report.render())
    return EXIT_OK if report.n_failed < report.n_replicates else EXIT_FIT


def cmd_compare(args) -> int:
    started = time.perf_counter()
    spec, chain = _study_setup(args)
    out = _outdir(args.out)
    reports = compare_models(spec, chain, jobs=args.jobs)
    outputs = []
    for name, rep in reports.items():
        p = out / f"report_{name}.csv"
        rep.to_csv(p)
        outputs.append(p)
        t = out / f"report_{name}.txt"
        t.write_text(rep.render() + "\n")
        outputs.append(t)
    timing = out / "timing.csv"
    timing.write_text(timing_table(reports, spec.name))
    outputs.append(timing)
    write_manifest(out, "compare", {"scenario": spec.as_dict(), "chain": chain.as_dict()},
                   None, chain.seed, started, outputs)
    for rep in reports.values():
        print(rep.render(), end="\n\n")
    print(timing.read_text())
    return EXIT_OK


def cmd_fixture(args) -> int:
    started = time.perf_counter()
    out = _outdir(args.out)
    d = astigmatism_fixture()
    path = write_dataset(d, out / "astigmatism_fixture.csv")
    write_manifest(out, "fixture", {}, d.fingerprint(), None, started, [path])
    print(f"wrote {path}")
    return EXIT_OK


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zilcrm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def ingest(p):
        p.add_argument("--degrees", action="store_true", help="angles in the file are degrees")
        p.add_argument("--axis-times-4", action="store_true",
                       help="multiply axial angles by 4 modulo one turn")
        p.add_argument("--delta-y", type=float, help="response censoring half-width (radians)")
        p.add_argument("--delta-x", type=float, help="covariate censoring half-width (radians)")

    p = sub.add_parser("simulate", help="generate a dataset from a scenario")
    p.add_argument("scenario", help="preset name (table1..table8) or scenario JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--replicate", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run the Gibbs sampler on a dataset")
    p.add_argument("dataset")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=["model1", "model2", "model3"])
    p.add_argument("--random-zeros", action="store_true")
    p.add_argument("--prior", choices=sorted(PRIOR_PRESETS))
    p.add_argument("--predict", help="predictive profile JSON")
    p.add_argument("--grid", type=int, default=360)
    p.add_argument("--b-zero", action="store_true", help="predict with b = 0")
    ingest(p)
    _add_chain_flags(p)
    p.set_defaults(func=cmd_fit)

    for name, func, helptext in (("replicate", cmd_replicate, "replication study"),
                                 ("compare", cmd_compare, "Model-I/II/III comparison")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("scenario")
        p.add_argument("--out", required=True)
        p.add_argument("--n", type=int)
        p.add_argument("--replications", type=int)
        p.add_argument("--paper-scale", action="store_true",
                       help="500 replicates of 100000/40000/10 chains")
        p.add_argument("--jobs", type=int, default=1)
        if name == "replicate":
            p.add_argument("--variant", choices=["model1", "model2", "model3"])
            p.add_argument("--random-zeros", action="store_true")
        _add_chain_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("predict", help="posterior predictive densities")
    p.add_argument("posterior", help="posterior CSV written by fit")
    p.add_argument("spec", help="predictive profile JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=int, default=360)
    p.add_argument("--b-zero", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("validate", help="check a dataset file")
    p.add_argument("dataset")
    p.add_argument("--out")
    ingest(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fixture", help="write the bundled astigmatism-schema fixture")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print("validation failed:", file=sys.stderr)
        for issue in exc.issues:
            print(f"  {issue}", file=sys.stderr)
        print("fix the listed records or adjust the censoring arcs", file=sys.stderr)
        return EXIT_VALIDATION
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        print("try stronger priors or --tpn-mode exact_rejection", file=sys.stderr)
        return EXIT_FIT
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, ValueError, KeyError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
