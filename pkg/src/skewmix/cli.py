"""Command-line interface.

Subcommands: ``fit``, ``simulate``, ``impute``, ``evaluate``, ``benchmark``.
Every flag default can be overridden through an environment variable named
``SKEWMIX_<FLAG>`` (dashes become underscores), e.g. ``SKEWMIX_TOL=1e-4``.
Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io as sio
from .data import DataMatrix
from .errors import SkewmixError
from .metrics import ari, confusion_rates
from .mixture import FitConfig
from .model import FitResult, conditional_mean_matrix, fit, refreshed_posteriors
from .simulate import (
    ScenarioSpec,
    generate_part_a,
    generate_part_b,
    inject_mar,
    run_grid,
)

_ENV_PREFIX = "SKEWMIX_"


def _env(flag: str, default, cast):
    raw = os.environ.get(_ENV_PREFIX + flag.replace("-", "_").upper())
    if raw is None:
        return default
    if cast is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return cast(raw)


def _add_fit_flags(sp):
    sp.add_argument("--tol", type=float, default=_env("tol", 1e-5, float))
    sp.add_argument("--max-iter", type=int, default=_env("max-iter", 1000, int))
    sp.add_argument("--starts", type=int, default=_env("starts", 5, int))
    sp.add_argument("--seed", type=int, default=_env("seed", 0, int))
    sp.add_argument("--beta-floor", type=float, default=_env("beta-floor", 1.001, float))
    sp.add_argument("--no-skew", action="store_true", default=_env("no-skew", False, bool))
    sp.add_argument("--no-contamination", action="store_true",
                    default=_env("no-contamination", False, bool))
    sp.add_argument("--alpha-min", type=float, default=_env("alpha-min", None, float))
    sp.add_argument("--workers", type=int, default=_env("workers", 1, int))


def _config_from_args(args) -> FitConfig:
    return FitConfig(
        n_clusters=args.clusters, tol=args.tol, max_iter=args.max_iter,
        n_starts=args.starts, seed=args.seed, beta_floor=args.beta_floor,
        no_skew=args.no_skew, no_contamination=args.no_contamination,
        alpha_min=args.alpha_min, workers=args.workers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skewmix",
        description="Cluster, flag outliers and impute with contaminated "
                    "skew-normal mixtures on incomplete data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a mixture to a CSV dataset")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--clusters", type=int, required=True)
    p_fit.add_argument("--out", default=_env("out", "fit_result.json", str))
    p_fit.add_argument("--na-token", action="append", default=None,
                       help="extra token treated as missing (repeatable)")
    _add_fit_flags(p_fit)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    p_sim.add_argument("--part", required=True, choices=["A", "B"])
    p_sim.add_argument("--case", required=True)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--proximity", default=_env("proximity", "far", str),
                       choices=["close", "far"])
    p_sim.add_argument("--missing-frac", type=float,
                       default=_env("missing-frac", 0.0, float))
    p_sim.add_argument("--seed", type=int, default=_env("seed", 0, int))
    p_sim.add_argument("--out", default=_env("out", "simulated.csv", str))
    p_sim.add_argument("--truth-out", default=None,
                       help="truth sidecar path (default: <out stem>_truth.csv)")

    p_imp = sub.add_parser("impute", help="complete a CSV with a fitted model")
    p_imp.add_argument("--model", required=True)
    p_imp.add_argument("--data", required=True)
    p_imp.add_argument("--out", required=True)

    p_eval = sub.add_parser("evaluate", help="score predictions against truth")
    p_eval.add_argument("--pred", required=True,
                        help="fit-result JSON or CSV with label/outlier columns")
    p_eval.add_argument("--truth", required=True,
                        help="truth sidecar CSV with label/good_flag columns")

    p_bench = sub.add_parser("benchmark", help="run an experiment grid")
    p_bench.add_argument("--grid", required=True, help="key=value spec file")
    p_bench.add_argument("--out", required=True)
    p_bench.add_argument("--means-out", default=None,
                         help="per-cell means path (default: <out stem>_means.csv)")
    return parser


def _cmd_fit(args) -> int:
    na = list(sio.DEFAULT_NA_TOKENS) + (args.na_token or [])
    data = sio.read_csv(args.data, na_tokens=na)
    config = _config_from_args(args)
    result = fit(data, config)
    manifest = sio.RunManifest.build(
        command="fit", config={
            "clusters": config.n_clusters, "tol": config.tol,
            "max_iter": config.max_iter, "starts": config.n_starts,
            "beta_floor": config.beta_floor, "no_skew": config.no_skew,
            "no_contamination": config.no_contamination,
            "alpha_min": config.alpha_min, "workers": config.workers,
        }, seed=config.seed, input_path=args.data)
    sio.write_result(result, args.out, manifest, beta_floor=config.beta_floor)
    print(f"fit: loglik={result.loglik:.6f} aic={result.aic:.6f} "
          f"converged={result.converged} -> {args.out}")
    return 0


def _truth_path(out_path: str) -> str:
    stem, ext = os.path.splitext(out_path)
    return f"{stem}_truth{ext or '.csv'}"


def _cmd_simulate(args) -> int:
    if args.part == "A":
        data, truth = generate_part_a(args.case, args.n, args.proximity, args.seed)
    else:
        data, truth = generate_part_b(args.case, args.n, args.seed)
    mask = data.mask.copy()
    if args.missing_frac > 0:
        data, mask = inject_mar(data, args.missing_frac, args.seed + 1)
    sio.write_csv(data, args.out)
    from .simulate import GroundTruth

    truth_path = args.truth_out or _truth_path(args.out)
    sio.write_truth_csv(GroundTruth(labels=truth.labels, good_flags=truth.good_flags,
                                    mask=mask), truth_path)
    print(f"simulate: {data.n} rows x {data.p} cols -> {args.out} "
          f"(+ {truth_path})")
    return 0


def _cmd_impute(args) -> int:
    doc = sio.read_result_document(args.model)
    model = sio.model_from_document(doc)
    data = sio.read_csv(args.data)
    z, _, _ = refreshed_posteriors(model, data)
    completed = conditional_mean_matrix(model, data, z)
    out = DataMatrix(values=completed, mask=np.ones_like(data.mask),
                     column_names=data.column_names)
    sio.write_csv(out, args.out)
    print(f"impute: filled {int((~data.mask).sum())} cells -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    if args.pred.endswith(".json"):
        doc = sio.read_result_document(args.pred)
        labels_pred = np.array(doc["labels"])
        flags_pred = np.array(doc["outlier_flags"], dtype=bool)
    else:
        labels_pred, flags_pred = sio.read_flags_csv(args.pred)
    labels_true, flags_true = sio.read_flags_csv(args.truth)
    score = ari(labels_true, labels_pred)
    acc, tpr, fpr = confusion_rates(flags_pred, flags_true)
    print(f"ARI {score:.4f}")
    print(f"accuracy {acc:.4f}")
    print(f"TPR {'n/a' if tpr is None else f'{tpr:.4f}'}")
    print(f"FPR {fpr:.4f}")
    return 0


def _parse_grid_file(path) -> dict:
    spec = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SkewmixError(f"{path}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            spec[key.strip()] = value.strip()
    return spec


_GRID_CONFIGS = {
    "fmcmsn": {},
    "fmcmn": {"no_skew": True},
    "fmmsn": {"no_contamination": True},
}


def _cmd_benchmark(args) -> int:
    raw = _parse_grid_file(args.grid)
    part = raw.get("part", "A")
    spec = ScenarioSpec(
        part=part,
        case_id=raw.get("case", "d"),
        n=int(raw.get("n", "300")),
        proximity=raw.get("proximity", "far"),
        missing_fractions=tuple(float(v) for v in raw.get("fractions", "0").split(",")),
        replicates=int(raw.get("replicates", "10")),
        seed=int(raw.get("seed", "0")),
    )
    clusters = int(raw.get("clusters", "2" if part == "A" else "1"))
    base = dict(
        n_clusters=clusters,
        tol=float(raw.get("tol", "1e-5")),
        max_iter=int(raw.get("max_iter", "500")),
        n_starts=int(raw.get("starts", "3")),
        workers=int(raw.get("workers", "1")),
    )
    configs = {}
    for name in raw.get("configs", "fmcmsn,fmcmn,fmmsn").split(","):
        name = name.strip()
        if name not in _GRID_CONFIGS:
            raise SkewmixError(f"unknown fit config {name!r}")
        configs[name] = FitConfig(**base, **_GRID_CONFIGS[name])
    runs, means = run_grid(spec, configs)
    sio.write_table(runs, args.out)
    stem, ext = os.path.splitext(args.out)
    means_path = args.means_out or f"{stem}_means{ext or '.csv'}"
    sio.write_table(means, means_path)
    print(f"benchmark: {len(runs)} runs -> {args.out} (means: {means_path})")
    return 0


_HANDLERS = {
    "fit": _cmd_fit,
    "simulate": _cmd_simulate,
    "impute": _cmd_impute,
    "evaluate": _cmd_evaluate,
    "benchmark": _cmd_benchmark,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _HANDLERS[args.command](args)
    except SkewmixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
