"""Command-line interface.

Subcommands: fit, predict, bench, plan, cost {collect,train,rank},
synth, surface. Exit codes: 0 success, 1 usage or configuration error,
2 data error, 3 partial failure (some ensemble members failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, bundle as bundle_io, pipeline
from ._validation import ConfigError, DataError
from .approx import approximate, surface_grid
from .costmodel import (collect_timings, forecast_ranks, load_timings,
                        make_timing_datasets, save_timings, train_cost_model)
from .data import load_csv, synth_blob
from .detectors import ALGORITHMS, DetectorSpec
from .forest import ForestParams
from .projection import METHODS
from .scheduler import plan_bps, plan_simple

logger = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as ConfigError."""

    def error(self, message):
        raise ConfigError(message)


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON pipeline configuration file")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides the config)")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker count for parallel sections")
    parser.add_argument("--label-col", default=None,
                        help="name of the 0/1 label column in input CSVs")
    parser.add_argument("--scheduler", choices=("bps", "simple"), default=None,
                        help="scheduling policy")
    parser.add_argument("--projection", choices=METHODS, default=None,
                        help="projection variant")
    parser.add_argument("--proj-threshold", type=int, default=None,
                        help="dimension threshold below which projection "
                             "is skipped (default 20)")
    parser.add_argument("--proj-dim", type=int, default=None,
                        help="target dimension (default: half the source)")
    parser.add_argument("--approx", dest="approx", action="store_true",
                        default=None, help="enable pseudo-supervised "
                        "approximation at prediction time")
    parser.add_argument("--no-approx", dest="approx", action="store_false",
                        help="disable approximation")
    parser.add_argument("--backend", choices=("thread", "process", "serial"),
                        default=None, help="executor backend")
    parser.add_argument("--no-standardize", action="store_true",
                        help="skip feature standardization")


def _load_config(args) -> pipeline.PipelineConfig:
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"no such config file: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from None
        config = pipeline.config_from_dict(raw)
    else:
        config = pipeline.PipelineConfig(detectors=pipeline.default_detectors())

    from dataclasses import replace
    projection = config.projection
    scheduler = config.scheduler
    approximation = config.approximation
    if args.projection is not None:
        projection = replace(projection, method=args.projection)
    if getattr(args, "proj_threshold", None) is not None:
        projection = replace(projection, theta=args.proj_threshold)
    if getattr(args, "proj_dim", None) is not None:
        projection = replace(projection, k=args.proj_dim)
    if args.scheduler is not None:
        scheduler = replace(scheduler, policy=args.scheduler)
    if args.workers is not None:
        scheduler = replace(scheduler, workers=args.workers)
    if getattr(args, "backend", None) is not None:
        scheduler = replace(scheduler, backend=args.backend)
    if args.approx is not None:
        approximation = replace(approximation, enabled=args.approx)
    return replace(
        config,
        projection=projection,
        scheduler=scheduler,
        approximation=approximation,
        master_seed=config.master_seed if args.seed is None else args.seed,
        standardize=config.standardize and not args.no_standardize,
    )


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for key in header:
                value = row[key]
                if isinstance(value, float):
                    cells.append(repr(value))
                else:
                    cells.append(str(value))
            fh.write(",".join(cells) + "\n")


def cmd_fit(args) -> int:
    config = _load_config(args)
    ds = load_csv(args.train_csv, label_column=args.label_col)
    cost_model = (bundle_io.load_cost_model(args.cost_model)
                  if args.cost_model else None)
    report = pipeline.fit_ensemble(config, ds, args.out_bundle,
                                   cost_model=cost_model)
    print(f"fitted {report.fitted} detector(s) in "
          f"{report.wall_seconds:.2f}s -> {report.bundle_path}")
    for index, reason in report.failures:
        print(f"  detector {index} failed: {reason}", file=sys.stderr)
    return 3 if report.failures else 0


def cmd_predict(args) -> int:
    test = load_csv(args.test_csv, label_column=args.label_col)
    use_approx = bool(args.approx) if args.approx is not None else False
    report = pipeline.predict_scores(
        args.bundle, test, args.out,
        use_approx=use_approx, workers=args.workers,
    )
    print(f"wrote {report.n_rows} rows x {len(report.columns)} columns "
          f"-> {report.out_csv}")
    if report.approximated:
        print(f"  approximated detectors: {report.approximated}")
    return 0


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise ConfigError(f"{flag} expects a comma-separated integer list, "
                          f"got {text!r}") from None


def cmd_bench(args) -> int:
    config = _load_config(args)
    datasets_dir = Path(args.datasets_dir)
    if not datasets_dir.is_dir():
        raise DataError(f"no such directory: {datasets_dir}")
    paths = sorted(datasets_dir.glob("*.csv"))
    if not paths:
        raise DataError(f"no CSV files under {datasets_dir}")
    label_col = args.label_col or "label"
    experiments = set(args.experiments.split(","))
    unknown = experiments - {"projection", "scheduler", "approximation"}
    if unknown:
        raise ConfigError(f"unknown experiments: {sorted(unknown)}")
    m_values = _parse_int_list(args.sched_m, "--sched-m")
    t_values = _parse_int_list(args.sched_t, "--sched-t")

    main_rows = []
    sched_rows = []
    for path in paths:
        name = path.stem
        try:
            ds = load_csv(path, label_column=label_col)
        except DataError as exc:
            logger.warning("skipping %s: %s", name, exc)
            continue
        try:
            if "projection" in experiments:
                main_rows.extend(pipeline.bench_projection(
                    ds, name, pipeline.bench_detectors(), args.trials,
                    config.master_seed,
                ))
            if "approximation" in experiments:
                main_rows.extend(pipeline.bench_approximation(
                    ds, name, pipeline.bench_detectors(), args.trials,
                    config.master_seed, forest=config.approximation.forest,
                ))
            if "scheduler" in experiments:
                sched_rows.extend(pipeline.bench_scheduler(
                    ds, name, m_values, t_values, config.master_seed,
                    backend=config.scheduler.backend,
                ))
        except DataError as exc:
            logger.warning("skipping %s: %s", name, exc)
            continue
    out = Path(args.out)
    _write_rows(out, pipeline.BENCH_HEADER, main_rows)
    print(f"wrote {len(main_rows)} rows -> {out}")
    if sched_rows:
        sched_out = out.with_name(out.stem + "_scheduler" + out.suffix)
        _write_rows(sched_out, pipeline.SCHED_HEADER, sched_rows)
        print(f"wrote {len(sched_rows)} rows -> {sched_out}")
    return 0


def cmd_plan(args) -> int:
    if args.ranks is not None:
        ranks = json.loads(Path(args.ranks).read_text(encoding="utf-8"))
    else:
        ranks = list(range(1, args.m + 1))
    policy = args.scheduler or "bps"
    if policy == "bps":
        plan = plan_bps(ranks, args.t)
    else:
        plan = plan_simple(args.m, args.t, ranks=ranks)
    payload = {
        "policy": policy,
        "m": plan.m,
        "t": plan.t,
        "assignments": plan.assignments,
        "rank_sums": plan.rank_sums().tolist(),
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _default_cost_specs(algos) -> list[DetectorSpec]:
    return [DetectorSpec(algo, {}) for algo in algos]


def cmd_cost_collect(args) -> int:
    algos = [a for a in args.algos.split(",") if a]
    for algo in algos:
        if algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algo!r}")
    sizes = []
    for part in args.sizes.split(","):
        if not part:
            continue
        try:
            n, d = part.split("x")
            sizes.append((int(n), int(d)))
        except ValueError:
            raise ConfigError(
                f"--sizes expects entries like 1000x20, got {part!r}"
            ) from None
    if not sizes:
        raise ConfigError("--sizes produced no (n, d) pairs")
    seed = args.seed if args.seed is not None else 0
    datasets = make_timing_datasets(sizes, seed=seed)
    records = collect_timings(_default_cost_specs(algos), datasets,
                              repeats=args.repeats)
    save_timings(records, args.out)
    print(f"wrote {len(records)} timing records -> {args.out}")
    return 0


def cmd_cost_train(args) -> int:
    records = load_timings(args.timings_csv)
    seed = args.seed if args.seed is not None else 0
    model, report = train_cost_model(records, ForestParams(seed=seed),
                                     n_folds=args.folds)
    bundle_io.save_cost_model(args.out_bundle, model, report)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    print(f"wrote cost model -> {args.out_bundle}")
    return 0


def cmd_cost_rank(args) -> int:
    if args.model is not None:
        model = bundle_io.load_cost_model(args.model)
    else:
        model = pipeline.default_cost_model()
    raw = json.loads(Path(args.pending).read_text(encoding="utf-8"))
    pending = []
    for i, entry in enumerate(raw):
        for key in ("algo", "n", "d"):
            if key not in entry:
                raise ConfigError(f"pending entry {i} is missing {key!r}")
        pending.append((
            DetectorSpec(entry["algo"], entry.get("params", {})),
            int(entry["n"]), int(entry["d"]),
        ))
    ranks = forecast_ranks(model, pending)
    print(json.dumps(ranks.tolist()))
    return 0


def cmd_synth(args) -> int:
    ds = synth_blob(args.inliers, args.outliers, args.d,
                    seed=args.seed if args.seed is not None else 0)
    header = [f"f{j}" for j in range(ds.d)] + ["label"]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(ds.n):
            cells = [repr(float(v)) for v in ds.values[i]]
            cells.append(str(int(ds.labels[i])))
            fh.write(",".join(cells) + "\n")
    print(f"wrote {ds.n} rows ({args.outliers} outliers) -> {args.out}")
    return 0


def cmd_surface(args) -> int:
    bundle = bundle_io.load_ensemble(args.bundle)
    if args.detector not in bundle.indices:
        raise ConfigError(
            f"bundle has no detector with index {args.detector}; "
            f"available: {bundle.indices}"
        )
    pos = bundle.indices.index(args.detector)
    fd = bundle.detectors[pos]
    approximator = bundle.approximators.get(args.detector)
    if approximator is None:
        config = pipeline.config_from_dict(bundle.config)
        base = config.approximation.forest
        from dataclasses import replace
        approximator = approximate(
            fd, bundle.train, replace(base, seed=base.seed + args.detector)
        )
    grid = surface_grid(fd, approximator, bundle.train,
                        resolution=args.resolution)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("x,y,source_score,approx_score\n")
        for row in grid:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote {grid.shape[0]} grid points -> {args.out}")
    return 0


def build_parser() -> CliParser:
    parser = CliParser(
        prog="fastod",
        description="Train and score large ensembles of unsupervised "
                    "outlier detectors quickly.",
    )
    parser.add_argument("--version", action="version",
                        version=f"fastod {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit an ensemble and save a bundle")
    _common_flags(p_fit)
    p_fit.add_argument("--cost-model", type=Path, default=None,
                       help="cost-model bundle for rank forecasts")
    p_fit.add_argument("train_csv", type=Path)
    p_fit.add_argument("out_bundle", type=Path)
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="score a test CSV with a bundle")
    _common_flags(p_pred)
    p_pred.add_argument("bundle", type=Path)
    p_pred.add_argument("test_csv", type=Path)
    p_pred.add_argument("--out", type=Path, required=True)
    p_pred.set_defaults(func=cmd_predict)

    p_bench = sub.add_parser("bench", help="run the benchmark experiments")
    _common_flags(p_bench)
    p_bench.add_argument("datasets_dir", type=Path)
    p_bench.add_argument("--out", type=Path, required=True)
    p_bench.add_argument("--trials", type=int, default=10)
    p_bench.add_argument("--experiments",
                         default="projection,scheduler,approximation")
    p_bench.add_argument("--sched-m", default="100,500")
    p_bench.add_argument("--sched-t", default="2,4,6")
    p_bench.set_defaults(func=cmd_bench)

    p_plan = sub.add_parser("plan", help="print a schedule plan as JSON")
    _common_flags(p_plan)
    p_plan.add_argument("--m", type=int, required=True)
    p_plan.add_argument("--t", type=int, required=True)
    p_plan.add_argument("--ranks", type=Path, default=None,
                        help="JSON file with a rank list (default 1..m)")
    p_plan.set_defaults(func=cmd_plan)

    p_cost = sub.add_parser("cost", help="cost-predictor utilities")
    cost_sub = p_cost.add_subparsers(dest="cost_command", required=True)

    p_collect = cost_sub.add_parser("collect", help="time detector fits on "
                                    "synthetic datasets")
    _common_flags(p_collect)
    p_collect.add_argument("--out", type=Path, required=True)
    p_collect.add_argument("--repeats", type=int, default=10)
    p_collect.add_argument("--algos", default="knn,aknn,lof,hbos,iforest")
    p_collect.add_argument("--sizes",
                           default="500x5,1000x10,2000x20,4000x30")
    p_collect.set_defaults(func=cmd_cost_collect)

    p_train = cost_sub.add_parser("train", help="train the cost model from "
                                  "a timing CSV")
    _common_flags(p_train)
    p_train.add_argument("timings_csv", type=Path)
    p_train.add_argument("out_bundle", type=Path)
    p_train.add_argument("--folds", type=int, default=10)
    p_train.set_defaults(func=cmd_cost_train)

    p_rank = cost_sub.add_parser("rank", help="rank pending tasks by "
                                 "forecast cost")
    _common_flags(p_rank)
    p_rank.add_argument("pending", type=Path,
                        help="JSON list of {algo, n, d} entries")
    p_rank.add_argument("--model", type=Path, default=None)
    p_rank.set_defaults(func=cmd_cost_rank)

    p_synth = sub.add_parser("synth", help="generate a labeled synthetic CSV")
    _common_flags(p_synth)
    p_synth.add_argument("--inliers", type=int, default=160)
    p_synth.add_argument("--outliers", type=int, default=40)
    p_synth.add_argument("--d", type=int, default=2)
    p_synth.add_argument("--out", type=Path, required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_surface = sub.add_parser("surface", help="dump a 2-D decision-surface "
                               "grid for one detector")
    _common_flags(p_surface)
    p_surface.add_argument("bundle", type=Path)
    p_surface.add_argument("--detector", type=int, required=True)
    p_surface.add_argument("--resolution", type=int, default=50)
    p_surface.add_argument("--out", type=Path, required=True)
    p_surface.set_defaults(func=cmd_surface)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
