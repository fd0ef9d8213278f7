"""Command-line front end for the full experiment lifecycle.

Every subcommand reads explicit flags (optionally preloaded from a
``--config`` key = value file, with flags winning), takes all randomness
from ``--seed`` flags, and writes files atomically, so identical
invocations produce identical artifacts.  Timing lines are the one
nondeterministic output; ``--no-timing`` drops them.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import time
from csv import writer as csv_writer
from dataclasses import replace

import numpy as np

from . import __version__
from .data import (
    FORMAT_VERSION,
    atomic_write_text,
    build_predictor,
    load_features,
    load_fold_manifest,
    load_model,
    make_synthetic,
    save_features,
    save_fold_manifest,
    save_model,
)
from .features import build_map, export_dense, transform
from .kernels import FAMILIES, NONLINEAR_FAMILIES, KernelSpec, gram_matrix, kernel_eval
from .pipeline import (
    ExperimentConfig,
    _align,
    apply_normalizer,
    experiment_record,
    fit_normalizer,
    grid_search,
    render_class_table,
    render_m_table,
    run_experiment,
    storage_report,
    sweep_m,
)
from .solver import SvmConfig, train_multiclass

_BOOLEAN_KEYS = frozenset({"no-timing", "scores", "reseed-per-fold"})


def _real(text: str) -> float:
    """Parse a real number; power notation like 2^-18 is accepted."""
    token = text.strip()
    try:
        if "^" in token:
            base, _, exponent = token.partition("^")
            return float(base) ** int(exponent)
        return float(token)
    except ValueError:
        raise argparse.ArgumentTypeError("%r is not a number" % text) from None


def _real_list(text: str) -> list:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers")
    return [_real(t) for t in items]


def _int_list(text: str) -> list:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            "%r is not a comma-separated integer list" % text
        ) from None
    if not values:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers")
    return values


def _kernel_list(text: str) -> list:
    if text.strip() == "all":
        return list(NONLINEAR_FAMILIES)
    names = [t.strip() for t in text.split(",") if t.strip()]
    for name in names:
        if name not in FAMILIES:
            raise argparse.ArgumentTypeError(
                "unknown kernel %r (choose from %s)" % (name, ", ".join(FAMILIES))
            )
    if not names:
        raise argparse.ArgumentTypeError("expected at least one kernel name")
    return names


def _config_tokens(path: str) -> list:
    """Turn a key = value file into flag tokens; booleans toggle presence."""
    tokens = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_num, raw in enumerate(handle, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError("config line %d: expected key = value" % line_num)
            key = key.strip().replace("_", "-")
            value = value.strip()
            if key in _BOOLEAN_KEYS:
                if value.lower() in ("true", "1", "yes"):
                    tokens.append("--" + key)
                elif value.lower() not in ("false", "0", "no"):
                    raise ValueError(
                        "config line %d: %s must be true or false" % (line_num, key)
                    )
            else:
                tokens.extend(["--" + key, value])
    return tokens


def _expand_config(argv: list) -> list:
    """Splice config-file tokens in after the subcommand so that flags
    given on the command line take precedence."""
    if not argv or argv[0].startswith("-"):
        return argv
    rest = argv[1:]
    path = None
    for i, token in enumerate(rest):
        if token == "--config":
            if i + 1 >= len(rest):
                raise ValueError("--config needs a file path")
            path = rest[i + 1]
        elif token.startswith("--config="):
            path = token.partition("=")[2]
    if path is None:
        return argv
    return [argv[0]] + _config_tokens(path) + rest


def _svm_config(args) -> SvmConfig:
    return SvmConfig(
        regularization_c=args.c,
        tolerance=args.tolerance,
        max_iterations=args.max_iterations,
        shuffle_seed=args.shuffle_seed,
    )


def _add_config_flag(sub) -> None:
    sub.add_argument(
        "--config",
        metavar="FILE",
        help="key = value file supplying defaults; explicit flags win",
    )


def _add_solver_flags(sub) -> None:
    sub.add_argument("--c", type=_real, default=100.0, help="soft-margin penalty")
    sub.add_argument(
        "--tolerance", type=_real, default=1e-4, help="projected-gradient stop threshold"
    )
    sub.add_argument("--max-iterations", type=int, default=1000, help="epoch cap")
    sub.add_argument(
        "--shuffle-seed",
        type=int,
        default=None,
        help="randomize coordinate sweep order with this seed",
    )
    sub.add_argument("--threads", type=int, default=1, help="parallel one-vs-rest workers")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rffsvm",
        description="Kernel SVMs on random cosine features: probe, train, evaluate.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version="rffsvm %s (model format %s)" % (__version__, FORMAT_VERSION),
    )
    subs = parser.add_subparsers(dest="subcommand", required=True, metavar="subcommand")

    p = subs.add_parser(
        "kernel-probe", help="measure kernel approximation error across M values"
    )
    _add_config_flag(p)
    p.add_argument("--kernel", required=True, choices=FAMILIES)
    p.add_argument("--gamma", type=_real, default=None, help="kernel bandwidth")
    p.add_argument("--dim", type=int, default=20, help="input dimension")
    p.add_argument("--pairs", type=int, default=200, help="random pairs per estimate")
    p.add_argument(
        "--m-values", type=_int_list, default=[32, 128, 512, 2048], metavar="M,M,..."
    )
    p.add_argument("--seed", type=int, default=0, help="pair stream seed; maps use seed+M")
    p.add_argument("--no-timing", action="store_true", help="omit the wall-clock line")
    p.set_defaults(handler=_cmd_kernel_probe)

    p = subs.add_parser("synth", help="generate a Gaussian-blob dataset with folds")
    _add_config_flag(p)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--separation", type=_real, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--features-out", required=True, metavar="CSV")
    p.add_argument("--folds-out", required=True, metavar="CSV")
    p.set_defaults(handler=_cmd_synth)

    p = subs.add_parser("train", help="fit a model on a whole feature file")
    _add_config_flag(p)
    p.add_argument("--features", required=True, metavar="CSV")
    p.add_argument("--kernel", required=True, choices=FAMILIES)
    p.add_argument("--gamma", type=_real, default=None)
    p.add_argument(
        "--mode",
        choices=("exact_kernel", "random_features"),
        default="exact_kernel",
    )
    p.add_argument("--m", type=int, default=None, help="random-feature count")
    p.add_argument("--seed", type=int, default=0, help="feature-map seed")
    _add_solver_flags(p)
    p.add_argument("--model-out", required=True, metavar="JSON")
    p.add_argument(
        "--export-dense",
        metavar="BIN",
        help="also write the map's W then b as raw little-endian float64",
    )
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(handler=_cmd_train)

    p = subs.add_parser("predict", help="apply a saved model to a feature file")
    _add_config_flag(p)
    p.add_argument("--features", required=True, metavar="CSV")
    p.add_argument("--model", required=True, metavar="JSON")
    p.add_argument("--out", required=True, metavar="CSV")
    p.add_argument(
        "--scores", action="store_true", help="append per-class decision values"
    )
    p.set_defaults(handler=_cmd_predict)

    p = subs.add_parser("cv", help="cross-validate one configuration")
    _add_config_flag(p)
    p.add_argument("--features", required=True, metavar="CSV")
    p.add_argument("--folds", required=True, metavar="CSV", help="fold manifest")
    p.add_argument("--kernel", required=True, choices=FAMILIES)
    p.add_argument("--gamma", type=_real, default=None)
    p.add_argument(
        "--mode",
        choices=("exact_kernel", "random_features"),
        default="exact_kernel",
    )
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--seed", type=int, default=0, help="feature-map seed")
    p.add_argument(
        "--reseed-per-fold",
        action="store_true",
        help="draw a fresh map per fold instead of sharing one",
    )
    _add_solver_flags(p)
    p.add_argument("--report-out", metavar="JSON")
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(handler=_cmd_cv)

    p = subs.add_parser("sweep", help="accuracy-by-M table over one or more kernels")
    _add_config_flag(p)
    p.add_argument("--features", required=True, metavar="CSV")
    p.add_argument("--folds", required=True, metavar="CSV")
    p.add_argument(
        "--kernel",
        type=_kernel_list,
        required=True,
        help="kernel name, comma list, or 'all'",
    )
    p.add_argument(
        "--gamma",
        type=_real_list,
        required=True,
        help="one bandwidth per kernel, or a single shared value",
    )
    p.add_argument(
        "--m-values",
        type=_int_list,
        default=[32, 64, 128, 256, 512, 1024, 2048, 4096],
        metavar="M,M,...",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reseed-per-fold", action="store_true")
    _add_solver_flags(p)
    p.add_argument("--report-out", metavar="JSON")
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(handler=_cmd_sweep)

    p = subs.add_parser("grid", help="cross-validated (gamma, C) search")
    _add_config_flag(p)
    p.add_argument("--features", required=True, metavar="CSV")
    p.add_argument("--folds", required=True, metavar="CSV")
    p.add_argument("--kernel", required=True, choices=FAMILIES)
    p.add_argument("--gamma-grid", type=_real_list, required=True, metavar="G,G,...")
    p.add_argument("--c-grid", type=_real_list, required=True, metavar="C,C,...")
    p.add_argument(
        "--mode",
        choices=("exact_kernel", "random_features"),
        default="exact_kernel",
    )
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=_real, default=1e-4)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--report-out", metavar="JSON")
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(handler=_cmd_grid)

    p = subs.add_parser(
        "convert-meta", help="turn tab-separated path/label metadata into label CSV"
    )
    _add_config_flag(p)
    p.add_argument("--meta", required=True, metavar="TSV")
    p.add_argument("--out", required=True, metavar="CSV")
    p.set_defaults(handler=_cmd_convert_meta)

    return parser


def _cmd_kernel_probe(args) -> int:
    spec = KernelSpec(args.kernel, args.gamma)
    if args.pairs < 1:
        raise ValueError("--pairs must be positive")
    if args.dim < 1:
        raise ValueError("--dim must be positive")
    start = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
    X = rng.normal(size=(args.pairs, args.dim))
    Y = rng.normal(size=(args.pairs, args.dim))
    exact = np.array([kernel_eval(spec, x, y) for x, y in zip(X, Y)])
    body = []
    for m in args.m_values:
        fmap = build_map(spec, args.dim, m, seed=args.seed + m)
        approx = np.einsum("ij,ij->i", transform(fmap, X), transform(fmap, Y))
        err = np.abs(approx - exact)
        body.append(
            [str(m), "%.6f" % err.mean(), "%.6f" % err.max(), "%.4f" % (err.mean() * np.sqrt(m))]
        )
    sys.stdout.write(_align(["M", "mean_err", "max_err", "sqrt_m_scaled"], body))
    if not args.no_timing:
        print("probed %d pairs in %.2fs" % (args.pairs, time.perf_counter() - start))
    return 0


def _cmd_synth(args) -> int:
    dataset = make_synthetic(
        args.classes, args.per_class, args.dim, args.separation, args.seed, folds=args.folds
    )
    save_features(dataset, args.features_out)
    save_fold_manifest(dataset, args.folds_out)
    print(
        "wrote %d rows (%d classes, %d dims, %d folds) to %s"
        % (
            dataset.row_count,
            len(dataset.class_labels),
            dataset.input_dim,
            args.folds,
            args.features_out,
        )
    )
    return 0


def _cmd_train(args) -> int:
    dataset = load_features(args.features)
    spec = KernelSpec(args.kernel, args.gamma)
    svm = _svm_config(args)
    normalizer = fit_normalizer(dataset.features)
    Z = apply_normalizer(normalizer, dataset.features)
    labels = list(dataset.labels)
    fmap = None
    start = time.perf_counter()
    if spec.family == "linear":
        if args.mode == "random_features":
            raise ValueError("linear kernel needs no random features")
        model = train_multiclass(Z, labels, svm, threads=args.threads)
        predictor = build_predictor(model, normalizer)
    elif args.mode == "random_features":
        if args.m is None:
            raise ValueError("random_features mode needs --m")
        fmap = build_map(spec, dataset.input_dim, args.m, args.seed)
        model = train_multiclass(transform(fmap, Z), labels, svm, threads=args.threads)
        predictor = build_predictor(model, normalizer, fmap=fmap)
    else:
        model = train_multiclass(
            gram_matrix(spec, Z), labels, svm, spec=spec, threads=args.threads
        )
        predictor = build_predictor(model, normalizer, train_features=Z)
    elapsed = time.perf_counter() - start
    save_model(predictor, args.model_out)
    if args.export_dense:
        if fmap is None:
            raise ValueError("only random_features mode has a map to export")
        export_dense(fmap, args.export_dense)
    effective = fmap.target_dim if fmap is not None else dataset.input_dim
    print(
        "trained %d classes on %d rows (%d -> %d dims), model in %s"
        % (len(model.class_labels), dataset.row_count, dataset.input_dim, effective, args.model_out)
    )
    stuck = [l for l, b in zip(model.class_labels, model.binaries) if not b.converged]
    if stuck:
        print("warning: no convergence within --max-iterations for: " + ", ".join(stuck))
    if not args.no_timing:
        print("training took %.2fs" % elapsed)
    return 0


def _cmd_predict(args) -> int:
    predictor = load_model(args.model)
    dataset = load_features(args.features)
    labels, scores = predictor.predict(dataset.features)
    buffer = io.StringIO()
    rows = csv_writer(buffer, lineterminator="\n")
    for i, sid in enumerate(dataset.segment_ids):
        row = [sid, labels[i]]
        if args.scores:
            row += [repr(v) for v in scores[i].tolist()]
        rows.writerow(row)
    atomic_write_text(args.out, buffer.getvalue())
    print("wrote %d predictions to %s" % (len(labels), args.out))
    return 0


def _experiment_config(args, spec: KernelSpec) -> ExperimentConfig:
    return ExperimentConfig(
        spec=spec,
        mode=args.mode,
        svm=_svm_config(args),
        target_dim=args.m,
        map_seed=args.seed,
        reseed_per_fold=args.reseed_per_fold,
        threads=args.threads,
    )


def _load_fold_dataset(args):
    dataset = load_features(args.features)
    return dataset.with_folds(load_fold_manifest(args.folds, dataset))


def _cmd_cv(args) -> int:
    dataset = _load_fold_dataset(args)
    spec = KernelSpec(args.kernel, args.gamma)
    config = _experiment_config(args, spec)
    report = run_experiment(dataset, config)
    sys.stdout.write(render_class_table({args.kernel: report}))
    print("per-fold: " + "  ".join("%.4f" % a for a in report.per_fold))
    if not args.no_timing:
        print(
            "train %.2fs, test %.2fs"
            % (report.timing["train_seconds"], report.timing["test_seconds"])
        )
    if args.report_out:
        storage = None
        if config.mode == "random_features":
            storage = storage_report(dataset.input_dim, config.target_dim, dataset.row_count)
        record = experiment_record(config, report, storage)
        if args.no_timing:
            del record["timing"]
        atomic_write_text(args.report_out, json.dumps(record, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_sweep(args) -> int:
    dataset = _load_fold_dataset(args)
    kernels = args.kernel
    gammas = args.gamma
    if len(gammas) == 1:
        gammas = gammas * len(kernels)
    if len(gammas) != len(kernels):
        raise ValueError(
            "need one --gamma per kernel (got %d gammas for %d kernels)"
            % (len(gammas), len(kernels))
        )
    svm = _svm_config(args)
    sweeps = {}
    configs = {}
    for kernel, gamma in zip(kernels, gammas):
        config = ExperimentConfig(
            spec=KernelSpec(kernel, gamma),
            mode="random_features",
            svm=svm,
            target_dim=args.m_values[0],
            map_seed=args.seed,
            reseed_per_fold=args.reseed_per_fold,
            threads=args.threads,
        )
        configs[kernel] = config
        sweeps[kernel] = sweep_m(dataset, config, args.m_values)
    sys.stdout.write(render_m_table(sweeps, input_dim=dataset.input_dim))
    if not args.no_timing:
        total = sum(
            rep.timing["train_seconds"] + rep.timing["test_seconds"]
            for runs in sweeps.values()
            for _, rep in runs
        )
        print("swept %d runs in %.2fs" % (sum(len(r) for r in sweeps.values()), total))
    if args.report_out:
        record = {"m_values": list(args.m_values), "kernels": {}}
        for kernel, runs in sweeps.items():
            entries = []
            for m, rep in runs:
                entry = experiment_record(
                    replace(configs[kernel], target_dim=m),
                    rep,
                    storage_report(dataset.input_dim, m, dataset.row_count),
                )
                if args.no_timing:
                    del entry["timing"]
                entries.append(entry)
            record["kernels"][kernel] = entries
        atomic_write_text(args.report_out, json.dumps(record, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_grid(args) -> int:
    dataset = _load_fold_dataset(args)
    start = time.perf_counter()
    result = grid_search(
        dataset,
        args.kernel,
        args.gamma_grid,
        args.c_grid,
        mode=args.mode,
        target_dim=args.m if args.mode == "random_features" else None,
        map_seed=args.seed,
        svm=SvmConfig(tolerance=args.tolerance, max_iterations=args.max_iterations),
        threads=args.threads,
    )
    body = [
        ["%.10g" % gamma, "%.10g" % c, "%.1f" % (100.0 * acc)]
        for gamma, c, acc in result.rows
    ]
    sys.stdout.write(_align(["gamma", "C", "accuracy"], body))
    print("best: gamma=%.10g c=%.10g" % (result.best_gamma, result.best_c))
    if not args.no_timing:
        print("searched %d cells in %.2fs" % (len(result.rows), time.perf_counter() - start))
    if args.report_out:
        record = {
            "best_gamma": result.best_gamma,
            "best_c": result.best_c,
            "table": [list(row) for row in result.rows],
        }
        atomic_write_text(args.report_out, json.dumps(record, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_convert_meta(args) -> int:
    rows = []
    with open(args.meta, "r", encoding="utf-8") as handle:
        for line_num, raw in enumerate(handle, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            cells = line.split("\t")
            if len(cells) not in (2, 3):
                raise ValueError(
                    "line %d: expected path<TAB>label, found %d fields"
                    % (line_num, len(cells))
                )
            rows.append((cells[0], cells[1]))
    if not rows:
        raise ValueError("%s: no metadata rows" % args.meta)
    buffer = io.StringIO()
    out = csv_writer(buffer, lineterminator="\n")
    for path, label in rows:
        out.writerow([path, label])
    atomic_write_text(args.out, buffer.getvalue())
    print("converted %d rows to %s" % (len(rows), args.out))
    return 0


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = _build_parser()
    try:
        expanded = _expand_config(list(argv))
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    args = parser.parse_args(expanded)
    try:
        return args.handler(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
