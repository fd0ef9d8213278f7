"""Cross-validated experiment protocol.

One experiment is: split by fold, z-score each training split, optionally
replace the inputs with random features, train a one-vs-rest SVM, and score
the held-out fold.  Per-fold confusion counts are summed into a single
report, so the overall accuracy is the micro-average over all test rows.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .features import build_map, transform
from .kernels import KernelSpec, gram_matrix
from .solver import SvmConfig, predict, train_multiclass

MODES = ("exact_kernel", "random_features")

# family tag, gamma, both dims, seed: one fixed-size record per stored map
_DESCRIPTOR_BYTES = 48


@dataclass(frozen=True)
class Normalizer:
    """Per-column z-score statistics fit on a training split only."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        std = np.ascontiguousarray(self.std, dtype=np.float64)
        if mean.ndim != 1 or mean.shape != std.shape:
            raise ValueError("mean and std must be vectors of equal length")
        if not (np.isfinite(mean).all() and np.isfinite(std).all()):
            raise ValueError("normalizer statistics must be finite")
        if (std < 0.0).any():
            raise ValueError("std entries must be nonnegative")
        for name, arr in (("mean", mean), ("std", std)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def degenerate(self) -> np.ndarray:
        """Mask of zero-variance columns; these pass through unscaled."""
        return self.std == 0.0


def fit_normalizer(features) -> Normalizer:
    """Column means and population standard deviations of a training split."""
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D array")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows to fit a normalizer")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    return Normalizer(mean=X.mean(axis=0), std=X.std(axis=0))


def apply_normalizer(norm: Normalizer, features) -> np.ndarray:
    """Center and scale rows; degenerate columns are only centered."""
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D array")
    if X.shape[1] != norm.mean.shape[0]:
        raise ValueError(
            "dimension mismatch: normalizer has %d columns, input has %d"
            % (norm.mean.shape[0], X.shape[1])
        )
    out = X - norm.mean
    out /= np.where(norm.degenerate, 1.0, norm.std)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """One cross-validated run: kernel, mode, solver settings, seed policy.

    In ``random_features`` mode a single map (seeded by ``map_seed``) is
    shared across folds unless ``reseed_per_fold`` is set, in which case
    fold k (by sorted fold id) draws from ``map_seed + k``.
    """

    spec: KernelSpec
    mode: str
    svm: SvmConfig = SvmConfig()
    target_dim: int | None = None
    map_seed: int = 0
    reseed_per_fold: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError("mode must be one of %s" % (MODES,))
        if self.mode == "random_features":
            if self.spec.family == "linear":
                raise ValueError("linear kernel needs no random features")
            if not isinstance(self.target_dim, int) or self.target_dim < 1:
                raise ValueError("random_features mode needs a positive target_dim")
        elif self.target_dim is not None:
            raise ValueError("target_dim only applies to random_features mode")
        if not isinstance(self.map_seed, int):
            raise ValueError("map_seed must be an integer")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ValueError("threads must be a positive integer")


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Aggregated cross-validation outcome for one configuration.

    ``per_fold`` is ordered by fold id, not by evaluation order, and the
    confusion matrix sums integer counts, so the report is invariant to
    the order folds were run in.
    """

    class_labels: tuple
    overall_accuracy: float
    per_class_accuracy: Mapping[str, float]
    confusion: np.ndarray
    per_fold: tuple
    dims: Mapping[str, int]
    timing: Mapping[str, float]

    def __post_init__(self):
        conf = np.ascontiguousarray(self.confusion, dtype=np.int64)
        k = len(self.class_labels)
        if conf.shape != (k, k):
            raise ValueError("confusion matrix must be %d x %d" % (k, k))
        total = int(conf.sum())
        if total == 0:
            raise ValueError("confusion matrix has no counts")
        if abs(self.overall_accuracy - np.trace(conf) / total) > 1e-12:
            raise ValueError("overall accuracy disagrees with the confusion matrix")
        conf.flags.writeable = False
        object.__setattr__(self, "confusion", conf)


def _first_appearance(labels) -> list:
    seen = []
    for label in labels:
        if label not in seen:
            seen.append(label)
    return seen


def _report_from_counts(class_labels, confusion, per_fold, dims, timing) -> EvalReport:
    conf = np.asarray(confusion, dtype=np.int64)
    row_sums = conf.sum(axis=1)
    diag = np.diagonal(conf)
    per_class = {
        label: (float(diag[i] / row_sums[i]) if row_sums[i] else 0.0)
        for i, label in enumerate(class_labels)
    }
    return EvalReport(
        class_labels=tuple(class_labels),
        overall_accuracy=float(np.trace(conf) / conf.sum()),
        per_class_accuracy=per_class,
        confusion=conf,
        per_fold=tuple(per_fold),
        dims=dict(dims),
        timing=dict(timing),
    )


def run_experiment(dataset, config: ExperimentConfig, fold_order=None) -> EvalReport:
    """Cross-validate one configuration over the dataset's folds.

    Each fold is scored by a normalizer (and, in random_features mode, a
    feature map) that never saw the fold's test rows.  ``fold_order`` may
    permute evaluation order; every reported number except wall-clock
    timing is independent of it.
    """
    X = np.ascontiguousarray(dataset.features, dtype=np.float64)
    labels = list(dataset.labels)
    if dataset.fold_assignment is None:
        raise ValueError("dataset has no fold assignment")
    folds = np.asarray(dataset.fold_assignment)
    if folds.shape != (X.shape[0],):
        raise ValueError("fold assignment length does not match row count")

    fold_ids = sorted(set(folds.tolist()))
    if fold_order is None:
        order = fold_ids
    else:
        order = list(fold_order)
        if sorted(order) != fold_ids:
            raise ValueError("fold_order must permute the dataset's fold ids")

    class_labels = _first_appearance(labels)
    index_of = {label: i for i, label in enumerate(class_labels)}
    input_dim = X.shape[1]

    shared_map = None
    if config.mode == "random_features":
        if config.target_dim >= input_dim:
            warnings.warn(
                "target_dim %d does not compress input_dim %d"
                % (config.target_dim, input_dim),
                RuntimeWarning,
                stacklevel=2,
            )
        if not config.reseed_per_fold:
            shared_map = build_map(config.spec, input_dim, config.target_dim, config.map_seed)

    confusion = np.zeros((len(class_labels), len(class_labels)), dtype=np.int64)
    fold_counts = {}
    train_seconds = 0.0
    test_seconds = 0.0

    for fold in order:
        test_mask = folds == fold
        train_mask = ~test_mask
        if not test_mask.any():
            raise ValueError("fold %r has an empty test split" % (fold,))
        train_labels = [labels[i] for i in np.flatnonzero(train_mask)]
        if len(set(train_labels)) < 2:
            raise ValueError(
                "fold %r leaves fewer than two classes for training" % (fold,)
            )

        start = time.perf_counter()
        norm = fit_normalizer(X[train_mask])
        train_X = apply_normalizer(norm, X[train_mask])
        if config.mode == "random_features":
            fmap = shared_map
            if fmap is None:
                fmap = build_map(
                    config.spec,
                    input_dim,
                    config.target_dim,
                    config.map_seed + fold_ids.index(fold),
                )
            model = train_multiclass(
                transform(fmap, train_X), train_labels, config.svm, threads=config.threads
            )
        else:
            gram = gram_matrix(config.spec, train_X)
            model = train_multiclass(
                gram, train_labels, config.svm, spec=config.spec, threads=config.threads
            )
        train_seconds += time.perf_counter() - start

        start = time.perf_counter()
        test_X = apply_normalizer(norm, X[test_mask])
        if config.mode == "random_features":
            rows = transform(fmap, test_X)
        else:
            rows = gram_matrix(config.spec, test_X, train_X).values
        predicted, _ = predict(model, rows)
        test_seconds += time.perf_counter() - start

        hits = 0
        for row, guess in zip(np.flatnonzero(test_mask), predicted):
            truth = labels[row]
            confusion[index_of[truth], index_of[guess]] += 1
            hits += guess == truth
        fold_counts[fold] = (hits, int(test_mask.sum()))

    per_fold = tuple(fold_counts[f][0] / fold_counts[f][1] for f in fold_ids)
    effective = config.target_dim if config.mode == "random_features" else input_dim
    return _report_from_counts(
        class_labels,
        confusion,
        per_fold,
        {"input_dim": input_dim, "effective_dim": effective},
        {"train_seconds": train_seconds, "test_seconds": test_seconds},
    )


def sweep_m(dataset, config: ExperimentConfig, m_values) -> list:
    """Run the same cross-validation at several feature dimensions M.

    The seed policy is held fixed across runs, so M is the only moving
    part.  Returns one (M, EvalReport) pair per requested value.
    """
    if config.mode != "random_features":
        raise ValueError("sweep_m needs a random_features config")
    values = [int(m) for m in m_values]
    if not values:
        raise ValueError("m_values must be non-empty")
    if any(m < 1 for m in values):
        raise ValueError("m_values must be positive")
    return [(m, run_experiment(dataset, replace(config, target_dim=m))) for m in values]


@dataclass(frozen=True, eq=False)
class GridResult:
    """Winning cell plus the full (gamma, C, accuracy) score table."""

    best_gamma: float
    best_c: float
    rows: tuple


def grid_search(
    dataset,
    family: str,
    gamma_grid,
    c_grid,
    *,
    mode: str = "exact_kernel",
    target_dim: int | None = None,
    map_seed: int = 0,
    svm: SvmConfig = SvmConfig(),
    threads: int = 1,
) -> GridResult:
    """Exhaustive (gamma, C) search scored by cross-validated accuracy.

    Grids are sorted before scanning and ties keep the earlier cell, so
    the winner is smallest-gamma-then-smallest-C among the best scores
    and reordering the input grids cannot change it.
    """
    gammas = sorted(float(g) for g in gamma_grid)
    cs = sorted(float(c) for c in c_grid)
    if not gammas or not cs:
        raise ValueError("gamma_grid and c_grid must be non-empty")
    rows = []
    best = None
    for gamma in gammas:
        for c in cs:
            config = ExperimentConfig(
                spec=KernelSpec(family, gamma),
                mode=mode,
                svm=replace(svm, regularization_c=c),
                target_dim=target_dim,
                map_seed=map_seed,
                threads=threads,
            )
            accuracy = run_experiment(dataset, config).overall_accuracy
            rows.append((gamma, c, accuracy))
            if best is None or accuracy > best[2]:
                best = (gamma, c, accuracy)
    return GridResult(best_gamma=best[0], best_c=best[1], rows=tuple(rows))


def storage_report(input_dim: int, target_dim: int, rows: int) -> dict:
    """Byte accounting for storing ``rows`` vectors raw versus mapped.

    Values are 8-byte floats; the map descriptor (family, gamma, dims,
    seed) rides along once.  The headline ratio is the per-row
    compression factor input_dim / target_dim.
    """
    for name, value in (
        ("input_dim", input_dim),
        ("target_dim", target_dim),
        ("rows", rows),
    ):
        if not isinstance(value, int) or value < 1:
            raise ValueError("%s must be a positive integer" % name)
    return {
        "input_bytes": rows * input_dim * 8,
        "rff_bytes": rows * target_dim * 8 + _DESCRIPTOR_BYTES,
        "ratio": input_dim / target_dim,
    }


def _pct(fraction: float) -> str:
    return "%.1f" % (100.0 * fraction)


def _align(header, body) -> str:
    table = [header] + body
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for row in table:
        cells = [row[0].ljust(widths[0])]
        cells += [row[i].rjust(widths[i]) for i in range(1, len(row))]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def render_class_table(reports: Mapping[str, EvalReport]) -> str:
    """Accuracy-percent table: one row per class plus overall, one column
    per named report."""
    if not reports:
        raise ValueError("no reports to render")
    names = list(reports)
    class_labels = reports[names[0]].class_labels
    body = [
        [label] + [_pct(reports[n].per_class_accuracy[label]) for n in names]
        for label in class_labels
    ]
    body.append(["overall"] + [_pct(reports[n].overall_accuracy) for n in names])
    return _align(["class"] + names, body)


def render_m_table(sweeps: Mapping[str, Sequence], input_dim: int | None = None) -> str:
    """Accuracy-percent table: one row per M, one column per named sweep.

    With ``input_dim`` given, a final column reports the storage ratio.
    """
    if not sweeps:
        raise ValueError("no sweeps to render")
    names = list(sweeps)
    m_values = [m for m, _ in sweeps[names[0]]]
    for name in names[1:]:
        if [m for m, _ in sweeps[name]] != m_values:
            raise ValueError("sweeps must share the same M values")
    body = []
    for i, m in enumerate(m_values):
        row = [str(m)] + [_pct(sweeps[n][i][1].overall_accuracy) for n in names]
        if input_dim is not None:
            row.append("%.1fx" % (input_dim / m))
        body.append(row)
    header = ["M"] + names + (["ratio"] if input_dim is not None else [])
    return _align(header, body)


def experiment_record(config: ExperimentConfig, report: EvalReport, storage=None) -> dict:
    """One JSON-ready object: config echo, results, confusion, timing."""
    record = {
        "config": {
            "kernel": config.spec.family,
            "gamma": config.spec.gamma,
            "mode": config.mode,
            "target_dim": config.target_dim,
            "map_seed": config.map_seed,
            "reseed_per_fold": config.reseed_per_fold,
            "regularization_c": config.svm.regularization_c,
            "tolerance": config.svm.tolerance,
            "max_iterations": config.svm.max_iterations,
            "shuffle_seed": config.svm.shuffle_seed,
        },
        "class_labels": list(report.class_labels),
        "overall_accuracy": report.overall_accuracy,
        "per_class_accuracy": dict(report.per_class_accuracy),
        "per_fold_accuracy": list(report.per_fold),
        "confusion": report.confusion.tolist(),
        "dims": dict(report.dims),
        "timing": dict(report.timing),
    }
    if storage is not None:
        record["storage"] = dict(storage)
    return record
