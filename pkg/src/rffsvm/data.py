"""Dataset ingestion, synthetic data, and model persistence.

File formats:
  features  CSV rows ``segment_id,label,f1,...,fN`` (optional header,
            auto-detected; floats as shortest round-trip decimal text)
  manifest  CSV rows ``segment_id,fold_index`` with folds contiguous from 1
  model     JSON object with base64 little-endian float64 blocks; the
            random map is stored as its descriptor only, since the seed
            reproduces W and b exactly

All writers go through a temp file and an atomic rename, so a failed run
never leaves a partial artifact behind.
"""

from __future__ import annotations

import base64
import contextlib
import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from . import solver
from .features import RandomFeatureMap, map_from_descriptor, transform
from .kernels import KernelSpec, gram_matrix
from .pipeline import Normalizer, apply_normalizer
from .solver import BinaryKernelModel, BinaryLinearModel, SvmConfig, SvmModel

FORMAT_VERSION = "1"


def atomic_write_text(path, text: str) -> None:
    """Write a text file fully or not at all."""
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", prefix=".partial-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable feature table: one row per segment."""

    features: np.ndarray
    labels: tuple
    segment_ids: tuple
    fold_assignment: tuple | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("features must be a non-empty 2-D array")
        if not np.isfinite(X).all():
            raise ValueError("features must be finite")
        labels = tuple(str(v) for v in self.labels)
        ids = tuple(str(v) for v in self.segment_ids)
        if len(labels) != X.shape[0] or len(ids) != X.shape[0]:
            raise ValueError("labels and segment_ids must match the row count")
        if len(set(ids)) != len(ids):
            raise ValueError("segment_ids must be unique")
        folds = self.fold_assignment
        if folds is not None:
            folds = tuple(int(f) for f in folds)
            if len(folds) != X.shape[0]:
                raise ValueError("fold assignment must match the row count")
        X.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "segment_ids", ids)
        object.__setattr__(self, "fold_assignment", folds)

    @property
    def row_count(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    @property
    def class_labels(self) -> list:
        seen = []
        for label in self.labels:
            if label not in seen:
                seen.append(label)
        return seen

    def with_folds(self, assignment) -> "Dataset":
        return replace(self, fold_assignment=tuple(assignment))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.features, other.features)
            and self.labels == other.labels
            and self.segment_ids == other.segment_ids
            and self.fold_assignment == other.fold_assignment
        )


def load_features(path) -> Dataset:
    """Parse a feature CSV; the header row is optional and auto-detected."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        ids, labels, rows = [], [], []
        width = None
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) < 3:
                raise ValueError(
                    "line %d: expected segment_id, label and at least one feature"
                    % line
                )
            if width is None and rows == []:
                # a first row whose feature cells are not all numeric is a header
                try:
                    [float(cell) for cell in row[2:]]
                except ValueError:
                    width = len(row)
                    continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise ValueError(
                    "line %d: expected %d columns, found %d" % (line, width, len(row))
                )
            try:
                values = np.asarray(row[2:], dtype=np.float64)
            except ValueError:
                bad = next(c for c in row[2:] if not _is_float(c))
                raise ValueError(
                    "line %d: non-numeric feature value %r" % (line, bad)
                ) from None
            if not np.isfinite(values).all():
                raise ValueError("line %d: non-finite feature value" % line)
            ids.append(row[0])
            labels.append(row[1])
            rows.append(values)
    if not rows:
        raise ValueError("%s: no data rows" % path)
    return Dataset(np.vstack(rows), tuple(labels), tuple(ids))


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def save_features(dataset: Dataset, path) -> None:
    """Write the feature CSV; floats round-trip bit-exactly through repr."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for i in range(dataset.row_count):
        writer.writerow(
            [dataset.segment_ids[i], dataset.labels[i]]
            + [repr(v) for v in dataset.features[i].tolist()]
        )
    atomic_write_text(path, buffer.getvalue())


def load_fold_manifest(path, dataset: Dataset) -> tuple:
    """Read ``segment_id,fold_index`` lines aligned to the dataset.

    Every segment must appear exactly once, fold ids must be contiguous
    from 1, and each fold's training complement must keep at least two
    classes; all three are cheap to verify here, before any training.
    """
    assignment = {}
    known = set(dataset.segment_ids)
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != 2:
                raise ValueError("line %d: expected segment_id,fold_index" % line)
            sid, fold_text = row
            try:
                fold = int(fold_text)
            except ValueError:
                raise ValueError(
                    "line %d: fold index %r is not an integer" % (line, fold_text)
                ) from None
            if sid in assignment:
                raise ValueError("line %d: duplicate segment_id %r" % (line, sid))
            if sid not in known:
                raise ValueError("line %d: unknown segment_id %r" % (line, sid))
            assignment[sid] = fold
    for sid in dataset.segment_ids:
        if sid not in assignment:
            raise ValueError("segment %r is missing from the manifest" % (sid,))
    present = sorted(set(assignment.values()))
    if present != list(range(1, len(present) + 1)):
        raise ValueError("fold indices must be contiguous from 1, got %s" % (present,))
    out = tuple(assignment[sid] for sid in dataset.segment_ids)
    for fold in present:
        rest = {label for label, f in zip(dataset.labels, out) if f != fold}
        if len(rest) < 2:
            raise ValueError("fold %d leaves fewer than two classes for training" % fold)
    return out


def save_fold_manifest(dataset: Dataset, path) -> None:
    if dataset.fold_assignment is None:
        raise ValueError("dataset has no fold assignment")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for sid, fold in zip(dataset.segment_ids, dataset.fold_assignment):
        writer.writerow([sid, fold])
    atomic_write_text(path, buffer.getvalue())


def make_synthetic(
    class_count: int,
    per_class: int,
    dim: int,
    separation: float,
    seed: int,
    folds: int = 4,
) -> Dataset:
    """Deterministic Gaussian-blob dataset with a round-robin fold split.

    Class centers are drawn at random and rescaled so the closest pair
    sits exactly ``separation`` apart; within-class scatter is unit
    isotropic.  separation=0 collapses every center onto the origin,
    making the classes indistinguishable by construction.
    """
    for name, value in (
        ("class_count", class_count),
        ("per_class", per_class),
        ("dim", dim),
        ("folds", folds),
    ):
        if not isinstance(value, int) or value < 1:
            raise ValueError("%s must be a positive integer" % name)
    if not (np.isfinite(separation) and separation >= 0.0):
        raise ValueError("separation must be a nonnegative real")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    centers = rng.normal(size=(class_count, dim))
    if class_count == 1:
        centers[:] = 0.0
    elif separation == 0.0:
        centers *= 0.0
    else:
        diffs = centers[:, None, :] - centers[None, :, :]
        gaps = np.sqrt((diffs**2).sum(axis=-1))
        centers *= separation / gaps[np.triu_indices(class_count, k=1)].min()
    features = np.empty((class_count * per_class, dim))
    labels = []
    for k in range(class_count):
        block = slice(k * per_class, (k + 1) * per_class)
        features[block] = centers[k] + rng.normal(size=(per_class, dim))
        labels += ["class%02d" % k] * per_class
    ids = tuple("seg%05d" % i for i in range(len(labels)))
    fold_assignment = tuple(i % folds + 1 for i in range(len(labels)))
    return Dataset(features, tuple(labels), ids, fold_assignment)


@dataclass(frozen=True, eq=False)
class Predictor:
    """Everything prediction needs, reassembled from training or a file.

    Kernel-mode predictors carry their support rows (post-normalization)
    so the saved form is self-contained.
    """

    normalizer: Normalizer
    model: SvmModel
    fmap: RandomFeatureMap | None = None
    support_features: np.ndarray | None = None
    spec: KernelSpec | None = None

    def __post_init__(self):
        if self.model.mode == "kernel_precomputed":
            if self.support_features is None or self.spec is None:
                raise ValueError("kernel predictors need support features and a kernel spec")
            if self.fmap is not None:
                raise ValueError("kernel predictors do not use a feature map")
            sv = np.ascontiguousarray(self.support_features, dtype=np.float64)
            sv.flags.writeable = False
            object.__setattr__(self, "support_features", sv)
        elif self.support_features is not None:
            raise ValueError("support features only apply to kernel models")

    def _rows(self, features) -> np.ndarray:
        Z = apply_normalizer(self.normalizer, features)
        if self.fmap is not None:
            Z = transform(self.fmap, Z)
        if self.model.mode == "kernel_precomputed":
            Z = gram_matrix(self.spec, Z, self.support_features).values
        return Z

    def decision_values(self, features) -> np.ndarray:
        return solver.decision_values(self.model, self._rows(features))

    def predict(self, features):
        return solver.predict(self.model, self._rows(features))


def build_predictor(
    model: SvmModel,
    normalizer: Normalizer,
    fmap: RandomFeatureMap | None = None,
    train_features=None,
    spec: KernelSpec | None = None,
) -> Predictor:
    """Package a trained model for prediction and persistence.

    Kernel models are cut down to the union of their support rows;
    ``train_features`` must be the normalized matrix whose Gram the model
    was trained on.
    """
    if model.mode == "linear_explicit":
        if train_features is not None:
            raise ValueError("train_features only apply to kernel models")
        if fmap is not None and model.binaries[0].weights.shape[0] != fmap.target_dim + 1:
            raise ValueError("feature map and model dimensions disagree")
        return Predictor(normalizer=normalizer, model=model, fmap=fmap)
    if train_features is None:
        raise ValueError("kernel models need the training features they were built on")
    spec = spec if spec is not None else model.binaries[0].spec
    if spec is None:
        raise ValueError("kernel predictors need a kernel spec")
    X = np.ascontiguousarray(train_features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != model.binaries[0].alphas.shape[0]:
        raise ValueError("train_features do not match the model's training size")
    union = np.unique(np.concatenate([b.support_indices for b in model.binaries]))
    if union.size == 0:
        raise ValueError("model has no support vectors")
    reduced = [
        BinaryKernelModel(
            alphas=b.alphas[union],
            support_indices=np.flatnonzero(b.alphas[union]),
            spec=spec,
            converged=b.converged,
            epochs=b.epochs,
            dual_objective=b.dual_objective,
        )
        for b in model.binaries
    ]
    cut = SvmModel(list(model.class_labels), reduced, model.mode, model.config)
    return Predictor(
        normalizer=normalizer,
        model=cut,
        support_features=X[union],
        spec=spec,
    )


def _encode(arr) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _decode(text, count: int, what: str) -> np.ndarray:
    try:
        raw = base64.b64decode(str(text).encode("ascii"), validate=True)
    except ValueError as exc:
        raise ValueError("model file: bad binary block for %s" % what) from exc
    if len(raw) != count * 8:
        raise ValueError(
            "model file: %s holds %d bytes, expected %d" % (what, len(raw), count * 8)
        )
    return np.frombuffer(raw, dtype="<f8").astype(np.float64, copy=True)


def save_model(predictor: Predictor, path) -> None:
    """Serialize a predictor to a self-contained versioned file.

    The random map is stored as its descriptor only: the seed and the
    fixed draw order reproduce W and b bit-exactly on load, which also
    means the seed is the part to keep private if the map itself is
    meant to stay private.
    """
    model = predictor.model
    if predictor.spec is not None:
        spec = predictor.spec
    elif predictor.fmap is not None:
        spec = predictor.fmap.spec
    else:
        spec = KernelSpec("linear")
    payload = {
        "format_version": FORMAT_VERSION,
        "mode": model.mode,
        "kernel": {"family": spec.family, "gamma": spec.gamma},
        "class_labels": list(model.class_labels),
        "svm": {
            "regularization_c": model.config.regularization_c,
            "tolerance": model.config.tolerance,
            "max_iterations": model.config.max_iterations,
            "shuffle_seed": model.config.shuffle_seed,
        },
        "normalizer": {
            "dim": int(predictor.normalizer.mean.shape[0]),
            "mean": _encode(predictor.normalizer.mean),
            "std": _encode(predictor.normalizer.std),
        },
        "map": predictor.fmap.descriptor() if predictor.fmap is not None else None,
    }
    if model.mode == "linear_explicit":
        payload["binaries"] = [
            {
                "weights": _encode(b.weights),
                "dim": int(b.weights.shape[0]),
                "support_count": int(b.support_count),
                "converged": bool(b.converged),
                "epochs": int(b.epochs),
                "dual_objective": float(b.dual_objective),
            }
            for b in model.binaries
        ]
    else:
        sv = predictor.support_features
        payload["support"] = {
            "rows": int(sv.shape[0]),
            "cols": int(sv.shape[1]),
            "data": _encode(sv),
        }
        payload["binaries"] = [
            {
                "coef": _encode(b.alphas),
                "converged": bool(b.converged),
                "epochs": int(b.epochs),
                "dual_objective": float(b.dual_objective),
            }
            for b in model.binaries
        ]
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_model(path) -> Predictor:
    """Rebuild a predictor from a ``save_model`` file."""
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError("model file is truncated or not JSON: %s" % exc) from exc
    if not isinstance(payload, dict):
        raise ValueError("model file must hold a single top-level object")
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(
            "model format_version %r is not supported (this build reads %r)"
            % (version, FORMAT_VERSION)
        )
    try:
        return _reassemble(payload)
    except KeyError as exc:
        raise ValueError("model file is missing field %s" % exc) from None


def _reassemble(payload: dict) -> Predictor:
    mode = payload["mode"]
    config = SvmConfig(
        regularization_c=payload["svm"]["regularization_c"],
        tolerance=payload["svm"]["tolerance"],
        max_iterations=payload["svm"]["max_iterations"],
        shuffle_seed=payload["svm"]["shuffle_seed"],
    )
    norm_block = payload["normalizer"]
    dim = int(norm_block["dim"])
    normalizer = Normalizer(
        mean=_decode(norm_block["mean"], dim, "normalizer mean"),
        std=_decode(norm_block["std"], dim, "normalizer std"),
    )
    spec = KernelSpec(payload["kernel"]["family"], payload["kernel"]["gamma"])
    fmap = map_from_descriptor(payload["map"]) if payload["map"] is not None else None
    class_labels = [str(v) for v in payload["class_labels"]]

    if mode == "linear_explicit":
        binaries = []
        for i, block in enumerate(payload["binaries"]):
            weights = _decode(block["weights"], int(block["dim"]), "class %d weights" % i)
            binaries.append(
                BinaryLinearModel(
                    weights=weights,
                    support_count=int(block["support_count"]),
                    converged=bool(block["converged"]),
                    epochs=int(block["epochs"]),
                    dual_objective=float(block["dual_objective"]),
                )
            )
        if fmap is not None and binaries[0].weights.shape[0] != fmap.target_dim + 1:
            raise ValueError("model file: feature map and weight dimensions disagree")
        model = SvmModel(class_labels, binaries, mode, config)
        return Predictor(normalizer=normalizer, model=model, fmap=fmap)

    if mode == "kernel_precomputed":
        if payload["map"] is not None:
            raise ValueError("model file: kernel models do not carry a feature map")
        support = payload["support"]
        rows, cols = int(support["rows"]), int(support["cols"])
        sv = _decode(support["data"], rows * cols, "support features").reshape(rows, cols)
        binaries = []
        for i, block in enumerate(payload["binaries"]):
            coef = _decode(block["coef"], rows, "class %d coefficients" % i)
            binaries.append(
                BinaryKernelModel(
                    alphas=coef,
                    support_indices=np.flatnonzero(coef),
                    spec=spec,
                    converged=bool(block["converged"]),
                    epochs=int(block["epochs"]),
                    dual_objective=float(block["dual_objective"]),
                )
            )
        model = SvmModel(class_labels, binaries, mode, config)
        return Predictor(
            normalizer=normalizer, model=model, support_features=sv, spec=spec
        )

    raise ValueError("model file: unknown mode %r" % (mode,))
