"""Random cosine features for shift-invariant kernels, plus SVM training.

Approximates gaussian, laplacian and cauchy kernels with randomized cosine
feature maps, trains linear or kernelized soft-margin SVMs on top, and runs
the cross-validated accuracy-vs-dimension experiment protocol.
"""

from .kernels import (
    FAMILIES,
    NONLINEAR_FAMILIES,
    GramMatrix,
    KernelSpec,
    gram_matrix,
    kernel_eval,
    shift_invariance_check,
)
from .features import (
    RandomFeatureMap,
    approx_gram,
    build_map,
    export_dense,
    map_from_descriptor,
    sample_spectral,
    transform,
)
from .solver import (
    BACKEND,
    BinaryKernelModel,
    BinaryLinearModel,
    SvmConfig,
    SvmModel,
    decision_values,
    predict,
    train_binary_kernel,
    train_binary_linear,
    train_multiclass,
)
from .pipeline import (
    EvalReport,
    ExperimentConfig,
    GridResult,
    Normalizer,
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
from .data import (
    FORMAT_VERSION,
    Dataset,
    Predictor,
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

__version__ = "0.1.0"

__all__ = [
    "FAMILIES",
    "NONLINEAR_FAMILIES",
    "GramMatrix",
    "KernelSpec",
    "gram_matrix",
    "kernel_eval",
    "shift_invariance_check",
    "RandomFeatureMap",
    "approx_gram",
    "build_map",
    "export_dense",
    "map_from_descriptor",
    "sample_spectral",
    "transform",
    "BACKEND",
    "BinaryKernelModel",
    "BinaryLinearModel",
    "SvmConfig",
    "SvmModel",
    "decision_values",
    "predict",
    "train_binary_kernel",
    "train_binary_linear",
    "train_multiclass",
    "EvalReport",
    "ExperimentConfig",
    "GridResult",
    "Normalizer",
    "apply_normalizer",
    "experiment_record",
    "fit_normalizer",
    "grid_search",
    "render_class_table",
    "render_m_table",
    "run_experiment",
    "storage_report",
    "sweep_m",
    "FORMAT_VERSION",
    "Dataset",
    "Predictor",
    "atomic_write_text",
    "build_predictor",
    "load_features",
    "load_fold_manifest",
    "load_model",
    "make_synthetic",
    "save_features",
    "save_fold_manifest",
    "save_model",
    "__version__",
]
