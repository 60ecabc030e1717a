"""Virtual-fabrication modeling and CNN-based layout correction.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._core import (
    Dataset,
    Ensemble,
    FabfixError,
    __version__,
    correct,
    diff_map,
    error_pixels,
    evaluate_bce,
    fabricate,
    fabricate_field,
    generate_pattern,
    predict,
    rasterize,
    read_pgm,
    read_pgm_field,
    reduction_factor,
    train_corrector_ensemble,
    train_forward_ensemble,
    uncertainty_mask,
    write_pgm,
)

__all__ = [
    "Dataset",
    "Ensemble",
    "FabfixError",
    "__version__",
    "correct",
    "diff_map",
    "error_pixels",
    "evaluate_bce",
    "fabricate",
    "fabricate_field",
    "generate_pattern",
    "predict",
    "rasterize",
    "read_pgm",
    "read_pgm_field",
    "reduction_factor",
    "train_corrector_ensemble",
    "train_forward_ensemble",
    "uncertainty_mask",
    "write_pgm",
]
