"""Compressed matrix multiplication: Count-Sketches of a product AB built
from the factors with FFTs, without forming AB."""

from .covariance import SampleSet, scan_correlations, sketch_covariance, sketch_gram
from .estimate import estimate_frobenius_ub, estimate_nnz
from .matrix import SparseMatrix, from_dense, from_triplets, load_matrix_market, write_matrix_market
from .recovery import (
    build_code,
    compressed_product_recoverable,
    default_threshold,
    extract_sparse_approx,
    find_significant_entries,
    subtract_entries,
)
from .sketch import (
    CapacityError,
    SketchParams,
    SketchSet,
    compressed_product,
    decompress,
    decompress_all,
    sketch_add,
    sketch_scale,
)
from .sketchfile import load as load_sketch
from .sketchfile import save as save_sketch

__all__ = [
    "CapacityError", "SampleSet", "SketchParams", "SketchSet", "SparseMatrix",
    "build_code", "compressed_product", "compressed_product_recoverable", "decompress",
    "decompress_all", "default_threshold", "estimate_frobenius_ub", "estimate_nnz",
    "extract_sparse_approx", "find_significant_entries", "from_dense", "from_triplets",
    "load_matrix_market", "load_sketch", "save_sketch", "scan_correlations", "sketch_add",
    "sketch_covariance", "sketch_gram", "sketch_scale", "subtract_entries", "write_matrix_market",
]
