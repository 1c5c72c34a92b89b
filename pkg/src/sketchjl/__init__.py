"""Seeded sparse Johnson-Lindenstrauss embeddings built on polynomial hashing."""

from .cascade import CascadePlan, CascadeTransform, apply_cascade, custom_plan, plan_cascade, sample_cascade
from .dense_jl import DenseJLMatrix, DenseJLParams, apply_dense, plan_dense, sample_dense
from .diagnostics import (
    ExperimentReport,
    bucket_masses,
    build_T,
    check_eigenbound,
    clopper_pearson_upper,
    frobenius_sq,
    operator_norm,
    tail_experiment,
)
from .errors import *  # noqa: F403
from .field_hash import MERSENNE_61, PolyHashFamily, derive_seed, multipoint_eval, sample_family
from .sparse_jl import (
    SparseJLTransform,
    SparseParams,
    TurnstileSketch,
    apply_sparse,
    plan_sparse,
    sample_sparse,
    seed_bits,
    spread,
    update_sketch,
)

__version__ = "0.1.0"
