"""Facial reduction, singularity-degree estimation and Holderian error-bound
certificates for linear conic feasibility over symmetric-cone products."""

from . import algebra, affine, bounds, conegeom, harness, reduction
from .algebra import (
    AlgebraSpec,
    Element,
    FaceDescriptor,
    make_spec,
    orthant_block,
    spin_block,
    sym_block,
)
from .affine import AffineSet, make_affine
from .bounds import (
    ErrorBoundCertificate,
    ResidualFunction,
    doubly_nonnegative_problem,
    frf_polyhedral,
    frf_symmetric,
    intersection_lift,
    make_certificate,
)
from .conegeom import ConeHandle, cone_of
from .harness import (
    designed_singularity,
    dist_to_feasible,
    estimate_exponent,
    make_probe_samples,
    sturm_family,
)
from .reduction import (
    ReductionChain,
    find_reducing_direction,
    pps_holds,
    run_facial_reduction,
    trivial_intersection_certificate,
)

__version__ = "0.1.0"

__all__ = [
    "AlgebraSpec",
    "Element",
    "FaceDescriptor",
    "AffineSet",
    "ConeHandle",
    "ErrorBoundCertificate",
    "ResidualFunction",
    "ReductionChain",
    "make_spec",
    "sym_block",
    "spin_block",
    "orthant_block",
    "make_affine",
    "cone_of",
    "frf_symmetric",
    "frf_polyhedral",
    "make_certificate",
    "intersection_lift",
    "doubly_nonnegative_problem",
    "find_reducing_direction",
    "run_facial_reduction",
    "pps_holds",
    "trivial_intersection_certificate",
    "dist_to_feasible",
    "sturm_family",
    "designed_singularity",
    "make_probe_samples",
    "estimate_exponent",
    "algebra",
    "affine",
    "bounds",
    "conegeom",
    "harness",
    "reduction",
]
