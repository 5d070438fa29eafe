"""Markov dynamics on signatures and Gelfand-Tsetlin patterns driven by boundary points of U(infinity)."""

from .evolve import (
    EvolvedMeasure,
    TruncationExitError,
    evolve_measure,
    poisson_weights,
    sample_path,
    sample_paths,
    semigroup_at,
    semigroup_rows,
    uniformize,
)
from .generators import KernelMatrix, generator, generator_fusion, q2_schur_measure
from .links import LinkMatrix, boundary_link, link, verify_intertwine
from .signatures import GTPattern, SignatureBox, enumerate_box, format_signature, parse_signature
from .toeplitz import ResamplingError, delta_kernel, multilevel_step, pn_row
from .voiculescu import DomainError, OmegaPoint, WindowCapError, phi_eval

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "EvolvedMeasure",
    "GTPattern",
    "KernelMatrix",
    "LinkMatrix",
    "OmegaPoint",
    "ResamplingError",
    "SignatureBox",
    "TruncationExitError",
    "WindowCapError",
    "boundary_link",
    "delta_kernel",
    "enumerate_box",
    "evolve_measure",
    "format_signature",
    "generator",
    "generator_fusion",
    "link",
    "multilevel_step",
    "parse_signature",
    "phi_eval",
    "pn_row",
    "poisson_weights",
    "q2_schur_measure",
    "sample_path",
    "sample_paths",
    "semigroup_at",
    "semigroup_rows",
    "uniformize",
    "verify_intertwine",
]
