"""Fourier analysis on Hilbert spaces through eigenfunction expansions.

Modules: :mod:`~spectraseq.spectrum` (eigenvalue data), :mod:`~spectraseq.coeffs`
(block sequences and Sobolev scales), :mod:`~spectraseq.operators` (block
tensors and adjoints), :mod:`~spectraseq.universality` (torus bases and the
delta mapping), :mod:`~spectraseq.komatsu` (weight-sequence checks).
"""

__version__ = "0.1.0"

from .coeffs import (
    BlockSequence,
    DecayReport,
    abs_pairing,
    apply_power,
    block_hs_norms,
    cauchy_schwarz_gap,
    classify_decay,
    coordinate_dual,
    dual_certificate,
    load_coeffs,
    modulus,
    pairing,
    save_coeffs,
    sobolev_norm,
)
from .komatsu import KomatsuSequence, find_constants, load_komatsu, validate_conditions
from .operators import (
    BlockTensor,
    SequentialityReport,
    adjoint,
    adjointness_residual,
    apply,
    extract_tensor,
    extract_tensor_dual,
    hs_pairing_bound,
    load_tensor,
    save_tensor,
    sequentiality_check,
    truncation_limit_check,
)
from .spectrum import (
    Spectrum,
    SummabilityReport,
    counting_exponent,
    group_eigenvalues,
    load_spectrum,
    minimal_s0,
    save_spectrum,
    summability_test,
    torus_laplacian_spectrum,
)
from .universality import (
    EigenBasis,
    Point,
    delta_coefficients,
    evaluate,
    factorization_check,
    fourier_coefficients,
    hinf_mapping_check,
    torus_basis,
)
