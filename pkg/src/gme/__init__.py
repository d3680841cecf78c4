"""Average differential entropy of Gaussian mixtures with Gaussian-distributed centers."""

from gme.errors import (
    AssemblyMismatch,
    DegenerateParameter,
    InvalidArgument,
    PreconditionError,
    ValidityRegionError,
)
from gme.mixture import (
    CenterSet,
    EntropyEstimate,
    MixtureConfig,
    log_density,
    reduce_centers,
    reduce_dimension,
    sample_centers,
    sample_mixture,
)
from gme.oracle import (
    McSettings,
    average_entropy,
    component_bound,
    entropy_given_centers,
    fit_power_law,
    gaussian_bound,
)
from gme.series_brute import (
    MomentName,
    SeriesCoefficients,
    entropy_series,
    moment_closed_form,
    moment_mc,
    series_coefficients,
)
from gme.series_det import (
    QuadraticFormMatrix,
    build_P,
    build_Q,
    det_closed_form,
    det_numeric,
    entropy_det,
    z1,
    z2,
)
from gme.spectral import (
    MixingMatrix,
    SpectralDecomposition,
    eigenbasis,
    eigenvalues,
    identity_suite,
    mixing_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "AssemblyMismatch", "DegenerateParameter", "InvalidArgument", "PreconditionError",
    "ValidityRegionError", "CenterSet", "EntropyEstimate", "MixtureConfig", "log_density",
    "reduce_centers", "reduce_dimension", "sample_centers", "sample_mixture", "McSettings",
    "average_entropy", "component_bound", "entropy_given_centers", "fit_power_law",
    "gaussian_bound", "MomentName", "SeriesCoefficients", "entropy_series",
    "moment_closed_form", "moment_mc", "series_coefficients", "QuadraticFormMatrix",
    "build_P", "build_Q", "det_closed_form", "det_numeric", "entropy_det", "z1", "z2",
    "MixingMatrix", "SpectralDecomposition", "eigenbasis", "eigenvalues", "identity_suite",
    "mixing_matrix",
]
