"""Near-field and far-field spatial correlation matrices for large uniform linear arrays."""

from .correlation import (BUILDERS, CorrelationMatrix, QuadratureSpec, QuadratureWarning,
                          ff_closed_form, ff_correlation, ff_lemma3_correlation,
                          ff_one_ring_correlation, nf_closed_form, nf_correlation_general,
                          nf_lemma2_correlation, nf_one_ring_correlation)
from .errors import (BesselRangeError, DomainError, NfcorrError, SingularityError,
                     ValidationError)
from .geometry import ArrayGeometry, PolarPoint, TransmitterLocation
from .io import __version__
from .montecarlo import ExponentialRcs, MonteCarloSpec, UnitGain, estimate_correlation
from .scattering import (GeneralizedOneRing, PointSetSpectrum, TabulatedPdf,
                         TabulatedPolarSpectrum, UniformPdf, VonMisesPdf)
from .spectrum import EigenSpectrum, hermitian_eigendecompose, significant_count

__all__ = [
    "ArrayGeometry", "BUILDERS", "BesselRangeError", "CorrelationMatrix", "DomainError",
    "EigenSpectrum", "ExponentialRcs", "GeneralizedOneRing", "MonteCarloSpec", "NfcorrError",
    "PointSetSpectrum", "PolarPoint", "QuadratureSpec", "QuadratureWarning", "SingularityError",
    "TabulatedPdf", "TabulatedPolarSpectrum", "TransmitterLocation", "UniformPdf", "UnitGain",
    "ValidationError", "VonMisesPdf", "__version__", "estimate_correlation", "ff_closed_form",
    "ff_correlation", "ff_lemma3_correlation", "ff_one_ring_correlation",
    "hermitian_eigendecompose", "nf_closed_form", "nf_correlation_general",
    "nf_lemma2_correlation", "nf_one_ring_correlation", "significant_count",
]
