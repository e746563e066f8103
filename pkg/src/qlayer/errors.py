"""Exception hierarchy.

Verdicts (a curvature condition failing, a gap too small to certify) are
data and never raised; these exceptions signal that a computation could not
be carried out, including a layer too thick for its base to be embedded.
"""


class QLayerError(Exception):
    """Base class for all package errors."""

    stage = "unknown"


class GeometryError(QLayerError):
    stage = "geometry"


class RankDeficient(GeometryError):
    pass


class NormalUndefined(GeometryError):
    pass


class UnsupportedDimension(GeometryError):
    pass


class TruncationExceeded(GeometryError):
    pass


class InsufficientRadii(GeometryError):
    pass


class NonMonotoneVolumes(GeometryError):
    pass


class LayerError(QLayerError):
    stage = "layer"


class OutOfLayer(LayerError):
    pass


class Degenerate(LayerError):
    pass


class InvalidLayer(LayerError):
    """Raised by the experiment runner when validity_check fails."""


class MeshError(QLayerError):
    stage = "mesh"


class ResolutionTooCoarse(MeshError):
    pass


class DomainExceeded(MeshError):
    pass


class EmptyInterior(MeshError):
    pass


class AssemblyNaN(MeshError):
    pass


class SpectralError(QLayerError):
    stage = "spectral"


class NoConvergence(SpectralError):
    pass


class FactorizationFailure(SpectralError):
    pass


class ZeroVector(SpectralError):
    pass


class MonotonicityViolation(SpectralError):
    pass


class CertifyError(QLayerError):
    stage = "certify"


class NonConvergentTail(CertifyError):
    pass


class HypothesisUnmet(CertifyError):
    pass


class CatalogError(QLayerError):
    stage = "catalog"


class UnknownSurface(CatalogError):
    pass


class BadParameters(CatalogError):
    pass


class MissingTable(QLayerError):
    stage = "plot"


class BlockStructure(LayerError):
    """Pullback metric lost its product block form (normal field is not unit or not normal)."""
