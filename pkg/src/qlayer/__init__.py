"""Quantum layers over immersed hypersurfaces: geometry, discretization, spectra and certificates."""

__version__ = "0.1.0"

from .catalog import BUILTINS, catalog_surface  # noqa: E402
from .certify import Certificate, Verdict  # noqa: E402
from .errors import QLayerError  # noqa: E402
from .spectral import transverse_threshold  # noqa: E402
from .tube import LayerGeometry  # noqa: E402

__all__ = ["BUILTINS", "Certificate", "LayerGeometry", "QLayerError", "Verdict", "catalog_surface",
           "transverse_threshold", "__version__"]
