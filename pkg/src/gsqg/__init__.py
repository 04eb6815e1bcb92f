"""Point vortices and vortex blobs for inviscid generalized SQG, 1 < m < 2."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .kernel import KernelSpec, biot_savart, green_constant, kernel, kernel_bounds, regularized_kernel
from .vortex_dynamics import VortexConfiguration, integrate, validate_intensities
from .blob_transport import BlobSpec, ExternalField, ParticleEnsemble, discretize_blob, evolve
from .measure_metrics import DiscreteSignedMeasure, discretize_measure, w1

__all__ = [
    "__version__",
    "KernelSpec",
    "biot_savart",
    "green_constant",
    "kernel",
    "kernel_bounds",
    "regularized_kernel",
    "VortexConfiguration",
    "integrate",
    "validate_intensities",
    "BlobSpec",
    "ExternalField",
    "ParticleEnsemble",
    "discretize_blob",
    "evolve",
    "DiscreteSignedMeasure",
    "discretize_measure",
    "w1",
]
