"""4D cylindrical shearlets, sparse-regularized dynamic CT, and approximation benchmarks."""

from .core import GridDims, Spectrum4, Volume4, dft, idft, load_volume, save_volume

__version__ = "0.1.0"

__all__ = [
    "GridDims",
    "Volume4",
    "Spectrum4",
    "dft",
    "idft",
    "save_volume",
    "load_volume",
    "__version__",
]
