"""4D array containers, index conventions, and the DFT contract shared by all modules.

Conventions fixed here and relied on everywhere else:

* axes 1-3 are spatial, axis 4 is temporal; in-memory arrays have shape
  ``(n1, n2, n3, n4)`` and the on-disk flat layout has the axis-1 index
  varying fastest (NumPy order ``"F"``),
* the forward DFT is unnormalized, the inverse carries the ``1/N`` factor,
* frequency index ``k_i`` runs over ``{-n_i//2, ..., n_i//2 - 1}`` mapped to
  storage by the standard wrap-around (``numpy.fft.fftfreq`` layout).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ImaginaryResidueError(RuntimeError):
    """Inverse DFT produced a large imaginary part.

    Signals a broken Hermitian-symmetry assumption upstream (e.g. a filter
    that is not even under frequency negation).
    """


@dataclass(frozen=True)
class GridDims:
    """Samples per axis; axes 1-3 spatial, axis 4 temporal."""

    n1: int
    n2: int
    n3: int
    n4: int

    def __post_init__(self):
        for name in ("n1", "n2", "n3", "n4"):
            n = getattr(self, name)
            if not isinstance(n, (int, np.integer)) or n < 2:
                raise ValueError(f"{name} must be an integer >= 2, got {n!r}")
        for name in ("n1", "n2", "n3"):
            if getattr(self, name) % 2 != 0:
                raise ValueError(
                    f"spatial dim {name}={getattr(self, name)} must be even "
                    "(required by the half-grid frequency conventions)"
                )

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.n1, self.n2, self.n3, self.n4)

    @property
    def spatial(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)

    @property
    def size(self) -> int:
        return self.n1 * self.n2 * self.n3 * self.n4

    @classmethod
    def of(cls, shape) -> "GridDims":
        n1, n2, n3, n4 = (int(n) for n in shape)
        return cls(n1, n2, n3, n4)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Volume4:
    """Real-valued 4D sample grid. Immutable once constructed."""

    dims: GridDims
    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.shape != self.dims.shape:
            raise ValueError(f"data shape {a.shape} != dims {self.dims.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("volume contains non-finite values")
        object.__setattr__(self, "data", _freeze(a))

    @classmethod
    def zeros(cls, dims: GridDims) -> "Volume4":
        return cls(dims, np.zeros(dims.shape))

    @classmethod
    def from_array(cls, a: np.ndarray) -> "Volume4":
        return cls(GridDims.of(a.shape), a)


@dataclass(frozen=True)
class Spectrum4:
    """Complex 4D frequency grid in wrap-around layout. Immutable."""

    dims: GridDims
    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.complex128)
        if a.shape != self.dims.shape:
            raise ValueError(f"data shape {a.shape} != dims {self.dims.shape}")
        object.__setattr__(self, "data", _freeze(a))


def dft(v: Volume4) -> Spectrum4:
    """Unnormalized forward DFT of a volume."""
    return Spectrum4(v.dims, np.fft.fftn(v.data))


def idft_with_residue(s: Spectrum4) -> tuple[Volume4, float]:
    """Inverse DFT (with the 1/N factor); returns (real part, max imaginary residue).

    The residue is relative to the sup norm of the input spectrum (so all-but-
    zero bands do not trip on pure roundoff); values above 1e-6 raise
    :class:`ImaginaryResidueError`.
    """
    y = np.fft.ifftn(s.data)
    scale = float(np.max(np.abs(s.data)))
    residue = float(np.max(np.abs(y.imag))) / scale if scale > 0.0 else 0.0
    if residue > 1e-6:
        raise ImaginaryResidueError(
            f"imaginary residue {residue:.3e} exceeds 1e-6 of the spectrum scale"
        )
    return Volume4(s.dims, y.real), residue


def idft(s: Spectrum4) -> Volume4:
    """Inverse DFT returning the real part; errors on a large imaginary residue."""
    vol, _ = idft_with_residue(s)
    return vol


def ifftn_real(a: np.ndarray, rel_tol: float = 1e-6, ref_scale: float | None = None) -> np.ndarray:
    """Raw-array inverse FFT with real-part extraction and residue sentinel.

    Internal fast path used by the transform modules; same contract as
    :func:`idft` but without the container types. ``ref_scale`` lets windowed
    bands be judged against the sup norm of the spectrum they were cut from,
    so bands that are pure roundoff of the parent do not trip the sentinel.
    """
    y = np.fft.ifftn(a)
    scale = float(np.max(np.abs(a))) if ref_scale is None else ref_scale
    if scale > 0.0 and float(np.max(np.abs(y.imag))) > rel_tol * scale:
        raise ImaginaryResidueError(
            "imaginary residue exceeds tolerance; non-Hermitian spectrum upstream"
        )
    return np.ascontiguousarray(y.real)


def freq_grids(shape: tuple[int, ...]) -> list[np.ndarray]:
    """Integer frequency index along each axis, broadcast to full shape."""
    grids = []
    nd = len(shape)
    for ax, n in enumerate(shape):
        k = np.fft.fftfreq(n, d=1.0 / n).round().astype(np.int64)
        sl = [None] * nd
        sl[ax] = slice(None)
        grids.append(k[tuple(sl)])
    return grids


# -- raw volume file format ---------------------------------------------------
#
# <path>        : IEEE-754 little-endian float32, flat, axis-1 index fastest
# <path>.json   : {"dims": [n1,n2,n3,n4], "dtype": "f32", "order": "axis1-fastest"}

SIDECAR_SUFFIX = ".json"


def save_volume(path: str | Path, vol: Volume4, extra_meta: dict | None = None) -> None:
    path = Path(path)
    raw = np.asarray(vol.data, dtype="<f4").ravel(order="F")
    path.write_bytes(raw.tobytes())
    meta = {
        "dims": list(vol.dims.shape),
        "dtype": "f32",
        "order": "axis1-fastest",
    }
    if extra_meta:
        meta.update(extra_meta)
    Path(str(path) + SIDECAR_SUFFIX).write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_volume(path: str | Path) -> Volume4:
    path = Path(path)
    meta = json.loads(Path(str(path) + SIDECAR_SUFFIX).read_text())
    if meta.get("dtype") != "f32" or meta.get("order") != "axis1-fastest":
        raise ValueError(f"unsupported volume file layout: {meta}")
    dims = GridDims.of(meta["dims"])
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    if raw.size != dims.size:
        raise ValueError(f"file holds {raw.size} samples, sidecar dims need {dims.size}")
    return Volume4(dims, raw.astype(np.float64).reshape(dims.shape, order="F"))
