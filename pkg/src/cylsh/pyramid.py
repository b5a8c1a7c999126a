"""Frequency-domain multiscale subband decomposition with exact inverse = adjoint.

The scale windows form a squared partition of unity on the discrete frequency
grid: ``sum_j W_j(xi)^2 = 1`` at every grid point. Window ``j >= 1`` lives on a
dyadic corona (ratio 4 between consecutive coronae, matching the 2^(2j)
parabolic scale progression), window 0 is the lowpass block absorbing whatever
remains near DC. The radial coordinate is the per-axis-normalized max norm
``r(xi) = max_i |k_i| / nyq_i``, so the coronae are Cartesian (max-norm) shells
and anisotropic grids are handled uniformly.

Profiles are squared-cosine (Meyer-type) ramps with transition width equal to
half a corona; windows at scale j are exactly zero outside
``r in [rho_j/8, rho_j]`` with ``rho_j = 4^(j-J)``.

Because decomposition and recomposition multiply by the *same* real windows in
the frequency domain, recompose is simultaneously the exact inverse and the
exact adjoint of decompose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GridDims, Volume4, freq_grids, ifftn_real


def normalized_radius(shape: tuple[int, ...]) -> np.ndarray:
    """Max-norm radius max_i |k_i|/nyq_i on the wrap-around frequency grid."""
    r = np.zeros(shape)
    for ax, k in enumerate(freq_grids(shape)):
        nyq = shape[ax] // 2
        np.maximum(r, np.abs(k) / nyq, out=r)
    return r


def max_scales(shape: tuple[int, ...]) -> int:
    """Largest feasible scale count J for a grid (coarser scales would fall below DC resolution)."""
    nyq_min = min(n // 2 for n in shape)
    return int(math.floor(math.log(nyq_min, 4))) + 1


def _ramp(r: np.ndarray, cutoff: float) -> np.ndarray:
    """C^1 squared-cosine ramp: 1 for r <= cutoff/2, 0 for r >= cutoff."""
    t = (r - cutoff / 2.0) / (cutoff / 2.0)
    out = np.cos(0.5 * np.pi * np.clip(t, 0.0, 1.0)) ** 2
    out[t <= 0.0] = 1.0
    out[t >= 1.0] = 0.0
    return out


def corona_bounds(J: int, j: int) -> tuple[float, float]:
    """Normalized [inner, outer] radius bounds of the support of window j."""
    if j == 0:
        return (0.0, 4.0 ** (-J))
    rho = 4.0 ** (j - J)
    return (rho / 8.0, rho)


def build_window_arrays(shape: tuple[int, ...], J: int) -> list[np.ndarray]:
    """Raw window arrays W_0..W_J for an arbitrary-rank grid (shared by the 3D mode)."""
    if J < 1:
        raise ValueError(f"scale count J must be >= 1, got {J}")
    jmax = max_scales(shape)
    if J > jmax:
        raise ValueError(f"J={J} too large for dims {shape}; maximum feasible J is {jmax}")
    r = normalized_radius(shape)
    ramps = [_ramp(r, 4.0 ** (j - J)) for j in range(J)]  # L_0 .. L_{J-1}
    windows = [ramps[0]]
    for j in range(1, J):
        windows.append(np.sqrt(np.maximum(ramps[j] ** 2 - ramps[j - 1] ** 2, 0.0)))
    windows.append(np.sqrt(np.maximum(1.0 - ramps[J - 1] ** 2, 0.0)))
    return windows


@dataclass(frozen=True)
class WindowBank:
    """Scale windows W_0..W_J on the full frequency grid (index 0 = lowpass)."""

    dims: GridDims
    J: int
    windows: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class SubbandStack:
    dims: GridDims
    J: int
    bands: tuple[Volume4, ...]


def build_windows(dims: GridDims, J: int) -> WindowBank:
    arrays = build_window_arrays(dims.shape, J)
    for a in arrays:
        a.setflags(write=False)
    return WindowBank(dims, J, tuple(arrays))


def decompose(f: Volume4, wb: WindowBank) -> SubbandStack:
    """Split a volume into J+1 subbands by frequency windowing."""
    if f.dims != wb.dims:
        raise ValueError(f"volume dims {f.dims} do not match window bank dims {wb.dims}")
    spec = np.fft.fftn(f.data)
    ref = float(np.max(np.abs(spec)))
    bands = tuple(Volume4(f.dims, ifftn_real(spec * w, ref_scale=ref)) for w in wb.windows)
    return SubbandStack(f.dims, wb.J, bands)


def recompose(s: SubbandStack, wb: WindowBank) -> Volume4:
    """Inverse (= adjoint) of decompose: accumulate W_j-weighted band spectra."""
    if s.dims != wb.dims:
        raise ValueError(f"stack dims {s.dims} do not match window bank dims {wb.dims}")
    if len(s.bands) != len(wb.windows):
        raise ValueError(f"stack holds {len(s.bands)} bands, bank expects {len(wb.windows)}")
    acc = np.zeros(s.dims.shape, dtype=np.complex128)
    for band, w in zip(s.bands, wb.windows):
        acc += np.fft.fftn(band.data) * w
    return Volume4(s.dims, ifftn_real(acc))
