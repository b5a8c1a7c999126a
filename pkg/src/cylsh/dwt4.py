"""Separable 4D orthogonal Daubechies-2 wavelet transform, periodic boundaries.

Critically sampled: the coefficient count equals the grid size, the analysis
is an isometry, and the inverse equals the adjoint. Filter taps are hard-coded
(16 significant digits) and unit-tested against the defining quadrature
conditions rather than taken from an external package.

Single-level layout: analysis along an axis stacks the lowpass half before the
highpass half of that axis, so one full level turns the array into 2^ndim
orthant blocks. The block whose axes are all lowpass is the approximation and
recursion continues there. Detail blocks are keyed by an orientation mask
whose bit i set means highpass along axis i.

Flat canonical order (used by the solver and the N-term benchmarks):
``[final approximation | details coarsest level -> finest, masks ascending]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GridDims, Volume4

#: Daubechies-2 analysis lowpass taps: ((1+sqrt3), (3+sqrt3), (3-sqrt3), (1-sqrt3)) / (4 sqrt2)
DB2_LO = np.array(
    [0.4829629131445341, 0.8365163037378079, 0.2241438680420134, -0.1294095225512604]
)
#: quadrature mirror highpass: g[n] = (-1)^n h[3-n]
DB2_HI = np.array(
    [-0.1294095225512604, -0.2241438680420134, 0.8365163037378079, -0.4829629131445341]
)


def _analyze_axis(x: np.ndarray, axis: int) -> np.ndarray:
    n = x.shape[axis]
    xt = np.moveaxis(x, axis, 0)
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(4)[None, :]) % n
    win = xt[idx]  # (n/2, 4, ...)
    taps_shape = (1, 4) + (1,) * (x.ndim - 1)
    lo = (win * DB2_LO.reshape(taps_shape)).sum(axis=1)
    hi = (win * DB2_HI.reshape(taps_shape)).sum(axis=1)
    return np.moveaxis(np.concatenate([lo, hi], axis=0), 0, axis)


def _synthesize_axis(y: np.ndarray, axis: int) -> np.ndarray:
    n = y.shape[axis]
    yt = np.moveaxis(y, axis, 0)
    lo, hi = yt[: n // 2], yt[n // 2 :]
    m = np.arange(n)
    n1 = m % 2
    k1 = ((m - n1) % n) // 2
    k2 = ((m - n1 - 2) % n) // 2
    tail_shape = (n,) + (1,) * (y.ndim - 1)
    x = (
        DB2_LO[n1].reshape(tail_shape) * lo[k1]
        + DB2_HI[n1].reshape(tail_shape) * hi[k1]
        + DB2_LO[n1 + 2].reshape(tail_shape) * lo[k2]
        + DB2_HI[n1 + 2].reshape(tail_shape) * hi[k2]
    )
    return np.moveaxis(x, 0, axis)


def analyze_level(x: np.ndarray) -> np.ndarray:
    """One analysis level along every axis; halves stacked lowpass-first."""
    for ax in range(x.ndim):
        x = _analyze_axis(x, ax)
    return x


def synthesize_level(y: np.ndarray) -> np.ndarray:
    for ax in range(y.ndim):
        y = _synthesize_axis(y, ax)
    return y


def _block(y: np.ndarray, mask: int) -> np.ndarray:
    slices = []
    for ax in range(y.ndim):
        half = y.shape[ax] // 2
        slices.append(slice(half, 2 * half) if (mask >> ax) & 1 else slice(0, half))
    return y[tuple(slices)]


@dataclass(frozen=True)
class WaveletCoeffs:
    """Per-level detail orientations plus the final approximation."""

    dims: GridDims
    levels: int
    details: tuple[dict[int, np.ndarray], ...]  # index 0 = finest level
    approx: np.ndarray

    def count(self) -> int:
        return self.approx.size + sum(b.size for lev in self.details for b in lev.values())


def dwt4_forward(f: Volume4, levels: int) -> WaveletCoeffs:
    """Multilevel separable db2 analysis."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    for n in f.dims.shape:
        if n % (1 << levels) != 0:
            raise ValueError(f"dim {n} not divisible by 2^{levels}")
    cur = np.asarray(f.data)
    details = []
    for _ in range(levels):
        y = analyze_level(cur)
        details.append({mask: np.ascontiguousarray(_block(y, mask)) for mask in range(1, 16)})
        cur = np.ascontiguousarray(_block(y, 0))
    return WaveletCoeffs(f.dims, levels, tuple(details), cur)


def dwt4_inverse(c: WaveletCoeffs) -> Volume4:
    """Perfect-reconstruction synthesis (equals the adjoint: orthonormal filters)."""
    cur = c.approx
    for lev in range(c.levels - 1, -1, -1):
        shape = tuple(2 * n for n in cur.shape)
        if set(c.details[lev]) != set(range(1, 16)):
            raise ValueError(f"level {lev} detail orientations incomplete")
        y = np.empty(shape)
        slices0 = tuple(slice(0, n // 2) for n in shape)
        y[slices0] = cur
        for mask in range(1, 16):
            band = c.details[lev][mask]
            expect = tuple(n // 2 for n in shape)
            if band.shape != expect:
                raise ValueError(f"level {lev} mask {mask}: shape {band.shape} != {expect}")
            sl = []
            for ax in range(4):
                half = shape[ax] // 2
                sl.append(slice(half, 2 * half) if (mask >> ax) & 1 else slice(0, half))
            y[tuple(sl)] = band
        cur = synthesize_level(y)
    if cur.shape != c.dims.shape:
        raise ValueError(f"coefficient layout reconstructs {cur.shape}, dims say {c.dims.shape}")
    return Volume4(c.dims, cur)


# -- flat canonical layout -----------------------------------------------------


def coeff_count(dims: GridDims) -> int:
    return dims.size


def dwt4_forward_flat(x: np.ndarray, levels: int) -> np.ndarray:
    c = dwt4_forward(Volume4(GridDims.of(x.shape), x), levels)
    parts = [c.approx.ravel()]
    for lev in range(c.levels - 1, -1, -1):
        for mask in range(1, 16):
            parts.append(c.details[lev][mask].ravel())
    return np.concatenate(parts)


def flat_detail_offset(dims: GridDims, levels: int) -> int:
    """Length of the leading approximation block in the flat layout."""
    return dims.size // (1 << (4 * levels))


def dwt4_inverse_flat(flat: np.ndarray, dims: GridDims, levels: int) -> np.ndarray:
    if flat.size != dims.size:
        raise ValueError(f"flat vector has {flat.size} entries, grid needs {dims.size}")
    pos = flat_detail_offset(dims, levels)
    approx_shape = tuple(n >> levels for n in dims.shape)
    approx = flat[:pos].reshape(approx_shape)
    details = []
    for lev in range(levels - 1, -1, -1):
        shape = tuple(n >> lev for n in dims.shape)
        block = tuple(n // 2 for n in shape)
        size = int(np.prod(block))
        d = {}
        for mask in range(1, 16):
            d[mask] = flat[pos : pos + size].reshape(block)
            pos += size
        details.append(d)
    details.reverse()  # back to finest-first
    return dwt4_inverse(WaveletCoeffs(dims, levels, tuple(details), approx)).data
