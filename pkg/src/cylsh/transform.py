"""Forward, inverse, and adjoint discrete cylindrical shearlet transform.

The forward transform windows the input spectrum into scale subbands and
multiplies each detail subband by every directional filter of its scale; all
convolutions are pointwise spectral products. Because the directional filters
sum to one at each scale, the inverse simply adds the detail bands per scale
and feeds them through the subband recomposition. The adjoint instead weights
each band by its own filter before recomposition, so adjoint != inverse (the
system is a left-invertible frame, not a Parseval-normalized one; the window
identity sum W_j^2 = 1 is what carries the tight-frame structure).

Coefficient containers come in two layouts:

* :class:`CoeffSet` - the structured surface (coarse band + one volume per
  shear index), used by serialization and the public API;
* flat 1D vectors (coarse block first, then detail bands in canonical sorted
  index order) via ``forward_flat`` / ``inverse_flat`` / ``adjoint_flat``,
  used by the solver and the approximation benchmarks.

Systems are shape-generic: a 4-tuple grid gives the spatio-temporal transform
(filters constant along the last axis), a 3-tuple grid gives the all-spatial
3D variant used for cross-checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import GridDims, Volume4, ifftn_real, load_volume, save_volume
from .dirfilters import DirFilterBank, ShearConfig, ShearIndex, build_filter_arrays
from .pyramid import WindowBank, build_window_arrays


@dataclass(frozen=True)
class ShearletSystem:
    """Precomputed window bank and directional filter bank for one grid."""

    shape: tuple[int, ...]
    config: ShearConfig
    windows: tuple[np.ndarray, ...]
    filters: dict[ShearIndex, np.ndarray]

    def __post_init__(self):
        if len(self.shape) not in (3, 4):
            raise ValueError(f"grid must be 3D or 4D, got shape {self.shape}")
        if len(self.windows) != self.config.J + 1:
            raise ValueError("window bank scale count does not match config")

    @property
    def dims(self) -> GridDims:
        return GridDims.of(self.shape)

    @property
    def grid_size(self) -> int:
        return int(np.prod(self.shape))

    def detail_indices(self) -> list[ShearIndex]:
        """Canonical (sorted) index order used everywhere bands are enumerated."""
        return sorted(self.filters)

    def expand(self, v: np.ndarray) -> np.ndarray:
        """Broadcast a spatial filter over the temporal axis, if present."""
        return v if len(self.shape) == 3 else v[..., None]

    def coeff_count(self) -> int:
        return self.grid_size * (1 + len(self.filters))

    def window_bank(self) -> WindowBank:
        return WindowBank(self.dims, self.config.J, self.windows)

    def filter_bank(self) -> DirFilterBank:
        return DirFilterBank(self.dims, self.config, self.filters)


def build_system(
    shape, J: int, shear_radii, layout: str = "odd"
) -> ShearletSystem:
    if isinstance(shape, GridDims):
        shape = shape.shape
    shape = tuple(int(n) for n in shape)
    config = ShearConfig(J=J, radii=tuple(int(L) for L in shear_radii), layout=layout)
    windows = build_window_arrays(shape, J)
    for w in windows:
        w.setflags(write=False)
    filters = build_filter_arrays(shape[:3], config)
    return ShearletSystem(shape, config, tuple(windows), filters)


@dataclass(frozen=True)
class CoeffSet:
    """Transform coefficients: coarse band plus one volume per shear index."""

    coarse: Volume4
    detail: dict[ShearIndex, Volume4]

    @property
    def dims(self) -> GridDims:
        return self.coarse.dims


def _check_indices(c: CoeffSet, sys: ShearletSystem) -> None:
    have, want = set(c.detail), set(sys.filters)
    if have != want:
        missing = sorted(want - have)[:3]
        extra = sorted(have - want)[:3]
        raise ValueError(f"coefficient index set mismatch: missing {missing}, extra {extra}")


# -- flat layout: [coarse | detail bands in canonical order] -------------------


def detail_slice(sys: ShearletSystem) -> slice:
    return slice(sys.grid_size, sys.coeff_count())


def forward_flat(sys: ShearletSystem, x: np.ndarray) -> np.ndarray:
    if x.shape != sys.shape:
        raise ValueError(f"input shape {x.shape} does not match system grid {sys.shape}")
    n = sys.grid_size
    out = np.empty(sys.coeff_count())
    spec = np.fft.fftn(x)
    ref = float(np.max(np.abs(spec)))
    out[:n] = ifftn_real(spec * sys.windows[0], ref_scale=ref).ravel()
    pos = n
    for j in range(1, sys.config.J + 1):
        spec_j = spec * sys.windows[j]
        for idx in sys.detail_indices():
            if idx.j != j:
                continue
            out[pos : pos + n] = ifftn_real(spec_j * sys.expand(sys.filters[idx]), ref_scale=ref).ravel()
            pos += n
    return out


def inverse_flat(sys: ShearletSystem, flat: np.ndarray) -> np.ndarray:
    n = sys.grid_size
    if flat.size != sys.coeff_count():
        raise ValueError(f"flat coefficient vector has {flat.size} entries, expected {sys.coeff_count()}")
    acc = np.fft.fftn(flat[:n].reshape(sys.shape)) * sys.windows[0]
    pos = n
    for j in range(1, sys.config.J + 1):
        band_sum = np.zeros(sys.shape)
        for idx in sys.detail_indices():
            if idx.j != j:
                continue
            band_sum += flat[pos : pos + n].reshape(sys.shape)
            pos += n
        acc += np.fft.fftn(band_sum) * sys.windows[j]
    return ifftn_real(acc)


def adjoint_flat(sys: ShearletSystem, flat: np.ndarray) -> np.ndarray:
    n = sys.grid_size
    if flat.size != sys.coeff_count():
        raise ValueError(f"flat coefficient vector has {flat.size} entries, expected {sys.coeff_count()}")
    acc = np.fft.fftn(flat[:n].reshape(sys.shape)) * sys.windows[0]
    pos = n
    for j in range(1, sys.config.J + 1):
        scale_acc = np.zeros(sys.shape, dtype=np.complex128)
        for idx in sys.detail_indices():
            if idx.j != j:
                continue
            scale_acc += np.fft.fftn(flat[pos : pos + n].reshape(sys.shape)) * sys.expand(
                sys.filters[idx]
            )
            pos += n
        acc += scale_acc * sys.windows[j]
    return ifftn_real(acc)


def _flat_to_coeffset(sys: ShearletSystem, flat: np.ndarray) -> CoeffSet:
    dims = sys.dims
    n = sys.grid_size
    coarse = Volume4(dims, flat[:n].reshape(sys.shape))
    detail = {}
    pos = n
    for idx in sys.detail_indices():
        detail[idx] = Volume4(dims, flat[pos : pos + n].reshape(sys.shape))
        pos += n
    return CoeffSet(coarse, detail)


def _coeffset_to_flat(sys: ShearletSystem, c: CoeffSet) -> np.ndarray:
    _check_indices(c, sys)
    n = sys.grid_size
    flat = np.empty(sys.coeff_count())
    flat[:n] = c.coarse.data.ravel()
    pos = n
    for idx in sys.detail_indices():
        flat[pos : pos + n] = c.detail[idx].data.ravel()
        pos += n
    return flat


# -- typed surface --------------------------------------------------------------


def forward(f: Volume4, sys: ShearletSystem) -> CoeffSet:
    """Cylindrical shearlet analysis: coarse subband plus all directional bands."""
    if f.dims.shape != sys.shape:
        raise ValueError(f"volume dims {f.dims.shape} do not match system grid {sys.shape}")
    return _flat_to_coeffset(sys, forward_flat(sys, f.data))


def inverse(c: CoeffSet, sys: ShearletSystem) -> Volume4:
    """Left inverse: per scale, sum the detail bands, then recompose subbands."""
    return Volume4(sys.dims, inverse_flat(sys, _coeffset_to_flat(sys, c)))


def adjoint(u: CoeffSet, sys: ShearletSystem) -> Volume4:
    """Exact adjoint of the forward transform (filter-weighted recomposition)."""
    return Volume4(sys.dims, adjoint_flat(sys, _coeffset_to_flat(sys, u)))


def frame_multiplier(sys: ShearletSystem) -> np.ndarray:
    """Fourier multiplier of S*S: W_0^2 + sum_j W_j^2 * sum_dl V_dl^2."""
    m = sys.windows[0] ** 2
    for j in range(1, sys.config.J + 1):
        vsq = np.zeros(sys.shape[:3])
        for idx, v in sys.filters.items():
            if idx.j == j:
                vsq += v**2
        m = m + sys.windows[j] ** 2 * sys.expand(vsq)
    return m


def frame_bounds(sys: ShearletSystem) -> tuple[float, float]:
    """Exact (lower, upper) bounds of S*S over the discrete grid."""
    m = frame_multiplier(sys)
    return float(m.min()), float(m.max())


# -- serialization ---------------------------------------------------------------
#
# One raw volume per band plus a manifest listing (j, d, l1, l2) -> filename.

def save_coeffs(prefix: str | Path, c: CoeffSet) -> None:
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_volume(f"{prefix}_coarse.raw", c.coarse)
    entries = []
    for i, (idx, band) in enumerate(sorted(c.detail.items())):
        fname = f"{prefix.name}_band{i:04d}.raw"
        save_volume(prefix.parent / fname, band)
        entries.append({"j": idx.j, "d": idx.d, "l1": idx.l1, "l2": idx.l2, "file": fname})
    manifest = {
        "dims": list(c.dims.shape),
        "coarse": f"{prefix.name}_coarse.raw",
        "bands": entries,
    }
    Path(f"{prefix}_manifest.json").write_text(json.dumps(manifest, indent=2))


def load_coeffs(prefix: str | Path) -> CoeffSet:
    prefix = Path(prefix)
    manifest = json.loads(Path(f"{prefix}_manifest.json").read_text())
    coarse = load_volume(prefix.parent / manifest["coarse"])
    detail = {}
    for e in manifest["bands"]:
        idx = ShearIndex(e["j"], e["d"], e["l1"], e["l2"])
        detail[idx] = load_volume(prefix.parent / e["file"])
    return CoeffSet(coarse, detail)
