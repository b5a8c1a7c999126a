"""Directional filters tiling the three spatial frequency hyper-pyramids.

Pyramid ``d`` is the region where spatial axis ``d`` dominates the other two
spatial axes. Within it, the slope coordinates ``u2 = xi_a/xi_d`` and
``u3 = xi_b/xi_d`` (``a``, ``b`` the other two spatial axes) are partitioned
into overlapping squared-cosine bumps whose 1D sum is identically one between
the extreme wedge centers. Raw products ``b_{l1}(u2) b_{l2}(u3)`` extend
naturally a little past ``|u| = 1`` (a slightly inflated pyramid); a pointwise
renormalization by the total over all ``(d, l1, l2)`` then makes the filters
sum to exactly one at every nonzero frequency. Wedges straddling pyramid seams
are merged by that renormalization, which is how boundary directions are
realized here.

Filters depend on the three spatial axes only (constant along the temporal
axis); they are stored as dense spatial-grid arrays and broadcast over time
when applied.

Two wedge layouts are supported per scale, selected by ``layout``:

* ``"odd"``:  2L+1 wedges per slope axis, centers at ``l/L``, ``|l| <= L``;
* ``"even"``: 2L wedges per slope axis, centers at ``(2l+1)/(2L)``,
  ``-L <= l <= L-1`` (the layout matching per-pyramid direction counts
  36 / 16 / 4 for radii 3 / 2 / 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import GridDims, freq_grids

#: spatial axes (a, b) whose slopes are measured against the pyramid axis d
_SLOPE_AXES = {1: (2, 3), 2: (1, 3), 3: (1, 2)}


class ShearIndex(NamedTuple):
    """Identifies one directional filter: scale j, pyramid d, shear pair (l1, l2)."""

    j: int
    d: int
    l1: int
    l2: int


@dataclass(frozen=True)
class ShearConfig:
    """Scale count, per-scale shear radii (index 0 = coarsest scale), wedge layout."""

    J: int
    radii: tuple[int, ...]
    layout: str = "odd"

    def __post_init__(self):
        if self.J < 1:
            raise ValueError(f"J must be >= 1, got {self.J}")
        if len(self.radii) != self.J:
            raise ValueError(f"need {self.J} shear radii, got {len(self.radii)}")
        if any(L < 1 for L in self.radii):
            raise ValueError(f"shear radii must be >= 1, got {self.radii}")
        if self.layout not in ("odd", "even"):
            raise ValueError(f"layout must be 'odd' or 'even', got {self.layout!r}")

    def shear_range(self, j: int) -> range:
        """Shear index values at scale j (1-based)."""
        L = self.radii[j - 1]
        return range(-L, L + 1) if self.layout == "odd" else range(-L, L)

    def wedge_centers(self, j: int) -> dict[int, float]:
        """Slope-axis wedge centers keyed by shear index."""
        L = self.radii[j - 1]
        if self.layout == "odd":
            return {l: l / L for l in self.shear_range(j)}
        return {l: (2 * l + 1) / (2 * L) for l in self.shear_range(j)}

    def wedge_halfwidth(self, j: int) -> float:
        return 1.0 / self.radii[j - 1]


def paper_directions_config() -> ShearConfig:
    """Three scales with 36/16/4 directions per pyramid, finest to coarsest."""
    return ShearConfig(J=3, radii=(1, 2, 3), layout="even")


def desk_default_config() -> ShearConfig:
    """Two scales, 25/9 directions per pyramid, finest to coarsest."""
    return ShearConfig(J=2, radii=(1, 2), layout="odd")


def directions_per_scale(config: ShearConfig) -> list[int]:
    """Directions per pyramid for each scale, finest scale first."""
    counts = []
    for j in range(config.J, 0, -1):
        L = config.radii[j - 1]
        counts.append((2 * L + 1) ** 2 if config.layout == "odd" else (2 * L) ** 2)
    return counts


def _cos2_bump(u: np.ndarray, center: float, halfwidth: float) -> np.ndarray:
    """Squared-cosine bump, exactly zero for |u - center| >= halfwidth."""
    t = np.abs(u - center) / halfwidth
    out = np.cos(0.5 * np.pi * np.clip(t, 0.0, 1.0)) ** 2
    out[t >= 1.0] = 0.0
    return out


def _hermitian_mirror(a: np.ndarray) -> np.ndarray:
    """Value at the frequency-negated bin, (-k) mod n along every axis."""
    out = np.flip(a)
    for ax in range(a.ndim):
        out = np.roll(out, 1, axis=ax)
    return out


def check_angular_resolution(spatial_shape: tuple[int, ...], config: ShearConfig) -> None:
    """Reject shear radii leaving fewer than 2 grid lines per wedge."""
    nyq_min = min(n // 2 for n in spatial_shape)
    for j in range(1, config.J + 1):
        L = config.radii[j - 1]
        if nyq_min / L < 2:
            raise ValueError(
                f"shear radius {L} at scale {j} too large for spatial dims "
                f"{spatial_shape}: fewer than 2 grid lines per wedge "
                f"(need L <= {nyq_min // 2})"
            )


def build_filter_arrays(
    spatial_shape: tuple[int, int, int], config: ShearConfig
) -> dict[ShearIndex, np.ndarray]:
    """Dense spatial-grid filter arrays for every (j, d, l1, l2).

    At the spatial-DC line (all three spatial frequencies zero, where slopes
    are undefined) the unit total is split uniformly across all filters of the
    scale so the sum identity holds at every nonzero 4D frequency.
    """
    check_angular_resolution(spatial_shape, config)
    grids = freq_grids(spatial_shape)
    coords = {
        ax + 1: grids[ax].astype(np.float64) / (spatial_shape[ax] // 2)
        for ax in range(3)
    }
    spatial_dc = sum(np.abs(c) for c in coords.values()) == 0.0

    filters: dict[ShearIndex, np.ndarray] = {}
    for j in range(1, config.J + 1):
        centers = config.wedge_centers(j)
        h = config.wedge_halfwidth(j)
        raw: dict[ShearIndex, np.ndarray] = {}
        total = np.zeros(np.broadcast_shapes(*(c.shape for c in coords.values())))
        for d in (1, 2, 3):
            a, b = _SLOPE_AXES[d]
            denom = coords[d] + np.zeros_like(total)
            safe = np.where(denom == 0.0, 1.0, denom)
            u2 = np.where(denom == 0.0, np.inf, coords[a] / safe)
            u3 = np.where(denom == 0.0, np.inf, coords[b] / safe)
            bumps2 = {l: _cos2_bump(u2, c, h) for l, c in centers.items()}
            bumps3 = {l: _cos2_bump(u3, c, h) for l, c in centers.items()}
            for l1 in config.shear_range(j):
                for l2 in config.shear_range(j):
                    v = bumps2[l1] * bumps3[l2]
                    raw[ShearIndex(j, d, l1, l2)] = v
                    total += v
        n_filters = len(raw)
        safe_total = np.where(total == 0.0, 1.0, total)
        for idx, v in raw.items():
            v = np.where(spatial_dc, 1.0 / n_filters, v / safe_total)
            v = 0.5 * (v + _hermitian_mirror(v))
            v.setflags(write=False)
            filters[idx] = v
    return filters


@dataclass(frozen=True)
class DirFilterBank:
    dims: GridDims
    config: ShearConfig
    filters: dict[ShearIndex, np.ndarray]

    def scale_indices(self, j: int) -> list[ShearIndex]:
        return sorted(idx for idx in self.filters if idx.j == j)


def build_filters(
    dims: GridDims, J: int, shear_radii, layout: str = "odd"
) -> DirFilterBank:
    config = ShearConfig(J=J, radii=tuple(int(L) for L in shear_radii), layout=layout)
    return DirFilterBank(dims, config, build_filter_arrays(dims.spatial, config))
