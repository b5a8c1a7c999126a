"""N-term nonlinear approximation benchmarks: cylindrical shearlets vs 4D wavelets.

Keep the N largest-magnitude coefficients (ties broken by canonical flat index
order), zero the rest, synthesize with the transform's inverse, and record the
squared L2 error. Log-log slopes are fitted by least squares with the smallest
third of the N ladder excluded (pre-asymptotic contamination); the benchmark
asserts slope ordering and separation, not the theorems' absolute rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GridDims, Volume4
from .dwt4 import flat_detail_offset  # noqa: F401  (re-exported for callers)
from .pdfp import ShearletRegularizer, WaveletRegularizer
from .pyramid import max_scales
from .transform import build_system


def make_transform(name: str, dims: GridDims, shear_radii=None, layout: str = "odd", levels: int | None = None):
    """Build a flat-vector analysis/synthesis adapter by name.

    Defaults pick the largest feasible scale count for the grid (shearlets)
    and the deepest divisibility-compatible level count up to 4 (wavelets).
    """
    if name == "cylsh":
        J = min(2, max_scales(dims.shape))
        if shear_radii is None:
            shear_radii = tuple([1] * (J - 1) + [2]) if J >= 2 else (1,)
        else:
            J = len(shear_radii)
        return ShearletRegularizer(build_system(dims.shape, J=J, shear_radii=shear_radii, layout=layout))
    if name == "dwt4":
        if levels is None:
            levels = 1
            while levels < 4 and all(n % (1 << (levels + 1)) == 0 for n in dims.shape):
                levels += 1
        return WaveletRegularizer(dims, levels)
    raise ValueError(f"unknown transform {name!r} (expected 'cylsh' or 'dwt4')")


def keep_largest(flat: np.ndarray, n_keep: int, order: np.ndarray | None = None) -> np.ndarray:
    """Zero all but the n_keep largest-magnitude entries (stable tie order)."""
    if n_keep > flat.size:
        raise ValueError(f"N={n_keep} exceeds coefficient count {flat.size}")
    out = np.zeros_like(flat)
    if n_keep == 0:
        return out
    if order is None:
        order = np.argsort(-np.abs(flat), kind="stable")
    keep = order[:n_keep]
    out[keep] = flat[keep]
    return out


def n_term_approx(f: Volume4, transform, n_keep: int) -> Volume4:
    """Reconstruction from the n_keep largest transform coefficients.

    ``transform`` is an adapter from :func:`make_transform` (or any object
    with matching ``forward``/``inverse``).
    """
    flat = transform.forward(f.data)
    return Volume4(f.dims, transform.inverse(keep_largest(flat, n_keep)))


@dataclass(frozen=True)
class DecayCurve:
    transform: str
    n_values: tuple[int, ...]
    sq_errors: tuple[float, ...]
    slope: float
    fit_residual: float

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ValueError("N values must be strictly increasing")
        scale = max(self.sq_errors) if self.sq_errors else 0.0
        for a, b in zip(self.sq_errors, self.sq_errors[1:]):
            if b > a + 1e-12 * scale:
                raise ValueError(f"errors must be non-increasing in N ({a} -> {b})")


def fit_loglog_slope(n_values, sq_errors, skip_fraction: float = 1.0 / 3.0) -> tuple[float, float]:
    """LSQ slope of log(err^2) vs log(N), excluding the smallest skip_fraction of N."""
    k0 = int(len(n_values) * skip_fraction)
    x = np.log(np.asarray(n_values[k0:], dtype=float))
    y = np.log(np.maximum(np.asarray(sq_errors[k0:], dtype=float), 1e-300))
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), resid


def default_ladder(max_exp: int = 16, min_exp: int = 8) -> tuple[int, ...]:
    return tuple(2**e for e in range(min_exp, max_exp + 1))


def decay_curve(f: Volume4, transform, name: str, ladder) -> DecayCurve:
    ladder = tuple(int(n) for n in ladder)
    if len(ladder) < 2:
        raise ValueError(f"N ladder needs at least 2 points, got {len(ladder)}")
    flat = transform.forward(f.data)
    order = np.argsort(-np.abs(flat), kind="stable")
    errors = []
    for n_keep in ladder:
        recon = transform.inverse(keep_largest(flat, n_keep, order))
        errors.append(float(np.sum((f.data - recon) ** 2)))
    slope, resid = fit_loglog_slope(ladder, errors)
    return DecayCurve(name, ladder, tuple(errors), slope, resid)


def decay_experiment(f: Volume4, ladder=None, transforms=("cylsh", "dwt4")) -> dict[str, DecayCurve]:
    """Decay curves of a volume under each transform over a shared N ladder."""
    if ladder is None:
        ladder = default_ladder()
    curves = {}
    for name in transforms:
        adapter = make_transform(name, f.dims)
        curves[name] = decay_curve(f, adapter, name, ladder)
    return curves


def curves_to_csv(curves: dict[str, DecayCurve]) -> str:
    lines = ["transform,n,sq_error"]
    for name, c in sorted(curves.items()):
        for n, e in zip(c.n_values, c.sq_errors):
            lines.append(f"{name},{n},{e!r}")
    return "\n".join(lines) + "\n"


def slopes_to_dict(curves: dict[str, DecayCurve]) -> dict:
    return {
        name: {"slope": c.slope, "fit_residual": c.fit_residual}
        for name, c in sorted(curves.items())
    }
