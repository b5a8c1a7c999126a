"""Dynamic ellipsoid phantom, acquisition-angle schedule, and cartoon-class test volumes.

Spatial coordinates are normalized by the longest spatial axis: voxels are
unit cubes, voxel centers sit at ``(idx - (n_i - 1)/2) / (max_n / 2)``, so the
same ellipsoid spec rendered at 2x resolution describes the same physical
object (the inverse-crime guard in the simulator depends on this).

Ellipsoid geometry is static; the motion parameter ``omega`` drives the
intensity laws only. Compositing is painter's order: later list entries
overwrite earlier ones inside their support, which keeps values in [0, 1]
without renormalization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .core import GridDims, Volume4


@dataclass(frozen=True)
class IntensityLaw:
    """One of: constant a; linear ramp a + b*omega; sinusoid a + b*sin(omega + phi)."""

    kind: str
    a: float
    b: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "sinusoid"):
            raise ValueError(f"unknown intensity law {self.kind!r}")

    def __call__(self, omega: float) -> float:
        if self.kind == "constant":
            value = self.a
        elif self.kind == "linear":
            value = self.a + self.b * omega
        else:
            value = self.a + self.b * np.sin(omega + self.phi)
        return float(np.clip(value, 0.0, 1.0))


@dataclass(frozen=True)
class Ellipsoid:
    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]
    rotation: tuple[float, float, float]  # intrinsic z-y-z Euler angles
    law: IntensityLaw

    def __post_init__(self):
        if any(s <= 0 for s in self.semi_axes):
            raise ValueError(f"semi-axes must be positive, got {self.semi_axes}")


def _rotation_matrix(angles) -> np.ndarray:
    phi, theta, psi = angles

    def rz(a):
        c, s = np.cos(a), np.sin(a)
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])

    def ry(a):
        c, s = np.cos(a), np.sin(a)
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])

    return rz(phi) @ ry(theta) @ rz(psi)


def spatial_coords(spatial_shape: tuple[int, int, int]) -> list[np.ndarray]:
    """Normalized voxel-center coordinates, broadcastable to the full grid."""
    half = max(spatial_shape) / 2.0
    out = []
    for ax, n in enumerate(spatial_shape):
        c = (np.arange(n) - (n - 1) / 2.0) / half
        sl = [None, None, None]
        sl[ax] = slice(None)
        out.append(c[tuple(sl)])
    return out


class PhantomRenderer:
    """Renders one ellipsoid list on a fixed spatial grid.

    Masks are geometry-only and cached, so re-rendering at a new omega is a
    cheap painter's pass over the cached supports.
    """

    def __init__(self, ellipsoids: list[Ellipsoid], spatial_shape: tuple[int, int, int]):
        self.ellipsoids = list(ellipsoids)
        self.spatial_shape = tuple(spatial_shape)
        x1, x2, x3 = spatial_coords(self.spatial_shape)
        self.masks = []
        for e in self.ellipsoids:
            rt = _rotation_matrix(e.rotation).T
            d1 = x1 - e.center[0]
            d2 = x2 - e.center[1]
            d3 = x3 - e.center[2]
            q = 0.0
            for row, semi in zip(rt, e.semi_axes):
                q = q + ((row[0] * d1 + row[1] * d2 + row[2] * d3) / semi) ** 2
            self.masks.append(q <= 1.0)

    def render(self, omega: float) -> np.ndarray:
        frame = np.zeros(self.spatial_shape)
        for e, mask in zip(self.ellipsoids, self.masks):
            frame[mask] = e.law(omega)
        return frame


def render_phantom(
    ellipsoids: list[Ellipsoid], spatial_shape: tuple[int, int, int], omega: float
) -> np.ndarray:
    """One spatial frame of the phantom at motion state omega."""
    return PhantomRenderer(ellipsoids, spatial_shape).render(omega)


def render_dynamic(
    ellipsoids: list[Ellipsoid], dims: GridDims, omegas: np.ndarray
) -> Volume4:
    """Ground-truth volume: one rendered frame per omega (len == dims.n4)."""
    if len(omegas) != dims.n4:
        raise ValueError(f"need {dims.n4} omegas, got {len(omegas)}")
    renderer = PhantomRenderer(ellipsoids, dims.spatial)
    data = np.stack([renderer.render(w) for w in omegas], axis=-1)
    return Volume4(dims, data)


# -- acquisition-angle schedule -------------------------------------------------


@dataclass(frozen=True)
class OmegaSchedule:
    """Motion states sampled during acquisition: tau kept subintervals of
    [0, 2pi] (every second one of 2*tau - 1 discarded), each sampled at
    ``stages_per_frame`` equispaced points; the middle sample of each frame
    is the ground-truth state."""

    tau: int
    stages_per_frame: int
    table: np.ndarray  # (tau, stages_per_frame)

    @property
    def gt_index(self) -> int:
        return self.stages_per_frame // 2

    @property
    def gt_omegas(self) -> np.ndarray:
        return self.table[:, self.gt_index]


def build_omega_schedule(tau: int, stages_per_frame: int = 15) -> OmegaSchedule:
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    if stages_per_frame < 1 or stages_per_frame % 2 == 0:
        raise ValueError(f"stages_per_frame must be odd and positive, got {stages_per_frame}")
    width = 2.0 * np.pi / (2 * tau - 1)
    table = np.empty((tau, stages_per_frame))
    for t in range(tau):
        start = 2 * t * width
        table[t] = np.linspace(start, start + width, stages_per_frame)
    table.setflags(write=False)
    return OmegaSchedule(tau, stages_per_frame, table)


# -- cartoon-class test functions ------------------------------------------------


@dataclass(frozen=True)
class TrigPoly:
    """Windowed truncated trigonometric polynomial on the normalized cube."""

    const: float
    terms: tuple[tuple[float, tuple[float, float, float], float], ...] = ()

    def __call__(self, x1, x2, x3):
        val = self.const * np.ones(np.broadcast_shapes(x1.shape, x2.shape, x3.shape))
        for amp, freq, phase in self.terms:
            val = val + amp * np.cos(np.pi * (freq[0] * x1 + freq[1] * x2 + freq[2] * x3) + phase)
        return val * _window3(x1, x2, x3)


def _bump(t):
    """C^2 bump (1 - t^2)^3 on [-1, 1], zero outside."""
    return np.where(np.abs(t) < 1.0, (1.0 - np.clip(t, -1, 1) ** 2) ** 3, 0.0)


def _window3(x1, x2, x3):
    return _bump(x1) * _bump(x2) * _bump(x3)


@dataclass(frozen=True)
class TimeProfile:
    """C^2 temporal factor a + b * (1 - t^2)^3 on normalized time [-1, 1]."""

    a: float
    b: float = 0.0

    def __call__(self, t):
        return self.a + self.b * _bump(t)


@dataclass(frozen=True)
class CartoonSpec:
    """f = h0*g0 + h1*X_B*g1: smooth background plus a jump across a fixed
    C^2 spatial surface; no discontinuity along the time axis."""

    region_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    region_semi_axes: tuple[float, float, float] = (0.55, 0.55, 0.55)
    h0: TrigPoly = TrigPoly(0.0)
    h1: TrigPoly = TrigPoly(1.0)
    g0: TimeProfile = TimeProfile(1.0)
    g1: TimeProfile = TimeProfile(1.0)


def default_cartoon(spatial_shape: tuple[int, int, int] | None = None) -> CartoonSpec:
    """Default cylindrical cartoon: a tilted ellipsoidal jump over a mild
    smooth background, gently modulated in time."""
    semi = (0.52, 0.44, 0.48)
    if spatial_shape is not None:
        zcap = 0.85 * min(spatial_shape) / max(spatial_shape)
        semi = (semi[0], semi[1], min(semi[2], zcap))
    return CartoonSpec(
        region_center=(0.05, -0.04, 0.0),
        region_semi_axes=semi,
        h0=TrigPoly(0.22, ((0.08, (1.0, 0.7, 0.0), 0.4), (0.05, (0.0, 1.3, 0.9), 1.1))),
        h1=TrigPoly(0.75, ((0.08, (0.9, 0.0, 1.2), 0.2),)),
        g0=TimeProfile(0.75, 0.25),
        g1=TimeProfile(0.65, 0.35),
    )


def render_cartoon(spec: CartoonSpec, dims: GridDims) -> Volume4:
    x1, x2, x3 = spatial_coords(dims.spatial)
    q = sum(((x - c) / s) ** 2 for x, c, s in zip((x1, x2, x3), spec.region_center, spec.region_semi_axes))
    inside = q <= 1.0
    h0 = spec.h0(x1, x2, x3)
    h1 = spec.h1(x1, x2, x3) * inside
    t = (2.0 * np.arange(dims.n4) + 1.0 - dims.n4) / dims.n4
    data = h0[..., None] * spec.g0(t) + h1[..., None] * spec.g1(t)
    return Volume4(dims, data)


# -- phantom spec files -----------------------------------------------------------


def ellipsoid_from_dict(d: dict) -> Ellipsoid:
    law = d["law"]
    return Ellipsoid(
        center=tuple(d["center"]),
        semi_axes=tuple(d["semi_axes"]),
        rotation=tuple(d.get("rotation", (0.0, 0.0, 0.0))),
        law=IntensityLaw(
            kind=law["kind"], a=law["a"], b=law.get("b", 0.0), phi=law.get("phi", 0.0)
        ),
    )


def ellipsoid_to_dict(e: Ellipsoid) -> dict:
    return {
        "center": list(e.center),
        "semi_axes": list(e.semi_axes),
        "rotation": list(e.rotation),
        "law": {"kind": e.law.kind, "a": e.law.a, "b": e.law.b, "phi": e.law.phi},
    }


def load_phantom_spec(path: str | Path) -> list[Ellipsoid]:
    doc = json.loads(Path(path).read_text())
    return [ellipsoid_from_dict(d) for d in doc["ellipsoids"]]


def default_phantom() -> list[Ellipsoid]:
    """The checked-in default scene (shell + two linear + six phase-offset sinusoids)."""
    text = resources.files("cylsh").joinpath("data/default_phantom.json").read_text()
    return [ellipsoid_from_dict(d) for d in json.loads(text)["ellipsoids"]]
