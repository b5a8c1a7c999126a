"""Reconstruction quality metrics: whole-4D PSNR and per-frame 3D SSIM.

PSNR uses the ground truth's maximum as the peak and the mean squared error
over all 4D samples. SSIM is the standard structural similarity with a
truncated Gaussian window (sigma 1.5 on an 11^3 support), K1 = 0.01,
K2 = 0.03, computed per time frame in 3D and averaged over frames; the
dynamic range defaults to the ground truth's maximum and can be pinned
explicitly (which also makes the metric exactly symmetric).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .core import Volume4


@dataclass(frozen=True)
class MetricsReport:
    psnr: float
    mean_ssim: float
    per_frame_psnr: tuple[float, ...]
    per_frame_ssim: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "psnr": self.psnr,
            "mean_ssim": self.mean_ssim,
            "per_frame_psnr": list(self.per_frame_psnr),
            "per_frame_ssim": list(self.per_frame_ssim),
        }


def _check_same_dims(recon: Volume4, truth: Volume4) -> None:
    if recon.dims != truth.dims:
        raise ValueError(f"dims mismatch: recon {recon.dims} vs truth {truth.dims}")


def _psnr_arrays(recon: np.ndarray, truth: np.ndarray) -> float:
    mse = float(np.mean((recon - truth) ** 2))
    if mse == 0.0:
        return math.inf
    peak = float(np.max(truth))
    return 10.0 * math.log10(peak**2 / mse)


def psnr(recon: Volume4, truth: Volume4) -> float:
    """Peak signal-to-noise ratio in dB over the whole 4D grid; +inf sentinel
    when the volumes are identical."""
    _check_same_dims(recon, truth)
    return _psnr_arrays(recon.data, truth.data)


_SSIM_RADIUS = 5  # 11-point support
_SSIM_SIGMA = 1.5


def _gaussian_taps() -> np.ndarray:
    t = np.arange(-_SSIM_RADIUS, _SSIM_RADIUS + 1, dtype=float)
    g = np.exp(-0.5 * (t / _SSIM_SIGMA) ** 2)
    return g / g.sum()


def _smooth3(x: np.ndarray) -> np.ndarray:
    taps = _gaussian_taps()
    for ax in range(3):
        x = correlate1d(x, taps, axis=ax, mode="reflect")
    return x


def ssim3d(x: np.ndarray, y: np.ndarray, data_range: float) -> float:
    """Mean SSIM of two 3D frames with the module's fixed window constants."""
    if any(n < 2 * _SSIM_RADIUS + 1 for n in x.shape):
        raise ValueError(f"frame shape {x.shape} smaller than the {2*_SSIM_RADIUS+1}^3 window")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mu_x = _smooth3(x)
    mu_y = _smooth3(y)
    xx = _smooth3(x * x) - mu_x * mu_x
    yy = _smooth3(y * y) - mu_y * mu_y
    xy = _smooth3(x * y) - mu_x * mu_y
    num = (2.0 * (mu_x * mu_y) + c1) * (2.0 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def ssim3d_mean(recon: Volume4, truth: Volume4, data_range: float | None = None) -> float:
    """Per-frame 3D SSIM averaged across time frames.

    ``data_range`` defaults to the ground truth's maximum; pass it explicitly
    to compare volumes on a fixed scale.
    """
    _check_same_dims(recon, truth)
    if data_range is None:
        data_range = float(np.max(truth.data))
        if data_range <= 0.0:
            raise ValueError("ground truth has no positive range; pass data_range explicitly")
    vals = [
        ssim3d(recon.data[..., t], truth.data[..., t], data_range)
        for t in range(recon.dims.n4)
    ]
    return float(np.mean(vals))


def evaluate(recon: Volume4, truth: Volume4) -> MetricsReport:
    _check_same_dims(recon, truth)
    range_ = float(np.max(truth.data))
    per_psnr = tuple(
        _psnr_arrays(recon.data[..., t], truth.data[..., t]) for t in range(recon.dims.n4)
    )
    per_ssim = tuple(
        ssim3d(recon.data[..., t], truth.data[..., t], range_) for t in range(recon.dims.n4)
    )
    return MetricsReport(
        psnr=psnr(recon, truth),
        mean_ssim=float(np.mean(per_ssim)),
        per_frame_psnr=per_psnr,
        per_frame_ssim=per_ssim,
    )
