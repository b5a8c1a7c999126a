"""Primal-dual fixed-point solver for 0.5*||Rf - m||^2 + beta*||Sf||_1, f >= 0.

One iteration applies exactly three updates (P+ the nonnegative projection,
S_theta soft thresholding with theta = beta*rho/lambda):

    y   = P+( f - rho*(Rt R f - Rt m) - lambda * St r )
    r'  = (I - S_theta)( S y + r )
    f'  = P+( f - rho*(Rt R f - Rt m) - lambda * St r' )

With beta = 0 the thresholding is the identity, the dual stays zero, and the
iteration reduces to projected Landweber regardless of the sparsifying system,
which the suite exploits as an oracle (nonnegative least squares) and as a
regularizer-path equivalence check.

Step sizes are guarded by rho < 2/L (L the largest eigenvalue of Rt R,
power-method estimated) and lambda <= 1/ub (ub the upper frame bound of S).
The solver is written over plain arrays: volumes are any-shaped ndarrays and
coefficients are flat vectors produced by a regularizer adapter, so the same
step runs 12-unknown dense test systems and full 4D reconstructions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import GridDims, Volume4, save_volume
from .dwt4 import dwt4_forward_flat, dwt4_inverse_flat, flat_detail_offset
from .projector import Geometry, SinogramSet, backproject, project
from .transform import ShearletSystem, adjoint_flat, detail_slice, forward_flat, frame_bounds, inverse_flat


class DivergenceError(RuntimeError):
    """Iteration produced non-finite values."""


def soft_threshold(x: np.ndarray, theta: float) -> np.ndarray:
    """Proximal operator of theta*||.||_1: sign(x) * max(|x| - theta, 0)."""
    if theta < 0:
        raise ValueError(f"threshold must be >= 0, got {theta}")
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)


def project_nonneg(v: np.ndarray) -> np.ndarray:
    """Projection onto the nonnegative orthant."""
    return np.maximum(v, 0.0)


def estimate_norm(op, shape, iters: int = 50, seed: int = 0) -> float:
    """Power-method estimate of the largest eigenvalue of a PSD operator.

    ``op`` maps arrays of ``shape`` to arrays of the same shape (here Rt R or
    S St); deterministic under a fixed seed.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    nx = np.linalg.norm(x.ravel())
    if nx == 0.0:
        return 0.0
    x /= nx
    lam = 0.0
    for _ in range(iters):
        y = op(x)
        lam = float(np.vdot(x.ravel(), y.ravel()).real)
        ny = np.linalg.norm(y.ravel())
        if ny == 0.0:
            return 0.0
        x = y / ny
    return lam


@dataclass(frozen=True)
class PdfpParams:
    rho: float
    lam: float
    beta: float
    max_iters: int = 50
    rel_change_tol: float = 1e-4
    target_sparsity: float | None = None
    gain: float = 0.1
    threshold_coarse: bool = True

    def __post_init__(self):
        if self.rho <= 0 or self.lam <= 0:
            raise ValueError("rho and lam must be positive")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.target_sparsity is not None and not (0.0 < self.target_sparsity < 1.0):
            raise ValueError("target_sparsity must lie in (0, 1)")


def check_step_bounds(params: PdfpParams, op_norm: float, upper_frame_bound: float) -> None:
    """Enforce rho < 2/L and lambda <= 1/ub."""
    if params.rho >= 2.0 / op_norm:
        raise ValueError(f"rho={params.rho} violates rho < 2/L with L={op_norm:.6g}")
    if params.lam > 1.0 / upper_frame_bound + 1e-12:
        raise ValueError(
            f"lam={params.lam} violates lam <= 1/ub with ub={upper_frame_bound:.6g}"
        )


@dataclass
class PdfpState:
    """Iterates plus convergence history. ``residual`` caches R f - m."""

    f: np.ndarray
    y: np.ndarray
    r: np.ndarray
    iteration: int = 0
    history: list = field(default_factory=list)
    residual: np.ndarray | None = None
    last_sparsity: float = 0.0


HISTORY_COLUMNS = ("iteration", "objective", "data_fit", "l1_term", "sparsity", "beta")


def history_row(iteration, objective, data_fit, l1_term, sparsity, beta) -> dict:
    return {
        "iteration": iteration,
        "objective": objective,
        "data_fit": data_fit,
        "l1_term": l1_term,
        "sparsity": sparsity,
        "beta": beta,
    }


def history_to_csv(history: list[dict]) -> str:
    lines = [",".join(HISTORY_COLUMNS)]
    for row in history:
        lines.append(",".join(repr(row[c]) for c in HISTORY_COLUMNS))
    return "\n".join(lines) + "\n"


def tune_beta(beta: float, observed_sparsity: float, target_sparsity: float, gain: float = 0.1) -> float:
    """Multiplicative sparsity controller, clipped to a factor of 2 per call."""
    factor = 1.0 + gain * (observed_sparsity - target_sparsity) / target_sparsity
    return float(np.clip(beta * factor, beta / 2.0, beta * 2.0))


def pdfp_step(state: PdfpState, params: PdfpParams, R, Rt, S, St, m, detail=slice(None)):
    """One PDFP iteration; mutates and returns ``state``.

    ``detail`` selects the coefficient entries counted for the sparsity metric
    (and exempted from thresholding when ``threshold_coarse`` is off).
    """
    if state.residual is None:
        state.residual = R(state.f) - m
    grad = Rt(state.residual)
    base = state.f - params.rho * grad
    theta = params.beta * params.rho / params.lam

    y = project_nonneg(base - params.lam * St(state.r))
    w = S(y) + state.r
    if params.threshold_coarse:
        thr = soft_threshold(w, theta)
    else:
        thr = w.copy()
        thr[detail] = soft_threshold(w[detail], theta)
    r_new = w - thr
    f_new = project_nonneg(base - params.lam * St(r_new))

    if not (np.all(np.isfinite(f_new)) and np.all(np.isfinite(r_new))):
        raise DivergenceError(f"non-finite iterate at iteration {state.iteration + 1}")
    assert f_new.min() >= 0.0 and y.min() >= 0.0

    detail_coeffs = thr[detail]
    sparsity = float(np.count_nonzero(detail_coeffs)) / max(detail_coeffs.size, 1)

    residual_new = R(f_new) - m
    data_fit = 0.5 * float(np.sum(residual_new**2))
    l1 = float(np.sum(np.abs(S(f_new))))
    state.f = f_new
    state.y = y
    state.r = r_new
    state.residual = residual_new
    state.iteration += 1
    state.last_sparsity = sparsity
    state.history.append(
        history_row(state.iteration, data_fit + params.beta * l1, data_fit, l1, sparsity, params.beta)
    )
    return state


# -- regularizer adapters -----------------------------------------------------------


class ShearletRegularizer:
    """Cylindrical shearlet transform as flat-vector analysis/synthesis pair."""

    name = "cylsh"

    def __init__(self, system: ShearletSystem):
        self.system = system
        self.n_coeffs = system.coeff_count()
        self.detail = detail_slice(system)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return forward_flat(self.system, x)

    def adjoint(self, c: np.ndarray) -> np.ndarray:
        return adjoint_flat(self.system, c)

    def inverse(self, c: np.ndarray) -> np.ndarray:
        return inverse_flat(self.system, c)

    def upper_frame_bound(self) -> float:
        return frame_bounds(self.system)[1]


class WaveletRegularizer:
    """Orthonormal 4D db2 transform (adjoint = inverse, frame bound 1)."""

    name = "dwt4"

    def __init__(self, dims: GridDims, levels: int):
        self.dims = dims
        self.levels = levels
        self.n_coeffs = dims.size
        self.detail = slice(flat_detail_offset(dims, levels), dims.size)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return dwt4_forward_flat(x, self.levels)

    def adjoint(self, c: np.ndarray) -> np.ndarray:
        return dwt4_inverse_flat(c, self.dims, self.levels)

    inverse = adjoint

    def upper_frame_bound(self) -> float:
        return 1.0


class IdentityRegularizer:
    """S = I on flat vectors; turns PDFP into (thresholded) projected Landweber."""

    name = "identity"

    def __init__(self, shape):
        self.shape = tuple(np.atleast_1d(shape))
        self.n_coeffs = int(np.prod(self.shape))
        self.detail = slice(None)

    def forward(self, x):
        return np.asarray(x, dtype=float).ravel().copy()

    def adjoint(self, c):
        return np.asarray(c, dtype=float).reshape(self.shape)

    inverse = adjoint

    def upper_frame_bound(self) -> float:
        return 1.0


# -- full reconstruction -------------------------------------------------------------


def _block_ops(geom: Geometry, angles, frames: int):
    def R(vol4: np.ndarray) -> np.ndarray:
        return np.stack([project(vol4[..., t], geom, angles.per_frame[t]) for t in range(frames)])

    def Rt(sino4: np.ndarray) -> np.ndarray:
        return np.stack(
            [backproject(sino4[t], geom, angles.per_frame[t]) for t in range(frames)], axis=-1
        )

    return R, Rt


def init_beta_percentile(regularizer, backprojection: np.ndarray, rho: float, lam: float, q: float = 90.0) -> float:
    """beta_0 such that the first threshold sits at the q-th percentile of the
    first gradient iterate's detail coefficients |S(rho * Rt m)| (a data-driven
    start the tuner can correct; an un-scaled percentile of |S(Rt m)| would
    exceed every iterate by ~1/rho and freeze the iteration at zero)."""
    coeffs = regularizer.forward(rho * backprojection)
    theta0 = float(np.percentile(np.abs(coeffs[regularizer.detail]), q))
    return theta0 * lam / rho


def reconstruct(
    sinos: SinogramSet,
    regularizer,
    params: PdfpParams | None = None,
    beta: float | None = None,
    max_iters: int = 50,
    rel_change_tol: float = 1e-4,
    target_sparsity: float | None = None,
    gain: float = 0.1,
    threshold_coarse: bool = True,
    norm_iters: int = 30,
    seed: int = 0,
    checkpoint_every: int = 0,
    checkpoint_dir: str | Path | None = None,
) -> tuple[Volume4, list[dict]]:
    """Run PDFP on a sinogram set; returns the nonnegative volume and history.

    The tomographic operator is block diagonal over frames (same geometry and
    per-frame angle lists as recorded in the sinogram set).
    """
    geom = sinos.geometry
    frames = sinos.frames
    dims = GridDims(*geom.vol_shape, frames)
    m = sinos.data
    R, Rt = _block_ops(geom, sinos.angles, frames)

    op_norm = estimate_norm(lambda x: Rt(R(x)), dims.shape, iters=norm_iters, seed=seed)
    if op_norm == 0.0:
        raise ValueError("tomographic operator has zero norm (empty geometry?)")
    ub = regularizer.upper_frame_bound()

    if params is None:
        rho = 1.9 / op_norm
        lam = 1.0 / ub
        if beta is None:
            beta = init_beta_percentile(regularizer, Rt(m), rho, lam)
        params = PdfpParams(
            rho=rho,
            lam=lam,
            beta=beta,
            max_iters=max_iters,
            rel_change_tol=rel_change_tol,
            target_sparsity=target_sparsity,
            gain=gain,
            threshold_coarse=threshold_coarse,
        )
    check_step_bounds(params, op_norm, ub)

    state = PdfpState(
        f=np.zeros(dims.shape),
        y=np.zeros(dims.shape),
        r=np.zeros(regularizer.n_coeffs),
    )
    data_fit0 = 0.5 * float(np.sum(m**2))
    state.history.append(history_row(0, data_fit0, data_fit0, 0.0, 0.0, params.beta))

    for _ in range(params.max_iters):
        f_prev = state.f
        pdfp_step(
            state, params, R, Rt,
            regularizer.forward, regularizer.adjoint, m,
            detail=regularizer.detail,
        )
        if params.target_sparsity is not None:
            params = replace(
                params,
                beta=tune_beta(params.beta, state.last_sparsity, params.target_sparsity, params.gain),
            )
        if checkpoint_every and state.iteration % checkpoint_every == 0 and checkpoint_dir:
            save_volume(
                Path(checkpoint_dir) / f"checkpoint_{state.iteration:04d}.raw",
                Volume4(dims, state.f),
            )
        denom = float(np.linalg.norm(f_prev.ravel()))
        change = float(np.linalg.norm((state.f - f_prev).ravel()))
        if denom > 0.0 and change / denom < params.rel_change_tol:
            break

    return Volume4(dims, state.f), state.history
