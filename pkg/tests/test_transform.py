import numpy as np
import pytest

from cylsh.core import GridDims, Volume4
from cylsh.transform import (
    CoeffSet,
    adjoint,
    adjoint_flat,
    build_system,
    forward,
    forward_flat,
    frame_bounds,
    frame_multiplier,
    inverse,
    inverse_flat,
    load_coeffs,
    save_coeffs,
)


def random_volume(dims, seed):
    return Volume4(dims, np.random.default_rng(seed).standard_normal(dims.shape))


def naive_dft_stack(arrays, sign):
    """O(N^2) multidimensional DFT of a stack of arrays by direct phase summation.

    Chunked over output indices so memory stays bounded; completely independent
    of any FFT routine. sign=-1 forward (unnormalized), sign=+1 inverse (1/N).
    """
    shape = arrays[0].shape
    N = int(np.prod(shape))
    mesh = np.stack(np.meshgrid(*(np.arange(n) for n in shape), indexing="ij"), -1).reshape(N, -1)
    stack = np.stack([a.reshape(N) for a in arrays])
    out = np.empty((len(arrays), N), dtype=complex)
    chunk = 512
    for start in range(0, N, chunk):
        rows = mesh[start : start + chunk]
        phase = np.zeros((rows.shape[0], N))
        for ax, n in enumerate(shape):
            phase += np.outer(rows[:, ax], mesh[:, ax]) / n
        kernel = np.exp(sign * 2j * np.pi * phase)
        out[:, start : start + chunk] = stack @ kernel.T
    if sign > 0:
        out /= N
    return [o.reshape(shape) for o in out]


@pytest.fixture(scope="module")
def tiny_sys():
    return build_system((8, 8, 8, 4), J=1, shear_radii=(1,))


@pytest.fixture(scope="module")
def small_sys():
    return build_system((16, 16, 16, 4), J=1, shear_radii=(1,))


def test_zero_volume_gives_zero_coeffs(small_sys):
    c = forward(Volume4.zeros(small_sys.dims), small_sys)
    assert np.all(c.coarse.data == 0.0)
    assert all(np.all(b.data == 0.0) for b in c.detail.values())


def test_forward_matches_naive_dft_oracle(tiny_sys):
    sys = tiny_sys
    f = random_volume(sys.dims, 21)
    got = forward_flat(sys, f.data)

    spec = naive_dft_stack([f.data.astype(complex)], -1)[0]
    band_specs = [spec * sys.windows[0]]
    for idx in sys.detail_indices():
        band_specs.append(spec * sys.windows[idx.j] * sys.expand(sys.filters[idx]))
    oracle_bands = naive_dft_stack(band_specs, +1)
    oracle = np.concatenate([b.real.ravel() for b in oracle_bands])
    assert np.max(np.abs(got - oracle)) <= 1e-9 * np.max(np.abs(oracle))


def test_wedge_supported_volume_hits_single_band(small_sys):
    sys = small_sys
    target = next(i for i in sys.detail_indices() if (i.d, i.l1, i.l2) == (1, 0, 0))
    v_target = sys.expand(sys.filters[target])
    w_fine = sys.windows[target.j]
    mask = (np.broadcast_to(v_target, sys.shape) > 0.99) & (w_fine > 0.99)
    assert mask.any()
    rng = np.random.default_rng(22)
    spec = np.where(mask, rng.standard_normal(sys.shape), 0.0).astype(complex)
    mirror = spec
    for ax in range(4):
        mirror = np.roll(np.flip(mirror, axis=ax), 1, axis=ax)
    spec = 0.5 * (spec + np.conj(mirror))
    f = Volume4(sys.dims, np.fft.ifftn(spec).real)
    c = forward(f, sys)
    scale = np.max(np.abs(f.data))
    # target band carries nearly everything
    assert np.max(np.abs(c.detail[target].data - f.data)) <= 0.05 * scale
    # bands whose support is disjoint from the input's are exactly quiet
    for idx, band in c.detail.items():
        overlap = (np.broadcast_to(sys.expand(sys.filters[idx]), sys.shape) > 0) & mask
        if idx != target and not overlap.any():
            assert np.max(np.abs(band.data)) <= 1e-12 * scale, idx
    assert np.max(np.abs(c.coarse.data)) <= 1e-12 * scale


def test_round_trip(small_sys):
    f = random_volume(small_sys.dims, 23)
    g = inverse(forward(f, small_sys), small_sys)
    assert np.max(np.abs(g.data - f.data)) <= 1e-8 * np.max(np.abs(f.data))


def test_zero_coeffs_give_zero_volume(small_sys):
    flat = np.zeros(small_sys.coeff_count())
    assert np.all(inverse_flat(small_sys, flat) == 0.0)


def test_inverse_is_linear(tiny_sys):
    rng = np.random.default_rng(24)
    c1 = rng.standard_normal(tiny_sys.coeff_count())
    c2 = rng.standard_normal(tiny_sys.coeff_count())
    a, b = 1.7, -0.4
    lhs = inverse_flat(tiny_sys, a * c1 + b * c2)
    rhs = a * inverse_flat(tiny_sys, c1) + b * inverse_flat(tiny_sys, c2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-11 * np.max(np.abs(rhs))


def test_adjoint_dot_identity(small_sys):
    rng = np.random.default_rng(25)
    for trial in range(5):
        f = rng.standard_normal(small_sys.shape)
        u = rng.standard_normal(small_sys.coeff_count())
        lhs = np.dot(forward_flat(small_sys, f), u)
        rhs = np.sum(f * adjoint_flat(small_sys, u))
        norm = np.linalg.norm(f) * np.linalg.norm(u)
        assert abs(lhs - rhs) <= 1e-9 * norm


def test_adjoint_differs_from_inverse(small_sys):
    rng = np.random.default_rng(26)
    u = rng.standard_normal(small_sys.coeff_count())
    a = adjoint_flat(small_sys, u)
    i = inverse_flat(small_sys, u)
    assert np.max(np.abs(a - i)) > 1e-3 * np.max(np.abs(i))


def test_zero_dual_gives_zero_adjoint(small_sys):
    assert np.all(adjoint_flat(small_sys, np.zeros(small_sys.coeff_count())) == 0.0)


def test_normal_operator_is_fourier_multiplier(tiny_sys):
    f = random_volume(tiny_sys.dims, 27)
    g = adjoint_flat(tiny_sys, forward_flat(tiny_sys, f.data))
    lhs = np.fft.fftn(g)
    rhs = frame_multiplier(tiny_sys) * np.fft.fftn(f.data)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * np.max(np.abs(rhs))


def test_wedge_limited_adjoint_matches_spectral_oracle(small_sys):
    sys = small_sys
    target = next(i for i in sys.detail_indices() if (i.d, i.l1, i.l2) == (1, 0, 0))
    mask = (np.broadcast_to(sys.expand(sys.filters[target]), sys.shape) > 0.99) & (
        sys.windows[target.j] > 0.99
    )
    rng = np.random.default_rng(28)
    spec = np.where(mask, rng.standard_normal(sys.shape), 0.0).astype(complex)
    mirror = spec
    for ax in range(4):
        mirror = np.roll(np.flip(mirror, axis=ax), 1, axis=ax)
    spec = 0.5 * (spec + np.conj(mirror))
    f = np.fft.ifftn(spec).real
    g = adjoint_flat(sys, forward_flat(sys, f))
    oracle = np.fft.ifftn(frame_multiplier(sys) * np.fft.fftn(f)).real
    assert np.max(np.abs(g - oracle)) <= 1e-9 * np.max(np.abs(oracle))


class TestFrameBounds:
    def test_upper_at_most_one(self):
        for args in [((16, 16, 16, 4), 1, (1,)), ((16, 16, 16, 8), 2, (1, 2))]:
            lo, up = frame_bounds(build_system(*args))
            assert up <= 1.0 + 1e-12
            assert lo > 0.0

    def test_power_method_oracle(self, tiny_sys):
        lo, up = frame_bounds(tiny_sys)
        rng = np.random.default_rng(29)
        x = rng.standard_normal(tiny_sys.shape)
        x /= np.linalg.norm(x)
        lam = 0.0
        for _ in range(300):
            y = adjoint_flat(tiny_sys, forward_flat(tiny_sys, x))
            lam = float(np.sum(x * y))
            x = y / np.linalg.norm(y)
        assert abs(lam - up) <= 1e-3 * up


def test_coefficient_count(small_sys):
    n_dirs = sum(1 for _ in small_sys.detail_indices())
    assert small_sys.coeff_count() == small_sys.grid_size * (1 + n_dirs)
    f = random_volume(small_sys.dims, 30)
    c = forward(f, small_sys)
    total = c.coarse.data.size + sum(b.data.size for b in c.detail.values())
    assert total == small_sys.coeff_count()


def test_serialization_round_trip(tmp_path, tiny_sys):
    f = random_volume(tiny_sys.dims, 31)
    c = forward(f, tiny_sys)
    save_coeffs(tmp_path / "c", c)
    c2 = load_coeffs(tmp_path / "c")
    assert set(c2.detail) == set(c.detail)
    # disk format is float32 so compare at its precision
    assert np.allclose(c2.coarse.data, c.coarse.data, atol=1e-6)
    for idx in c.detail:
        assert np.allclose(c2.detail[idx].data, c.detail[idx].data, atol=1e-6)


def test_3d_mode_round_trip_and_adjoint():
    sys3 = build_system((16, 16, 16), J=1, shear_radii=(1,))
    rng = np.random.default_rng(32)
    f = rng.standard_normal((16, 16, 16))
    g = inverse_flat(sys3, forward_flat(sys3, f))
    assert np.max(np.abs(g - f)) <= 1e-8 * np.max(np.abs(f))
    u = rng.standard_normal(sys3.coeff_count())
    lhs = np.dot(forward_flat(sys3, f), u)
    rhs = np.sum(f * adjoint_flat(sys3, u))
    assert abs(lhs - rhs) <= 1e-9 * np.linalg.norm(f) * np.linalg.norm(u)


def test_dims_mismatch_rejected(small_sys):
    with pytest.raises(ValueError, match="match"):
        forward(Volume4.zeros(GridDims(8, 8, 8, 4)), small_sys)


def test_missing_index_rejected(small_sys):
    f = random_volume(small_sys.dims, 33)
    c = forward(f, small_sys)
    detail = dict(c.detail)
    detail.pop(next(iter(detail)))
    with pytest.raises(ValueError, match="missing"):
        inverse(CoeffSet(c.coarse, detail), small_sys)
