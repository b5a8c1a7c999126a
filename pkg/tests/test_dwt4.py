import numpy as np
import pytest

from cylsh.core import GridDims, Volume4
from cylsh.dwt4 import (
    DB2_HI,
    DB2_LO,
    WaveletCoeffs,
    analyze_level,
    dwt4_forward,
    dwt4_forward_flat,
    dwt4_inverse,
    dwt4_inverse_flat,
    flat_detail_offset,
)


def random_volume(dims, seed):
    return Volume4(dims, np.random.default_rng(seed).standard_normal(dims.shape))


class TestFilterTaps:
    """The hard-coded db2 taps must satisfy the defining quadrature conditions."""

    def test_lowpass_sum_is_sqrt2(self):
        assert abs(DB2_LO.sum() - np.sqrt(2.0)) < 1e-15

    def test_unit_norm(self):
        assert abs(np.sum(DB2_LO**2) - 1.0) < 1e-15
        assert abs(np.sum(DB2_HI**2) - 1.0) < 1e-15

    def test_double_shift_orthogonality(self):
        assert abs(np.sum(DB2_LO[:2] * DB2_LO[2:])) < 1e-15
        assert abs(np.sum(DB2_LO * DB2_HI)) < 1e-15
        assert abs(np.sum(DB2_LO[:2] * DB2_HI[2:])) < 1e-15

    def test_two_vanishing_moments(self):
        n = np.arange(4)
        assert abs(np.sum(DB2_HI)) < 1e-14
        assert abs(np.sum(n * DB2_HI)) < 1e-14

    def test_exact_closed_form(self):
        s3, s2 = np.sqrt(3.0), 4.0 * np.sqrt(2.0)
        expected = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / s2
        assert np.max(np.abs(DB2_LO - expected)) < 1e-15


def test_constant_volume_has_zero_details():
    dims = GridDims(8, 8, 8, 8)
    c = dwt4_forward(Volume4(dims, np.full(dims.shape, 0.37)), levels=2)
    for lev in c.details:
        for band in lev.values():
            assert np.max(np.abs(band)) < 1e-13
    # approximation carries the scaled constant: each level scales by sqrt(2)^4 = 4
    assert np.allclose(c.approx, 0.37 * 4.0**2, atol=1e-12)


def test_parseval():
    dims = GridDims(16, 16, 16, 16)
    f = random_volume(dims, 40)
    c = dwt4_forward(f, levels=2)
    total = np.sum(c.approx**2) + sum(np.sum(b**2) for lev in c.details for b in lev.values())
    ref = np.sum(f.data**2)
    assert abs(total - ref) <= 1e-10 * ref


def test_single_level_matches_analysis_matrix_oracle():
    """1-level transform of an 8^4 random volume vs an explicit orthogonal matrix."""
    n = 8
    M = np.zeros((n, n))
    for k in range(n // 2):
        for t in range(4):
            M[k, (2 * k + t) % n] += DB2_LO[t]
            M[n // 2 + k, (2 * k + t) % n] += DB2_HI[t]
    assert np.allclose(M @ M.T, np.eye(n), atol=1e-14)  # sanity: orthogonal

    x = np.random.default_rng(41).standard_normal((n, n, n, n))
    oracle = x
    for ax in range(4):
        oracle = np.moveaxis(np.tensordot(M, oracle, axes=(1, ax)), 0, ax)
    got = analyze_level(x)
    assert np.max(np.abs(got - oracle)) <= 1e-10 * np.max(np.abs(oracle))


def test_round_trip():
    dims = GridDims(16, 16, 16, 16)
    f = random_volume(dims, 42)
    g = dwt4_inverse(dwt4_forward(f, levels=2))
    assert np.max(np.abs(g.data - f.data)) <= 1e-10 * np.max(np.abs(f.data))


def test_zero_coeffs_give_zero_volume():
    dims = GridDims(8, 8, 8, 8)
    z = dwt4_inverse_flat(np.zeros(dims.size), dims, levels=1)
    assert np.all(z == 0.0)


def test_inverse_is_adjoint():
    dims = GridDims(8, 8, 8, 8)
    rng = np.random.default_rng(43)
    for _ in range(5):
        f = rng.standard_normal(dims.shape)
        u = rng.standard_normal(dims.size)
        lhs = np.dot(dwt4_forward_flat(f, 1), u)
        rhs = np.sum(f * dwt4_inverse_flat(u, dims, 1))
        assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(f) * np.linalg.norm(u)


def test_isometry_flat():
    dims = GridDims(16, 8, 8, 16)
    f = random_volume(dims, 44)
    flat = dwt4_forward_flat(f.data, levels=2)
    assert flat.size == dims.size
    assert abs(np.sum(flat**2) - np.sum(f.data**2)) <= 1e-10 * np.sum(f.data**2)


def test_flat_round_trip_and_offset():
    dims = GridDims(16, 16, 16, 16)
    f = random_volume(dims, 45)
    flat = dwt4_forward_flat(f.data, levels=2)
    assert flat_detail_offset(dims, 2) == dims.size // 16**2
    g = dwt4_inverse_flat(flat, dims, levels=2)
    assert np.max(np.abs(g - f.data)) <= 1e-10 * np.max(np.abs(f.data))


def test_indivisible_dims_rejected():
    with pytest.raises(ValueError, match="divisible"):
        dwt4_forward(Volume4.zeros(GridDims(12, 8, 8, 8)), levels=3)


def test_layout_mismatch_rejected():
    dims = GridDims(8, 8, 8, 8)
    c = dwt4_forward(random_volume(dims, 46), levels=1)
    bad = dict(c.details[0])
    bad[3] = bad[3][:2]  # wrong shape
    with pytest.raises(ValueError, match="shape"):
        dwt4_inverse(WaveletCoeffs(dims, 1, (bad,), c.approx))
    missing = dict(c.details[0])
    missing.pop(7)
    with pytest.raises(ValueError, match="incomplete"):
        dwt4_inverse(WaveletCoeffs(dims, 1, (missing,), c.approx))


def test_coefficient_count_is_critical():
    dims = GridDims(16, 16, 16, 16)
    c = dwt4_forward(random_volume(dims, 47), levels=2)
    assert c.count() == dims.size
