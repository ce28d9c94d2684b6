import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from hodmd.hosvd import HOSVDResult, hosvd, reconstruct_hosvd
from hodmd.linalg import tprod, unfold


def low_rank_tensor(ranks, dims, seed):
    rng = np.random.default_rng(seed)
    core = rng.standard_normal(ranks)
    factors = [rng.standard_normal((n, r)) for n, r in zip(dims, ranks)]
    return tprod(core, *factors)


def gram_rank(A, rel=1e-10):
    ev = np.linalg.eigvalsh(A @ A.T)
    return int(np.sum(ev > rel * ev.max()))


def test_rank_one_outer_product():
    a, b, c = np.array([1.0, 2.0, 2.0]), np.array([3.0, 4.0]), np.array([1.0, 0.0, -1.0, 1.0])
    T = np.einsum("i,j,k->ijk", a, b, c)
    r = hosvd(T, 1e-12, 1e-12)
    assert r.ranks == (1, 1, 1)
    assert abs(r.core[0, 0, 0]) == pytest.approx(np.linalg.norm(a) * np.linalg.norm(b) * np.linalg.norm(c))
    for f, v in zip((r.factor1, r.factor2, r.temporal_factor), (a, b, c)):
        assert abs(f[:, 0] @ v) / np.linalg.norm(v) == pytest.approx(1.0)


def test_exact_reconstruction_without_truncation():
    T = np.random.default_rng(0).standard_normal((4, 5, 6))
    r = hosvd(T, 0.0, 0.0)
    assert np.linalg.norm(reconstruct_hosvd(r) - T) <= 1e-10 * np.linalg.norm(T)
    assert np.linalg.norm(r.core) == pytest.approx(np.linalg.norm(T), rel=1e-10)


def test_retained_ranks_match_gram_oracle():
    T = low_rank_tensor((2, 3, 2), (6, 7, 8), seed=1)
    expected = tuple(gram_rank(unfold(T, m)) for m in (1, 2, 3))
    assert expected == (2, 3, 2)
    assert hosvd(T, 1e-10, 1e-10).ranks == expected


def test_spatial_and_temporal_tolerances_separate():
    T = low_rank_tensor((3, 3, 3), (6, 6, 6), seed=2)
    coarse = hosvd(T, 0.9, 0.0)
    assert coarse.ranks[2] == 3 and coarse.ranks[0] < 3


def test_truncation_error_bound():
    T = low_rank_tensor((2, 2, 3), (6, 5, 7), seed=3)
    T = T + 0.05 * np.random.default_rng(4).standard_normal(T.shape)
    r = hosvd(T, 0.1, 0.1)
    assert r.ranks == (2, 2, 3)
    discarded = sum(np.sum(s[n:] ** 2) for s, n in zip(r.singular_values_per_mode, r.ranks))
    err = np.linalg.norm(reconstruct_hosvd(r) - T)
    assert err <= np.sqrt(3) * np.sqrt(discarded) * (1 + 1e-12)
    assert err <= np.sqrt(discarded) * (1 + 1e-12)


def test_zero_core_reconstructs_zero():
    r = HOSVDResult(
        core=np.zeros((1, 1, 1)),
        factor1=np.ones((2, 1)),
        factor2=np.ones((3, 1)),
        temporal_factor=np.ones((4, 1)),
        singular_values_per_mode=([1.0], [1.0], [1.0]),
    )
    np.testing.assert_array_equal(reconstruct_hosvd(r), np.zeros((2, 3, 4)))


def test_zero_tensor_errors():
    with pytest.raises(ValueError, match="zero tensor"):
        hosvd(np.zeros((2, 2, 2)), 0.0, 0.0)
    with pytest.raises(ValueError):
        hosvd(np.ones((2, 2)), 0.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(
    st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5)),
    st.sampled_from([0.0, 1e-3, 0.2]),
    st.integers(0, 2**32 - 1),
)
def test_property_factors_orthonormal_and_singular_subspaces(dims, eps, seed):
    T = np.random.default_rng(seed).standard_normal(dims)
    r = hosvd(T, eps, eps)
    assert r.core.shape == r.ranks
    for m, f in enumerate((r.factor1, r.factor2, r.temporal_factor), start=1):
        n = f.shape[1]
        assert np.abs(f.T @ f - np.eye(n)).max() < 1e-10
        U = np.linalg.svd(unfold(T, m), full_matrices=False)[0][:, :n]
        gap_ok = n == len(r.singular_values_per_mode[m - 1]) or (
            r.singular_values_per_mode[m - 1][n - 1] - r.singular_values_per_mode[m - 1][n] > 1e-6
        )
        if gap_ok:
            assert np.max(scipy.linalg.subspace_angles(f, U)) < 1e-8
    assert np.linalg.norm(r.core) <= np.linalg.norm(T) * (1 + 1e-12)
