"""Pair similarity, average Hausdorff label affinity, prototype regularizer."""

import numpy as np
import pytest

from tailhash import affinity, nn


# ------------------------------------------------------------ pair_similarity

def test_pair_similarity_shared_label():
    L = np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)
    S = affinity.pair_similarity(L)
    assert S[0, 1] == 1


def test_pair_similarity_disjoint():
    L = np.array([[1, 0, 0], [0, 0, 1]], dtype=np.uint8)
    assert affinity.pair_similarity(L)[0, 1] == 0


def test_pair_similarity_matches_brute_force():
    rng = np.random.default_rng(0)
    L = (rng.random((6, 3)) < 0.5).astype(np.uint8)
    L[L.sum(axis=1) == 0, 0] = 1
    S = affinity.pair_similarity(L)
    for i in range(6):
        for j in range(6):
            shared = any(L[i, a] and L[j, a] for a in range(3))
            assert S[i, j] == (1 if shared else 0)
    assert np.array_equal(S, S.T)
    assert np.all(np.diag(S) == 1)


def test_pair_similarity_rejects_unlabeled_sample():
    with pytest.raises(ValueError):
        affinity.pair_similarity(np.array([[1, 0], [0, 0]], dtype=np.uint8))


# -------------------------------------------------------------- avg_hausdorff

def test_avg_hausdorff_identical_sets():
    A = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert affinity.avg_hausdorff(A, A) == 0.0


def test_avg_hausdorff_singletons():
    u = np.array([[0.0, 0.0]])
    v = np.array([[3.0, 4.0]])
    assert affinity.avg_hausdorff(u, v) == pytest.approx(5.0)


def test_avg_hausdorff_three_point_enumeration():
    # A = {0, 2}, B = {1} in 1-D: min-terms 1, 1 and 1, denominator 3
    A = np.array([[0.0], [2.0]])
    B = np.array([[1.0]])
    assert affinity.avg_hausdorff(A, B) == pytest.approx(1.0)


def test_avg_hausdorff_symmetric():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((4, 3))
    B = rng.standard_normal((6, 3))
    assert affinity.avg_hausdorff(A, B) == pytest.approx(
        affinity.avg_hausdorff(B, A))


def test_avg_hausdorff_rejects_empty():
    with pytest.raises(ValueError):
        affinity.avg_hausdorff(np.zeros((0, 2)), np.zeros((1, 2)))


# ------------------------------------------------------------- label_affinity

def test_label_affinity_identical_sets_all_one():
    feats = np.tile(np.array([[1.0, 2.0]]), (4, 1))
    L = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=np.uint8)
    aff = affinity.label_affinity(feats, L)
    np.testing.assert_array_equal(aff.H, np.zeros((2, 2)))
    np.testing.assert_allclose(aff.R, np.ones((2, 2)))


def test_label_affinity_two_label_substitution():
    # H_12 = sigma (the only off-diagonal entry) -> R_12 = exp(-1/sigma)
    feats = np.array([[0.0], [3.0]])
    L = np.eye(2, dtype=np.uint8)
    aff = affinity.label_affinity(feats, L)
    assert aff.sigma == pytest.approx(3.0)
    assert aff.R[0, 1] == pytest.approx(np.exp(-1.0 / 3.0))


def test_label_affinity_matches_direct_recomputation():
    rng = np.random.default_rng(2)
    feats = rng.standard_normal((9, 4))
    L = np.zeros((9, 3), dtype=np.uint8)
    L[np.arange(9), np.arange(9) % 3] = 1
    aff = affinity.label_affinity(feats, L)
    sets = [feats[L[:, a] > 0] for a in range(3)]
    H = np.zeros((3, 3))
    for a in range(3):
        for b in range(3):
            if a != b:
                H[a, b] = affinity.avg_hausdorff(sets[a], sets[b])
    sigma = H[~np.eye(3, dtype=bool)].mean()
    np.testing.assert_allclose(aff.H, H, atol=1e-12)
    np.testing.assert_allclose(aff.R, np.exp(-H / sigma ** 2), atol=1e-12)
    np.testing.assert_allclose(aff.D, aff.R.sum(axis=1), atol=1e-12)


def test_label_affinity_properties():
    rng = np.random.default_rng(3)
    feats = rng.standard_normal((12, 3))
    L = np.zeros((12, 4), dtype=np.uint8)
    L[np.arange(12), np.arange(12) % 4] = 1
    aff = affinity.label_affinity(feats, L)
    assert np.all(aff.R > 0) and np.all(aff.R <= 1)
    assert np.allclose(aff.R, aff.R.T)
    # Laplacian of a symmetric nonnegative affinity is PSD
    eigs = np.linalg.eigvalsh(aff.laplacian)
    assert eigs.min() >= -1e-10


def test_label_affinity_rejects_empty_label():
    with pytest.raises(ValueError):
        affinity.label_affinity(np.zeros((2, 2)),
                                np.array([[1, 0], [1, 0]], dtype=np.uint8))


# ----------------------------------------------------------- label_prototypes

def test_label_prototypes_single_sample_per_label():
    codes = np.array([[1.0, 2.0], [3.0, 4.0]])
    L = np.eye(2, dtype=np.uint8)
    P = affinity.label_prototypes(codes, L)
    np.testing.assert_allclose(P, codes.T)


def test_label_prototypes_matches_group_mean():
    rng = np.random.default_rng(4)
    codes = rng.standard_normal((8, 3))
    L = (rng.random((8, 4)) < 0.5).astype(np.uint8)
    L[:, 0] = 1   # no empty label
    P = affinity.label_prototypes(codes, L)
    for a in range(4):
        members = codes[L[:, a] > 0]
        if members.size:
            np.testing.assert_allclose(P[:, a], members.mean(axis=0),
                                       atol=1e-12)


# ----------------------------------------------------------------- J1 and grad

def _random_affinity(rng, c):
    feats = rng.standard_normal((3 * c, 3))
    L = np.zeros((3 * c, c), dtype=np.uint8)
    L[np.arange(3 * c), np.arange(3 * c) % c] = 1
    return affinity.label_affinity(feats, L)


def test_j1_zero_on_constant_prototypes():
    rng = np.random.default_rng(5)
    aff = _random_affinity(rng, 4)
    C = np.tile(rng.standard_normal((3, 1)), (1, 4))
    val, _ = affinity.j1_loss_and_grad(C, aff, aff)
    assert abs(val) <= 1e-10


def test_j1_two_label_closed_form():
    # c=2: J1 = (Rx_12 + Ry_12) ||C_1 - C_2||^2
    rng = np.random.default_rng(6)
    aff = _random_affinity(rng, 2)
    C = rng.standard_normal((3, 2))
    val, _ = affinity.j1_loss_and_grad(C, aff, aff)
    expected = 2 * aff.R[0, 1] * float(np.sum((C[:, 0] - C[:, 1]) ** 2))
    assert val == pytest.approx(expected)


def test_j1_trace_equals_pairwise_sum():
    rng = np.random.default_rng(7)
    for _ in range(10):
        c = int(rng.integers(2, 6))
        aff_x = _random_affinity(rng, c)
        aff_y = _random_affinity(rng, c)
        C = rng.standard_normal((4, c))
        val, _ = affinity.j1_loss_and_grad(C, aff_x, aff_y)
        assert abs(val - affinity.j1_pairwise(C, aff_x, aff_y)) <= 1e-10


def test_j1_nonnegative():
    rng = np.random.default_rng(8)
    for _ in range(10):
        aff = _random_affinity(rng, 3)
        C = rng.standard_normal((2, 3))
        val, _ = affinity.j1_loss_and_grad(C, aff, aff)
        assert val >= -1e-12


def test_j1_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    aff_x = _random_affinity(rng, 4)
    aff_y = _random_affinity(rng, 4)
    C = rng.standard_normal((3, 4))
    _, grad = affinity.j1_loss_and_grad(C, aff_x, aff_y)
    numeric = nn.finite_diff_grad(
        lambda M: affinity.j1_loss_and_grad(M, aff_x, aff_y)[0], C)
    np.testing.assert_allclose(grad, numeric, rtol=1e-6, atol=1e-8)


def test_j1_dimension_mismatch():
    rng = np.random.default_rng(10)
    aff = _random_affinity(rng, 3)
    with pytest.raises(ValueError):
        affinity.j1_loss_and_grad(np.zeros((2, 4)), aff, aff)


def test_restrict_subsets_affinity():
    rng = np.random.default_rng(11)
    aff = _random_affinity(rng, 5)
    sub = aff.restrict(np.array([0, 2, 4]))
    np.testing.assert_array_equal(sub.H, aff.H[np.ix_([0, 2, 4], [0, 2, 4])])
    np.testing.assert_allclose(sub.D, sub.R.sum(axis=1))
