import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlbayes.ensemble import (Ensemble, StatePartition, ensemble_moments,
                              perturbed_constant_ensemble, split_uv)
from nlbayes.errors import DivergenceError, InsufficientEnsembleError


def test_moments_two_members():
    ens = Ensemble([[0.0, 0.0], [2.0, 2.0]], StatePartition.trailing(1, 1))
    mom = ensemble_moments(ens)
    np.testing.assert_allclose(mom.mean, [1.0, 1.0])
    np.testing.assert_allclose(mom.cov, [[2.0, 2.0], [2.0, 2.0]])


def test_moments_identical_members():
    ens = Ensemble(np.tile([1.0, -3.0, 2.0], (5, 1)), StatePartition.trailing(2, 1))
    np.testing.assert_array_equal(ensemble_moments(ens).cov, np.zeros((3, 3)))


def test_moments_cross():
    X = [[1, 0], [-1, 0], [0, 1], [0, -1]]
    mom = ensemble_moments(Ensemble(X, StatePartition.trailing(1, 1)))
    np.testing.assert_allclose(mom.mean, [0, 0], atol=1e-15)
    np.testing.assert_allclose(mom.cov, np.diag([2 / 3, 2 / 3]))


def test_moment_blocks_follow_partition():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((50, 4))
    p = StatePartition(4, (3, 0))
    mom = ensemble_moments(Ensemble(X, p))
    full = np.cov(X, rowvar=False)
    np.testing.assert_allclose(mom.C_vv, full[np.ix_([3, 0], [3, 0])])
    np.testing.assert_allclose(mom.C_uv, full[np.ix_([1, 2], [3, 0])])
    np.testing.assert_allclose(mom.C_uv, mom.C_vu.T)
    np.testing.assert_allclose(mom.v_mean, X.mean(0)[[3, 0]])


def test_too_few_members():
    with pytest.raises(InsufficientEnsembleError):
        Ensemble([[1.0, 2.0]], StatePartition.trailing(1, 1))
    with pytest.raises(InsufficientEnsembleError):
        perturbed_constant_ensemble([0.0, 0.0], 1.0, K=1)


def test_non_finite_members_rejected():
    with pytest.raises(DivergenceError):
        Ensemble([[1.0, np.nan], [0.0, 0.0]], StatePartition.trailing(1, 1))


@pytest.mark.parametrize("obs", [(), (0, 0), (3,)])
def test_bad_partitions(obs):
    with pytest.raises(ValueError):
        StatePartition(3, obs)


def test_perturbed_zero_variance():
    ens = perturbed_constant_ensemble([1.0, 2.0], 0.0, K=4, seed=1)
    np.testing.assert_array_equal(ens.members, np.tile([1.0, 2.0], (4, 1)))


def test_perturbed_variance_band():
    ens = perturbed_constant_ensemble(np.zeros(3), 0.1, K=500, seed=3)
    var = ens.members.var(axis=0, ddof=1)
    assert np.all((0.07 <= var) & (var <= 0.13))


def test_perturbed_deterministic():
    a = perturbed_constant_ensemble(np.zeros(3), 0.1, K=20, seed=11)
    b = perturbed_constant_ensemble(np.zeros(3), 0.1, K=20, seed=11)
    np.testing.assert_array_equal(a.members, b.members)


def test_perturbed_negative_variance():
    with pytest.raises(ValueError):
        perturbed_constant_ensemble([0.0], -1.0, K=3)


def test_split_empty_u_block():
    X = np.arange(6.0).reshape(3, 2)
    u, v = split_uv(Ensemble(X, StatePartition.trailing(0, 2)))
    assert u.shape == (3, 0)
    np.testing.assert_array_equal(v, X)


def test_split_projection():
    ens = Ensemble([[3.0, 7.0], [1.0, 1.0]], StatePartition(2, (1,)))
    u, v = split_uv(ens)
    assert u[0, 0] == 3.0 and v[0, 0] == 7.0


def test_projection_matrix():
    p = StatePartition(4, (1, 3))
    x = np.array([10.0, 11.0, 12.0, 13.0])
    np.testing.assert_array_equal(p.projection() @ x, [11.0, 13.0])


members = arrays(np.float64, st.tuples(st.integers(2, 12), st.just(4)),
                 elements=st.floats(-1e3, 1e3, allow_nan=False))
partitions = st.lists(st.integers(0, 3), min_size=1, max_size=4, unique=True)


@settings(max_examples=60, deadline=None)
@given(members, partitions)
def test_split_join_roundtrip(X, obs):
    ens = Ensemble(X, StatePartition(4, tuple(obs)))
    u, v = split_uv(ens)
    np.testing.assert_array_equal(ens.partition.join(u, v), ens.members)


@settings(max_examples=60, deadline=None)
@given(members)
def test_covariance_psd(X):
    cov = ensemble_moments(Ensemble(X, StatePartition.trailing(3, 1))).cov
    scale = max(1.0, np.abs(cov).max())
    assert np.linalg.eigvalsh(cov).min() >= -1e-10 * scale


@settings(max_examples=40, deadline=None)
@given(members, st.randoms())
def test_moments_permutation_invariant(X, rnd):
    perm = list(range(X.shape[0]))
    rnd.shuffle(perm)
    p = StatePartition.trailing(3, 1)
    a = ensemble_moments(Ensemble(X, p))
    b = ensemble_moments(Ensemble(X[perm], p))
    np.testing.assert_allclose(a.mean, b.mean, rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(a.cov, b.cov, rtol=1e-9, atol=1e-6)
