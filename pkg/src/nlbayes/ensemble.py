"""Ensemble containers, sample moments and the observed/unobserved split."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InsufficientEnsembleError


@dataclass(frozen=True)
class StatePartition:
    """Split of a ``dim``-dimensional state into unobserved (u) and observed (v) blocks.

    ``observed_indices`` may be any ordered set of state indices, not only a
    trailing block, so e.g. every other Lorenz 96 component can be observed
    without reordering the state.
    """

    dim: int
    observed_indices: tuple[int, ...]

    def __post_init__(self):
        obs = tuple(int(i) for i in self.observed_indices)
        object.__setattr__(self, "observed_indices", obs)
        if len(obs) < 1:
            raise ValueError("at least one observed component is required")
        if len(set(obs)) != len(obs):
            raise ValueError("observed_indices must be distinct")
        if any(i < 0 or i >= self.dim for i in obs):
            raise ValueError(f"observed_indices must lie in [0, {self.dim})")

    @classmethod
    def trailing(cls, d1: int, d2: int) -> "StatePartition":
        """Partition with u first and v as the last ``d2`` components."""
        return cls(d1 + d2, tuple(range(d1, d1 + d2)))

    @property
    def d2(self) -> int:
        return len(self.observed_indices)

    @property
    def d1(self) -> int:
        return self.dim - self.d2

    @property
    def unobserved_indices(self) -> tuple[int, ...]:
        obs = set(self.observed_indices)
        return tuple(i for i in range(self.dim) if i not in obs)

    @property
    def v_index(self) -> np.ndarray:
        return np.asarray(self.observed_indices, dtype=int)

    @property
    def u_index(self) -> np.ndarray:
        return np.asarray(self.unobserved_indices, dtype=int)

    def projection(self) -> np.ndarray:
        """The row-selection matrix H with ``v = H U``."""
        H = np.zeros((self.d2, self.dim))
        H[np.arange(self.d2), self.v_index] = 1.0
        return H

    def join(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Inverse of :func:`split_uv`: scatter u- and v-blocks into full states."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        out = np.empty(v.shape[:-1] + (self.dim,))
        out[..., self.u_index] = u
        out[..., self.v_index] = v
        return out


@dataclass(frozen=True)
class Ensemble:
    """``K`` members of a ``dim``-dimensional state, one member per row."""

    members: np.ndarray
    partition: StatePartition

    def __post_init__(self):
        X = np.array(self.members, dtype=float)
        if X.ndim != 2:
            raise ValueError("members must be a K x d matrix")
        if X.shape[1] != self.partition.dim:
            raise ValueError(
                f"members have {X.shape[1]} columns, partition expects {self.partition.dim}"
            )
        if X.shape[0] < 2:
            raise InsufficientEnsembleError(f"need at least 2 members, got {X.shape[0]}")
        if not np.isfinite(X).all():
            raise DivergenceError("ensemble contains non-finite entries")
        X.setflags(write=False)
        object.__setattr__(self, "members", X)

    @property
    def size(self) -> int:
        return self.members.shape[0]

    @property
    def dim(self) -> int:
        return self.members.shape[1]

    @property
    def u(self) -> np.ndarray:
        return self.members[:, self.partition.u_index]

    @property
    def v(self) -> np.ndarray:
        return self.members[:, self.partition.v_index]

    @property
    def mean(self) -> np.ndarray:
        return self.members.mean(axis=0)

    def with_members(self, members: np.ndarray) -> "Ensemble":
        return Ensemble(members, self.partition)


@dataclass(frozen=True)
class Moments:
    """Mean and covariance of the full state with block views on the partition."""

    mean: np.ndarray
    cov: np.ndarray
    partition: StatePartition = field(repr=False)

    @property
    def u_mean(self) -> np.ndarray:
        return self.mean[self.partition.u_index]

    @property
    def v_mean(self) -> np.ndarray:
        return self.mean[self.partition.v_index]

    def _block(self, rows, cols):
        return self.cov[np.ix_(rows, cols)]

    @property
    def C_uu(self) -> np.ndarray:
        p = self.partition
        return self._block(p.u_index, p.u_index)

    @property
    def C_uv(self) -> np.ndarray:
        p = self.partition
        return self._block(p.u_index, p.v_index)

    @property
    def C_vu(self) -> np.ndarray:
        p = self.partition
        return self._block(p.v_index, p.u_index)

    @property
    def C_vv(self) -> np.ndarray:
        p = self.partition
        return self._block(p.v_index, p.v_index)


def ensemble_moments(ens: Ensemble) -> Moments:
    """Sample mean and unbiased (``1/(K-1)``) sample covariance."""
    K = ens.size
    if K < 2:
        raise InsufficientEnsembleError(f"need at least 2 members, got {K}")
    mean = ens.members.mean(axis=0)
    A = ens.members - mean
    cov = A.T @ A / (K - 1)
    cov = 0.5 * (cov + cov.T)
    return Moments(mean, cov, ens.partition)


def perturbed_constant_ensemble(value, variance: float, K: int, seed=None,
                                partition: StatePartition | None = None) -> Ensemble:
    """Members ``value + N(0, variance * I)``, deterministic for a fixed seed.

    Without an explicit ``partition`` the last component is taken as observed.
    """
    if variance < 0:
        raise ValueError(f"variance must be nonnegative, got {variance}")
    if K < 2:
        raise InsufficientEnsembleError(f"need at least 2 members, got {K}")
    value = np.atleast_1d(np.asarray(value, dtype=float))
    d = value.size
    if partition is None:
        partition = StatePartition.trailing(d - 1, 1)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((K, d)) * np.sqrt(variance)
    return Ensemble(value[None, :] + noise, partition)


def split_uv(ens: Ensemble) -> tuple[np.ndarray, np.ndarray]:
    """Return the ``K x d1`` u-block and ``K x d2`` v-block."""
    return ens.u, ens.v
