"""Gaussian kernel density models for conditional regression and sampling.

The joint prior of ``(u, v)`` is modelled as a product-kernel KDE on the
ensemble members. Conditioning on ``v`` turns it into a mixture over the
u-kernels with weights given by the v-kernels at the query point, whose
mean is the Nadaraya-Watson estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .errors import DegenerateWeightsError, InsufficientEnsembleError

# exp() underflows below about -745; beyond this every weight is meaningless.
LOG_KERNEL_FLOOR = -700.0
_RIDGE = 1e-10
_ABS_FLOOR = 1e-300


def scott_bandwidth(samples) -> np.ndarray:
    """Kernel covariance ``M**(-2/(n+4)) * S`` for ``M`` samples of dimension ``n``."""
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    M, n = X.shape
    if M < 2:
        raise InsufficientEnsembleError(f"need at least 2 samples, got {M}")
    S = np.atleast_2d(np.cov(X, rowvar=False))
    return M ** (-2.0 / (n + 4)) * S


def _regularized_cholesky(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cholesky factor of ``H``; ridge it, then fall back to its diagonal if needed.

    Returns the (possibly regularized) bandwidth and its lower factor.
    """
    n = H.shape[0]
    try:
        return H, linalg.cholesky(H, lower=True)
    except linalg.LinAlgError:
        pass
    scale = max(np.trace(H) / n, _ABS_FLOOR)
    Hr = H + _RIDGE * scale * np.eye(n)
    try:
        return Hr, linalg.cholesky(Hr, lower=True)
    except linalg.LinAlgError:
        pass
    diag = np.maximum(np.diag(H), _RIDGE * scale)
    Hd = np.diag(diag)
    return Hd, np.diag(np.sqrt(diag))


@dataclass(frozen=True)
class KdeModel:
    """Centers and bandwidths of a product Gaussian KDE over ``(u, v)``.

    Build with :meth:`from_samples`; the constructor expects bandwidths that
    are already positive definite.
    """

    centers_u: np.ndarray
    centers_v: np.ndarray
    bandwidth_u: np.ndarray
    bandwidth_v: np.ndarray

    def __post_init__(self):
        cu = np.asarray(self.centers_u, dtype=float)
        cv = np.asarray(self.centers_v, dtype=float)
        if cu.ndim == 1:
            cu = cu[:, None]
        if cv.ndim == 1:
            cv = cv[:, None]
        if cu.shape[0] != cv.shape[0] or cu.shape[0] < 1:
            raise ValueError("need the same positive number of u- and v-centers")
        Hu = np.atleast_2d(np.asarray(self.bandwidth_u, dtype=float))
        Hv = np.atleast_2d(np.asarray(self.bandwidth_v, dtype=float))
        object.__setattr__(self, "centers_u", cu)
        object.__setattr__(self, "centers_v", cv)
        object.__setattr__(self, "bandwidth_u", Hu)
        object.__setattr__(self, "bandwidth_v", Hv)
        # Raises LinAlgError for non-SPD input, which is what callers should see.
        object.__setattr__(self, "_chol_u", linalg.cholesky(Hu, lower=True) if cu.shape[1] else Hu)
        object.__setattr__(self, "_chol_v", linalg.cholesky(Hv, lower=True))

    @classmethod
    def from_samples(cls, u, v) -> "KdeModel":
        """Build a model with Scott's-rule bandwidths estimated from the samples."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if v.ndim == 1:
            v = v[:, None]
        Hv, _ = _regularized_cholesky(scott_bandwidth(v))
        if u.shape[1]:
            Hu, _ = _regularized_cholesky(scott_bandwidth(u))
        else:
            Hu = np.zeros((0, 0))
        return cls(u, v, Hu, Hv)

    @property
    def size(self) -> int:
        return self.centers_u.shape[0]

    def log_kernels(self, v_query) -> np.ndarray:
        """Gaussian log-kernels at ``v_query`` up to the shared normalizing constant."""
        v_query = np.atleast_1d(np.asarray(v_query, dtype=float))
        diff = v_query[None, :] - self.centers_v
        z = linalg.solve_triangular(self._chol_v, diff.T, lower=True)
        return -0.5 * np.einsum("ij,ij->j", z, z)


@dataclass(frozen=True)
class ConditionalWeights:
    weights: np.ndarray
    query_v: np.ndarray


def conditional_weights(model: KdeModel, v_query) -> ConditionalWeights:
    """Normalized v-kernel weights of each center at ``v_query``."""
    logk = model.log_kernels(v_query)
    if logk.max() < LOG_KERNEL_FLOOR:
        raise DegenerateWeightsError(
            f"query lies {np.sqrt(-2 * logk.max()):.1f} bandwidths from the nearest center"
        )
    w = np.exp(logk - logsumexp(logk))
    w /= w.sum()
    return ConditionalWeights(w, np.atleast_1d(np.asarray(v_query, dtype=float)))


def nadaraya_watson(model: KdeModel, v_query) -> np.ndarray:
    """Kernel-weighted average of the u-centers at ``v_query``."""
    w = conditional_weights(model, v_query).weights
    return w @ model.centers_u


def sample_conditional(model: KdeModel, v_query, n_draws: int, seed=None) -> np.ndarray:
    """Draw from the conditional mixture ``sum_k w_k(v) N(u_k, H_u)``."""
    if n_draws < 1:
        raise ValueError("n_draws must be positive")
    rng = np.random.default_rng(seed)
    w = conditional_weights(model, v_query).weights
    comp = rng.choice(model.size, size=n_draws, p=w)
    d1 = model.centers_u.shape[1]
    z = rng.standard_normal((n_draws, d1))
    return model.centers_u[comp] + z @ model._chol_u.T
