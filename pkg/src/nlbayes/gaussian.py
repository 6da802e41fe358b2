"""Exact Gaussian updates and the serial ensemble adjustment Kalman filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .ensemble import Ensemble, Moments, StatePartition
from .errors import NumericalError, UnsupportedConfigurationError


@dataclass(frozen=True)
class MeasurementModel:
    """Linear projection measurement ``m = H U + eps`` with ``eps ~ N(0, gamma)``."""

    partition: StatePartition
    gamma: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        d2 = self.partition.d2
        if gamma.shape != (d2, d2):
            raise ValueError(f"gamma must be {d2} x {d2}, got {gamma.shape}")
        if m.shape != (d2,):
            raise ValueError(f"m must have length {d2}, got {m.shape}")
        if not np.isfinite(m).all():
            raise ValueError("measurement contains non-finite entries")
        if not np.allclose(gamma, gamma.T):
            raise ValueError("gamma must be symmetric")
        try:
            linalg.cholesky(gamma, lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalError("gamma is not positive definite") from exc
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "m", m)

    @classmethod
    def isotropic(cls, partition: StatePartition, sigma2: float, m) -> "MeasurementModel":
        return cls(partition, sigma2 * np.eye(partition.d2), m)

    @property
    def is_diagonal(self) -> bool:
        g = self.gamma
        return bool(np.all(g == np.diag(np.diag(g))))

    @property
    def max_variance(self) -> float:
        """Largest eigenvalue of ``gamma``."""
        return float(linalg.eigvalsh(self.gamma)[-1])


@dataclass(frozen=True)
class GaussianPosterior:
    mean: np.ndarray
    cov: np.ndarray
    gain: np.ndarray


def _factor_spd(S: np.ndarray, what: str):
    try:
        return linalg.cho_factor(S, lower=True)
    except linalg.LinAlgError as exc:
        cond = np.linalg.cond(S)
        raise NumericalError(f"{what} is singular (condition number {cond:.3e})") from exc


def kalman_posterior_moments(prior: Moments, meas: MeasurementModel) -> GaussianPosterior:
    """Gaussian posterior of the full state from prior moments and a projection measurement.

    The unobserved and observed blocks are updated separately,

        u_hat = u + C_uv (C_vv + Gamma)^-1 (m - v)
        v_hat = v + C_vv (C_vv + Gamma)^-1 (m - v)

    with the matching covariance blocks ``C_xy - C_xv S^-1 C_vy``.
    """
    p = prior.partition
    if p != meas.partition:
        raise ValueError("prior and measurement partitions differ")
    S = prior.C_vv + meas.gamma
    fac = _factor_spd(S, "innovation covariance C_vv + Gamma")

    C_xv = prior.cov[:, p.v_index]  # rows: full state, cols: observed
    gain = linalg.cho_solve(fac, C_xv.T).T
    innov = meas.m - prior.v_mean

    mean = np.empty(p.dim)
    mean[p.u_index] = prior.u_mean + prior.C_uv @ linalg.cho_solve(fac, innov)
    mean[p.v_index] = prior.v_mean + prior.C_vv @ linalg.cho_solve(fac, innov)

    cov = prior.cov - gain @ C_xv.T
    cov = 0.5 * (cov + cov.T)
    return GaussianPosterior(mean, cov, gain)


def conditional_gaussian(prior: Moments, v_query) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of u given v under the Gaussian prior."""
    v_query = np.atleast_1d(np.asarray(v_query, dtype=float))
    fac = _factor_spd(prior.C_vv, "C_vv")
    slope = linalg.cho_solve(fac, prior.C_vu).T  # C_uv C_vv^-1
    mean = prior.u_mean + slope @ (v_query - prior.v_mean)
    cov = prior.C_uu - slope @ prior.C_vu
    return mean, 0.5 * (cov + cov.T)


def gaspari_cohn_taper(distance, half_width: float):
    """Gaspari-Cohn fifth-order compactly supported correlation taper.

    Equals 1 at zero distance and vanishes beyond ``2 * half_width``.
    Works elementwise on arrays.
    """
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    r = np.abs(np.asarray(distance, dtype=float)) / half_width
    out = np.zeros_like(r)
    inner = r <= 1.0
    outer = (r > 1.0) & (r < 2.0)
    ri = r[inner]
    out[inner] = ((((-0.25 * ri + 0.5) * ri + 0.625) * ri - 5.0 / 3.0) * ri**2) + 1.0
    ro = r[outer]
    out[outer] = (
        ((((ro / 12.0 - 0.5) * ro + 0.625) * ro + 5.0 / 3.0) * ro - 5.0) * ro
        + 4.0
        - 2.0 / (3.0 * ro)
    )
    out = np.clip(out, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class Localization:
    """Gaspari-Cohn taper on state-index distance.

    With ``period`` set the distance wraps around (cyclic domains such as
    Lorenz 96).
    """

    half_width: float
    period: int | None = None

    def distances(self, center: int, positions) -> np.ndarray:
        d = np.abs(np.asarray(positions) - center)
        if self.period is not None:
            d = d % self.period
            d = np.minimum(d, self.period - d)
        return d

    def weights(self, center: int, positions) -> np.ndarray:
        return gaspari_cohn_taper(self.distances(center, positions), self.half_width)


def inflate(members: np.ndarray, factor: float) -> np.ndarray:
    """Scale member deviations from the ensemble mean by ``factor``."""
    members = np.asarray(members, dtype=float)
    if factor == 1.0:
        return members.copy()
    mean = members.mean(axis=0)
    return mean + factor * (members - mean)


def eakf_update(ens: Ensemble, meas: MeasurementModel, inflation: float = 1.0,
                localization: Localization | None = None) -> Ensemble:
    """Deterministic ensemble adjustment Kalman filter, one scalar observation at a time.

    Prior deviations are inflated first. Each observed component is then
    shifted and contracted to the exact scalar Gaussian posterior, and the
    increments are regressed onto every state component using the sample
    covariance (optionally tapered by ``localization``).
    """
    if inflation < 1.0:
        raise ValueError(f"inflation must be >= 1, got {inflation}")
    if not meas.is_diagonal:
        raise UnsupportedConfigurationError(
            "serial EAKF requires a diagonal measurement error covariance"
        )
    if ens.partition != meas.partition:
        raise ValueError("ensemble and measurement partitions differ")

    X = _serial_adjust(ens.members, ens.partition.v_index, np.arange(ens.dim),
                       meas.m, np.diag(meas.gamma), inflation, localization)
    return ens.with_members(X)


def _serial_adjust(members, obs_cols, positions, m, obs_var, inflation, localization):
    """EAKF core on a raw member matrix.

    ``positions`` gives the state index of every column, used only for
    localization distances.
    """
    X = inflate(members, inflation)
    K = X.shape[0]
    for j, col in enumerate(obs_cols):
        y = X[:, col]
        y_mean = y.mean()
        y_dev = y - y_mean
        var_p = y_dev @ y_dev / (K - 1)
        if var_p <= 0.0:
            continue  # no spread, nothing to regress
        r = obs_var[j]
        var_a = 1.0 / (1.0 / var_p + 1.0 / r)
        mean_a = var_a * (y_mean / var_p + m[j] / r)
        dy = mean_a + np.sqrt(var_a / var_p) * y_dev - y

        gain = (X - X.mean(axis=0)).T @ y_dev / ((K - 1) * var_p)
        if localization is not None:
            gain = gain * localization.weights(positions[col], positions)
        X = X + np.outer(dy, gain)
    return X
