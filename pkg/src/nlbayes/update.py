"""Nonlinear Bayesian update of an ensemble.

The observed block is denoised with the EAKF; the unobserved block is then
estimated by kernel regression on prior members near the denoised value,
optionally refined by clustering draws from the conditional KDE. When too
few prior members are near, the whole state falls back to the EAKF.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import Ensemble
from .errors import DegenerateWeightsError
from .gaussian import (Localization, MeasurementModel, _serial_adjust, eakf_update)
from .kde import KdeModel, nadaraya_watson, sample_conditional
from .locality import (MIN_THRESHOLD, ClusterResult, cluster_threshold, single_linkage_flat_clusters,
                       subsample)


@dataclass(frozen=True)
class NlbuConfig:
    """Tuning knobs of the nonlinear update.

    ``m_min=None`` means ``2 * d`` for a ``d``-dimensional state.
    ``fallback_inflation=None`` reuses ``inflation``.
    """

    radius: float = 1.0
    m_min: int | None = None
    clustering_enabled: bool = False
    subsampling_enabled: bool = True
    oversample_factor: int = 10
    inflation: float = 1.0
    fallback_inflation: float | None = None
    localization: Localization | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.m_min is not None and self.m_min < 1:
            raise ValueError("m_min must be at least 1")
        if self.oversample_factor < 1:
            raise ValueError("oversample_factor must be at least 1")

    def min_samples(self, dim: int) -> int:
        return 2 * dim if self.m_min is None else self.m_min

    @property
    def fallback_factor(self) -> float:
        return self.inflation if self.fallback_inflation is None else self.fallback_inflation

    @property
    def label(self) -> str:
        tags = [t for t, on in (("SS", self.subsampling_enabled), ("Cl", self.clustering_enabled)) if on]
        return "NlBU" + (" w/ " + " ".join(tags) if tags else "")


@dataclass(frozen=True)
class UpdateOutcome:
    posterior: Ensemble
    posterior_mean: np.ndarray
    used_fallback: bool
    M: int
    cluster_report: ClusterResult | None = None


def denoise_observed(prior: Ensemble, meas: MeasurementModel, inflation: float = 1.0,
                     localization: Localization | None = None) -> np.ndarray:
    """EAKF applied to the observed block alone; returns the updated ``K x d2`` members."""
    p = prior.partition
    return _serial_adjust(prior.v, np.arange(p.d2), p.v_index, meas.m, np.diag(meas.gamma),
                          inflation, localization)


def build_posterior_u_ensemble(u_hat, K: int, sigma_o2: float, seed=None) -> np.ndarray:
    """``K`` members ``u_hat + eta`` with ``eta ~ N(0, sigma_o2 * I)``."""
    if sigma_o2 < 0:
        raise ValueError("sigma_o2 must be nonnegative")
    u_hat = np.atleast_1d(np.asarray(u_hat, dtype=float))
    rng = np.random.default_rng(seed)
    return u_hat[None, :] + np.sqrt(sigma_o2) * rng.standard_normal((K, u_hat.size))


def nlbu_update(prior: Ensemble, meas: MeasurementModel, cfg: NlbuConfig = NlbuConfig(),
                seed=None) -> UpdateOutcome:
    """One nonlinear Bayesian update of ``prior`` with measurement ``meas``."""
    if prior.partition != meas.partition:
        raise ValueError("ensemble and measurement partitions differ")
    p = prior.partition
    K = prior.size
    rng = np.random.default_rng(seed)

    def fallback(M):
        post = eakf_update(prior, meas, cfg.fallback_factor, cfg.localization)
        return UpdateOutcome(post, post.mean, True, M)

    v_post = denoise_observed(prior, meas, cfg.inflation, cfg.localization)
    v_hat = v_post.mean(axis=0)

    if cfg.subsampling_enabled:
        idx = subsample(prior, v_hat, meas.gamma, cfg.radius).indices
    else:
        idx = np.arange(K)
    M = int(idx.size)
    # a KDE bandwidth needs at least two samples
    if M < max(cfg.min_samples(p.dim), 2):
        return fallback(M)

    report = None
    if p.d1 == 0:
        u_hat = np.zeros(0)
    else:
        u_sub = prior.u[idx]
        kde = KdeModel.from_samples(u_sub, prior.v[idx])
        try:
            if cfg.clustering_enabled:
                draws = sample_conditional(kde, v_hat, cfg.oversample_factor * K, rng)
                thr = max(cluster_threshold(u_sub), MIN_THRESHOLD)
                report = single_linkage_flat_clusters(draws, thr)
                u_hat = report.selected_mean
            else:
                u_hat = nadaraya_watson(kde, v_hat)
        except DegenerateWeightsError:
            return fallback(M)

    u_post = build_posterior_u_ensemble(u_hat, K, meas.max_variance, rng)
    posterior = prior.with_members(p.join(u_post, v_post))
    return UpdateOutcome(posterior, p.join(u_hat, v_hat), False, M, report)
