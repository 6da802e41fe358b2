"""Ensemble Kalman inversion on the augmented state ``(u, G(u))``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ensemble import Ensemble, StatePartition
from .gaussian import MeasurementModel, eakf_update
from .update import NlbuConfig, nlbu_update

# Mean-u covariance trace below which the ensemble counts as collapsed.
COLLAPSE_TRACE = 1e-14


@dataclass(frozen=True)
class EkiProblem:
    forward: Callable[[np.ndarray], np.ndarray]
    m: np.ndarray
    gamma: np.ndarray
    max_iters: int = 30
    rel_tol: float = 1e-6
    truth: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "m", np.atleast_1d(np.asarray(self.m, dtype=float)))
        object.__setattr__(self, "gamma", np.atleast_2d(np.asarray(self.gamma, dtype=float)))
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")

    def misfit(self, g) -> float:
        """``||m - g||_Gamma``."""
        r = self.m - np.asarray(g, dtype=float)
        return float(np.sqrt(r @ np.linalg.solve(self.gamma, r)))


@dataclass
class EkiTrace:
    """Per-iteration diagnostics; entry 0 describes the initial ensemble."""

    mean_u: list = field(default_factory=list)
    misfit: list = field(default_factory=list)
    error: list = field(default_factory=list)
    fallback: list = field(default_factory=list)
    subsample_size: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.mean_u) - 1

    def record(self, problem: EkiProblem, mean_u, fallback=False, M=None):
        mean_u = np.asarray(mean_u, dtype=float)
        self.mean_u.append(mean_u)
        self.misfit.append(problem.misfit(problem.forward(mean_u)))
        if problem.truth is not None:
            self.error.append(float(np.linalg.norm(mean_u - problem.truth)))
        self.fallback.append(bool(fallback))
        self.subsample_size.append(M)


def evaluate_forward(forward, ens_u, n_jobs: int | None = None) -> np.ndarray:
    """``G`` applied to every row of ``ens_u``.

    With ``n_jobs`` the members are spread over joblib workers; results come
    back in member order, so the output does not depend on the worker count.
    """
    ens_u = np.asarray(ens_u, dtype=float)
    if n_jobs is None or n_jobs == 1:
        out = []
        for k, u in enumerate(ens_u):
            try:
                out.append(forward(u))
            except Exception as exc:
                raise RuntimeError(f"forward model failed for member {k}") from exc
    else:
        from joblib import Parallel, delayed
        out = Parallel(n_jobs=n_jobs)(delayed(forward)(u) for u in ens_u)
    return np.array([np.atleast_1d(g) for g in out], dtype=float)


def augment(ens_u, forward, n_jobs: int | None = None) -> Ensemble:
    """Ensemble of ``(u_k, G(u_k))`` with the G-block marked as observed."""
    ens_u = np.asarray(ens_u, dtype=float)
    if ens_u.ndim == 1:
        ens_u = ens_u[:, None]
    g = evaluate_forward(forward, ens_u, n_jobs)
    d1, d2 = ens_u.shape[1], g.shape[1]
    return Ensemble(np.hstack([ens_u, g]), StatePartition.trailing(d1, d2))


def run_eki(problem: EkiProblem, init, update_rule="linear", seed=None, *,
            inflation: float = 1.0, n_jobs: int | None = None) -> EkiTrace:
    """Iterate augment-and-update with the same measurement until the mean settles.

    ``update_rule`` is ``"linear"`` (EAKF) or an :class:`NlbuConfig`.
    Stops after ``max_iters`` updates, when the relative change of the mean
    falls below ``rel_tol``, or when the ensemble collapses.
    """
    U = np.asarray(init, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    rng = np.random.default_rng(seed)
    trace = EkiTrace()
    trace.record(problem, U.mean(axis=0))
    for it in range(1, problem.max_iters + 1):
        try:
            ens = augment(U, problem.forward, n_jobs)
        except RuntimeError as exc:
            raise RuntimeError(f"EKI iteration {it}: {exc}") from exc
        meas = MeasurementModel(ens.partition, problem.gamma, problem.m)
        if isinstance(update_rule, NlbuConfig):
            out = nlbu_update(ens, meas, update_rule, rng.integers(2**63))
            post, fb, M = out.posterior, out.used_fallback, out.M
            estimate = out.posterior_mean[post.partition.u_index]
        elif update_rule == "linear":
            post, fb, M = eakf_update(ens, meas, inflation), False, None
            estimate = post.u.mean(axis=0)
        else:
            raise ValueError(f"unknown update rule {update_rule!r}")

        prev = trace.mean_u[-1]
        U = post.u
        mean = estimate
        try:
            trace.record(problem, mean, fb, M)
        except Exception as exc:
            raise RuntimeError(f"EKI iteration {it}: forward model failed at the ensemble mean") from exc
        change = np.linalg.norm(mean - prev) / max(np.linalg.norm(prev), np.finfo(float).tiny)
        if change < problem.rel_tol or np.trace(np.atleast_2d(np.cov(U, rowvar=False))) < COLLAPSE_TRACE:
            trace.converged = True
            break
    return trace
