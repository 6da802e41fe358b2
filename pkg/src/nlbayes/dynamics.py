"""Lorenz test models and a fixed-step RK4 propagator.

Right-hand sides act on the last axis, so a whole ensemble (``K x d``) is
advanced in one vectorized call. Every operation is elementwise across
members, which keeps results bitwise independent of how members are batched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from .ensemble import Ensemble
from .errors import DivergenceError


def lorenz63_rhs(x, sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0):
    x = np.asarray(x, dtype=float)
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([sigma * (Y - X), X * (rho - Z) - Y, X * Y - beta * Z], axis=-1)


def lorenz96_rhs(x, F: float = 8.0):
    """``dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F`` with periodic indices."""
    x = np.asarray(x, dtype=float)
    return (np.roll(x, -1, axis=-1) - np.roll(x, 2, axis=-1)) * np.roll(x, 1, axis=-1) - x + F


@dataclass(frozen=True)
class OdeModel:
    dim: int
    rhs: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.rhs(x)


def lorenz63(sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0) -> OdeModel:
    params = dict(sigma=sigma, rho=rho, beta=beta)
    return OdeModel(3, partial(lorenz63_rhs, **params), params)


def lorenz96(F: float = 8.0, dim: int = 40) -> OdeModel:
    return OdeModel(dim, partial(lorenz96_rhs, F=F), dict(F=F))


def rk4_step(model: OdeModel, x, dt: float, step: int | None = None) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    f = model.rhs
    # overflow shows up as a non-finite result, reported below
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(out).all():
        member = None
        if out.ndim == 2:
            member = int(np.flatnonzero(~np.isfinite(out).all(axis=1))[0])
        raise DivergenceError(f"non-finite state at RK4 step {step}", step=step, member=member)
    return out


def integrate(model: OdeModel, x, dt: float, n_steps: int) -> np.ndarray:
    """Advance a state (or stack of states) by ``n_steps`` RK4 steps."""
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    x = np.array(x, dtype=float)
    for i in range(n_steps):
        x = rk4_step(model, x, dt, step=i)
    return x


def propagate_ensemble(model: OdeModel, ens, dt: float, n_steps: int):
    """Advance every member independently; accepts an :class:`Ensemble` or a ``K x d`` array."""
    if isinstance(ens, Ensemble):
        return ens.with_members(integrate(model, ens.members, dt, n_steps))
    return integrate(model, ens, dt, n_steps)
