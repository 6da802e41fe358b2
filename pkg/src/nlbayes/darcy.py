"""Two-region Darcy flow forward model on the unit square.

Solves ``-div(exp(c) grad p) = f`` with a 5-point finite-volume stencil on
an ``(n+1) x (n+1)`` nodal grid. Face conductivities are harmonic means of
the nodal values of ``exp(c)``. The measurement is the magnitude of the 2D
DFT of ``p`` sampled on the interior 8 x 8 lattice ``(i/9, j/9)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import NumericalError

N_SAMPLE = 8
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class PermeabilityParams:
    """Log-permeability ``u1`` on ``x + y >= 1`` and ``u2`` on ``x + y < 1``."""

    u1: float
    u2: float

    def __post_init__(self):
        if not (np.isfinite(self.u1) and np.isfinite(self.u2)):
            raise ValueError("log-permeability values must be finite")

    def field(self, n: int) -> np.ndarray:
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        # integer test avoids rounding on the interface nodes
        return np.where(i + j >= n, self.u1, self.u2).astype(float)


@dataclass(frozen=True)
class PressureField:
    """Nodal pressure; ``grid[i, j]`` is ``p(i/n, j/n)``."""

    grid: np.ndarray
    n: int


def default_source(x, y):
    return 10.0 * np.exp(-50.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2))


def literal_source(x, y):
    """The source term with the printed sign, growing in ``y``."""
    return 10.0 * np.exp(-50.0 * (x - 0.5) ** 2 + 50.0 * (y - 0.5) ** 2)


def default_boundary(x, y):
    """``p = 0`` on the vertical sides and ``sin(5x)`` on the horizontal ones."""
    on_horizontal = np.isclose(y, 0.0) | np.isclose(y, 1.0)
    return np.where(on_horizontal, np.sin(5.0 * x), 0.0)


@lru_cache(maxsize=8)
def _stencil(n: int):
    """Index bookkeeping for the interior unknowns of an ``n``-cell grid."""
    m = n - 1
    ii, jj = np.meshgrid(np.arange(1, n), np.arange(1, n), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    k = (ii - 1) * m + (jj - 1)
    nbrs = []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni, nj = ii + di, jj + dj
        interior = (ni >= 1) & (ni <= n - 1) & (nj >= 1) & (nj <= n - 1)
        nk = np.where(interior, (ni - 1) * m + (nj - 1), -1)
        nbrs.append((ni, nj, nk, interior))
    return ii, jj, k, nbrs


def solve_pressure(perm: PermeabilityParams, n: int = 64, *,
                   source: Callable | None = None,
                   boundary: Callable | None = None,
                   log_perm: np.ndarray | None = None) -> PressureField:
    """Solve the pressure equation on an ``n x n`` cell grid.

    ``source`` and ``boundary`` are callables of ``(x, y)`` overriding the
    default problem data. ``log_perm`` overrides the nodal log-permeability
    (shape ``(n+1, n+1)``), ignoring ``perm``.
    """
    if n < 16:
        raise ValueError("grid needs n >= 16")
    source = default_source if source is None else source
    boundary = default_boundary if boundary is None else boundary
    h = 1.0 / n
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")

    c = perm.field(n) if log_perm is None else np.asarray(log_perm, dtype=float)
    a = np.exp(c)

    p = np.zeros((n + 1, n + 1))
    edge = np.zeros_like(p, dtype=bool)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    p[edge] = boundary(X[edge], Y[edge])

    ii, jj, k, nbrs = _stencil(n)
    N = k.size
    rhs = source(X[ii, jj], Y[ii, jj]) * h * h
    diag = np.zeros(N)
    rows, cols, vals = [], [], []
    a_c = a[ii, jj]
    for ni, nj, nk, interior in nbrs:
        a_n = a[ni, nj]
        face = 2.0 * a_c * a_n / (a_c + a_n)
        diag += face
        rows.append(k[interior])
        cols.append(nk[interior])
        vals.append(-face[interior])
        rhs[~interior] += face[~interior] * p[ni[~interior], nj[~interior]]
    rows.append(k)
    cols.append(k)
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N))
    sol = spsolve(A, rhs)
    res = np.linalg.norm(A @ sol - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny)
    if not np.isfinite(res) or res > RESIDUAL_TOL:
        raise NumericalError(f"pressure solve did not converge (relative residual {res:.3e})")
    p[ii, jj] = sol
    return PressureField(p, n)


def sample_interior(p: PressureField, n_points: int = N_SAMPLE) -> np.ndarray:
    """Bilinear samples of ``p`` at ``(i/(N+1), j/(N+1))``, ``i, j = 1..N``; rows follow x."""
    n = p.n
    t = np.arange(1, n_points + 1) / (n_points + 1)
    s = t * n
    lo = np.minimum(np.floor(s).astype(int), n - 1)
    w = s - lo
    G = p.grid
    # separable interpolation: along x then along y
    Gx = (1 - w)[:, None] * G[lo, :] + w[:, None] * G[lo + 1, :]
    return (1 - w)[None, :] * Gx[:, lo] + w[None, :] * Gx[:, lo + 1]


def fourier_amplitude(samples) -> np.ndarray:
    """Unnormalized 2D DFT magnitudes of a sample array, flattened row-major."""
    return np.abs(np.fft.fft2(np.asarray(samples, dtype=float))).ravel()


def observe_fourier_amplitude(p: PressureField) -> np.ndarray:
    return fourier_amplitude(sample_interior(p))


def darcy_forward(u, n: int = 64, **solver_kw) -> np.ndarray:
    """Map ``(u1, u2)`` to the 64 Fourier amplitudes of the pressure samples."""
    u = np.asarray(u, dtype=float).ravel()
    return observe_fourier_amplitude(solve_pressure(PermeabilityParams(u[0], u[1]), n, **solver_kw))


def write_pressure_csv(p: PressureField, path) -> None:
    """Dump nodal pressures as a CSV grid (row i is ``x = i/n``)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for row in p.grid:
            w.writerow([f"{v:.17g}" for v in row])
