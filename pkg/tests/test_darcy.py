import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlbayes.darcy import (PermeabilityParams, PressureField, darcy_forward, default_boundary,
                           default_source, fourier_amplitude, literal_source,
                           observe_fourier_amplitude, sample_interior, solve_pressure,
                           write_pressure_csv)

from oracles import darcy_dense_reference


def zero(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


def manufactured_error(n):
    exact = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    src = lambda x, y: 2 * np.pi**2 * exact(x, y)
    p = solve_pressure(PermeabilityParams(0.0, 0.0), n, source=src, boundary=zero)
    xs = np.linspace(0, 1, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    return np.abs(p.grid - exact(X, Y)).max()


def test_zero_data_gives_zero_pressure():
    p = solve_pressure(PermeabilityParams(0.3, -1.0), 16, source=zero, boundary=zero)
    assert np.all(p.grid == 0.0)


def test_manufactured_solution_second_order():
    ns = [16, 32, 64]
    errs = [manufactured_error(n) for n in ns]
    slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert slope >= 1.9
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_log_perm_shift_with_scaled_source():
    s = 0.7
    base = solve_pressure(PermeabilityParams(1.0, -0.5), 32)
    shifted = solve_pressure(PermeabilityParams(1.0 + s, -0.5 + s), 32,
                             source=lambda x, y: np.exp(s) * default_source(x, y))
    np.testing.assert_allclose(shifted.grid, base.grid, atol=1e-11)


def test_matches_loop_assembled_reference():
    n = 16
    perm = PermeabilityParams(1.2, -0.8)
    got = solve_pressure(perm, n)
    want = darcy_dense_reference(perm.field(n), default_source, default_boundary)
    np.testing.assert_allclose(got.grid, want, atol=1e-12)


def test_dirichlet_data_exact():
    p = solve_pressure(PermeabilityParams(0.5, 0.5), 32)
    xs = np.linspace(0, 1, 33)
    np.testing.assert_allclose(p.grid[:, 0], np.sin(5 * xs), atol=1e-12)
    np.testing.assert_allclose(p.grid[:, -1], np.sin(5 * xs), atol=1e-12)
    np.testing.assert_allclose(p.grid[0, 1:-1], 0.0, atol=1e-12)
    np.testing.assert_allclose(p.grid[-1, 1:-1], 0.0, atol=1e-12)


def test_maximum_principle_without_source():
    p = solve_pressure(PermeabilityParams(2.0, -1.0), 32, source=zero)
    edge = np.r_[p.grid[0], p.grid[-1], p.grid[:, 0], p.grid[:, -1]]
    assert p.grid.max() <= edge.max() + 1e-12 and p.grid.min() >= edge.min() - 1e-12


def test_permeability_field_regions():
    c = PermeabilityParams(1.0, 2.0).field(4)
    assert c[4, 0] == 1.0 and c[2, 2] == 1.0 and c[1, 2] == 2.0 and c[0, 0] == 2.0
    with pytest.raises(ValueError):
        PermeabilityParams(np.inf, 0.0)


def test_small_grid_rejected():
    with pytest.raises(ValueError):
        solve_pressure(PermeabilityParams(0.0, 0.0), 8)


def test_observation_examples():
    assert np.all(observe_fourier_amplitude(PressureField(np.zeros((17, 17)), 16)) == 0)
    amp = observe_fourier_amplitude(PressureField(np.ones((17, 17)), 16))
    assert amp[0] == pytest.approx(64.0) and np.allclose(amp[1:], 0.0, atol=1e-12)
    pattern = np.tile(np.cos(2 * np.pi * np.arange(8) / 8), (8, 1))
    amp = fourier_amplitude(pattern).reshape(8, 8)
    big = np.argwhere(amp > 1e-9)
    assert big.tolist() == [[0, 1], [0, 7]]
    np.testing.assert_allclose(amp[0, [1, 7]], [32.0, 32.0])


def test_bilinear_sampling_exact_on_bilinear_field():
    n = 20
    xs = np.linspace(0, 1, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    f = lambda x, y: 1 + 2 * x - 3 * y + 4 * x * y
    t = np.arange(1, 9) / 9
    TX, TY = np.meshgrid(t, t, indexing="ij")
    np.testing.assert_allclose(sample_interior(PressureField(f(X, Y), n)), f(TX, TY), atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(-100, 100))
def test_observation_homogeneous(a):
    p = solve_pressure(PermeabilityParams(0.2, -0.3), 16)
    scaled = PressureField(a * p.grid, p.n)
    np.testing.assert_allclose(observe_fourier_amplitude(scaled), abs(a) * observe_fourier_amplitude(p),
                               rtol=1e-10, atol=1e-10)


def test_forward_deterministic_and_shaped():
    g1, g2 = darcy_forward([1.5, 0.5], 32), darcy_forward([1.5, 0.5], 32)
    assert g1.shape == (64,)
    np.testing.assert_array_equal(g1, g2)


def test_forward_finite_difference_consistency():
    u = np.array([1.0, -0.5])
    jac = []
    for d in (1e-3, 1e-4):
        cols = [(darcy_forward(u + d * e, 32) - darcy_forward(u - d * e, 32)) / (2 * d) for e in np.eye(2)]
        jac.append(np.array(cols).T)
    assert np.linalg.norm(jac[0] - jac[1]) <= 0.05 * np.linalg.norm(jac[1])
    small = np.linalg.norm(darcy_forward(u + 1e-8, 32) - darcy_forward(u, 32))
    assert small < 1e-5


def test_grid_convergence_of_forward():
    u = [1.0, -1.0]
    G = {n: darcy_forward(u, n) for n in (16, 32, 64, 128)}
    diffs = [np.linalg.norm(G[n] - G[2 * n]) for n in (16, 32, 64)]
    assert diffs[0] > diffs[1] > diffs[2]


def test_literal_source_grows_in_y():
    assert literal_source(0.5, 1.0) > literal_source(0.5, 0.5)
    p = solve_pressure(PermeabilityParams(0.0, 0.0), 16, source=literal_source)
    assert np.isfinite(p.grid).all()


def test_pressure_csv_roundtrip(tmp_path):
    p = solve_pressure(PermeabilityParams(0.1, 0.2), 16)
    path = tmp_path / "p.csv"
    write_pressure_csv(p, path)
    np.testing.assert_array_equal(np.loadtxt(path, delimiter=","), p.grid)
