import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gammalab.core import integrate, make_grid
from gammalab.generator import apply_semigroup, build_generator, symmetry_residual
from gammalab.suites import random_trig_potential


def random_circle_gen(seed, n=64):
    rng = np.random.default_rng(seed)
    grid = make_grid("circle", n, 2 * np.pi)
    return build_generator(grid, random_trig_potential(rng, amplitude=0.8)(grid.x)), rng


def test_zero_potential_is_periodic_laplacian():
    grid = make_grid("circle", 64, 2 * np.pi)
    L = build_generator(grid, np.zeros(64)).matrix
    h = grid.h
    ref = (np.roll(np.eye(64), 1, 1) + np.roll(np.eye(64), -1, 1) - 2 * np.eye(64)) / h**2
    np.testing.assert_allclose(L, ref, atol=1e-9)


@pytest.mark.parametrize("kind", ["circle", "interval_neumann", "torus2d"])
def test_structure(kind):
    rng = np.random.default_rng(1)
    dom = {"circle": 2 * np.pi, "interval_neumann": (-1.0, 2.0), "torus2d": (2 * np.pi, 2 * np.pi)}[kind]
    grid = make_grid(kind, 16, dom)
    gen = build_generator(grid, rng.standard_normal(grid.shape))
    L = gen.matrix
    w = gen.mu.weights.ravel()
    assert np.abs(L.sum(axis=1)).max() <= 1e-12 * np.abs(L).max()
    off = L - np.diag(np.diag(L))
    assert off.min() >= 0
    # w_i L_ij = w_j L_ji
    np.testing.assert_allclose(w[:, None] * L, (w[:, None] * L).T, atol=1e-12 * np.abs(w[:, None] * L).max())
    np.testing.assert_allclose(gen.apply(np.full(grid.shape, 3.0)), 0.0, atol=1e-10)


def test_integration_by_parts_exact():
    gen, rng = random_circle_gen(2)
    f, g = rng.standard_normal((2, 64))
    w = gen.mu.weights
    L = gen.matrix
    a = w[:, None] * L  # face conductances on the off-diagonal
    i, j = np.triu_indices(64, 1)
    dirichlet_form = np.sum(a[i, j] * (f[j] - f[i]) * (g[j] - g[i]))
    assert np.sum(w * g * gen.apply(f)) == pytest.approx(-dirichlet_form, rel=1e-12, abs=1e-12)


def test_neumann_cos_order_two():
    errs = []
    for n in (129, 257):
        grid = make_grid("interval_neumann", n, (0.0, np.pi))
        gen = build_generator(grid, np.zeros(n))
        errs.append(np.abs(gen.apply(np.cos(grid.x)) + np.cos(grid.x)).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)


def test_circle_sin_semigroup():
    grid = make_grid("circle", 512, 2 * np.pi)
    gen = build_generator(grid, np.zeros(512))
    u = apply_semigroup(gen, np.sin(grid.x), 1.0)
    assert np.abs(u - np.exp(-1) * np.sin(grid.x)).max() <= 1e-4


def test_neumann_cos_semigroup():
    grid = make_grid("interval_neumann", 513, (0.0, np.pi))
    gen = build_generator(grid, np.zeros(513))
    u = apply_semigroup(gen, np.cos(grid.x), 1.0)
    assert np.abs(u - np.exp(-1) * np.cos(grid.x)).max() <= 1e-4


def test_constant_fixed():
    gen, _ = random_circle_gen(3)
    np.testing.assert_allclose(apply_semigroup(gen, np.full(64, 2.5), 0.7), 2.5, rtol=1e-12)


def test_zero_time_is_identity():
    gen, rng = random_circle_gen(4)
    f = rng.standard_normal(64)
    np.testing.assert_array_equal(apply_semigroup(gen, f, 0.0), f)


@pytest.mark.parametrize("t", [-1.0, np.inf, np.nan])
def test_bad_time(t):
    gen, _ = random_circle_gen(5)
    with pytest.raises(ValueError):
        apply_semigroup(gen, np.zeros(64), t)


def test_nonfinite_field():
    gen, _ = random_circle_gen(5)
    f = np.zeros(64)
    f[3] = np.inf
    with pytest.raises(ValueError):
        apply_semigroup(gen, f, 0.1)


def test_shape_mismatch():
    grid = make_grid("circle", 16, 1.0)
    with pytest.raises(ValueError):
        build_generator(grid, np.zeros(15))


def test_dirichlet_spectrum():
    grid = make_grid("interval_dirichlet", 257, (0.0, 1.0))
    gen = build_generator(grid, np.zeros(257))
    lam = np.sort(-np.linalg.eigvalsh(gen.sym))[:2]
    np.testing.assert_allclose(lam, [np.pi**2, 4 * np.pi**2], rtol=1e-4)
    assert gen.shape == (255,)


def test_symmetry_residual_examples():
    gen, rng = random_circle_gen(6)
    f, g = rng.standard_normal((2, 64))
    scale = np.abs(f).max() * np.abs(g).max() * np.abs(gen.matrix).max()
    assert symmetry_residual(gen, f, f) <= 1e-14 * scale
    assert symmetry_residual(gen, f, g) <= 1e-12 * scale
    assert symmetry_residual(gen, np.ones(64), g) <= 1e-12 * scale


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_semigroup_property(seed, s, t):
    gen, rng = random_circle_gen(seed, n=32)
    f = rng.standard_normal(32)
    a = apply_semigroup(gen, apply_semigroup(gen, f, s), t)
    b = apply_semigroup(gen, f, s + t)
    assert np.abs(a - b).max() <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.001, 2.0))
def test_maximum_principle_and_mass(seed, t):
    gen, rng = random_circle_gen(seed, n=32)
    f = rng.uniform(0, 1, 32)
    u = apply_semigroup(gen, f, t)
    assert u.min() >= f.min() - 1e-12
    assert u.max() <= f.max() + 1e-12
    assert u.min() >= -1e-12
    assert integrate(u, gen.mu) == pytest.approx(integrate(f, gen.mu), abs=1e-10)


def test_neumann_mass_conservation():
    grid = make_grid("interval_neumann", 65, (-2.0, 3.0))
    gen = build_generator(grid, -grid.x**2)
    f = np.sin(3 * grid.x) + grid.x
    for t in (0.01, 0.5, 3.0):
        assert integrate(apply_semigroup(gen, f, t), gen.mu) == pytest.approx(integrate(f, gen.mu), abs=1e-10)


def test_converges_to_mean():
    gen, rng = random_circle_gen(7, n=32)
    f = rng.standard_normal(32)
    u = apply_semigroup(gen, f, 40.0)
    np.testing.assert_allclose(u, integrate(f, gen.mu), atol=1e-8)


def test_concurrent_first_use():
    from concurrent.futures import ThreadPoolExecutor

    gen, rng = random_circle_gen(8)
    f = rng.standard_normal(64)
    with ThreadPoolExecutor(4) as pool:
        outs = list(pool.map(lambda t: apply_semigroup(gen, f, t), [0.1] * 8))
    for u in outs[1:]:
        np.testing.assert_array_equal(u, outs[0])


def test_dirichlet_does_not_fix_constants():
    grid = make_grid("interval_dirichlet", 33, (0.0, 1.0))
    gen = build_generator(grid, np.zeros(33))
    u = apply_semigroup(gen, np.ones(31), 0.1)
    assert u.max() < 1.0
