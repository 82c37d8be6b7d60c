import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gammalab.core import integrate
from gammalab.entropy import entropy_functionals
from gammalab.generator import symmetry_residual
from gammalab.phi import phi_suite
from gammalab.schrodinger import (
    check_schrodinger_decay,
    dirichlet_eigs,
    fundamental_gap_margin,
    ground_state_system,
    log_ground_state_curvature_excess,
    modulus_decay_rate,
)
from gammalab.suites import random_convex_potential

PI2 = math.pi**2


def discrete_free_eigenvalue(k, n, length=1.0):
    """Exact eigenvalue of the 3-point Dirichlet Laplacian with ``n`` nodes."""
    h = length / (n - 1)
    return 4 / h**2 * math.sin(k * math.pi * h / (2 * length)) ** 2


class TestDirichletEigs:
    def test_free_particle_exact(self):
        spec = dirichlet_eigs(0.0, (0, 1), k=4, n=1024)
        expected = [discrete_free_eigenvalue(k, 1024) for k in range(1, 5)]
        # backward error of the tridiagonal solver is eps·|H| ~ 4 eps/h²
        np.testing.assert_allclose(spec.eigenvalues, expected, rtol=1e-9)

    def test_free_particle_continuum(self):
        spec = dirichlet_eigs(lambda x: np.zeros_like(x), (0, 1), k=2, n=2048)
        np.testing.assert_allclose(spec.eigenvalues / PI2, [1, 4], rtol=1e-5)

    def test_shift_by_constant(self):
        base = dirichlet_eigs(0.0, k=3, n=512).eigenvalues
        shifted = dirichlet_eigs(7.5, k=3, n=512).eigenvalues
        np.testing.assert_allclose(shifted - base, 7.5, atol=1e-9)

    def test_bracketing(self):
        # 0 <= x² <= 1 on [0, 1]
        lam0 = dirichlet_eigs(lambda x: x**2, k=1, n=1024).eigenvalues[0]
        assert PI2 < lam0 < PI2 + 1

    def test_ground_state_positive(self):
        spec = dirichlet_eigs(lambda x: 30 * (x - 0.3) ** 2, k=3, n=512)
        assert np.all(spec.vectors[0] > 0)

    def test_orthonormal(self):
        spec = dirichlet_eigs(lambda x: np.sin(5 * x), k=4, n=512)
        gram = spec.vectors @ spec.vectors.T * spec.h
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-10)

    def test_scaling_with_interval(self):
        # λ on [0, L] is λ on [0, 1] divided by L²
        a = dirichlet_eigs(0.0, (0, 1), k=2, n=1024).eigenvalues
        b = dirichlet_eigs(0.0, (0, 2), k=2, n=1024).eigenvalues
        np.testing.assert_allclose(b, a / 4, rtol=1e-12)

    def test_second_order_convergence(self):
        U = lambda x: 10 * x**2  # noqa: E731
        ref = dirichlet_eigs(U, k=2, n=8193, richardson=True).eigenvalues
        errs = [np.abs(dirichlet_eigs(U, k=2, n=n).eigenvalues - ref).max() for n in (257, 513, 1025)]
        assert errs[0] / errs[1] == pytest.approx(4, rel=0.02)
        assert errs[1] / errs[2] == pytest.approx(4, rel=0.02)

    def test_richardson(self):
        spec = dirichlet_eigs(0.0, k=2, n=2048, richardson=True)
        np.testing.assert_allclose(spec.eigenvalues / PI2, [1, 4], atol=1e-9)

    def test_richardson_needs_function(self):
        with pytest.raises(ValueError, match="callable or constant"):
            dirichlet_eigs(np.zeros(510), k=2, n=512, richardson=True)

    @pytest.mark.parametrize("k", [0, 511])
    def test_bad_k(self, k):
        with pytest.raises(ValueError, match="k must be"):
            dirichlet_eigs(0.0, k=k, n=512)

    def test_coarse_grid_rejected(self):
        with pytest.raises(ValueError, match="at least"):
            dirichlet_eigs(0.0, n=128)

    def test_array_potential(self):
        spec = dirichlet_eigs(np.zeros(510), k=1, n=512)
        assert spec.eigenvalues[0] == pytest.approx(discrete_free_eigenvalue(1, 512), rel=1e-9)

    def test_json(self):
        assert '"eigenvalues"' in dirichlet_eigs(0.0, k=2, n=256).to_json()


class TestGroundStateSystem:
    @pytest.fixture(scope="class")
    @classmethod
    def gs(cls):
        return ground_state_system(lambda x: 5 * x**2, n=513)

    def test_constants_fixed(self, gs):
        out = gs.gen.evolve(np.ones(gs.gen.shape), [0.1, 1.0])
        np.testing.assert_allclose(out, 1.0, atol=1e-12)

    def test_generator_kills_constants(self, gs):
        assert np.abs(gs.gen.apply(np.ones(gs.gen.shape))).max() < 1e-7

    def test_mean_preserved(self, gs):
        x = gs.spectrum.x
        f = 1 + np.sin(3 * x)
        before = integrate(f, gs.mu)
        after = integrate(gs.gen.evolve(f, [0.05])[0], gs.mu)
        assert after == pytest.approx(before, abs=1e-11)

    def test_symmetric(self, gs):
        x = gs.spectrum.x
        res = symmetry_residual(gs.gen, np.cos(4 * x), x**3)
        assert res < 1e-9

    def test_measure_is_ground_state_squared(self, gs):
        w = gs.mu.weights
        phi2 = gs.phi0**2
        np.testing.assert_allclose(w, phi2 / phi2.sum(), rtol=1e-12)

    def test_spectral_gap_of_generator(self, gs):
        lam = np.sort(gs.gen.eig[0])[::-1]
        assert lam[0] == pytest.approx(0.0, abs=1e-8)
        assert -lam[1] == pytest.approx(gs.spectrum.gap, rel=1e-12)

    def test_log_slope_matches_gap(self):
        # q of P_t f for Φ = x² is ∫Γ(P_t f)dμ, which decays like e^{-2 gap t}
        gs = ground_state_system(0.0, n=513)
        gap = gs.spectrum.gap
        f = gs.spectrum.x
        t0 = 3 / gap
        times = [t0, t0 + 0.01]
        qs = [entropy_functionals(gs.ctx, phi_suite("square"), u).q for u in gs.gen.evolve(f, times)]
        slope = -math.log(qs[1] / qs[0]) / 0.01
        assert slope == pytest.approx(2 * gap, rel=0.05)

    def test_floor(self):
        with pytest.raises(ValueError, match="ground state drops"):
            ground_state_system(lambda x: 2e5 * (x - 0.5) ** 2, n=513)


class TestFundamentalGap:
    def test_free_particle(self):
        margin = fundamental_gap_margin(0.0, (0, 1), n=2048)
        assert abs(margin) <= 1e-6 * 3 * PI2

    def test_raw_gap_low_by_h_squared(self):
        margin = fundamental_gap_margin(0.0, (0, 1), n=2048, richardson=False)
        assert -1e-5 * 3 * PI2 < margin < 0

    def test_linear_potential(self):
        assert fundamental_gap_margin(lambda x: 10 * x, (0, 1)) > 0

    def test_longer_interval(self):
        margin = fundamental_gap_margin(0.0, (0, 2), n=2048)
        assert abs(margin) <= 1e-6 * 3 * PI2 / 4

    def test_random_convex(self):
        rng = np.random.default_rng(0)
        margins = [fundamental_gap_margin(random_convex_potential(rng), (0, 1)) for _ in range(10)]
        assert min(margins) >= 0

    def test_nonconvex_rejected(self):
        with pytest.raises(ValueError, match="not convex"):
            fundamental_gap_margin(lambda x: -((x - 0.5) ** 2), (0, 1))


class TestModulusRate:
    def test_zero_modulus(self):
        # Dirichlet ground energy of 0 on [-1/2, 1/2] is π²
        assert modulus_decay_rate(0.0, 1.0) == pytest.approx(4 * PI2, rel=1e-9)

    def test_shift_invariant(self):
        a = modulus_decay_rate(lambda x: x**2, 1.0)
        b = modulus_decay_rate(lambda x: x**2 + 3, 1.0)
        assert a == pytest.approx(b, rel=1e-9)

    def test_stronger_modulus_faster(self):
        assert modulus_decay_rate(lambda x: 20 * x**2, 1.0) > modulus_decay_rate(0.0, 1.0)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError, match="even"):
            modulus_decay_rate(lambda x: x, 1.0)

    def test_bad_diameter(self):
        with pytest.raises(ValueError, match="positive"):
            modulus_decay_rate(0.0, 0.0)


class TestSchrodingerDecay:
    @pytest.mark.parametrize("name", ["square", "xlogx"])
    def test_free_particle(self, name):
        times = np.linspace(0.02, 0.2, 10)
        rep = check_schrodinger_decay(0.0, 0.0, phi_suite(name), lambda x: 1 + 0.4 * np.sin(math.pi * x), times)
        assert np.all(rep.measured <= rep.bound * (1 + 1e-6))

    def test_linear_f(self):
        times = np.linspace(0.01, 0.1, 10)
        rep = check_schrodinger_decay(0.0, 0.0, phi_suite("square"), lambda x: x, times)
        assert np.all(rep.measured <= rep.bound)

    def test_convex_potential(self):
        times = np.linspace(0.02, 0.2, 10)
        rep = check_schrodinger_decay(
            lambda x: 5 * x**2, 0.0, phi_suite("xlogx"), lambda x: 1 + 0.4 * np.sin(math.pi * x), times
        )
        assert np.all(rep.measured <= rep.bound * (1 + 1e-6))

    def test_constant(self):
        rep = check_schrodinger_decay(0.0, 0.0, phi_suite("square"), lambda x: np.full_like(x, 2.0), [0.1])
        assert rep.measured[0] == 0.0

    @settings(max_examples=5, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_random_admissible(self, seed):
        rng = np.random.default_rng(seed)
        c = rng.uniform(0.2, 0.5, 3)
        f = lambda x: 1 + c[0] * np.sin(math.pi * x) + 0.5 * c[1] * np.cos(2 * math.pi * x) + 0.3 * c[2] * np.sin(3 * math.pi * x)  # noqa: E731
        rep = check_schrodinger_decay(lambda x: 5 * x**2, 0.0, phi_suite("xlogx"), f, np.linspace(0.02, 0.2, 5))
        assert np.all(rep.measured <= rep.bound * (1 + 1e-6))


class TestCurvatureExcess:
    def test_free_particle_order_h_squared(self):
        ex = [log_ground_state_curvature_excess(0.0, 0.0, n=n) for n in (257, 513, 1025)]
        assert all(e <= 0 for e in ex)
        assert abs(ex[0]) / abs(ex[1]) == pytest.approx(4, rel=0.1)

    def test_convex(self):
        assert log_ground_state_curvature_excess(lambda x: 5 * x**2, 0.0) < 0
