import math

import numpy as np
import pytest

from ptbreathers.continuation import newton_solve, seed, solve_breather
from ptbreathers.dimer import limit_spectrum, point_from_amplitude, slope_Q, solve_for_E
from ptbreathers.errors import BrokenSymmetryError, DomainError, PreconditionError, SingularityError
from ptbreathers.model import ModelParams, zero_field
from ptbreathers.spectral import (
    S_BLOCK,
    assemble_hessian,
    band_cluster_sign,
    band_edges,
    band_krein_value,
    eigen_spectrum,
    gauge_mode,
    hamilton_krein_index,
    hessian_block,
    hessian_matrix,
    kernel_and_generalized_kernel,
    krein_signature,
    neighbor_solutions,
    stability_index,
    symplectic_matrix,
    zero_equilibrium_stability,
)

E_A = 3.7712361663282534


def anticontinuum(branch, omega, amp_sq, half_width, gamma=1.0):
    p = ModelParams(gamma, omega)
    pt = point_from_amplitude(amp_sq, 1, p, branch)
    q = p.with_(E=pt.E)
    return newton_solve(seed(pt, half_width), q, seed_point=pt), pt


def assert_quartets(lam, tol=1e-8):
    # the double zero is a Jordan block; rounding splits it by ~sqrt(machine eps),
    # so it is only checked at the cluster tolerance
    zero = np.abs(lam) < 1e-6
    assert np.all(np.abs(lam[zero]) < 1e-6) and abs(lam[zero].sum()) < 1e-6
    lam = lam[~zero]
    for z in lam:
        assert np.min(np.abs(lam + z)) < tol
        assert np.min(np.abs(lam - np.conj(z))) < tol


class TestAssembly:
    def test_symplectic(self):
        S = symplectic_matrix(3)
        assert np.array_equal(S @ S, np.eye(28))
        assert np.array_equal(S, S.T)
        assert np.array_equal(S[:4, :4], S_BLOCK)

    def test_zero_solution_blocks(self):
        p = ModelParams(1.0, -3.0, 0.0, 1.0)
        M = hessian_matrix(zero_field(2), p)
        ev = np.linalg.eigvalsh(M)
        mu = sorted([p.omega - math.sqrt(p.E**2 + 1)] * 10 + [p.omega + math.sqrt(p.E**2 + 1)] * 10)
        assert np.allclose(ev, mu, atol=1e-12)
        block = np.array(hessian_block(0.0, p), dtype=complex)
        assert np.array_equal(M[4:8, 4:8], block)
        assert np.count_nonzero(M - np.kron(np.eye(5), block)) == 0

    def test_dimer_central_block(self):
        sol, pt = anticontinuum("c", -3.0, 0.2, 3)
        H = assemble_hessian(sol)
        ls = limit_spectrum(pt, sol.params)
        central = np.linalg.eigvalsh(H.matrix[12:16, 12:16])
        assert np.allclose(central, sorted([0.0, ls.mu1, ls.mu2, ls.mu3]), atol=1e-10)
        assert ls.mu1 == pytest.approx(-4.4)

    @pytest.mark.parametrize("branch,omega,E", [("a", 2.0, E_A), ("b", -3.0, 1.0), ("c", -3.0, 1.0)])
    def test_hermitian_and_kernel(self, breather, branch, omega, E):
        sol = breather(branch, 1.0, omega, 0.05, E)
        H = assemble_hessian(sol)
        assert np.max(np.abs(H.matrix - H.matrix.conj().T)) <= 1e-14
        assert np.max(np.abs(H.apply(gauge_mode(sol.field)))) <= 1e-8

    def test_laplacian_coupling(self):
        p = ModelParams(1.0, 2.0, 0.3, 3.0)
        M0 = hessian_matrix(zero_field(2), p.with_(eps=0.0))
        M = hessian_matrix(zero_field(2), p)
        lap = -2 * np.eye(5) + np.eye(5, k=1) + np.eye(5, k=-1)
        assert np.allclose(M - M0, 0.3 * np.kron(lap, np.eye(4)), atol=1e-15)


class TestEigenSpectrum:
    def test_anticontinuum_closed_forms(self):
        sol, pt = anticontinuum("c", -3.0, 0.2, 2)
        rep = eigen_spectrum(sol)
        ls = limit_spectrum(pt, sol.params)
        lam = rep.eigenvalues
        assert rep.zero_multiplicity == 2
        nz = lam[np.abs(lam) >= 1e-6]
        expected = [ls.lambda0, -ls.lambda0]
        expected += [ls.lambda_plus, -ls.lambda_plus, ls.lambda_minus, -ls.lambda_minus] * 4
        got = np.sort_complex(np.round(nz, 12))
        want = np.sort_complex(np.round(np.array(expected), 12))
        assert np.max(np.abs(got - want)) < 1e-10
        assert ls.lambda0.imag == pytest.approx(3.72900, abs=1e-5)
        # lambda_+ appears once per sign for each of the 2 N_h outer sites
        assert np.sum(np.abs(lam - ls.lambda_plus) < 1e-10) == 4

    def test_sorted(self):
        sol, _ = anticontinuum("b", -3.0, 1.2, 3)
        lam = eigen_spectrum(sol).eigenvalues
        keys = list(zip(lam.imag, lam.real))
        assert keys == sorted(keys)

    def test_branch_a_stable(self, breather):
        rep = eigen_spectrum(breather("a", 1.0, 2.0, 0.05, E_A))
        assert rep.max_real <= 1e-8
        assert rep.zero_multiplicity == 2

    def test_branch_c_real_pair(self, breather):
        sol = breather("c", 1.0, -2.2, 0.02, 0.1)
        rep = eigen_spectrum(sol)
        lam0 = limit_spectrum(solve_for_E(0.1, sol.params, "c"), sol.params).lambda0
        assert lam0.imag == 0.0 and lam0.real > 0
        real_pairs = [z for z in rep.eigenvalues if z.real > 1e-8 and abs(z.imag) < 1e-8]
        assert len(real_pairs) == 1
        # O(eps) shift away from the uncoupled value
        assert abs(real_pairs[0].real - lam0.real) <= 3 * 0.02 * lam0.real
        assert rep.max_real == pytest.approx(real_pairs[0].real)

    @pytest.mark.parametrize(
        "branch,omega,eps,E",
        [("a", 2.0, 0.05, E_A), ("b", -3.0, 0.02, 1.0), ("c", -3.0, 0.02, 1.0), ("c", -2.2, 0.02, 0.1), ("b", -2.2, 0.05, 1.55)],
    )
    def test_quartet_symmetry(self, breather, branch, omega, eps, E):
        assert_quartets(eigen_spectrum(breather(branch, 1.0, omega, eps, E)).eigenvalues)


class TestKernel:
    def test_anticontinuum_generalized_kernel(self, breather):
        sol = breather("b", 1.0, -3.0, 0.0, 1.0)
        kc = kernel_and_generalized_kernel(sol, 1e-5, neighbor_solutions(sol, 1e-5))
        assert kc.kernel_residual <= 1e-8 and kc.gen_kernel_residual <= 1e-8
        assert kc.slope_Q_numeric == pytest.approx(slope_Q(sol.seed, sol.params), abs=1e-6)

    def test_slope_positive_and_close_to_limit(self, breather):
        pt = solve_for_E(1.0, ModelParams(1.0, -3.0), "b")
        closed = slope_Q(pt, ModelParams(1.0, -3.0))
        gaps = []
        for eps in (0.01, 0.02):
            sol = breather("b", 1.0, -3.0, eps, 1.0)
            kc = kernel_and_generalized_kernel(sol, 1e-5, neighbor_solutions(sol, 1e-5))
            assert kc.slope_Q_numeric > 0
            gaps.append(abs(kc.slope_Q_numeric - closed))
        # the closed form is the eps = 0 value; the gap is O(eps)
        assert gaps[1] <= 0.1 * 0.02
        assert gaps[1] / gaps[0] == pytest.approx(2.0, rel=0.2)

    def test_double_zero(self, breather):
        rep = eigen_spectrum(breather("b", 1.0, -3.0, 0.02, 1.0))
        assert rep.zero_multiplicity == 2

    def test_missing_neighbors(self, breather):
        with pytest.raises(PreconditionError):
            kernel_and_generalized_kernel(breather("b", 1.0, -3.0, 0.02, 1.0), 1e-5)


class TestKrein:
    def test_band_values_branch_a(self):
        p = ModelParams(1.0, 2.0, 0.05, E_A)
        assert band_krein_value(p, 1) == pytest.approx(2 * 2 * math.sqrt(3) * (math.sqrt(3) + E_A))
        assert band_krein_value(p, 1) == pytest.approx(38.13, abs=5e-3)
        assert band_krein_value(p, -1) == pytest.approx(-14.13, abs=5e-3)

    def test_band_vector_form(self):
        """Direct evaluation of the form on the uncoupled band eigenvector."""
        p = ModelParams(1.0, 2.0, 0.0, E_A)
        L = np.array(hessian_block(0.0, p), dtype=complex)
        for sign in (1, -1):
            v = np.array([-p.omega, 0, sign * p.E0 + 1j * p.gamma, 0], dtype=complex)
            assert np.vdot(v, L @ v).real == pytest.approx(band_krein_value(p, sign), abs=1e-12)

    def test_isolated_signs(self, breather):
        for branch, omega, E, sign in (("a", 2.0, E_A, 1), ("b", -3.0, 1.0, 1), ("c", -3.0, 1.0, -1)):
            rep = eigen_spectrum(breather(branch, 1.0, omega, 0.02, E))
            iso = rep.isolated_imaginary()
            assert iso and all(k.sign == sign for k in iso)

    def test_branch_c_bands_negative(self, breather):
        p = ModelParams(1.0, -3.0, 0.02, 1.0)
        assert band_cluster_sign(p, p.E + p.E0) < 0 and band_cluster_sign(p, p.E - p.E0) < 0
        rep = eigen_spectrum(breather("c", 1.0, -3.0, 0.02, 1.0))
        assert all(k.sign < 0 for k in rep.krein)

    def test_signature_checks(self, breather):
        sol = breather("a", 1.0, 2.0, 0.05, E_A)
        H = assemble_hessian(sol)
        rep = eigen_spectrum(sol, H)
        k = rep.isolated_imaginary()[0]
        assert krein_signature(k.eigenvalue, rep.eigenvectors[:, k.index], H) == k.sign
        with pytest.raises(DomainError):
            krein_signature(0.5 + 1j, rep.eigenvectors[:, 0], H)


class TestIndex:
    @pytest.mark.parametrize("branch,expected", [("c", 0), ("b", 2)])
    def test_krein_values(self, breather, branch, expected):
        rep, idx, kc = stability_index(breather(branch, 1.0, -3.0, 0.02, 1.0))
        assert idx.K_HAM == expected and idx.consistent

    def test_transition(self, breather):
        below = stability_index(breather("c", 1.0, -2.2, 0.02, 0.1))[1]
        above = stability_index(breather("c", 1.0, -2.2, 0.02, 1.0))[1]
        assert (below.K_HAM, above.K_HAM) == (1, 0)
        assert below.consistent and above.consistent

    def test_inertia(self, breather):
        for branch, n_pos in (("b", 3), ("c", 1)):
            inertia = assemble_hessian(breather(branch, 1.0, -3.0, 0.02, 1.0)).inertia()
            assert inertia["n_pos"] == n_pos and inertia["n_zero"] == 1
        small = assemble_hessian(breather("b", 1.0, -3.0, 0.02, 4.0, 10)).inertia()
        large = assemble_hessian(breather("b", 1.0, -3.0, 0.02, 4.0, 20)).inertia()
        assert large["n_pos"] - small["n_pos"] == 40 and large["n_neg"] - small["n_neg"] == 40

    def test_preconditions(self, breather):
        sol = breather("b", 1.0, -3.0, 0.02, 1.0)
        H = assemble_hessian(sol)
        rep = eigen_spectrum(sol, H)
        with pytest.raises(SingularityError):
            hamilton_krein_index(rep, H, 0.0)
        rep.zero_multiplicity = 3
        with pytest.raises(PreconditionError):
            hamilton_krein_index(rep, H, 1.0)


class TestZeroEquilibrium:
    def test_thresholds(self):
        assert zero_equilibrium_stability(ModelParams(1.0, 2.0, 0.1)).gamma0 == pytest.approx(1.6)
        assert zero_equilibrium_stability(ModelParams(1.0, -2.0, 0.05)).gamma0 == 2.0

    def test_unstable_near_pi(self):
        z = zero_equilibrium_stability(ModelParams(1.7, 2.0, 0.1))
        assert not z.stable
        bad = z.k[np.abs(z.omega[:, 0].imag) > 0]
        assert bad.size and np.all(np.abs(bad) > 2.0)

    def test_dispersion(self):
        p = ModelParams(1.0, 2.0, 0.1)
        z = zero_equilibrium_stability(p)
        w = z.omega[:, 0]
        lhs = 4 * w**2 + p.gamma**2
        rhs = (p.omega - 4 * p.eps * np.sin(z.k / 2) ** 2) ** 2
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_edge(self):
        assert zero_equilibrium_stability(ModelParams(1.0, 0.0, 0.1)).edge


class TestBands:
    def test_anticontinuum_points(self):
        p = ModelParams(1.0, -3.0, 0.0, 1.0)
        iv = band_edges(p).intervals
        assert iv["+lambda_plus"] == pytest.approx((1 + math.sqrt(8), 1 + math.sqrt(8)))

    def test_edges(self):
        b = band_edges(ModelParams(1.0, -3.0, 0.02, 1.0))
        assert b.E0_k0 == pytest.approx(2.82843, abs=1e-5)
        assert b.E0_kpi == pytest.approx(math.sqrt(3.08**2 - 1), abs=1e-12)
        assert b.intervals["+lambda_plus"] == pytest.approx((1 + b.E0_k0, 1 + b.E0_kpi))

    def test_bandwidth_linear(self):
        w = []
        for eps in (0.01, 0.02):
            lo, hi = band_edges(ModelParams(1.0, -3.0, eps, 1.0)).intervals["+lambda_plus"]
            w.append(hi - lo)
        assert w[1] / w[0] == pytest.approx(2.0, rel=0.01)

    def test_broken(self):
        with pytest.raises(BrokenSymmetryError):
            band_edges(ModelParams(1.0, 0.5, 0.0))
        with pytest.raises(BrokenSymmetryError):
            band_edges(ModelParams(1.0, 1.2, 0.1))


@pytest.mark.parametrize(
    "branch,omega,eps,E",
    [("a", 2.0, 0.05, 3.7712361663282534), ("c", -3.0, 0.02, 1.0), ("c", -2.2, 0.02, 0.1)],
)
def test_truncation_converged_at_default_half_width(breather, branch, omega, eps, E):
    # isolated eigenvalues and real pairs do not depend on how the band is sampled
    coarse = eigen_spectrum(breather(branch, 1.0, omega, eps, E, half_width=20))
    fine = eigen_spectrum(breather(branch, 1.0, omega, eps, E, half_width=40))
    assert abs(coarse.max_real - fine.max_real) < 1e-8
    iso = [sorted(k.eigenvalue.imag for k in r.isolated_imaginary()) for r in (coarse, fine)]
    assert len(iso[0]) == len(iso[1])
    assert np.allclose(iso[0], iso[1], atol=1e-8, rtol=0)
