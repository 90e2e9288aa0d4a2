import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptbreathers.dimer import point_from_amplitude, solve_for_E
from ptbreathers.errors import DimensionError, DomainError
from ptbreathers.model import (
    ModelParams,
    UVState,
    ab_to_uv,
    as_field,
    charge,
    energy,
    pt_apply,
    rhs,
    stationary_residual,
    uv_to_ab,
    vector_field,
    zero_field,
)

finite = st.floats(-1.0, 1.0, allow_nan=False)


def single_site(value_u, value_v, half_width=2):
    u, v = zero_field(half_width), zero_field(half_width)
    u[half_width], v[half_width] = value_u, value_v
    return UVState(u, v)


def random_state(rng, half_width=3, scale=0.5):
    m = 2 * half_width + 1
    z = scale * (rng.standard_normal((2, m)) + 1j * rng.standard_normal((2, m)))
    return UVState(z[0], z[1])


class TestParamsAndFields:
    def test_negative_coupling_rejected(self):
        with pytest.raises(DomainError):
            ModelParams(1.0, 2.0, eps=-0.1)

    def test_gain_required_for_branch_work(self):
        with pytest.raises(DomainError):
            ModelParams(0.0, 2.0).require_gain()

    def test_even_length_rejected(self):
        with pytest.raises(DimensionError):
            as_field([1.0, 2.0])

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            as_field([0.0, np.nan, 0.0])

    def test_mismatched_state(self):
        with pytest.raises(DimensionError):
            UVState(np.zeros(3), np.zeros(5))


class TestVectorField:
    def test_zero_state(self):
        s = vector_field(UVState(zero_field(3), zero_field(3)), ModelParams(1.0, 2.0, 0.1))
        assert np.all(s.u == 0) and np.all(s.v == 0)

    def test_hand_evaluated_site(self):
        p = ModelParams(1.0, 2.0)
        fu, _ = rhs(*_uv(single_site(0.1, 0.1)), p)
        assert fu[2] == pytest.approx(0.2080 + 0.1j, abs=1e-15)

    def test_dimer_point_rotates(self):
        p = ModelParams(1.0, -3.0)
        pt = point_from_amplitude(0.2, 1, p, "c")
        state = UVState.from_stationary(single_site(pt.U0, 0).u)
        d = vector_field(state, p.with_(E=pt.E))
        assert d.u[2] == pytest.approx(-0.5j * pt.E * state.u[2], abs=1e-13)
        assert d.v[2] == pytest.approx(-0.5j * pt.E * state.v[2], abs=1e-13)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_stationary_residual_matches_rotation(self, seed):
        # residual zero <=> (U, conj U) is a fixed point of the flow in the rotating frame
        rng = np.random.default_rng(seed)
        branch, omega = [("a", 2.0), ("b", -3.0), ("c", -3.0)][seed]
        p = ModelParams(1.0, omega)
        E = {"a": 3.0, "b": 1.5, "c": 1.0}[branch]
        pt = solve_for_E(E, p, branch)
        U = zero_field(2)
        U[2] = pt.U0
        q = p.with_(E=E)
        assert np.max(np.abs(stationary_residual(U, q))) < 1e-13
        d = vector_field(UVState.from_stationary(U), q)
        assert np.max(np.abs(d.u + 0.5j * E * U)) < 1e-13
        # and a generic field is not stationary
        W = U + 0.1 * rng.standard_normal(U.size)
        assert np.max(np.abs(stationary_residual(W, q))) > 1e-3


class TestStationaryResidual:
    def test_zero(self):
        assert np.all(stationary_residual(zero_field(4), ModelParams(1.0, 2.0, 0.3, 1.0)) == 0)

    def test_direct_arithmetic(self):
        U = zero_field(1)
        U[1] = 1.0
        assert stationary_residual(U, ModelParams(1.0, 2.0))[1] == pytest.approx(10 + 1j)

    def test_coupling_uses_conjugate_neighbours(self):
        U = np.array([0.0, 1j, 0.0])
        res = stationary_residual(U, ModelParams(0.0, 0.0, eps=1.0))
        # eps * Laplacian(conj U) plus the cubic terms 6|U|^2 conj U + 2 U^3
        assert res[0] == pytest.approx(-1j)
        assert res[1] == pytest.approx(2j - 6j - 2j)


class TestEnergyCharge:
    def test_zero_state(self):
        z = UVState(zero_field(2), zero_field(2))
        assert energy(z, ModelParams(1.0, 2.0, 0.1)) == 0.0
        assert charge(z) == 0.0

    def test_single_site_energy(self):
        p = ModelParams(1.0, 2.0)
        pt = point_from_amplitude(0.25, 1, p, "a")
        state = UVState.from_stationary(single_site(pt.U0, 0).u)
        A2, s2, c2 = 0.25, 1 / 3, math.sqrt(8) / 3
        oracle = 4 * A2**2 + (2 * A2 * c2) ** 2 + 2 * 2.0 * A2 - 2 * A2 * s2
        assert energy(state, p) == pytest.approx(oracle, abs=1e-14)
        assert energy(state, p) == pytest.approx(1.30556, abs=1e-5)

    def test_single_site_charge(self):
        p = ModelParams(1.0, 2.0)
        pt = point_from_amplitude(0.25, 1, p, "a")
        state = UVState.from_stationary(single_site(pt.U0, 0).u)
        assert charge(state) == pytest.approx(2 * 0.25 * pt.E / (8 * 0.25 + 2.0), abs=1e-14)
        assert charge(state) == pytest.approx(0.47140, abs=1e-5)

    def test_charge_of_pt_symmetric_state(self):
        rng = np.random.default_rng(4)
        U = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        assert charge(UVState.from_stationary(U)) == pytest.approx(2 * np.sum((U**2).real))

    def test_links_to_boundary_count(self):
        p = ModelParams(0.0, 0.0, eps=1.0)
        # one unit on the last site: the link to the zero padding contributes -eps
        u = zero_field(1)
        u[-1] = 1.0
        state = UVState(u, zero_field(1))
        assert energy(state, p) == pytest.approx(1.0 - 2.0)

    @given(st.floats(-math.pi, math.pi), st.integers(0, 1000))
    @settings(max_examples=30, deadline=None)
    def test_gauge_invariance(self, alpha, seed):
        state = random_state(np.random.default_rng(seed))
        p = ModelParams(0.7, -1.3, 0.2)
        rot = state.rotated(alpha)
        assert energy(rot, p) == pytest.approx(energy(state, p), rel=1e-12, abs=1e-12)
        assert charge(rot) == pytest.approx(charge(state), rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_cross_gradient_structure(self, seed):
        """2i du/dt = dH/d conj(v) and 2i dv/dt = dH/d conj(u) (Wirtinger, by central differences)."""
        rng = np.random.default_rng(seed)
        state = random_state(rng, half_width=2, scale=0.3)
        p = ModelParams(0.8, -1.7, 0.25)
        fu, fv = rhs(state.u, state.v, p)
        h = 1e-6

        def wirtinger_conj(which, k):
            def H_at(dx):
                s = state.copy()
                getattr(s, which)[k] += dx
                return energy(s, p)

            d_re = (H_at(h) - H_at(-h)) / (2 * h)
            d_im = (H_at(1j * h) - H_at(-1j * h)) / (2 * h)
            return 0.5 * (d_re + 1j * d_im)

        for k in range(state.u.size):
            assert wirtinger_conj("v", k) == pytest.approx(fu[k], rel=1e-6, abs=1e-8)
            assert wirtinger_conj("u", k) == pytest.approx(fv[k], rel=1e-6, abs=1e-8)


def _uv(state):
    return state.u, state.v


class TestTransforms:
    def test_zero(self):
        s = ab_to_uv(zero_field(1), zero_field(1))
        assert np.all(s.u == 0) and np.all(s.v == 0)

    def test_direct_arithmetic(self):
        s = ab_to_uv([4.0], [4j])
        assert s.u[0] == pytest.approx(0.0) and s.v[0] == pytest.approx(2.0)

    def test_synchronized_reduction(self):
        A = np.array([1 + 2j, -0.3 + 0.1j, 0.5])
        s = ab_to_uv(A, A)
        assert np.max(np.abs((cmath.exp(0.25j * math.pi) * s.u).imag)) < 1e-15
        assert np.max(np.abs((cmath.exp(-0.25j * math.pi) * s.v).imag)) < 1e-15

    @given(st.lists(st.tuples(finite, finite, finite, finite), min_size=1, max_size=4))
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, entries):
        if len(entries) % 2 == 0:
            entries = entries[:-1]
        arr = np.array(entries)
        A = arr[:, 0] + 1j * arr[:, 1]
        B = arr[:, 2] + 1j * arr[:, 3]
        A2, B2 = uv_to_ab(ab_to_uv(A, B))
        assert np.allclose(A2, A, atol=1e-15) and np.allclose(B2, B, atol=1e-15)

    def test_dnls_equivalence(self):
        """The PT-dNLS flow written back in (A, B) is the coupled dNLS flow."""
        from ptbreathers.dynamics import dnls_rhs

        rng = np.random.default_rng(3)
        A = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        B = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        p = ModelParams(0.9, -2.1, 0.3)
        d = vector_field(ab_to_uv(A, B), p)
        dA, dB = uv_to_ab(d)
        eA, eB = dnls_rhs(A, B, p)
        assert np.allclose(dA, eA, atol=1e-13) and np.allclose(dB, eB, atol=1e-13)


class TestPT:
    def test_parity_involution(self):
        s = random_state(np.random.default_rng(1))
        back = pt_apply(pt_apply(s))
        assert np.array_equal(back.u, s.u) and np.array_equal(back.v, s.v)

    def test_swap_example(self):
        s = pt_apply(UVState([1 + 1j], [2.0]))
        assert s.u[0] == 2.0 and s.v[0] == 1 + 1j

    def test_stationary_state_fixed(self):
        U = np.array([0.1j, 1 - 2j, 0.3])
        s = UVState.from_stationary(U)
        assert s.is_pt_symmetric()
        t = pt_apply(s, reverse_time=True)
        assert np.array_equal(t.u, s.u) and np.array_equal(t.v, s.v)
