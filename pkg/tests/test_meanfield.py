"""Mean-field dynamics: Bloch flow, spinor form, representation maps."""

import math

import numpy as np
import pytest

from leakydimer import (
    BlochState,
    IntegrationError,
    ModelParams,
    SpinorState,
    bloch_from_spinor,
    bloch_rhs,
    gpe_rhs,
    integrate_bloch,
    integrate_gpe,
    spinor_from_bloch,
)
from leakydimer.kernels import bloch_rhs_terms

from oracles import random_bloch_point, random_unit_spinor


def sphere_point(sx, sy, sz):
    r = math.sqrt(sx * sx + sy * sy + sz * sz)
    return BlochState(0.5 * sx / r, 0.5 * sy / r, 0.5 * sz / r)


class TestBlochRhs:
    def test_direct_substitution_along_x(self):
        params = ModelParams(epsilon=0.0, v=1.3, g=1.7, gamma=0.4)
        out = bloch_rhs(BlochState(0.5, 0.0, 0.0, n=2.0), params)
        assert np.allclose(out, [0.0, 0.0, -params.gamma, -2 * params.gamma * 2.0])

    def test_linear_limit_is_rigid_rotation_about_x(self):
        params = ModelParams(epsilon=0.0, v=0.9, g=0.0, gamma=0.0)
        rng = np.random.default_rng(2)
        for _ in range(5):
            s = BlochState(*random_bloch_point(rng))
            out = bloch_rhs(s, params)
            assert np.allclose(out, [0.0, -2 * params.v * s.sz, 2 * params.v * s.sy, 0.0])

    def test_vanishes_at_analytic_fixed_point(self):
        g, gamma, v = 2.0, 0.5, 1.0
        gg = g * g + gamma * gamma
        s = BlochState(
            g * v / (2 * gg),
            v * gamma / (2 * gg),
            -math.sqrt(gg - v * v) / (2 * math.sqrt(gg)),
        )
        out = bloch_rhs(s, ModelParams(epsilon=0, v=v, g=g, gamma=gamma))
        assert np.max(np.abs(out[:3])) < 1e-12

    def test_reversal_symmetry_of_the_flow(self):
        # Verified symmetry: flipping sy and the sign of gamma reverses the
        # flow, F(R s; -gamma) = -R F(s; gamma) with R = diag(1, -1, 1).
        rng = np.random.default_rng(3)
        for _ in range(10):
            eps, v, g = rng.uniform(-2, 2, size=3)
            gamma = rng.uniform(0, 2)
            sx, sy, sz = random_bloch_point(rng)
            fx, fy, fz, _ = bloch_rhs_terms(eps, v, g, gamma, sx, sy, sz)
            rx, ry, rz, _ = bloch_rhs_terms(eps, v, g, -gamma, sx, -sy, sz)
            assert rx == pytest.approx(-fx, abs=1e-14)
            assert ry == pytest.approx(fy, abs=1e-14)
            assert rz == pytest.approx(-fz, abs=1e-14)


class TestIntegrateBloch:
    def test_rabi_closed_form(self):
        params = ModelParams(epsilon=0, v=1.0, g=0, gamma=0)
        times = np.linspace(0.0, 12.0, 241)
        traj = integrate_bloch(BlochState(0, 0, 0.5), params, times, rtol=1e-11, atol=1e-13)
        assert np.max(np.abs(traj.sz - 0.5 * np.cos(2 * times))) < 1e-9
        assert np.max(np.abs(traj.sy + 0.5 * np.sin(2 * times))) < 1e-9
        assert np.allclose(traj.n, 1.0)

    def test_sink_attraction(self):
        params = ModelParams(epsilon=0, v=1.0, g=2.0, gamma=0.5)
        times = np.linspace(0.0, 40.0, 201)
        traj = integrate_bloch(BlochState(0, 0, 0.5), params, times)
        sink_sz = -math.sqrt(3.25) / (2 * math.sqrt(4.25))
        assert abs(traj.sz[-1] - sink_sz) < 1e-3

    def test_stationary_at_fixed_points(self):
        from leakydimer import fixed_points

        params = ModelParams(epsilon=0, v=1.0, g=1.4, gamma=0.3)
        times = np.linspace(0.0, 10.0, 41)
        for rec in fixed_points(params):
            traj = integrate_bloch(BlochState(*rec.s), params, times)
            drift = max(
                np.max(np.abs(traj.sx - rec.s[0])),
                np.max(np.abs(traj.sy - rec.s[1])),
                np.max(np.abs(traj.sz - rec.s[2])),
            )
            assert drift < 1e-6

    def test_sphere_conservation_random_parameters(self):
        rng = np.random.default_rng(5)
        times = np.linspace(0.0, 50.0, 101)
        for _ in range(10):
            params = ModelParams(
                epsilon=rng.uniform(-3, 3), v=rng.uniform(-3, 3),
                g=rng.uniform(-3, 3), gamma=rng.uniform(0, 3),
            )
            traj = integrate_bloch(BlochState(*random_bloch_point(rng)), params, times)
            assert traj.max_sphere_defect < 1e-9

    def test_rejects_off_sphere_start(self):
        params = ModelParams()
        with pytest.raises(ValueError):
            integrate_bloch(BlochState(0.3, 0.0, 0.0), params, np.linspace(0, 1, 5))

    def test_norm_decay_in_hermitian_limit(self):
        params = ModelParams(epsilon=0.5, v=1.0, g=1.0, gamma=0.0)
        times = np.linspace(0.0, 20.0, 81)
        traj = integrate_bloch(BlochState(0, 0, 0.5, n=0.7), params, times)
        assert np.max(np.abs(traj.n - 0.7)) < 1e-10

    def test_fixed_step_reproducibility(self):
        params = ModelParams(epsilon=0.1, v=1.0, g=0.8, gamma=0.2)
        times = np.linspace(0.0, 5.0, 21)
        a = integrate_bloch(BlochState(0, 0, 0.5), params, times, fixed_step=1e-3)
        b = integrate_bloch(BlochState(0, 0, 0.5), params, times, fixed_step=1e-3)
        assert np.array_equal(a.sx, b.sx)
        assert np.array_equal(a.log_n, b.log_n)

    def test_step_budget_failure_carries_time(self):
        params = ModelParams(epsilon=0, v=1.0, g=2.0, gamma=0.5)
        with pytest.raises(IntegrationError) as info:
            integrate_bloch(BlochState(0, 0, 0.5), params, np.linspace(0, 100, 5), max_steps=20)
        assert 0.0 <= info.value.t_reached < 100.0


class TestGpeRhs:
    def test_north_pole_substitution(self):
        params = ModelParams(epsilon=0.4, v=0.8, g=1.1, gamma=0.3)
        dpsi, dbeta = gpe_rhs(SpinorState(1.0, 0.0), params)
        # kappa = 1: i dpsi1/dt = (eps + g - 2i gamma) psi1, i dpsi2/dt = v psi1
        assert dpsi[0] == pytest.approx(-1j * (params.epsilon + params.g) - 2 * params.gamma)
        assert dpsi[1] == pytest.approx(-1j * params.v)
        assert dbeta == pytest.approx(-params.g)

    def test_hermitian_linear_limit_preserves_norm(self):
        params = ModelParams(epsilon=0.2, v=1.0, g=0.0, gamma=0.0)
        psi = SpinorState(0.3 + 0.4j, 0.5 - 0.1j)
        dpsi, _ = gpe_rhs(psi, params)
        dn = 2 * (np.conj(psi.psi1) * dpsi[0] + np.conj(psi.psi2) * dpsi[1]).real
        assert dn == pytest.approx(0.0, abs=1e-15)

    def test_balanced_state_kills_interaction(self):
        params = ModelParams(epsilon=0.0, v=1.0, g=3.0, gamma=0.0)
        amp = 1 / math.sqrt(2)
        dpsi, dbeta = gpe_rhs(SpinorState(amp, amp), params)
        assert dpsi[0] == pytest.approx(-1j * params.v * amp)
        assert dpsi[1] == pytest.approx(-1j * params.v * amp)
        assert dbeta == 0.0

    def test_rejects_zero_spinor(self):
        with pytest.raises(ValueError):
            SpinorState(0.0, 0.0)


class TestRepresentationMaps:
    def test_pole(self):
        s = bloch_from_spinor(SpinorState(1.0, 0.0))
        assert (s.sx, s.sy, s.sz) == pytest.approx((0.0, 0.0, 0.5))

    def test_balanced(self):
        amp = 1 / math.sqrt(2)
        s = bloch_from_spinor(SpinorState(amp, amp))
        assert (s.sx, s.sy, s.sz) == pytest.approx((0.5, 0.0, 0.0), abs=1e-15)

    def test_circular(self):
        amp = 1 / math.sqrt(2)
        s = bloch_from_spinor(SpinorState(amp, 1j * amp))
        assert (s.sx, s.sy, s.sz) == pytest.approx((0.0, 0.5, 0.0), abs=1e-15)

    def test_map_lands_exactly_on_sphere(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            x1, x2 = random_unit_spinor(rng)
            s = bloch_from_spinor(SpinorState(2.3 * x1, 2.3 * x2))
            assert s.sphere_defect < 1e-15
            assert s.n == pytest.approx(2.3**2, rel=1e-12)

    def test_round_trip_up_to_global_phase(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            x1, x2 = random_unit_spinor(rng)
            psi = SpinorState(1.7 * x1, 1.7 * x2)
            back = spinor_from_bloch(bloch_from_spinor(psi))
            overlap = np.conj(back.psi1) * psi.psi1 + np.conj(back.psi2) * psi.psi2
            assert abs(overlap) == pytest.approx(psi.n, rel=1e-12)
            assert back.n == pytest.approx(psi.n, rel=1e-12)

    def test_gauge_is_psi2_real_nonneg(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            s = sphere_point(*rng.normal(size=3))
            if s.sz > 0.49:
                continue
            back = spinor_from_bloch(s)
            assert back.psi2.imag == pytest.approx(0.0, abs=1e-15)
            assert back.psi2.real >= 0.0

    def test_north_pole_gauge_switch(self):
        back = spinor_from_bloch(BlochState(0.0, 0.0, 0.5))
        assert back.psi1 == pytest.approx(1.0)
        assert back.psi2 == pytest.approx(0.0)


class TestRepresentationEquivalence:
    def test_spinor_and_bloch_integrations_agree(self):
        rng = np.random.default_rng(13)
        times = np.linspace(0.0, 50.0, 101)
        for _ in range(5):
            params = ModelParams(
                epsilon=rng.uniform(-3, 3), v=rng.uniform(-3, 3),
                g=rng.uniform(-3, 3), gamma=rng.uniform(0, 3),
            )
            s0 = BlochState(*random_bloch_point(rng))
            bloch = integrate_bloch(s0, params, times, rtol=1e-11, atol=1e-13)
            mapped = integrate_gpe(
                spinor_from_bloch(s0), params, times, rtol=1e-11, atol=1e-13
            ).bloch()
            assert np.max(np.abs(bloch.sx - mapped.sx)) < 1e-8
            assert np.max(np.abs(bloch.sy - mapped.sy)) < 1e-8
            assert np.max(np.abs(bloch.sz - mapped.sz)) < 1e-8
            assert np.max(np.abs(np.exp(bloch.log_n) - np.exp(mapped.log_n))) < 1e-8

    def test_unnormalized_kappa_variant_changes_dynamics(self):
        params = ModelParams(epsilon=0.0, v=1.0, g=2.0, gamma=0.4)
        times = np.linspace(0.0, 10.0, 101)
        psi0 = spinor_from_bloch(BlochState(0, 0, 0.5))
        ref = integrate_gpe(psi0, params, times, normalized_kappa=True).bloch()
        alt = integrate_gpe(psi0, params, times, normalized_kappa=False).bloch()
        # Identical start, same parameters: the imbalance convention alone
        # must produce visibly different trajectories once norm decays.
        assert np.max(np.abs(ref.sz - alt.sz)) > 1e-2

    def test_beta_matches_quadrature_of_minus_g_kappa_sq(self):
        params = ModelParams(epsilon=0.3, v=1.0, g=1.5, gamma=0.2)
        times = np.linspace(0.0, 8.0, 4001)
        traj = integrate_gpe(spinor_from_bloch(BlochState(0, 0, 0.5)), params, times)
        kappa = 2.0 * traj.bloch().sz
        beta_quad = np.concatenate(
            [[0.0], np.cumsum(0.5 * (kappa[1:] ** 2 + kappa[:-1] ** 2) * np.diff(times))]
        ) * (-params.g)
        assert np.all(np.isfinite(traj.beta))
        assert np.max(np.abs(traj.beta - beta_quad)) < 1e-4

    def test_beta_constant_without_interaction(self):
        params = ModelParams(epsilon=0.0, v=1.0, g=0.0, gamma=0.5)
        times = np.linspace(0.0, 5.0, 21)
        traj = integrate_gpe(spinor_from_bloch(BlochState(0, 0, 0.5)), params, times)
        assert np.allclose(traj.beta, 0.0)
