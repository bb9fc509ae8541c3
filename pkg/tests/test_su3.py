import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from src.core.errors import DegenerateFrameError, InputError, PreconditionError
from src.families.constructions import X_ROUND, centered_axis, round_s2_frame_field
from src.frames.su3 import (SU3Frame, _theta_lstsq, adapt_holomorphic, adapted_ideal_residual, bracket_map,
                            coframe_consistency_residual, coframe_from_connection, holomorphicity_residual,
                            structure_equation_residual, su3_coframe, su3_from_g2, su3_to_g2,
                            to_bryant_convention, torsion, torsion_field, null_torsion_residual,
                            h1_holomorphy_residual)
from src.grassmann.cr import cr_dictionary_residual
from src.lie.algebra import random_element
from src.lie.frames import CurveLift, exp_frame

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


class TestSU3Frame:
    @given(seeds)
    def test_unitary_relations_on_g2_frames(self, seed):
        frame = exp_frame(random_element(np.random.default_rng(seed)), 1.0).e
        assert su3_from_g2(frame).unitary_residual() < 1e-12

    @given(seeds)
    def test_g2_frame_is_recovered(self, seed):
        frame = exp_frame(random_element(np.random.default_rng(seed)), 0.7).e
        np.testing.assert_allclose(su3_to_g2(su3_from_g2(frame)), frame, atol=1e-14)

    def test_standard_frame(self):
        su3 = su3_from_g2(np.eye(7))
        e = np.eye(7)
        np.testing.assert_allclose(su3.u, e[4])
        np.testing.assert_allclose(su3.f[0], 0.5 * (e[6] + 1j * e[5]))
        np.testing.assert_allclose(su3.f[1], 0.5 * (-e[0] - 1j * e[1]))
        np.testing.assert_allclose(su3.f[2], 0.5 * (-e[3] + 1j * e[2]))

    def test_bracket_map_is_minus_cross(self, rng):
        a, b = rng.standard_normal((2, 3))
        np.testing.assert_allclose(bracket_map(a) @ b, -np.cross(a, b), atol=1e-14)

    def test_bryant_convention_is_an_involution(self, rng):
        u, f = rng.standard_normal(7), rng.standard_normal((3, 7)) + 0j
        theta, kappa = rng.standard_normal(3) + 0j, rng.standard_normal((3, 3)) + 0j
        back = to_bryant_convention(*to_bryant_convention(u, f, theta, kappa))
        for x, y in zip(back, (u, f, theta, kappa)):
            np.testing.assert_array_equal(x, y)

    def test_degenerate_frame_rejected(self):
        su3 = SU3Frame(u=np.eye(7)[4], f=np.zeros((3, 7), dtype=complex))
        with pytest.raises(DegenerateFrameError):
            _theta_lstsq(su3, np.ones(7))


class TestCoframe:
    @given(seeds)
    def test_kappa_is_in_su3(self, seed):
        omega = random_element(np.random.default_rng(seed)).matrix7
        _, kappa = coframe_from_connection(omega)
        assert np.max(np.abs(kappa + kappa.conj().T)) < 1e-12
        assert abs(np.trace(kappa)) < 1e-12

    @given(seeds)
    def test_dictionary_with_cr_forms(self, seed):
        omega = random_element(np.random.default_rng(seed)).matrix7
        assert cr_dictionary_residual(omega) < 1e-12

    def test_projection_agrees_with_connection(self, smooth_lift):
        assert coframe_consistency_residual(smooth_lift) < 1e-4

    def test_reconstruction_residuals(self, smooth_lift):
        cf = su3_coframe(smooth_lift, (4, 4))
        assert cf.du_residual < 1e-4
        assert cf.df_residual < 1e-4
        assert cf.anti_hermitian_residual() < 1e-4
        assert cf.trace_residual() < 1e-4

    def test_structure_equations(self, smooth_lift):
        report = structure_equation_residual(smooth_lift)
        assert report.passed
        assert report.details['kappa_su3_residual'] < 1e-4


class TestHolomorphicCurves:
    def test_round_sphere_is_holomorphic(self, round_base):
        assert holomorphicity_residual(round_base).passed

    def test_random_surface_is_not_holomorphic(self, smooth_lift):
        assert not holomorphicity_residual(smooth_lift).passed

    def test_constant_u_is_degenerate(self, fiber_lift):
        report = holomorphicity_residual(fiber_lift)
        assert 'degenerate' in report.flags
        assert not report.passed

    def test_adapt_rejects_non_holomorphic(self, smooth_lift):
        with pytest.raises(PreconditionError):
            adapt_holomorphic(smooth_lift)

    def test_adapt_rejects_constant_u(self, fiber_lift):
        with pytest.raises(PreconditionError):
            adapt_holomorphic(fiber_lift)

    @pytest.mark.parametrize("mode", ['f2', 'f3'])
    def test_round_sphere_adaptation(self, round_base, mode):
        adapted = adapt_holomorphic(round_base, mode)
        assert adapted.meta['round_branch']
        assert adapted.meta['adaptation'] == mode
        assert adapted.shape == (5, 5)
        assert adapted_ideal_residual(adapted).passed
        np.testing.assert_allclose(adapted.frames[..., :, 4], round_base.frames[2:7, 2:7, :, 4], atol=1e-14)

    def test_adapted_theta1_is_real_positive_on_dx(self, round_base):
        adapted = adapt_holomorphic(round_base, 'f3')
        cf = su3_coframe(adapted, (2, 2))
        assert cf.theta[0, 0].real > 0
        assert abs(cf.theta[0, 0].imag) < 1e-4 * abs(cf.theta[0, 0])

    @pytest.mark.parametrize("mode", ['f2', 'f3'])
    def test_adaptation_is_idempotent(self, mode):
        axis = centered_axis(13, 1e-3)
        adapted = adapt_holomorphic(round_s2_frame_field(axis, axis), mode)
        again = adapt_holomorphic(adapted, mode)
        assert again.shape == (5, 5)
        np.testing.assert_allclose(again.frames, adapted.frames[2:7, 2:7], atol=1e-8)
        np.testing.assert_allclose(again.frames[..., :, 4], adapted.frames[2:7, 2:7, :, 4], atol=1e-14)

    def test_unit_speed_coframe(self):
        lift = CurveLift.from_map(lambda p: expm(p[0] * X_ROUND.matrix7), [centered_axis(9, 1e-3)])
        cf = su3_coframe(lift, (4,))
        np.testing.assert_allclose(np.abs(cf.theta[0]), [0.5, 0.0, 0.0], atol=1e-6)


class TestTorsion:
    def test_torsion_field_covers_interior(self, round_base):
        adapted = adapt_holomorphic(round_base, 'f3')
        h1, h2, fit, excluded = torsion_field(adapted)
        assert excluded == 0
        assert np.isfinite(h2[2, 2])
        assert np.isnan(h1[0, 0])

    def test_round_sphere_has_null_torsion(self, round_base):
        adapted = adapt_holomorphic(round_base, 'f3')
        null = null_torsion_residual(adapted)
        assert null.n_nodes == len(adapted.interior_nodes())
        assert null.passed
        assert null.max_residual < 1e-4

    def test_h1_is_holomorphic(self, round_base):
        report = h1_holomorphy_residual(adapt_holomorphic(round_base, 'f3'))
        assert report.n_nodes >= 1
        assert report.passed

    def test_torsion_needs_a_surface(self, rng):
        lift = CurveLift.from_map(lambda p: np.eye(7), [np.arange(5) * 0.1])
        with pytest.raises(InputError):
            torsion(lift, (2,))
