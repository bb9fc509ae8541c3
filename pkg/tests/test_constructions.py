import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.core.errors import InputError, UnadaptedBaseError
from src.families.constructions import (BINORMAL_CHANGE, SQRT5_2, X_ROUND, Y_ROUND, binormal_lift,
                                        bundle_framing_residual, centered_axis, check_adapted_base, fiber_curve,
                                        fiber_gauge, fiber_rotation, frame_with_u, hl_fourfold,
                                        hl_implicit_residual, random_lift, round_s2_connection,
                                        round_s2_frame_field, surface_bundle)
from src.families.profile import ProfileCurve
from src.frames.su3 import su3_from_g2
from src.grassmann.cr import ruling_ideal_residual
from src.grassmann.fourfold import coassociativity_residual
from src.invariants.classifier import NULL_TORSION_BINORMAL, extract_AB, invariants_of
from src.lie.algebra import g2rel_residual, random_element
from src.lie.frames import adaptation_residual, exp_frame, maurer_cartan

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
ANGLES = np.linspace(0, 2 * np.pi, 4, endpoint=False)


@pytest.fixture(scope='module')
def coarse_base():
    return round_s2_frame_field(centered_axis(3, 0.5), centered_axis(3, 0.5))


class TestRoundSphere:
    def test_generators_lie_in_g2(self):
        assert g2rel_residual(X_ROUND.matrix7) < 1e-14
        assert g2rel_residual(Y_ROUND.matrix7) < 1e-14

    def test_exact_connection_matches_differences(self, round_base):
        for node in [(2, 2), (4, 4), (6, 3)]:
            exact = round_s2_connection(round_base.param_at(node))
            np.testing.assert_allclose(maurer_cartan(round_base, node), exact, atol=1e-5)
            assert max(g2rel_residual(w) for w in exact) < 1e-12

    def test_base_is_adapted(self, round_base):
        assert check_adapted_base(round_base) < 1e-4
        assert check_adapted_base(round_base, round_s2_connection) < 1e-12

    def test_random_base_is_not_adapted(self):
        with pytest.raises(UnadaptedBaseError):
            check_adapted_base(random_lift(2))

    def test_poles_are_rejected(self):
        with pytest.raises(InputError):
            round_s2_frame_field(s_grid=[0.0, 25.0, 50.0, 75.0])


class TestFiberAction:
    @given(seeds, st.floats(min_value=-3.0, max_value=3.0))
    def test_rotation_acts_diagonally_on_f(self, seed, angle):
        frame = exp_frame(random_element(np.random.default_rng(seed)), 1.0).e
        rotated = su3_from_g2(fiber_rotation(frame, angle))
        original = su3_from_g2(frame)
        np.testing.assert_allclose(rotated.f, fiber_gauge(angle) @ original.f, atol=1e-12)
        np.testing.assert_allclose(rotated.u, original.u, atol=1e-12)

    def test_binormal_change_is_a_g2_frame(self):
        assert adaptation_residual(BINORMAL_CHANGE) < 1e-12

    def test_binormal_lift_lies_in_the_ruling_ideal(self, round_base):
        lift = binormal_lift(round_base)
        assert lift.meta['binormal']
        assert ruling_ideal_residual(lift).passed

    def test_binormal_lift_of_round_sphere_has_null_torsion(self, round_base):
        # the round sphere has H2 = 0, so b vanishes and the binormal label needs b != 0
        inv = invariants_of(extract_AB(binormal_lift(round_base)))
        assert inv.classification == NULL_TORSION_BINORMAL


class TestFrameWithU:
    @given(seeds)
    def test_fifth_column_is_prescribed(self, seed):
        s0 = np.random.default_rng(seed).standard_normal(7)
        s0 /= np.linalg.norm(s0)
        frame = frame_with_u(s0)
        np.testing.assert_allclose(frame[:, 4], s0, atol=1e-10)
        assert adaptation_residual(frame) < 1e-10

    def test_standard_direction_gives_identity(self):
        np.testing.assert_array_equal(frame_with_u(np.eye(7)[:, 4]), np.eye(7))

    def test_rejects_non_unit_vector(self):
        with pytest.raises(InputError):
            frame_with_u(2 * np.eye(7)[:, 4])


class TestFiberCurves:
    def test_constant_line_gives_constant_lift(self):
        lift = fiber_curve(np.eye(7)[:, 4], lambda w: np.array([1.0, 0.0, 0.0]), centered_axis(5), centered_axis(5))
        assert lift.meta['constant']
        assert not lift.meta['excluded']

    def test_vanishing_line_nodes_are_excluded(self):
        lift = fiber_curve(np.eye(7)[:, 4], lambda w: np.array([w, 0.0, 0.0]), centered_axis(5), centered_axis(5))
        assert lift.meta['excluded'] == [[0.0, 0.0]]


class TestSurfaceBundle:
    @pytest.mark.parametrize("branch", ['outer', 'inner'])
    def test_bundle_is_coassociative(self, coarse_base, branch):
        t_grid = ProfileCurve(1.0).t_grid(branch, 5)
        fourfold = surface_bundle(coarse_base, 1.0, t_grid, ANGLES, branch=branch, connection=round_s2_connection)
        assert fourfold.points.shape == (9 * 5 * 4, 7)
        assert coassociativity_residual(fourfold).passed
        assert np.max(np.abs(hl_implicit_residual(fourfold.points, 1.0))) < 1e-8

    def test_differenced_base_tangents(self, round_base):
        t_grid = ProfileCurve(1.0).t_grid('outer', 3)
        fourfold = surface_bundle(round_base, 1.0, t_grid, ANGLES)
        assert not fourfold.analytic
        assert coassociativity_residual(fourfold).passed

    def test_cone_and_plane(self, coarse_base):
        cone = surface_bundle(coarse_base, 0.0, angle_grid=ANGLES, piece='cone', connection=round_s2_connection)
        assert coassociativity_residual(cone).passed
        r4 = np.linalg.norm(cone.points[:, :4], axis=1)
        s = np.linalg.norm(cone.points[:, 4:], axis=1)
        np.testing.assert_allclose(s, SQRT5_2 * r4, atol=1e-10)

        plane = surface_bundle(coarse_base, 0.0, angle_grid=ANGLES, piece='plane', connection=round_s2_connection)
        assert coassociativity_residual(plane).passed
        assert np.max(np.abs(plane.points[:, 4:])) < 1e-12

    def test_unknown_piece(self, coarse_base):
        with pytest.raises(InputError):
            surface_bundle(coarse_base, 0.0, angle_grid=ANGLES, piece='sheet', connection=round_s2_connection)

    def test_negative_k(self, coarse_base):
        with pytest.raises(InputError):
            surface_bundle(coarse_base, -1.0, angle_grid=ANGLES, connection=round_s2_connection)

    @pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
    def test_framing_is_phi_null(self, coarse_base, k):
        t_grid = ProfileCurve(k).t_grid('outer', 4)
        assert bundle_framing_residual(coarse_base, k, t_grid, ANGLES) < 1e-10

    def test_unadapted_base_is_rejected(self):
        with pytest.raises(UnadaptedBaseError):
            surface_bundle(random_lift(4), 1.0, angle_grid=ANGLES)


class TestHarveyLawson:
    @pytest.mark.parametrize("branch", ['outer', 'inner'])
    def test_analytic_tangents(self, branch):
        fourfold = hl_fourfold(1.0, ProfileCurve(1.0).t_grid(branch, 6), branch)
        report = coassociativity_residual(fourfold)
        assert report.passed
        assert report.max_residual < 1e-8
        assert np.max(np.abs(hl_implicit_residual(fourfold.points, 1.0))) < 1e-8

    def test_differenced_tangents(self):
        euler = (ANGLES[:3], np.linspace(0.2, 1.3, 3), ANGLES[:3])
        fourfold = hl_fourfold(1.0, ProfileCurve(1.0).t_grid('outer', 3), 'outer', euler, tangent_step=1e-5)
        assert not fourfold.analytic
        assert coassociativity_residual(fourfold).max_residual < 1e-5

    def test_scaling_in_k(self):
        fourfold = hl_fourfold(2.0, ProfileCurve(2.0).t_grid('outer', 4))
        assert np.max(np.abs(hl_implicit_residual(fourfold.points, 2.0))) < 1e-8 * 2.0 ** 5

    def test_k_zero_is_rejected(self):
        with pytest.raises(InputError):
            hl_fourfold(0.0)
