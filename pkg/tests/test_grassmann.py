import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from src.core.errors import InputError
from src.families.constructions import SU2, random_lift, t_plane_lift
from src.grassmann.cr import (UPSILON_CONGRUENCE, OrientedTwoPlane, cr_coframe, cr_residual, gamma_construction,
                              project_p, ruling_ideal_residual, upsilon_identity_check, upsilon_values)
from src.grassmann.fourfold import Fourfold, coassociativity_residual, node_residuals
from src.lie.algebra import random_element

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
E = np.eye(7)


def t_plane_samples(rng, n=10, orientation=1.0):
    points = np.zeros((n, 7))
    points[:, :4] = rng.standard_normal((n, 4))
    tangents = np.tile(E[:, :4], (n, 1, 1))
    tangents[:, :, 0] *= orientation
    return Fourfold(points=points, tangents=tangents, coords=np.zeros((n, 4)), analytic=True, label='T')


class TestCoassociativity:
    def test_t_plane_is_coassociative_and_calibrated(self, rng):
        report = coassociativity_residual(t_plane_samples(rng))
        assert report.passed
        assert report.max_residual < 1e-12
        assert report.details['calibration_min'] == pytest.approx(1.0, abs=1e-12)

    def test_reversed_orientation_is_flagged(self, rng):
        report = coassociativity_residual(t_plane_samples(rng, orientation=-1.0))
        assert report.passed
        assert 'orientation_reversed' in report.flags

    def test_associative_directions_fail(self):
        tangents = np.tile(E[:, [0, 1, 4, 2]], (3, 1, 1))
        m = Fourfold(points=np.zeros((3, 7)), tangents=tangents, coords=np.zeros((3, 4)), analytic=True)
        restriction, _, immersed = node_residuals(m)
        assert immersed.all()
        assert restriction.min() == pytest.approx(1.0)
        assert not coassociativity_residual(m).passed

    def test_singular_samples_are_excluded(self, rng):
        m = t_plane_samples(rng, n=4)
        m.tangents[0, :, 3] = m.tangents[0, :, 2]
        report = coassociativity_residual(m)
        assert report.n_excluded == 1
        assert report.passed

    def test_no_immersed_samples_fails(self):
        m = Fourfold(points=np.zeros((2, 7)), tangents=np.zeros((2, 7, 4)), coords=np.zeros((2, 4)))
        report = coassociativity_residual(m)
        assert 'no_immersed_samples' in report.flags
        assert not report.passed

    def test_rejects_inconsistent_shapes(self):
        with pytest.raises(InputError):
            Fourfold(points=np.zeros((2, 7)), tangents=np.zeros((3, 7, 4)), coords=np.zeros((2, 4)))

    def test_csv_has_residual_column(self, rng, tmp_path):
        m = t_plane_samples(rng, n=3)
        restriction, _, _ = node_residuals(m)
        path = tmp_path / 'samples.csv'
        m.to_csv(str(path), restriction)
        header = path.read_text().splitlines()[0].split(',')
        assert header[:4] == ['r1', 'r2', 'sigma1', 'sigma2']
        assert header[-1] == 'residual'


class TestPlanes:
    def test_projection_of_coordinate_plane(self):
        np.testing.assert_allclose(project_p(OrientedTwoPlane(E[0], E[1])), E[4], atol=1e-15)

    def test_projection_ignores_rotation_within_the_plane(self, rng):
        plane = OrientedTwoPlane(E[0], E[1]).transformed(expm(random_element(rng).matrix7))
        np.testing.assert_allclose(project_p(plane.rotated(0.8)), project_p(plane), atol=1e-12)

    @given(seeds)
    def test_projection_is_equivariant(self, seed):
        rng = np.random.default_rng(seed)
        g = expm(random_element(rng).matrix7)
        v1, v2 = np.linalg.qr(rng.standard_normal((7, 2)))[0].T
        plane = OrientedTwoPlane(v1, v2)
        np.testing.assert_allclose(project_p(plane.transformed(g)), g @ project_p(plane), atol=1e-10)

    def test_rejects_non_orthonormal_pair(self):
        with pytest.raises(InputError):
            OrientedTwoPlane(E[0], E[0] + E[1])


class TestCRCurves:
    def test_cr_forms_of_self_dual_generator(self):
        cr = cr_coframe(SU2[1].matrix7)
        np.testing.assert_allclose(cr.zeta, [-1.0, 1j, 0.0, 0.0], atol=1e-15)
        assert cr.w51 == 0 and cr.w52 == 0

    def test_fiber_curve_is_cr_holomorphic(self, fiber_lift):
        report = cr_residual(fiber_lift)
        assert report.passed
        assert 'o2_symmetric_branch' not in report.flags

    def test_t_plane_curve_is_cr_holomorphic(self):
        assert cr_residual(t_plane_lift()).passed

    def test_random_curve_is_not_cr(self, smooth_lift):
        assert not cr_residual(smooth_lift).passed

    def test_cr_curves_lie_in_the_ruling_ideal(self, fiber_lift):
        assert ruling_ideal_residual(fiber_lift).max_residual < 1e-4
        assert ruling_ideal_residual(t_plane_lift()).max_residual < 1e-4

    def test_gamma_of_fiber_curve_is_coassociative(self, fiber_lift):
        report = coassociativity_residual(gamma_construction(fiber_lift))
        assert report.passed
        assert report.n_excluded == 0

    def test_gamma_of_t_plane_curve_stays_in_t(self):
        fourfold = gamma_construction(t_plane_lift())
        assert np.max(np.abs(fourfold.points[:, 4:])) < 1e-12
        report = coassociativity_residual(fourfold)
        assert report.passed
        assert report.details['calibration_min'] > 0.999

    @pytest.mark.parametrize("seed", range(5))
    def test_gamma_of_random_curve_fails(self, seed):
        report = coassociativity_residual(gamma_construction(random_lift(seed, shape=(5, 5))))
        assert report.max_residual > 1e-2

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(5, 20))
    def test_gamma_of_more_random_curves_fails(self, seed):
        report = coassociativity_residual(gamma_construction(random_lift(seed, shape=(5, 5))))
        assert report.max_residual > 1e-2

    def test_gamma_needs_a_surface(self):
        lift = random_lift(0, shape=(5, 5))
        curve = type(lift)(params=lift.params[:1], frames=lift.frames[:, 0], step=lift.step[0])
        with pytest.raises(InputError):
            gamma_construction(curve)


class TestUpsilon:
    @pytest.mark.parametrize("seed", range(4))
    def test_identities_hold_on_random_lifts(self, seed):
        report = upsilon_identity_check(random_lift(seed, shape=(5, 5), step=1e-4))
        assert report.passed
        assert report.details['raw_defect'] > 1e-2

    def test_congruence_terms_are_removed_per_node(self):
        lift = random_lift(1, shape=(5, 5), step=1e-4)
        for node in lift.interior_nodes():
            lhs, rhs, basis = upsilon_values(lift, node)
            assert np.max(np.abs(lhs - rhs - basis @ UPSILON_CONGRUENCE)) < 1e-5
            # dropping the right-hand sides must break the identities
            assert np.max(np.abs(lhs - basis @ UPSILON_CONGRUENCE)) > 1e-2

    @pytest.mark.parametrize("seed", range(3))
    def test_residual_converges_at_second_order(self, seed):
        coarse, fine = (upsilon_identity_check(random_lift(seed, shape=(5, 5), step=h), node=(2, 2)).max_residual
                        for h in (1e-2, 5e-3))
        assert coarse / fine == pytest.approx(4.0, rel=0.2)

    def test_coefficients_are_reported(self, smooth_lift):
        report = upsilon_identity_check(smooth_lift, node=(4, 4))
        assert set(report.details['removal_coefficients']) == {'w12^w51', 'w12^w52'}
        assert set(report.details['fitted_coefficients']) == {'w12^w51', 'w12^w52'}
        assert report.details['removal_coefficients']['w12^w51'] == [-1.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        assert report.n_nodes == 1

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(20))
    def test_identities_hold_on_twenty_lifts(self, seed):
        assert upsilon_identity_check(random_lift(seed, shape=(5, 5), step=1e-4)).passed
