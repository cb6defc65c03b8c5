import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import performative as pf
from performative.core import as_vector


def finite_floats(lo=-1e6, hi=1e6):
    return st.floats(min_value=lo, max_value=hi, allow_nan=False, allow_infinity=False)


class TestAsVector:
    def test_coerces_scalars_and_lists(self):
        assert as_vector(1.5).tolist() == [1.5]
        assert as_vector([1, 2], dim=2).tolist() == [1.0, 2.0]

    def test_rejects_wrong_dim(self):
        with pytest.raises(ValueError, match="dimension 3"):
            as_vector([1.0, 2.0], dim=3)

    def test_rejects_nan_and_matrix(self):
        with pytest.raises(ValueError):
            as_vector([np.nan])
        with pytest.raises(ValueError):
            as_vector(np.zeros((2, 2)))


class TestParamSpace:
    def test_box_projection_clips(self):
        space = pf.ParamSpace.box([-1.0, 0.0], [1.0, 2.0])
        assert space.project([5.0, -3.0]).tolist() == [1.0, 0.0]
        assert space.project([0.5, 1.0]).tolist() == [0.5, 1.0]

    def test_ball_projection_rescales(self):
        space = pf.ParamSpace.ball([0.0, 0.0], 1.0)
        proj = space.project([3.0, 4.0])
        assert np.allclose(proj, [0.6, 0.8])

    def test_empty_box_rejected(self):
        with pytest.raises(ValueError, match="lower > upper"):
            pf.ParamSpace.box([1.0], [0.0])

    def test_diameter_and_bounded(self):
        assert pf.ParamSpace.box([0.0], [3.0]).diameter() == 3.0
        assert pf.ParamSpace.ball([1.0], 2.0).diameter() == 4.0
        assert not pf.ParamSpace.unbounded(2).bounded

    def test_spec_round_trip(self):
        for space in (pf.ParamSpace.box([-1.0], [2.0]), pf.ParamSpace.ball([0.5, 0.5], 3.0)):
            again = pf.ParamSpace.from_spec(space.spec())
            assert again.spec() == space.spec()

    @given(
        theta=arrays(float, 3, elements=finite_floats()),
        lo=arrays(float, 3, elements=finite_floats(-10, 0)),
        width=arrays(float, 3, elements=finite_floats(0.1, 10)),
    )
    def test_box_projection_is_idempotent_and_feasible(self, theta, lo, width):
        space = pf.ParamSpace.box(lo, lo + width)
        proj = space.project(theta)
        assert space.contains(proj, tol=1e-12)
        assert np.array_equal(space.project(proj), proj)

    @given(theta=arrays(float, 2, elements=finite_floats(-100, 100)))
    def test_ball_projection_never_expands_distance_to_center(self, theta):
        space = pf.ParamSpace.ball([1.0, -1.0], 2.0)
        proj = space.project(theta)
        assert np.linalg.norm(proj - space.center) <= space.radius + 1e-9


class TestBatch:
    def test_shapes_and_z(self):
        batch = pf.Batch(xs=np.array([[1.0, 2.0], [3.0, 4.0]]), ys=np.array([5.0, 6.0]))
        assert batch.n == 2 and batch.dx == 2
        assert batch.z.tolist() == [[1.0, 2.0, 5.0], [3.0, 4.0, 6.0]]

    def test_from_points_round_trip(self):
        points = [pf.DataPoint(x=[1.0], y=2.0), pf.DataPoint(x=[3.0], y=4.0)]
        batch = pf.Batch.from_points(points)
        assert batch.point(1).y == 4.0
        assert np.array_equal(batch.point(0).z, [1.0, 2.0])

    def test_rejects_mismatched_and_nonfinite(self):
        with pytest.raises(ValueError):
            pf.Batch(xs=np.zeros((2, 1)), ys=np.zeros(3))
        with pytest.raises(ValueError):
            pf.Batch(xs=np.array([[np.inf]]), ys=np.array([0.0]))


class TestRegularityConstants:
    def test_derived_quantities(self):
        c = pf.RegularityConstants(gamma=2.0, beta_z=1.0, beta_theta=2.0, L_z=3.0, sigma=1.0, L=2.0, epsilon=0.5)
        assert c.beta_max == 2.0
        assert c.gap == 1.5
        assert c.contractive

    def test_non_contractive(self):
        c = pf.RegularityConstants(gamma=1.0, beta_z=1.0, beta_theta=1.0, L_z=1.0, sigma=1.0, L=1.0, epsilon=1.5)
        assert not c.contractive
        assert c.gap == -0.5

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="sigma"):
            pf.RegularityConstants(gamma=1.0, beta_z=1.0, beta_theta=1.0, L_z=1.0, sigma=-1.0, L=1.0, epsilon=0.0)


class TestSeedStreams:
    def test_reproducible(self):
        a = pf.seed_streams(7, 2)
        b = pf.seed_streams(7, 2)
        assert a[0].standard_normal(5).tolist() == b[0].standard_normal(5).tolist()
        assert a[1].standard_normal(5).tolist() == b[1].standard_normal(5).tolist()

    def test_streams_differ(self):
        a, b = pf.seed_streams(7, 2)
        assert not np.allclose(a.standard_normal(8), b.standard_normal(8))


class TestRiskEstimation:
    def test_risk_hand_value(self):
        loss = pf.QuadraticLoss(lam=0.0, dim=1)
        batch = pf.Batch(xs=np.ones((2, 1)), ys=np.array([0.0, 2.0]))
        # residuals at theta=1: 1 and -1, so mean half-square is 0.5
        assert pf.risk(loss, [1.0], batch) == pytest.approx(0.5)

    def test_exact_path_matches_closed_form(self, bench):
        est = pf.performative_risk(bench.loss(), bench.dist_map(), [0.3])
        assert est.path == "exact"
        assert est.se == 0.0
        assert est.value == pytest.approx(bench.pr(0.3))

    def test_monte_carlo_agrees_with_exact(self, bench, rng):
        est = pf.performative_risk(bench.loss(), bench.dist_map(), [0.3], n=200_000, rng=rng, force_mc=True)
        assert est.path == "monte_carlo"
        assert abs(est.value - bench.pr(0.3)) <= 6 * est.se

    def test_monte_carlo_needs_budget_and_rng(self, rng):
        dist_map = pf.GaussianMixtureMeanShiftMap(
            weights=[1.0], base_means=[[0.0, 0.0]], scales=[[1.0, 1.0]], shifts=[[[0.0], [1.0]]]
        )
        loss = pf.QuadraticLoss(lam=0.0, dim=1)
        with pytest.raises(ValueError, match="sample budget"):
            pf.performative_risk(loss, dist_map, [0.0])
        with pytest.raises(ValueError, match="rng"):
            pf.performative_risk(loss, dist_map, [0.0], n=10)


class TestSteeringDecomposition:
    def test_parts_add_to_pr(self, bench):
        dec = pf.steering_decomposition(bench.loss(), bench.dist_map(), [0.2], [bench.theta_ps])
        assert dec.path == "exact"
        assert dec.total == pytest.approx(bench.pr(0.2), abs=1e-12)

    def test_static_map_has_no_steering(self):
        static = pf.ScalarQuadratic(a=0.0, b=1.0, lam=1.0, s=1.0)
        dec = pf.steering_decomposition(static.loss(), static.dist_map(), [0.7], [-0.3])
        assert dec.steering == pytest.approx(0.0, abs=1e-12)

    def test_steering_dominates_on_strong_feedback(self):
        strong = pf.ScalarQuadratic(a=1.8, b=1.0, lam=1.0, s=1.0)
        dec = pf.steering_decomposition(strong.loss(), strong.dist_map(), [strong.theta_ps], [strong.theta_ps])
        # at the stable point the anchor matches the deployment, so steering is 0
        assert dec.steering == pytest.approx(0.0, abs=1e-12)
        away = pf.steering_decomposition(strong.loss(), strong.dist_map(), [strong.theta_po], [strong.theta_ps])
        assert abs(away.steering) > 1.0


class TestWasserstein1d:
    def test_hand_example(self):
        assert pf.wasserstein1_1d([0.0, 1.0, 2.0], [1.0, 1.0, 4.0]) == pytest.approx(1.0)

    def test_rejects_unequal_sizes_and_empty(self):
        with pytest.raises(ValueError, match="differ"):
            pf.wasserstein1_1d([0.0], [1.0, 2.0])
        with pytest.raises(ValueError, match="empty"):
            pf.wasserstein1_1d([], [])

    @given(
        a=arrays(float, 5, elements=finite_floats(-100, 100)),
        b=arrays(float, 5, elements=finite_floats(-100, 100)),
        c=arrays(float, 5, elements=finite_floats(-100, 100)),
    )
    def test_metric_axioms(self, a, b, c):
        dab = pf.wasserstein1_1d(a, b)
        assert pf.wasserstein1_1d(a, a) == 0.0
        assert dab == pytest.approx(pf.wasserstein1_1d(b, a))
        assert dab <= pf.wasserstein1_1d(a, c) + pf.wasserstein1_1d(c, b) + 1e-9

    @given(
        a=arrays(float, 4, elements=finite_floats(-50, 50)),
        b=arrays(float, 4, elements=finite_floats(-50, 50)),
    )
    def test_matches_brute_force_assignment_on_four_atoms(self, a, b):
        brute = min(np.mean(np.abs(a - b[list(perm)])) for perm in itertools.permutations(range(4)))
        assert pf.wasserstein1_1d(a, b) == pytest.approx(brute, rel=1e-12, abs=1e-12)

    @given(
        a=arrays(float, 6, elements=finite_floats(-100, 100)),
        b=arrays(float, 6, elements=finite_floats(-100, 100)),
        shift=finite_floats(-10, 10),
    )
    def test_translation_invariance(self, a, b, shift):
        assert pf.wasserstein1_1d(a + shift, b + shift) == pytest.approx(pf.wasserstein1_1d(a, b), abs=1e-9)


class TestEstimateSensitivity:
    def test_closed_form_short_circuits(self, bench):
        assert pf.estimate_sensitivity(bench.dist_map(), probes=[]) == 0.5

    @settings(deadline=None)
    @given(a=st.floats(min_value=-2.0, max_value=2.0, allow_nan=False))
    def test_empirical_never_exceeds_certified(self, a):
        dist_map = pf.scalar_location_map(a=a, b=1.0, s=0.5)
        rng = np.random.default_rng(3)
        probes = [([0.0], [2.0]), ([-1.0], [1.5])]
        est = pf.estimate_sensitivity(dist_map, probes, n=2_000, rng=rng, force_empirical=True)
        # a 1-D projection contracts W1, and shared draws keep the ratio tight
        assert est <= abs(a) + 0.15

    def test_empirical_recovers_scalar_shift(self):
        dist_map = pf.scalar_location_map(a=0.8, b=0.0, s=1.0)
        rng = np.random.default_rng(5)
        est = pf.estimate_sensitivity(dist_map, [([0.0], [4.0])], n=40_000, rng=rng, force_empirical=True)
        assert est == pytest.approx(0.8, rel=0.05)

    def test_coincident_probes_rejected(self, bench, rng):
        with pytest.raises(ValueError, match="coincident"):
            pf.estimate_sensitivity(bench.dist_map(), [([1.0], [1.0])], n=10, rng=rng, force_empirical=True)
