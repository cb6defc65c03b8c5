import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

import performative as pf


@pytest.fixture
def platform():
    return pf.Platform(
        scores=[1.0, 0.9, 0.2],
        propensities=[[0.8, 0.4], [0.9, 0.5]],
        affinities=[[0.5, 0.3, 0.1], [0.5, 0.2, 0.4]],
        budget=0.8,
    )


def random_platform(rng):
    nv = int(rng.integers(1, 8))
    ni = int(rng.integers(2, 6))
    scores = rng.uniform(0.0, 1.0, ni)
    p1 = rng.uniform(0.0, 1.0, nv)
    p2 = p1 * rng.uniform(0.0, 1.0, nv)
    aff = rng.uniform(0.0, 1.0, (nv, ni))
    ordered = np.sort(scores)[::-1]
    budget = float(np.max(ordered[:-1] - ordered[1:]) + rng.uniform(0.01, 0.5))
    return pf.Platform(scores=scores, propensities=np.column_stack([p1, p2]), affinities=aff, budget=budget)


class TestPlatformValidation:
    def test_needs_two_items(self):
        with pytest.raises(ValueError, match="two items"):
            pf.Platform(scores=[1.0], propensities=[[0.5, 0.2]], affinities=[[0.5]], budget=1.0)

    def test_propensity_shape(self):
        with pytest.raises(ValueError, match="viewers, 2"):
            pf.Platform(scores=[1.0, 0.5], propensities=[[0.5, 0.2, 0.1]], affinities=[[0.5, 0.5]], budget=1.0)

    def test_affinity_shape(self):
        with pytest.raises(ValueError, match="viewers, items"):
            pf.Platform(scores=[1.0, 0.5], propensities=[[0.5, 0.2]], affinities=[[0.5]], budget=1.0)

    def test_position_bias_ordering(self):
        with pytest.raises(ValueError, match="position bias"):
            pf.Platform(scores=[1.0, 0.5], propensities=[[0.2, 0.5]], affinities=[[0.5, 0.5]], budget=1.0)

    def test_propensity_range(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            pf.Platform(scores=[1.0, 0.5], propensities=[[1.5, 0.2]], affinities=[[0.5, 0.5]], budget=1.0)

    def test_budget_must_cover_largest_gap(self):
        with pytest.raises(ValueError, match="budget"):
            pf.Platform(scores=[1.0, 0.5], propensities=[[0.5, 0.2]], affinities=[[0.5, 0.5]], budget=0.4)

    def test_finite_scores(self):
        with pytest.raises(ValueError, match="finite"):
            pf.Platform(scores=[math.inf, 0.5], propensities=[[0.5, 0.2]], affinities=[[0.5, 0.5]], budget=1.0)

    def test_focal_tie_resolves_to_lowest_index(self):
        plat = pf.Platform(
            scores=[0.7, 0.7], propensities=[[0.5, 0.2]], affinities=[[0.5, 0.5]], budget=0.3
        )
        assert plat.focal == 0
        assert plat.slots().tolist() == [0, 1]


class TestActions:
    def test_swap_puts_runner_up_first(self, platform):
        action = pf.swap_action(platform)
        assert platform.feasible(action)
        assert platform.slots(action).tolist() == [1, 0]

    def test_demote_spends_whole_budget(self, platform):
        action = pf.demote_focal(platform)
        assert action.adjustment[platform.focal] == -platform.budget
        assert platform.feasible(action)

    def test_infeasible_action_rejected(self, platform):
        too_big = pf.Action(adjustment=[2.0, 0.0, 0.0], name="shove")
        assert not platform.feasible(too_big)
        with pytest.raises(ValueError, match="budget"):
            pf.probe_effect(platform, too_big)

    def test_wrong_size_action_is_infeasible(self, platform):
        assert not platform.feasible(pf.Action(adjustment=[0.1, 0.1]))

    def test_adjustment_must_be_finite(self):
        with pytest.raises(ValueError, match="finite"):
            pf.Action(adjustment=[math.nan])


class TestPositionEffect:
    def test_worked_example_is_exact(self, platform):
        beta, se = pf.causal_effect_of_position(platform)
        assert beta == 0.2  # (0.8-0.4)*0.5 and (0.9-0.5)*0.5 average to exactly 0.2
        assert se == 0.0

    def test_monte_carlo_agrees_with_exact(self, platform, rng):
        beta, se = pf.causal_effect_of_position(platform, n=40_000, rng=rng)
        assert se > 0
        assert abs(beta - 0.2) <= 5 * se

    def test_monte_carlo_needs_rng(self, platform):
        with pytest.raises(ValueError, match="rng"):
            pf.causal_effect_of_position(platform, n=10)


class TestPowerLowerBound:
    def test_worked_example_values(self, platform):
        p_hat, per_probe = pf.performative_power_lower_bound(platform)
        assert per_probe["swap"] == 0.2
        # the demote tie-break pushes the focal item out of both slots entirely
        assert per_probe["demote"] == pytest.approx(0.425, rel=1e-12)
        assert p_hat == per_probe["demote"]

    def test_probe_bound_dominates_position_effect(self, rng):
        for _ in range(200):
            plat = random_platform(rng)
            p_hat, _ = pf.performative_power_lower_bound(plat)
            beta, _ = pf.causal_effect_of_position(plat)
            assert p_hat >= beta - 1e-12

    def test_steering_gap_is_nonnegative(self, platform, rng):
        assert pf.steering_gap(platform) >= -1e-12
        for _ in range(25):
            assert pf.steering_gap(random_platform(rng)) >= -1e-12

    def test_needs_probes(self, platform):
        with pytest.raises(ValueError, match="probe"):
            pf.performative_power_lower_bound(platform, probes=[])

    def test_monte_carlo_probe_close_to_exact(self, platform, rng):
        action = pf.swap_action(platform)
        exact, _ = pf.probe_effect(platform, action)
        est, se = pf.probe_effect(platform, action, n=50_000, rng=rng)
        assert abs(est - exact) <= 5 * max(se, 1e-4)


class TestDecomposition:
    def test_subgroup_power_scales_with_alpha(self, rng):
        for _ in range(100):
            plat = random_platform(rng)
            size = int(rng.integers(1, plat.n_viewers + 1))
            idx = rng.choice(plat.n_viewers, size=size, replace=False)
            out = pf.decomposition_check(plat, idx)
            assert out["holds"]
            assert out["alpha"] == pytest.approx(size / plat.n_viewers)
            for name, full in out["per_probe_full"].items():
                assert full >= out["alpha"] * out["per_probe_subset"][name] - 1e-12

    def test_subset_must_be_nonempty(self, platform):
        with pytest.raises(ValueError, match="nonempty"):
            pf.viewer_subset(platform, [])

    def test_full_subset_is_identity(self, platform):
        out = pf.decomposition_check(platform, [0, 1])
        assert out["alpha"] == 1.0
        assert out["power_full"] == out["power_subset"]


class TestTrafficCalculator:
    def test_pencil_and_paper_product(self):
        assert pf.traffic_steering_calculator([0.66, 0.8, 0.8, 0.7]) == 0.29568

    def test_reads_decimals_at_face_value(self):
        # 0.1 * 3 = 0.3 exactly, no binary float residue
        assert pf.traffic_steering_calculator([0.1, 0.3]) == 0.03
        assert pf.traffic_steering_calculator([Fraction(1, 4), 0.5]) == 0.125

    def test_empty_product_is_one(self):
        assert pf.traffic_steering_calculator([]) == 1.0

    def test_range_check_names_offender(self):
        with pytest.raises(ValueError, match="factor 1"):
            pf.traffic_steering_calculator([0.5, 1.2])
        with pytest.raises(ValueError, match="factor 0"):
            pf.traffic_steering_calculator([-0.1])

    @given(
        st.lists(
            st.floats(min_value=0.0, max_value=1.0, allow_nan=False).map(lambda f: round(f, 3)),
            min_size=1,
            max_size=6,
        )
    )
    def test_order_invariance(self, factors):
        shuffled = sorted(factors, reverse=True)
        assert pf.traffic_steering_calculator(factors) == pf.traffic_steering_calculator(shuffled)


class TestPowerReport:
    def test_report_contents(self, platform):
        rep = pf.power_report(platform, subset_indices=[0], n=0)
        assert rep["n_viewers"] == 2
        assert rep["focal"] == 0
        assert rep["position_effect"] == 0.2
        assert rep["power_lower_bound"] == pytest.approx(0.425, rel=1e-12)
        assert rep["dominates_position_effect"]
        assert rep["decomposition"]["holds"]

    def test_monte_carlo_report_is_seeded(self, platform):
        a = pf.power_report(platform, n=5_000, seed=3)
        b = pf.power_report(platform, n=5_000, seed=3)
        assert a["position_effect"] == b["position_effect"]
        assert a["position_effect_se"] > 0
