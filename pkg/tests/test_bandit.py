import math

import numpy as np
import pytest

import performative as pf
from performative.bandit import Deployment, performative_lcb, performative_ucb
from performative.losses import certify_constants
from performative.maps import equilibrium_certificates


def arm_hull(grid):
    return pf.ParamSpace.box(grid.arms.min(axis=0), grid.arms.max(axis=0))


class TestConfidenceParams:
    def test_radius_hand_value(self):
        conf = pf.ConfidenceParams(horizon=100, delta=0.05, loss_range=2.0)
        assert conf.radius(50) == pytest.approx(2.0 * math.sqrt(math.log(4000.0) / 100.0), rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError, match="horizon"):
            pf.ConfidenceParams(horizon=0, delta=0.05, loss_range=1.0)
        with pytest.raises(ValueError, match="delta"):
            pf.ConfidenceParams(horizon=10, delta=1.5, loss_range=1.0)
        with pytest.raises(ValueError, match="loss_range"):
            pf.ConfidenceParams(horizon=10, delta=0.05, loss_range=math.inf)
        with pytest.raises(ValueError, match="batch"):
            pf.ConfidenceParams(horizon=10, delta=0.05, loss_range=1.0).radius(0)


class TestArmGrid:
    def test_uniform_grid_endpoints(self):
        grid = pf.ArmGrid.uniform(-1.0, 2.0, 0.1)
        assert grid.n_arms == 31
        assert grid.arms[0, 0] == pytest.approx(-1.0)
        assert grid.arms[-1, 0] == pytest.approx(2.0)
        assert grid.active.all()

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            pf.ArmGrid.uniform(2.0, -1.0, 0.1)
        with pytest.raises(ValueError, match="finite"):
            pf.ArmGrid(arms=np.array([[math.inf]]))


class TestExactPath:
    def run(self, bench, spacing=0.1, horizon=150, **kw):
        grid = pf.ArmGrid.uniform(-1.0, 2.0, spacing)
        return grid, pf.successive_elimination(bench.loss(), bench.dist_map(), grid, horizon=horizon, **kw)

    def test_bounds_always_contain_truth(self, bench_uniform):
        grid, run = self.run(bench_uniform, horizon=150, record_bounds=True)
        assert run.meta["path"] == "closed_form"
        for upper, lower in run.bounds_history:
            assert np.all(lower <= run.pr_true + 1e-12)
            assert np.all(run.pr_true <= upper + 1e-12)

    def test_bounds_are_monotone(self, bench_uniform):
        _, run = self.run(bench_uniform, horizon=120, record_bounds=True)
        uppers = np.stack([u for u, _ in run.bounds_history])
        lowers = np.stack([l for _, l in run.bounds_history])
        # direct comparison: diff would produce nan on the inf rows of unprobed arms
        assert np.all(uppers[1:] <= uppers[:-1] + 1e-12)
        assert np.all(lowers[1:] >= lowers[:-1] - 1e-12)

    def test_true_best_arm_survives(self, bench_uniform):
        grid, run = self.run(bench_uniform, horizon=400)
        best = int(np.argmin(run.pr_true))
        assert grid.active[best]
        assert run.eliminated_at[best] == -1
        # all clearly suboptimal arms are gone after a couple of passes
        assert grid.active.sum() == 1

    def test_standalone_bounds_match_recorded(self, bench_uniform):
        grid, run = self.run(bench_uniform, horizon=60, record_bounds=True)
        loss, dist_map = bench_uniform.loss(), bench_uniform.dist_map()
        constants = certify_constants(loss, dist_map, space=arm_hull(grid))
        cert = equilibrium_certificates(dist_map, loss)
        best = int(np.argmin(run.pr_true))
        arm = grid.arms[best]
        for t in (0, 4, 31, 59):
            ucb = performative_ucb(loss, arm, grid.history[: t + 1], constants, cert=cert)
            lcb = performative_lcb(loss, arm, grid.history[: t + 1], constants, cert=cert)
            upper, lower = run.bounds_history[t]
            assert ucb == pytest.approx(upper[best], abs=1e-12)
            assert lcb == pytest.approx(lower[best], abs=1e-12)

    def test_empty_history_is_uninformative(self, bench_uniform):
        loss, dist_map = bench_uniform.loss(), bench_uniform.dist_map()
        grid = pf.ArmGrid.uniform(-1.0, 2.0, 0.5)
        constants = certify_constants(loss, dist_map, space=arm_hull(grid))
        cert = equilibrium_certificates(dist_map, loss)
        assert performative_ucb(loss, grid.arms[0], [], constants, cert=cert) == math.inf
        assert performative_lcb(loss, grid.arms[0], [], constants, cert=cert) == -math.inf

    def test_regret_crushes_uniform_baseline(self, bench_uniform):
        grid, run = self.run(bench_uniform, horizon=600)
        baseline = pf.uniform_random_baseline(grid, 600, run.pr_true, seed=0)
        assert run.regret_cum[-1] <= 0.5 * baseline[-1]

    def test_static_map_resolves_in_one_pull(self):
        static = pf.ScalarQuadratic(a=0.0, b=1.0, lam=1.0, s=1.0)
        grid = pf.ArmGrid.uniform(-1.0, 2.0, 0.25)
        run = pf.successive_elimination(static.loss(), static.dist_map(), grid, horizon=13, record_bounds=True)
        upper, lower = run.bounds_history[0]
        # zero sensitivity: the first deployment pins every arm's interval to its true risk
        assert np.allclose(upper, run.pr_true, atol=1e-12)
        assert np.allclose(lower, run.pr_true, atol=1e-12)
        assert run.grid.active.sum() == 1

    def test_needs_certificates(self):
        dist_map = pf.LocationScaleMap(base_mean=[0.0, 0.0], base_scale=[1.0, 1.0], mu=0.3 * np.eye(2))
        loss = pf.QuadraticLoss(lam=1.0, dim=2)
        grid = pf.ArmGrid(arms=np.zeros((3, 2)) + np.arange(3)[:, None])
        with pytest.raises(ValueError, match="recognized"):
            pf.successive_elimination(loss, dist_map, grid, horizon=10)

    def test_short_horizon_warns(self, bench_uniform):
        grid = pf.ArmGrid.uniform(-1.0, 2.0, 0.1)
        with pytest.warns(UserWarning, match="horizon"):
            pf.successive_elimination(bench_uniform.loss(), bench_uniform.dist_map(), grid, horizon=5)


class TestSampledPath:
    def run(self, bench, seed=11, horizon=400):
        grid = pf.ArmGrid.uniform(-1.0, 2.0, 0.1)
        domain = bench.domain_for(arm_hull(grid))
        run = pf.successive_elimination(
            bench.loss(),
            bench.dist_map(),
            grid,
            horizon=horizon,
            batch_size=8,
            conf_delta=0.05,
            domain=domain,
            seed=seed,
            record_bounds=True,
        )
        return grid, run

    def test_bounds_contain_truth(self, bench_uniform):
        grid, run = self.run(bench_uniform)
        assert run.meta["path"] == "sampled"
        violations = 0
        for upper, lower in run.bounds_history:
            violations += int(np.sum(lower > run.pr_true + 1e-12))
            violations += int(np.sum(upper < run.pr_true - 1e-12))
        assert violations == 0

    def test_needs_domain(self, bench_uniform):
        grid = pf.ArmGrid.uniform(-1.0, 2.0, 0.5)
        with pytest.raises(ValueError, match="domain"):
            pf.successive_elimination(bench_uniform.loss(), bench_uniform.dist_map(), grid, horizon=10, batch_size=4)

    def test_gaussian_noise_rejected_for_lack_of_finite_lipschitz(self, bench):
        grid = pf.ArmGrid.uniform(-1.0, 2.0, 0.5)
        domain = bench.domain_for(arm_hull(grid))  # gaussian outcomes: infinite y-range
        with pytest.raises(ValueError, match="L_z"):
            pf.successive_elimination(bench.loss(), bench.dist_map(), grid, horizon=10, batch_size=4, domain=domain)


class TestBruteForce:
    def test_exact_grid_minimum(self, bench_uniform):
        grid = pf.ArmGrid.uniform(-1.0, 2.0, 0.05)
        arm, pr, prs = pf.brute_force_po(bench_uniform.loss(), bench_uniform.dist_map(), grid)
        assert np.allclose(prs, bench_uniform.pr(grid.arms[:, 0]))
        assert arm[0] == grid.arms[int(np.argmin(prs)), 0]
        assert abs(arm[0] - bench_uniform.theta_po) <= 0.05

    def test_monte_carlo_mode(self, rng):
        # jittered features break the certificate, forcing the sampled estimator
        dist_map = pf.LocationScaleMap(
            base_mean=[1.0, 0.5, 0.0],
            base_scale=[0.2, 0.2, 0.5],
            mu=[[0.0, 0.0], [0.0, 0.0], [0.4, 0.1]],
        )
        loss = pf.QuadraticLoss(lam=1.0, dim=2)
        side = np.linspace(-1.0, 1.0, 5)
        arms = np.array([[u, v] for u in side for v in side])
        grid = pf.ArmGrid(arms=arms)
        with pytest.raises(ValueError, match="Monte-Carlo"):
            pf.brute_force_po(loss, dist_map, grid)

        def exact_pr(t):
            mean_resid = (0.4 - 1.0) * t[0] + (0.1 - 0.5) * t[1]
            return 0.5 * (0.25 + 0.04 * (t @ t) + mean_resid**2) + 0.5 * (t @ t)

        arm, _, prs = pf.brute_force_po(loss, dist_map, grid, n=40_000, rng=rng)
        exact = np.array([exact_pr(a) for a in arms])
        assert np.max(np.abs(prs - exact)) <= 0.05
        assert int(np.argmin(prs)) == int(np.argmin(exact))
        assert np.array_equal(arm, arms[int(np.argmin(exact))])

    def test_uniform_baseline_is_deterministic(self, bench_uniform):
        grid = pf.ArmGrid.uniform(-1.0, 2.0, 0.1)
        pr = bench_uniform.pr(grid.arms[:, 0])
        a = pf.uniform_random_baseline(grid, 200, pr, seed=4)
        b = pf.uniform_random_baseline(grid, 200, pr, seed=4)
        assert np.array_equal(a, b)
        assert np.all(np.diff(a) >= 0)


class TestRunArtifacts:
    def test_csv_schema_and_byte_identity(self, bench_uniform, tmp_path):
        grid = pf.ArmGrid.uniform(-1.0, 2.0, 0.25)
        run = pf.successive_elimination(bench_uniform.loss(), bench_uniform.dist_map(), grid, horizon=40)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        run.to_csv(p1)
        run.to_csv(p2)
        text = p1.read_text()
        assert text.splitlines()[0] == "t,arm_index,pr_deployed,regret_cum"
        assert text == p2.read_text()
        assert len(text.splitlines()) == 41

    def test_digest_depends_on_setup(self, bench_uniform):
        grid1 = pf.ArmGrid.uniform(-1.0, 2.0, 0.25)
        grid2 = pf.ArmGrid.uniform(-1.0, 2.0, 0.25)
        r1 = pf.successive_elimination(bench_uniform.loss(), bench_uniform.dist_map(), grid1, horizon=20)
        r2 = pf.successive_elimination(bench_uniform.loss(), bench_uniform.dist_map(), grid2, horizon=25)
        assert r1.digest != r2.digest
