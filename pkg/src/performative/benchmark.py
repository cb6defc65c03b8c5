"""The scalar quadratic benchmark and fast multi-seed experiment engines.

The benchmark couples the quadratic loss (ridge lam) with the scalar
location map whose outcome mean is a * theta + b. Everything about it is
available in closed form, which makes it the workhorse for validating the
solver theorems.

The engines here replay the generic solvers across hundreds of seeds as
vectorized recursions:

* ``greedy_paths`` reproduces ``sgd_greedy`` draw for draw (same streams,
  same float expressions), so its trajectories are bit-identical to the
  generic loop; tests rely on that.
* ``lazy_error_curve`` collapses each lazy stage analytically: with inner
  stepsizes 1/(gamma (i+1)) on a quadratic objective, a stage of n steps
  lands on mean(z)/gamma exactly, so one Gaussian draw per stage with
  variance s^2/n replays the stage distribution without the inner loop.
  ``lazy_error_recursion`` is the matching deterministic mean/variance
  recursion used as an oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ParamSpace, RegularityConstants, seed_streams
from .losses import DataDomain, QuadraticLoss, certify_constants
from .maps import Certificates, LocationScaleMap, equilibrium_certificates, scalar_location_map


@dataclass(frozen=True)
class ScalarQuadratic:
    """Benchmark instance: loss (y - theta)^2/2 + lam theta^2/2, outcome mean a theta + b."""

    a: float
    b: float
    lam: float
    s: float
    noise: str = "gaussian"

    def dist_map(self) -> LocationScaleMap:
        return scalar_location_map(self.a, self.b, self.s, noise=self.noise)

    def loss(self) -> QuadraticLoss:
        return QuadraticLoss(lam=self.lam, dim=1)

    def certificates(self) -> Certificates:
        cert = equilibrium_certificates(self.dist_map(), self.loss())
        assert cert is not None
        return cert

    def constants(self, space: ParamSpace | None = None, domain: DataDomain | None = None) -> RegularityConstants:
        return certify_constants(self.loss(), self.dist_map(), data_domain=domain, space=space)

    @property
    def gamma(self) -> float:
        return 1.0 + self.lam

    @property
    def rho(self) -> float:
        """Per-round contraction factor of exact retraining: epsilon * beta_z / gamma."""
        return abs(self.a) / self.gamma

    @property
    def theta_ps(self) -> float:
        return self.b / (self.gamma - self.a)

    @property
    def theta_po(self) -> float:
        return (1.0 - self.a) * self.b / ((1.0 - self.a) ** 2 + self.lam)

    def pr(self, theta):
        theta = np.asarray(theta, dtype=float)
        var = self.s**2 if self.noise == "gaussian" else self.s**2 / 3.0
        return 0.5 * ((self.a - 1.0) * theta + self.b) ** 2 + 0.5 * self.lam * theta**2 + 0.5 * var

    def domain_for(self, space: ParamSpace) -> DataDomain:
        """Bounding box of (x, y) over the parameter space; tight for uniform noise.

        Gaussian outcomes are unbounded, so the y-side is infinite then, and
        anything needing a finite loss range will refuse the instance.
        """
        means = [self.a * t + self.b for t in (float(space.lower[0]), float(space.upper[0]))]
        if self.noise == "uniform":
            spread = self.s * math.sqrt(3.0)
            lo, hi = min(means) - spread, max(means) + spread
        else:
            lo, hi = -math.inf, math.inf
        return DataDomain(lower=[1.0, lo], upper=[1.0, hi])


def greedy_paths(
    bench: ScalarQuadratic,
    theta0: float,
    n_steps: int,
    seeds,
    space: ParamSpace,
) -> np.ndarray:
    """Replays sgd_greedy for many seeds at once; returns thetas (n_seeds, n_steps + 1).

    Per seed the sampling stream and every floating-point expression match the
    generic solver, so each row equals the generic trace bit for bit.
    """
    constants = certify_constants(bench.loss(), bench.dist_map(), space=space)
    if not constants.contractive:
        raise ValueError("greedy_paths assumes the contraction premise")
    gap = constants.gap
    c8 = 8.0 * constants.L**2 / gap
    lo, hi = float(space.lower[0]), float(space.upper[0])

    seeds = list(seeds)
    noise = np.empty((len(seeds), n_steps))
    for i, seed in enumerate(seeds):
        rng = seed_streams(seed, 2)[0]
        noise[i] = rng.standard_normal((n_steps, 2))[:, 1]

    thetas = np.empty((len(seeds), n_steps + 1))
    theta = np.full(len(seeds), float(theta0))
    theta = np.clip(theta, lo, hi)
    thetas[:, 0] = theta
    for k in range(1, n_steps + 1):
        eta = 1.0 / (gap * k + c8)
        y = (bench.b + bench.s * noise[:, k - 1]) + bench.a * theta
        resid = theta * 1.0 - y
        grad = resid * 1.0 + bench.lam * theta
        theta = np.clip(theta - eta * grad, lo, hi)
        thetas[:, k] = theta
    return thetas


def lazy_stage_sizes(alpha: float, scale: float, n_stages: int) -> np.ndarray:
    ks = np.arange(1, n_stages + 1, dtype=float)
    return np.ceil(scale * ks**alpha).astype(int)


def lazy_error_curve(
    bench: ScalarQuadratic,
    theta0: float,
    alpha: float,
    scale: float,
    n_stages: int,
    n_seeds: int,
    master_seed: int = 0,
    stop_below: float | None = None,
) -> np.ndarray:
    """Seed-averaged squared distance to the stable point after each deployment.

    Entry k is mean_i (theta_k^(i) - theta_ps)^2 over n_seeds independent
    replays; the stage-collapse identity replaces each inner loop by a single
    scaled Gaussian draw. Stops early once the average drops below
    ``stop_below`` (the remaining entries are trimmed).
    """
    if bench.noise != "gaussian":
        raise ValueError("the stage-collapse engine models gaussian outcome noise")
    rng = np.random.default_rng(np.random.SeedSequence(master_seed))
    gamma = bench.gamma
    sizes = lazy_stage_sizes(alpha, scale, n_stages)
    theta = np.full(n_seeds, float(theta0))
    mse = [float(np.mean((theta - bench.theta_ps) ** 2))]
    for k in range(1, n_stages + 1):
        n_k = sizes[k - 1]
        noise = rng.standard_normal(n_seeds)
        theta = (bench.a * theta + bench.b) / gamma + (bench.s / (gamma * math.sqrt(n_k))) * noise
        cur = float(np.mean((theta - bench.theta_ps) ** 2))
        mse.append(cur)
        if stop_below is not None and cur <= stop_below:
            break
    return np.asarray(mse)


def lazy_error_recursion(
    bench: ScalarQuadratic,
    theta0: float,
    alpha: float,
    scale: float,
    n_stages: int,
) -> np.ndarray:
    """Deterministic E (theta_k - theta_ps)^2 for the collapsed lazy recursion."""
    gamma = bench.gamma
    rho = bench.a / gamma
    sizes = lazy_stage_sizes(alpha, scale, n_stages)
    mean_err = float(theta0) - bench.theta_ps
    var = 0.0
    out = [mean_err**2]
    for k in range(1, n_stages + 1):
        mean_err = rho * mean_err
        var = rho**2 * var + bench.s**2 / (gamma**2 * sizes[k - 1])
        out.append(mean_err**2 + var)
    return np.asarray(out)


def deployments_to_accuracy(mse: np.ndarray, deltas) -> np.ndarray:
    """First deployment count k >= 1 at which the error curve drops to each delta."""
    deltas = np.asarray(deltas, dtype=float)
    out = np.empty(deltas.shape, dtype=int)
    for i, delta in enumerate(deltas):
        hits = np.nonzero(mse[1:] <= delta)[0]
        if hits.size == 0:
            raise ValueError(f"error curve never reaches accuracy {delta:g}; run more stages")
        out[i] = int(hits[0]) + 1
    return out


def fit_power_law_exponent(deployments, deltas) -> float:
    """Slope of log(1/delta) against log(deployments): the empirical scaling exponent."""
    x = np.log(np.asarray(deployments, dtype=float))
    y = np.log(1.0 / np.asarray(deltas, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two (delta, deployments) pairs to fit a slope")
    return float(np.polyfit(x, y, 1)[0])
