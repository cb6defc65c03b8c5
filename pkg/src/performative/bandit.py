"""Grid bandit over deployments: optimism that respects distribution shift.

Deploying an arm reveals (a batch from / the closed form of) the distribution
it induces. Any past deployment at theta_t then bounds the performative risk
of every other arm theta through the sensitivity of the map and the data-side
Lipschitz constant of the loss:

    |PR(theta) - Risk(theta, D(theta_t))| <= L_z * epsilon * ||theta - theta_t||

so each deployment contributes an interval and arms keep the tightest one.
``successive_elimination`` plays active arms round robin and retires an arm
as soon as its lower bound exceeds the smallest upper bound.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Batch, ParamSpace, RegularityConstants, as_vector, seed_streams
from .losses import DataDomain, certify_constants
from .maps import equilibrium_certificates
from .trace import config_digest


@dataclass(frozen=True)
class ConfidenceParams:
    """Hoeffding radius bookkeeping: conf(n) = loss_range * sqrt(log(2 T / delta) / (2 n))."""

    horizon: int
    delta: float
    loss_range: float

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if not (self.loss_range > 0 and math.isfinite(self.loss_range)):
            raise ValueError("loss_range must be finite and positive (bound the data domain)")

    def radius(self, n: int) -> float:
        if n < 1:
            raise ValueError("batch size must be >= 1")
        return self.loss_range * math.sqrt(math.log(2.0 * self.horizon / self.delta) / (2.0 * n))


@dataclass(frozen=True)
class Deployment:
    """One pull: the deployed parameter and what it revealed (None = closed form)."""

    theta: np.ndarray
    batch: Batch | None
    n: int


@dataclass
class ArmGrid:
    """Finite arm set with per-arm interval state."""

    arms: np.ndarray  # (A, d)
    spacing: float | None = None
    active: np.ndarray = field(default=None)
    upper: np.ndarray = field(default=None)
    lower: np.ndarray = field(default=None)
    history: list = field(default_factory=list)

    def __post_init__(self):
        arms = np.atleast_2d(np.asarray(self.arms, dtype=float))
        if arms.ndim != 2 or arms.shape[0] < 1:
            raise ValueError("arms must be a nonempty (A, d) array")
        if not np.all(np.isfinite(arms)):
            raise ValueError("arms must be finite")
        self.arms = arms
        if self.active is None:
            self.active = np.ones(arms.shape[0], dtype=bool)
        if self.upper is None:
            self.upper = np.full(arms.shape[0], math.inf)
        if self.lower is None:
            self.lower = np.full(arms.shape[0], -math.inf)

    @property
    def n_arms(self) -> int:
        return self.arms.shape[0]

    @staticmethod
    def uniform(lower: float, upper: float, spacing: float) -> "ArmGrid":
        """1-D grid lower, lower + spacing, ..., upper (inclusive up to rounding)."""
        if spacing <= 0 or upper <= lower:
            raise ValueError("need upper > lower and spacing > 0")
        count = int(round((upper - lower) / spacing)) + 1
        pts = lower + spacing * np.arange(count)
        return ArmGrid(arms=pts[:, None], spacing=spacing)


def _exact_risk_profile(cert, thetas: np.ndarray, phi: np.ndarray) -> np.ndarray:
    fam = cert.family
    t = thetas[:, 0]
    mean = fam["a"] * float(phi[0]) + fam["b"]
    return 0.5 * (mean - t) ** 2 + 0.5 * fam["var"] + 0.5 * fam["lam"] * t**2


def _interval_terms(
    loss,
    arms: np.ndarray,
    dep: Deployment,
    constants: RegularityConstants,
    conf: ConfidenceParams | None,
    cert,
) -> tuple[np.ndarray, np.ndarray]:
    """(lower, upper) contribution of one deployment for every arm in ``arms``."""
    if dep.batch is None:
        if cert is None:
            raise ValueError("closed-form deployments need equilibrium certificates")
        risks = _exact_risk_profile(cert, arms, dep.theta)
        radius = 0.0
    else:
        risks = loss.risk_profile(arms, dep.batch.xs, dep.batch.ys)
        if conf is None:
            raise ValueError("sampled deployments need ConfidenceParams")
        radius = conf.radius(dep.n)
    dist = np.linalg.norm(arms - dep.theta[None, :], axis=1)
    factor = constants.L_z * constants.epsilon
    if math.isnan(factor):  # 0 * inf: a zero-sensitivity map wins, an unbounded loss loses
        factor = 0.0 if constants.epsilon == 0.0 else math.inf
    shift = np.zeros(arms.shape[0])
    positive = dist > 0
    if np.any(positive):
        shift[positive] = factor * dist[positive]
    return risks - shift - radius, risks + shift + radius


def performative_ucb(
    loss,
    arm,
    history: list[Deployment],
    constants: RegularityConstants,
    conf: ConfidenceParams | None = None,
    cert=None,
) -> float:
    """Tightest optimistic PR bound for one arm given all past deployments.

    Returns +inf with an empty history: nothing constrains the arm yet.
    """
    arm = np.atleast_2d(np.asarray(arm, dtype=float))
    best = math.inf
    for dep in history:
        _, up = _interval_terms(loss, arm, dep, constants, conf, cert)
        best = min(best, float(up[0]))
    return best


def performative_lcb(
    loss,
    arm,
    history: list[Deployment],
    constants: RegularityConstants,
    conf: ConfidenceParams | None = None,
    cert=None,
) -> float:
    arm = np.atleast_2d(np.asarray(arm, dtype=float))
    best = -math.inf
    for dep in history:
        low, _ = _interval_terms(loss, arm, dep, constants, conf, cert)
        best = max(best, float(low[0]))
    return best


@dataclass
class BanditRun:
    t: np.ndarray
    arm_index: np.ndarray
    pr_deployed: np.ndarray
    regret_cum: np.ndarray
    grid: ArmGrid
    pr_true: np.ndarray | None
    eliminated_at: np.ndarray
    digest: str
    meta: dict = field(default_factory=dict)
    bounds_history: list = field(default_factory=list)

    def to_csv(self, path):
        from pathlib import Path

        path = Path(path)
        lines = ["t,arm_index,pr_deployed,regret_cum"]
        for i in range(self.t.shape[0]):
            pr = "" if math.isnan(self.pr_deployed[i]) else repr(float(self.pr_deployed[i]))
            reg = "" if math.isnan(self.regret_cum[i]) else repr(float(self.regret_cum[i]))
            lines.append(f"{int(self.t[i])},{int(self.arm_index[i])},{pr},{reg}")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def brute_force_po(loss, dist_map, grid: ArmGrid, n: int = 0, rng=None) -> tuple[np.ndarray, float, np.ndarray]:
    """Grid minimizer of the performative risk: exact when certified, else Monte Carlo."""
    cert = equilibrium_certificates(dist_map, loss)
    if cert is not None:
        prs = np.array([cert.pr_exact(arm) for arm in grid.arms])
    else:
        if n < 1 or rng is None:
            raise ValueError("no closed form: pass a Monte-Carlo budget n and rng")
        prs = np.empty(grid.n_arms)
        for i, arm in enumerate(grid.arms):
            batch = dist_map.sample(arm, n, rng)
            prs[i] = float(np.mean(loss.value(arm, batch.xs, batch.ys)))
    best = int(np.argmin(prs))
    return grid.arms[best].copy(), float(prs[best]), prs


def successive_elimination(
    loss,
    dist_map,
    grid: ArmGrid,
    horizon: int,
    batch_size: int | None = None,
    conf_delta: float = 0.05,
    domain: DataDomain | None = None,
    seed: int = 0,
    record_bounds: bool = False,
) -> BanditRun:
    """Round-robin optimism with elimination over a finite arm grid.

    ``batch_size=None`` runs the closed-form path (requires certificates):
    each deployment reveals Risk(., D(theta_t)) exactly and the confidence
    radius is zero. With a batch size, each deployment draws that many
    samples and Hoeffding radii apply; this path needs a bounded data domain
    for the loss range and finite L_z.

    Regret is accounted against the best grid arm using true performative
    risks (available whenever certificates exist).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if horizon < grid.n_arms:
        warnings.warn("horizon is smaller than the number of arms; not every arm can be probed")

    cert = equilibrium_certificates(dist_map, loss)
    arm_space = ParamSpace.box(grid.arms.min(axis=0), grid.arms.max(axis=0))
    exact = batch_size is None
    if exact:
        if cert is None:
            raise ValueError("closed-form bandit path needs a recognized (map, loss) pair")
        constants = certify_constants(loss, dist_map, data_domain=domain, space=arm_space)
        conf = None
    else:
        if domain is None:
            raise ValueError("sampled bandit path needs a declared data domain")
        constants = certify_constants(
            loss, dist_map, data_domain=domain, space=arm_space, require_finite=("L_z", "epsilon")
        )
        conf = ConfidenceParams(horizon=horizon, delta=conf_delta, loss_range=loss.value_range(domain, arm_space))

    pr_true = None
    if cert is not None:
        pr_true = np.array([cert.pr_exact(arm) for arm in grid.arms])
        pr_star = float(pr_true.min())

    rng = seed_streams(seed, 1)[0]
    ts = np.arange(1, horizon + 1)
    arm_idx = np.empty(horizon, dtype=int)
    pr_deployed = np.full(horizon, math.nan)
    regret_cum = np.full(horizon, math.nan)
    eliminated_at = np.full(grid.n_arms, -1, dtype=int)
    bounds_history = []

    cursor = 0
    running_regret = 0.0
    for t in range(1, horizon + 1):
        while not grid.active[cursor % grid.n_arms]:
            cursor += 1
        i = cursor % grid.n_arms
        cursor += 1
        theta = grid.arms[i].copy()
        if exact:
            dep = Deployment(theta=theta, batch=None, n=0)
        else:
            batch = dist_map.sample(theta, batch_size, rng)
            dep = Deployment(theta=theta, batch=batch, n=batch_size)
        grid.history.append(dep)

        act = grid.active
        low, up = _interval_terms(loss, grid.arms[act], dep, constants, conf, cert)
        grid.upper[act] = np.minimum(grid.upper[act], up)
        grid.lower[act] = np.maximum(grid.lower[act], low)

        active_idx = np.flatnonzero(grid.active)
        champion = active_idx[int(np.argmin(grid.upper[active_idx]))]
        min_upper = float(grid.upper[champion])
        newly_out = grid.active & (grid.lower > min_upper)
        newly_out[champion] = False
        if np.any(newly_out):
            grid.active = grid.active & ~newly_out
            eliminated_at[newly_out] = t

        arm_idx[t - 1] = i
        if pr_true is not None:
            pr_deployed[t - 1] = pr_true[i]
            running_regret += pr_true[i] - pr_star
            regret_cum[t - 1] = running_regret
        if record_bounds:
            bounds_history.append((grid.upper.copy(), grid.lower.copy()))

    digest = config_digest(
        {
            "bandit": "successive_elimination",
            "map": dist_map.spec(),
            "loss": loss.spec(),
            "horizon": horizon,
            "batch_size": batch_size,
            "conf_delta": conf_delta,
            "seed": seed,
            "arms": grid.arms.tolist(),
        }
    )
    return BanditRun(
        t=ts,
        arm_index=arm_idx,
        pr_deployed=pr_deployed,
        regret_cum=regret_cum,
        grid=grid,
        pr_true=pr_true,
        eliminated_at=eliminated_at,
        digest=digest,
        meta={
            "path": "closed_form" if exact else "sampled",
            "conf": None if conf is None else {"delta": conf.delta, "loss_range": conf.loss_range},
            "constants": constants.as_dict(),
        },
        bounds_history=bounds_history,
    )


def uniform_random_baseline(grid: ArmGrid, horizon: int, pr_true: np.ndarray, seed: int = 0) -> np.ndarray:
    """Cumulative regret of deploying uniformly random arms; the comparison bar."""
    rng = seed_streams(seed, 1)[0]
    picks = rng.integers(0, grid.n_arms, size=horizon)
    gaps = pr_true[picks] - pr_true.min()
    return np.cumsum(gaps)
