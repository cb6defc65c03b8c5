"""How much can a ranking platform move click outcomes by re-scoring content?

The model is deliberately small: one platform, two display slots, a panel of
viewers. Each viewer examines slot j with propensity p_j (position bias,
p_2 <= p_1) and clicks an examined item with a per-item affinity. The
platform ranks items by score and may perturb scores within a budget.

Performative power is lower-bounded experimentally: probe actions re-rank
the items, and the average absolute change in the focal item's click
propensity across viewers is a certified lower bound on what the platform
can do. The position effect

    beta = mean_u (p_1(u) - p_2(u)) * affinity(u, focal)

is what a focal-vs-runner-up swap realizes exactly, so including the swap
probe guarantees the estimate is at least beta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class Action:
    """A score perturbation, one entry per item, feasible when ||.||_inf <= budget."""

    adjustment: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        adj = np.asarray(self.adjustment, dtype=float).reshape(-1)
        if not np.all(np.isfinite(adj)):
            raise ValueError("adjustment must be finite")
        object.__setattr__(self, "adjustment", adj)


@dataclass(frozen=True)
class Platform:
    """Scores, position bias, affinities, and the re-scoring budget.

    propensities has one row per viewer, columns (slot 1, slot 2).
    affinities has shape (viewers, items). The budget must exceed every
    adjacent gap in the sorted scores so that any neighbouring swap is a
    feasible action.
    """

    scores: np.ndarray
    propensities: np.ndarray
    affinities: np.ndarray
    budget: float

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float).reshape(-1)
        prop = np.asarray(self.propensities, dtype=float)
        aff = np.asarray(self.affinities, dtype=float)
        if scores.size < 2:
            raise ValueError("need at least two items to rank")
        if prop.ndim != 2 or prop.shape[1] != 2:
            raise ValueError("propensities must be (viewers, 2)")
        if aff.shape != (prop.shape[0], scores.size):
            raise ValueError("affinities must be (viewers, items)")
        for name, arr in (("scores", scores), ("propensities", prop), ("affinities", aff)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        if np.any(prop < 0) or np.any(prop > 1):
            raise ValueError("slot propensities must lie in [0, 1]")
        if np.any(prop[:, 1] > prop[:, 0]):
            raise ValueError("position bias violated: slot 2 propensity exceeds slot 1")
        if np.any(aff < 0) or np.any(aff > 1):
            raise ValueError("affinities must lie in [0, 1]")
        ordered = np.sort(scores)[::-1]
        max_gap = float(np.max(ordered[:-1] - ordered[1:]))
        if not (math.isfinite(self.budget) and self.budget > max_gap):
            raise ValueError(
                f"budget must exceed the largest adjacent score gap ({max_gap!r}) "
                "so neighbouring swaps are feasible"
            )
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "propensities", prop)
        object.__setattr__(self, "affinities", aff)
        object.__setattr__(self, "budget", float(self.budget))

    @property
    def n_viewers(self) -> int:
        return self.propensities.shape[0]

    @property
    def n_items(self) -> int:
        return self.scores.size

    @property
    def focal(self) -> int:
        """Top-scored item, ties resolved toward the lowest index."""
        return int(np.argmax(self.scores))

    def feasible(self, action: Action) -> bool:
        if action.adjustment.size != self.n_items:
            return False
        return bool(np.max(np.abs(action.adjustment)) <= self.budget + 1e-15)

    def slots(self, action: Action | None = None) -> np.ndarray:
        """Indices of the items shown in slots 1 and 2 after the action."""
        scores = self.scores if action is None else self.scores + action.adjustment
        order = np.argsort(-scores, kind="stable")
        return order[:2]

    def click_propensity(self, action: Action | None = None, item: int | None = None) -> np.ndarray:
        """Per-viewer click propensity on ``item`` (default: the focal item)."""
        item = self.focal if item is None else int(item)
        shown = self.slots(action)
        z = np.zeros(self.n_viewers)
        for slot in range(2):
            if shown[slot] == item:
                z = self.propensities[:, slot] * self.affinities[:, item]
        return z


def swap_action(platform: Platform) -> Action:
    """Boost the runner-up just enough to overtake the focal item."""
    shown = platform.slots()
    focal, second = int(shown[0]), int(shown[1])
    gap = platform.scores[focal] - platform.scores[second]
    delta = (gap + platform.budget) / 2.0
    adj = np.zeros(platform.n_items)
    adj[second] = delta
    return Action(adjustment=adj, name="swap")


def demote_focal(platform: Platform) -> Action:
    """Spend the whole budget pushing the focal item's score down."""
    adj = np.zeros(platform.n_items)
    adj[platform.focal] = -platform.budget
    return Action(adjustment=adj, name="demote")


def causal_effect_of_position(platform: Platform, n: int = 0, rng=None) -> tuple[float, float]:
    """Position effect beta on the focal item: slot 1 versus slot 2 exposure.

    n = 0 returns the exact mean with zero standard error. n >= 1 simulates n
    Bernoulli click pairs per viewer and returns the empirical mean with its
    standard error.
    """
    aff = platform.affinities[:, platform.focal]
    p1 = platform.propensities[:, 0] * aff
    p2 = platform.propensities[:, 1] * aff
    if n == 0:
        return float(np.mean(p1 - p2)), 0.0
    if rng is None:
        raise ValueError("Monte-Carlo mode needs an rng")
    clicks1 = rng.random((n, platform.n_viewers)) < p1[None, :]
    clicks2 = rng.random((n, platform.n_viewers)) < p2[None, :]
    diffs = clicks1.astype(float) - clicks2.astype(float)
    est = float(np.mean(diffs))
    se = float(np.std(diffs, ddof=1) / math.sqrt(diffs.size))
    return est, se


def probe_effect(platform: Platform, action: Action, n: int = 0, rng=None) -> tuple[float, float]:
    """Mean absolute change in focal click propensity under one probe action."""
    if not platform.feasible(action):
        raise ValueError(f"action {action.name!r} exceeds the budget")
    z0 = platform.click_propensity()
    z1 = platform.click_propensity(action)
    if n == 0:
        return float(np.mean(np.abs(z0 - z1))), 0.0
    if rng is None:
        raise ValueError("Monte-Carlo mode needs an rng")
    f0 = np.mean(rng.random((n, platform.n_viewers)) < z0[None, :], axis=0)
    f1 = np.mean(rng.random((n, platform.n_viewers)) < z1[None, :], axis=0)
    est = float(np.mean(np.abs(f0 - f1)))
    var_each = (z0 * (1 - z0) + z1 * (1 - z1)) / n
    se = float(math.sqrt(np.sum(var_each)) / platform.n_viewers)
    return est, se


def performative_power_lower_bound(
    platform: Platform, probes: list[Action] | None = None, n: int = 0, rng=None
) -> tuple[float, dict[str, float]]:
    """Best probe effect: a certified lower bound on the platform's power.

    Defaults to the swap and demote probes, so the bound dominates the
    position effect beta.
    """
    if probes is None:
        probes = [swap_action(platform), demote_focal(platform)]
    if not probes:
        raise ValueError("need at least one probe action")
    per_probe = {}
    for action in probes:
        est, _ = probe_effect(platform, action, n=n, rng=rng)
        per_probe[action.name] = est
    return max(per_probe.values()), per_probe


def steering_gap(platform: Platform, probes: list[Action] | None = None) -> float:
    """How far the probe bound exceeds the pure position effect (diagnostic)."""
    p_hat, _ = performative_power_lower_bound(platform, probes)
    beta, _ = causal_effect_of_position(platform)
    return p_hat - beta


def viewer_subset(platform: Platform, indices) -> Platform:
    idx = np.asarray(indices, dtype=int)
    if idx.size == 0:
        raise ValueError("subset must be nonempty")
    return Platform(
        scores=platform.scores.copy(),
        propensities=platform.propensities[idx],
        affinities=platform.affinities[idx],
        budget=platform.budget,
    )


def decomposition_check(platform: Platform, indices, probes: list[Action] | None = None) -> dict:
    """Population power versus an alpha-fraction subgroup: P(U) >= alpha * P(U').

    Probe effects are means of nonnegative terms, so restricting to a
    subgroup can concentrate but never manufacture power. The returned dict
    reports both sides and whether the inequality holds to float dust.
    """
    sub = viewer_subset(platform, indices)
    alpha = sub.n_viewers / platform.n_viewers
    if probes is None:
        probes = [swap_action(platform), demote_focal(platform)]
    p_full = {a.name: probe_effect(platform, a)[0] for a in probes}
    p_sub = {a.name: probe_effect(sub, a)[0] for a in probes}
    holds = all(p_full[k] >= alpha * p_sub[k] - 1e-12 for k in p_full)
    return {
        "alpha": alpha,
        "power_full": max(p_full.values()),
        "power_subset": max(p_sub.values()),
        "per_probe_full": p_full,
        "per_probe_subset": p_sub,
        "holds": holds,
    }


def traffic_steering_calculator(factors) -> float:
    """Compound several attenuation factors in [0, 1] into one reach number.

    Factors are read at face value as the decimal numbers they print as
    (0.66 means 66/100), multiplied exactly over rationals, and rounded once
    at the end. The result therefore does not depend on the order of the
    factors and matches the pencil-and-paper product.
    """
    total = Fraction(1)
    for i, f in enumerate(factors):
        frac = Fraction(str(f)) if isinstance(f, float) else Fraction(f)
        if not (0 <= frac <= 1):
            raise ValueError(f"factor {i} is {f!r}, outside [0, 1]")
        total *= frac
    return float(total)


def power_report(platform: Platform, subset_indices=None, n: int = 0, seed: int = 0) -> dict:
    """Everything the CLI prints for a platform: beta, the probe bound, diagnostics."""
    from .core import seed_streams

    rng = seed_streams(seed, 1)[0] if n > 0 else None
    beta, beta_se = causal_effect_of_position(platform, n=n, rng=rng)
    p_hat, per_probe = performative_power_lower_bound(platform)
    report = {
        "n_viewers": platform.n_viewers,
        "n_items": platform.n_items,
        "focal": platform.focal,
        "budget": platform.budget,
        "position_effect": beta,
        "position_effect_se": beta_se,
        "power_lower_bound": p_hat,
        "per_probe": per_probe,
        "dominates_position_effect": bool(p_hat >= beta - 1e-12),
        "steering_gap": p_hat - beta,
    }
    if subset_indices is not None:
        report["decomposition"] = decomposition_check(platform, subset_indices)
    return report
