"""Coordinated signaling by an alpha-fraction of a tabular population.

Features live on a finite domain {0, ..., n-1} with binary labels. A
collective of relative size alpha agrees on a signal permutation g and a
target label y*: participants submit (g(x), y*) instead of their raw pair.
The firm observes the resulting mixture

    P_alpha = (1 - alpha) * P0 + alpha * law(g(x), y*),   x ~ P0 marginal,

and plays the Bayes classifier on it, breaking ties against the collective.
The success probability S(alpha) is the chance a fresh participant's signal
is classified y*. Planting signals where the base population is thin pays
off: with xi the base-marginal mass of the signal image g(support),

    S(alpha) >= 1 - ((1 - alpha) / alpha) * xi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_FEATURES = 10_000


@dataclass(frozen=True)
class TabularPopulation:
    """Base joint distribution over (feature, label): probs[x, y] = P0(x, y)."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[1] != 2 or probs.shape[0] < 1:
            raise ValueError("probs must be (n_features, 2)")
        if probs.shape[0] > MAX_FEATURES:
            raise ValueError(f"tabular domain capped at {MAX_FEATURES} features")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ValueError("probs must be finite and nonnegative")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise ValueError("probs must sum to 1")
        object.__setattr__(self, "probs", probs)

    @property
    def n_features(self) -> int:
        return self.probs.shape[0]

    @property
    def x_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    @property
    def support(self) -> np.ndarray:
        """Feature indices carrying base mass."""
        return np.flatnonzero(self.x_marginal > 0)


@dataclass(frozen=True)
class SignalPlan:
    """What the collective agrees on: a signal permutation, a label, a size."""

    g: np.ndarray
    target_label: int
    alpha: float

    def __post_init__(self):
        g = np.asarray(self.g, dtype=int)
        if g.ndim != 1 or g.size < 1:
            raise ValueError("g must be a 1-D feature map")
        if np.any(g < 0) or np.any(g >= g.size):
            raise ValueError("g must map the feature domain into itself")
        if np.unique(g).size != g.size:
            raise ValueError("g must be injective (a permutation of the feature domain)")
        if self.target_label not in (0, 1):
            raise ValueError("target_label must be 0 or 1")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        object.__setattr__(self, "g", g)

    def check_domain(self, pop: TabularPopulation):
        if self.g.size != pop.n_features:
            raise ValueError(
                f"plan covers {self.g.size} features but the population has {pop.n_features}"
            )


def signal_density(pop: TabularPopulation, plan: SignalPlan) -> float:
    """xi: base feature mass already sitting on the planted signals g(support)."""
    plan.check_domain(pop)
    image = np.unique(plan.g[pop.support])
    return float(pop.x_marginal[image].sum())


def mixture(pop: TabularPopulation, plan: SignalPlan) -> np.ndarray:
    """Joint distribution the firm actually sees."""
    plan.check_domain(pop)
    mix = (1.0 - plan.alpha) * pop.probs
    np.add.at(mix[:, plan.target_label], plan.g, plan.alpha * pop.x_marginal)
    return mix


def bayes_firm(mix: np.ndarray, target_label: int) -> tuple[np.ndarray, np.ndarray]:
    """Bayes labels under the mixture, ties and empty cells against the target.

    Returns (labels, unsupported) where unsupported flags features with zero
    mixture mass; those are labeled with the non-target by convention.
    """
    mix = np.asarray(mix, dtype=float)
    other = 1 - target_label
    labels = np.where(mix[:, target_label] > mix[:, other], target_label, other)
    unsupported = mix.sum(axis=1) == 0.0
    labels[unsupported] = other
    return labels.astype(int), unsupported


def success_probability(pop: TabularPopulation, plan: SignalPlan) -> float:
    """S(alpha): chance a fresh participant's signal earns the target label."""
    mix = mixture(pop, plan)
    labels, _ = bayes_firm(mix, plan.target_label)
    hit = labels[plan.g] == plan.target_label
    # summing the marginal can overshoot 1 by a few ulp
    return float(min(1.0, pop.x_marginal[hit].sum()))


def success_lower_bound(pop: TabularPopulation, plan: SignalPlan) -> float:
    """1 - ((1 - alpha)/alpha) * xi; may be vacuous (negative) for tiny alpha."""
    xi = signal_density(pop, plan)
    return 1.0 - (1.0 - plan.alpha) / plan.alpha * xi


def revenue_uplift(pop: TabularPopulation, plan: SignalPlan, h: np.ndarray, beta_perf: float) -> float:
    """Expected per-participant revenue lever: S(alpha) * beta_perf.

    The identity prices participation only when signaling leaves the
    revenue-relevant feature summary h untouched, so h must be exactly
    invariant under g on the support of the base population.
    """
    plan.check_domain(pop)
    h = np.asarray(h, dtype=float)
    if h.shape != (pop.n_features,):
        raise ValueError("h must assign one value per feature")
    if not (math.isfinite(beta_perf) and beta_perf >= 0):
        raise ValueError("beta_perf must be finite and nonnegative")
    for x in pop.support:
        if h[plan.g[x]] != h[x]:
            raise ValueError(
                f"h is not g-invariant: feature {int(x)} has h={h[x]!r} "
                f"but its signal {int(plan.g[x])} has h={h[plan.g[x]]!r}"
            )
    return success_probability(pop, plan) * beta_perf


def success_curve(pop: TabularPopulation, plan: SignalPlan, alphas) -> np.ndarray:
    """S(alpha) along a grid, holding the signal map and target fixed."""
    out = np.empty(len(alphas))
    for i, a in enumerate(alphas):
        out[i] = success_probability(pop, SignalPlan(g=plan.g, target_label=plan.target_label, alpha=float(a)))
    return out


def random_population(n: int, rng, sparsity: float = 0.5) -> TabularPopulation:
    """Random tabular base with roughly a (1 - sparsity) fraction of live features."""
    probs = rng.random((n, 2))
    dead = rng.random(n) < sparsity
    if np.all(dead):
        dead[rng.integers(0, n)] = False
    probs[dead] = 0.0
    return TabularPopulation(probs=probs / probs.sum())


def random_plan(n: int, rng, alpha: float | None = None) -> SignalPlan:
    if alpha is None:
        alpha = float(rng.uniform(0.05, 1.0))
    return SignalPlan(g=rng.permutation(n), target_label=int(rng.integers(0, 2)), alpha=alpha)
