"""Shared primitives for decision-dependent learning experiments.

Everything downstream builds on the pieces here: parameter spaces with
projection, data batches, regularity constants, seeded random streams,
risk / performative-risk estimation, the 1-D Wasserstein distance, and
empirical sensitivity probes for distribution maps.

Conventions used throughout the package:

* a data point is z = (x, y) with features x in R^dx and a scalar outcome y;
  batches store xs with shape (n, dx) and ys with shape (n,).
* distances on the data space are Euclidean on the concatenated vector z.
* every stochastic routine takes an explicit ``numpy.random.Generator``;
  nothing reads global RNG state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

Array = np.ndarray


def as_vector(value, dim: int | None = None, name: str = "theta") -> Array:
    """Coerce to a 1-D float array, optionally checking length, always checking finiteness."""
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} must have dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _readonly(arr: Array) -> Array:
    out = np.asarray(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ParamSpace:
    """Closed convex parameter set: an axis-aligned box or a Euclidean ball.

    Boxes may be unbounded (infinite bounds); balls are always bounded.
    ``project`` is the Euclidean projection, ``diameter`` is +inf for
    unbounded boxes.
    """

    dim: int
    kind: str = "box"
    lower: Array | None = None
    upper: Array | None = None
    center: Array | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind == "box":
            lo = np.full(self.dim, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float)
            hi = np.full(self.dim, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
            if lo.shape != (self.dim,) or hi.shape != (self.dim,):
                raise ValueError("box bounds must match dim")
            if np.any(lo > hi):
                raise ValueError("box has empty interior: lower > upper")
            object.__setattr__(self, "lower", _readonly(lo))
            object.__setattr__(self, "upper", _readonly(hi))
        elif self.kind == "ball":
            c = as_vector(self.center, self.dim, "center")
            if self.radius is None or not np.isfinite(self.radius) or self.radius <= 0:
                raise ValueError("ball needs a finite positive radius")
            object.__setattr__(self, "center", _readonly(c))
        else:
            raise ValueError(f"unknown space kind {self.kind!r}")

    @staticmethod
    def box(lower, upper) -> "ParamSpace":
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        return ParamSpace(dim=lo.shape[0], kind="box", lower=lo, upper=hi)

    @staticmethod
    def ball(center, radius: float) -> "ParamSpace":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return ParamSpace(dim=c.shape[0], kind="ball", center=c, radius=float(radius))

    @staticmethod
    def unbounded(dim: int) -> "ParamSpace":
        return ParamSpace(dim=dim, kind="box")

    def project(self, theta) -> Array:
        theta = as_vector(theta, self.dim)
        if self.kind == "box":
            return np.clip(theta, self.lower, self.upper)
        gap = theta - self.center
        norm = float(np.linalg.norm(gap))
        if norm <= self.radius:
            return theta
        return self.center + gap * (self.radius / norm)

    def contains(self, theta, tol: float = 0.0) -> bool:
        theta = as_vector(theta, self.dim)
        if self.kind == "box":
            return bool(np.all(theta >= self.lower - tol) and np.all(theta <= self.upper + tol))
        return float(np.linalg.norm(theta - self.center)) <= self.radius + tol

    def diameter(self) -> float:
        if self.kind == "ball":
            return 2.0 * float(self.radius)
        span = self.upper - self.lower
        if not np.all(np.isfinite(span)):
            return math.inf
        return float(np.linalg.norm(span))

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.diameter())

    def spec(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}

    @staticmethod
    def from_spec(spec: dict) -> "ParamSpace":
        if spec["kind"] == "box":
            return ParamSpace.box(spec["lower"], spec["upper"])
        if spec["kind"] == "ball":
            return ParamSpace.ball(spec["center"], spec["radius"])
        raise ValueError(f"unknown space kind {spec.get('kind')!r}")


@dataclass(frozen=True)
class DataPoint:
    """One observation z = (x, y)."""

    x: Array
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", _readonly(as_vector(self.x, name="x")))
        if not math.isfinite(self.y):
            raise ValueError("y must be finite")

    @property
    def z(self) -> Array:
        return np.concatenate([self.x, [self.y]])


@dataclass(frozen=True)
class Batch:
    """A batch of n observations; xs has shape (n, dx), ys has shape (n,)."""

    xs: Array
    ys: Array

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 2:
            raise ValueError(f"xs must be 2-D, got shape {xs.shape}")
        if ys.shape != (xs.shape[0],):
            raise ValueError("ys must have one entry per row of xs")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("batch contains non-finite values")
        object.__setattr__(self, "xs", _readonly(xs))
        object.__setattr__(self, "ys", _readonly(ys))

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def dx(self) -> int:
        return self.xs.shape[1]

    @property
    def z(self) -> Array:
        """Concatenated view (n, dx + 1); data-space distances act on these rows."""
        return np.concatenate([self.xs, self.ys[:, None]], axis=1)

    def point(self, i: int) -> DataPoint:
        return DataPoint(x=self.xs[i], y=float(self.ys[i]))

    @staticmethod
    def from_points(points: Sequence[DataPoint]) -> "Batch":
        if not points:
            raise ValueError("empty batch")
        return Batch(xs=np.stack([p.x for p in points]), ys=np.array([p.y for p in points]))


@dataclass(frozen=True)
class RegularityConstants:
    """Certified problem constants.

    gamma       strong convexity of the risk in theta
    beta_z      smoothness of the gradient in the data argument
    beta_theta  smoothness of the gradient in theta
    L_z         Lipschitz constant of the loss value in z (may be inf without a bounded domain)
    sigma, L    second-moment envelope of the stochastic gradient:
                E ||grad l(theta'; z)||^2 <= sigma^2 + L^2 ||theta' - argmin||^2 under any deployed law
    epsilon     sensitivity of the distribution map (Wasserstein-Lipschitz in theta)
    """

    gamma: float
    beta_z: float
    beta_theta: float
    L_z: float
    sigma: float
    L: float
    epsilon: float

    def __post_init__(self):
        for name in ("gamma", "beta_z", "beta_theta", "L_z", "sigma", "L", "epsilon"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or math.isnan(v) or v < 0:
                raise ValueError(f"constant {name} must be a nonnegative number, got {v!r}")

    @property
    def beta_max(self) -> float:
        return max(self.beta_z, self.beta_theta)

    @property
    def contractive(self) -> bool:
        """Whether repeated retraining contracts: epsilon * beta_z < gamma."""
        return self.epsilon * self.beta_z < self.gamma

    @property
    def gap(self) -> float:
        return self.gamma - self.epsilon * self.beta_z

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "beta_z": self.beta_z,
            "beta_theta": self.beta_theta,
            "L_z": self.L_z,
            "sigma": self.sigma,
            "L": self.L,
            "epsilon": self.epsilon,
        }


def seed_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Spawn n independent, reproducible generators from one integer seed.

    Solvers use stream 0 for decision-dependent sampling and stream 1 for
    evaluation-only estimates, so diagnostics never perturb the optimization
    path.
    """
    root = np.random.SeedSequence(int(seed))
    return [np.random.default_rng(child) for child in root.spawn(int(n))]


class PREstimate(NamedTuple):
    value: float
    se: float
    n: int
    path: str  # "exact" or "monte_carlo"


class SteeringDecomposition(NamedTuple):
    learning: float
    steering: float
    path: str

    @property
    def total(self) -> float:
        return self.learning + self.steering


def risk(loss, theta, batch: Batch) -> float:
    """Average loss of theta on a fixed batch."""
    if batch.n < 1:
        raise ValueError("risk needs at least one sample")
    return float(np.mean(loss.value(theta, batch.xs, batch.ys)))


def _exact_certificates(dist_map, loss):
    # Local import: maps depends on losses, so the certificate lookup cannot
    # live at module import time here without a cycle.
    from .maps import equilibrium_certificates

    return equilibrium_certificates(dist_map, loss)


def performative_risk(
    loss,
    dist_map,
    theta,
    n: int = 0,
    rng: np.random.Generator | None = None,
    force_mc: bool = False,
) -> PREstimate:
    """Risk of theta on the distribution it induces.

    Uses the closed form whenever the (map, loss) pair carries certificates;
    otherwise draws n samples from ``dist_map.sample(theta, n, rng)``. The
    standard error is 0 on the exact path and the usual sqrt(n) rate on the
    sampled path.
    """
    theta = as_vector(theta, getattr(dist_map, "param_dim", None))
    cert = None if force_mc else _exact_certificates(dist_map, loss)
    if cert is not None:
        return PREstimate(value=float(cert.pr_exact(theta)), se=0.0, n=0, path="exact")
    if n < 1:
        raise ValueError("no closed form available: pass a positive sample budget n")
    if rng is None:
        raise ValueError("Monte-Carlo path needs an explicit rng")
    batch = dist_map.sample(theta, n, rng)
    vals = np.asarray(loss.value(theta, batch.xs, batch.ys), dtype=float)
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return PREstimate(value=float(vals.mean()), se=se, n=n, path="monte_carlo")


def steering_decomposition(
    loss,
    dist_map,
    theta,
    phi,
    n: int = 0,
    rng: np.random.Generator | None = None,
    force_mc: bool = False,
) -> SteeringDecomposition:
    """Split PR(theta) around an anchor phi.

    learning = Risk(theta, D(phi)) and steering = PR(theta) - learning, so the
    two parts add back to the performative risk. The steering part isolates
    what moving the deployed distribution from D(phi) to D(theta) costs or
    saves; it vanishes when the map ignores theta.
    """
    theta = as_vector(theta, getattr(dist_map, "param_dim", None))
    phi = as_vector(phi, getattr(dist_map, "param_dim", None))
    cert = None if force_mc else _exact_certificates(dist_map, loss)
    if cert is not None:
        learning = float(cert.risk_exact(theta, phi))
        total = float(cert.pr_exact(theta))
        return SteeringDecomposition(learning=learning, steering=total - learning, path="exact")
    if n < 1:
        raise ValueError("no closed form available: pass a positive sample budget n")
    if rng is None:
        raise ValueError("Monte-Carlo path needs an explicit rng")
    learning = risk(loss, theta, dist_map.sample(phi, n, rng))
    total = risk(loss, theta, dist_map.sample(theta, n, rng))
    return SteeringDecomposition(learning=learning, steering=total - learning, path="monte_carlo")


def wasserstein1_1d(a, b) -> float:
    """W1 between two equal-size empirical distributions on the line.

    For equal sample counts the optimal coupling sorts both samples, so the
    distance is the mean absolute gap between order statistics.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    if a.size != b.size:
        raise ValueError(f"sample sizes differ: {a.size} vs {b.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples contain non-finite values")
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


def estimate_sensitivity(
    dist_map,
    probes: Sequence[tuple],
    n: int = 10_000,
    rng: np.random.Generator | None = None,
    projection: Callable[[Batch], Array] | None = None,
    force_empirical: bool = False,
) -> float:
    """Largest observed W1-shift per unit parameter move.

    Maps that certify their own sensitivity short-circuit to the closed form
    (pass ``force_empirical=True`` to probe anyway). Otherwise each probe pair
    (theta, theta') contributes W1(proj D(theta), proj D(theta')) / ||theta -
    theta'|| on a 1-D projection of the sampled data (default: the outcome
    coordinate), and the max over probes is returned. Projections contract
    distances, so the estimate never exceeds the joint-space sensitivity.
    """
    if not force_empirical:
        closed = getattr(dist_map, "sensitivity", None)
        if callable(closed):
            eps = closed()
            if eps is not None:
                return float(eps)
    if projection is None:
        projection = lambda batch: batch.ys
    if rng is None:
        raise ValueError("empirical sensitivity estimation needs an rng")
    if n < 2:
        raise ValueError("need at least 2 samples per probe")
    best = None
    for pair in probes:
        theta, theta_p = pair
        theta = as_vector(theta, getattr(dist_map, "param_dim", None))
        theta_p = as_vector(theta_p, getattr(dist_map, "param_dim", None))
        gap = float(np.linalg.norm(theta - theta_p))
        if gap == 0.0:
            continue
        w1 = wasserstein1_1d(projection(dist_map.sample(theta, n, rng)), projection(dist_map.sample(theta_p, n, rng)))
        ratio = w1 / gap
        best = ratio if best is None else max(best, ratio)
    if best is None:
        raise ValueError("all probe pairs are coincident")
    return float(best)
