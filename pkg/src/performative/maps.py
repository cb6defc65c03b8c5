"""Distribution maps: how deployed parameters reshape the data law.

A distribution map D(theta) is anything with ``param_dim``, ``data_dim`` and
``sample(theta, n, rng) -> Batch``. Maps that know their own
Wasserstein-Lipschitz constant expose ``sensitivity()``; maps with a
degenerate (theta-independent) feature marginal expose helpers the constant
certifier uses.

``equilibrium_certificates`` recognizes the canonical scalar benchmark, a
quadratic loss against a location-scale map with a constant unit feature and
outcome mean a * theta + b, and returns its closed forms: the retraining map
G, the stable point, the performative optimum, and exact risk / gradient /
performative-risk evaluators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Array, Batch, as_vector
from .losses import QuadraticLoss


def _as_matrix(m, shape, name) -> Array:
    arr = np.asarray(m, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


_NOISE_KINDS = ("gaussian", "uniform")


def _draw_base(kind: str, n: int, dz: int, rng: np.random.Generator) -> Array:
    """Standardized base noise; 'uniform' is uniform on [-1, 1] per coordinate."""
    if kind == "gaussian":
        return rng.standard_normal((n, dz))
    return rng.uniform(-1.0, 1.0, (n, dz))


def _base_variance_unit(kind: str) -> float:
    # variance of one standardized base coordinate
    return 1.0 if kind == "gaussian" else 1.0 / 3.0


class LocationScaleMap:
    """z = base_mean + mu @ theta + base_scale * noise, coordinatewise noise.

    The parameter moves only the location, so the map is an exact shift
    family and its sensitivity is the operator norm of mu. ``noise`` is
    'gaussian' (scale = standard deviation) or 'uniform' (scale = half-width).
    """

    def __init__(self, base_mean, base_scale, mu, noise: str = "gaussian"):
        base_mean = np.atleast_1d(np.asarray(base_mean, dtype=float))
        dz = base_mean.shape[0]
        base_scale = _as_matrix(np.atleast_1d(np.asarray(base_scale, dtype=float)), (dz,), "base_scale")
        mu = np.asarray(mu, dtype=float)
        if mu.ndim != 2 or mu.shape[0] != dz:
            raise ValueError(f"mu must have shape ({dz}, d), got {mu.shape}")
        if np.any(base_scale < 0):
            raise ValueError("base_scale must be nonnegative")
        if noise not in _NOISE_KINDS:
            raise ValueError(f"noise must be one of {_NOISE_KINDS}")
        if dz < 2:
            raise ValueError("need at least one feature coordinate plus the outcome")
        self.base_mean = base_mean
        self.base_scale = base_scale
        self.mu = mu
        self.noise = noise
        self.data_dim = dz
        self.param_dim = mu.shape[1]

    def sample(self, theta, n: int, rng: np.random.Generator) -> Batch:
        if n < 1:
            raise ValueError("n must be >= 1")
        theta = as_vector(theta, self.param_dim)
        draws = _draw_base(self.noise, n, self.data_dim, rng)
        z = self.base_mean[None, :] + self.base_scale[None, :] * draws + (self.mu @ theta)[None, :]
        return Batch(xs=z[:, :-1], ys=z[:, -1])

    def mean(self, theta) -> Array:
        theta = as_vector(theta, self.param_dim)
        return self.base_mean + self.mu @ theta

    def coordinate_variances(self) -> Array:
        return self.base_scale**2 * _base_variance_unit(self.noise)

    def sensitivity(self) -> float:
        """Exact W1-Lipschitz constant: pure location shifts couple perfectly."""
        return float(np.linalg.norm(self.mu, 2))

    def constant_x(self) -> Array | None:
        x_scale = self.base_scale[:-1]
        x_mu = self.mu[:-1, :]
        if np.all(x_scale == 0.0) and np.all(x_mu == 0.0):
            return self.base_mean[:-1].copy()
        return None

    def feature_second_moment(self) -> Array | None:
        if np.any(self.mu[:-1, :] != 0.0):
            return None
        m = self.base_mean[:-1]
        var = self.coordinate_variances()[:-1]
        return np.diag(var) + np.outer(m, m)

    def spec(self) -> dict:
        return {
            "kind": "location_scale",
            "base_mean": self.base_mean.tolist(),
            "base_scale": self.base_scale.tolist(),
            "mu": self.mu.tolist(),
            "noise": self.noise,
        }


def scalar_location_map(a: float, b: float, s: float, noise: str = "gaussian") -> LocationScaleMap:
    """Scalar benchmark map: constant feature x = 1, outcome ~ a * theta + b + noise."""
    return LocationScaleMap(
        base_mean=[1.0, float(b)],
        base_scale=[0.0, float(s)],
        mu=[[0.0], [float(a)]],
        noise=noise,
    )


class GaussianMixtureMeanShiftMap:
    """Finite Gaussian mixture whose component means shift linearly with theta.

    Component i has mean base_means[i] + shifts[i] @ theta and diagonal
    scales[i]; weights are theta-independent. ``sensitivity`` returns the
    weighted operator-norm certificate sum_i w_i ||shifts[i]||, an upper
    bound that is tight when all shift matrices coincide.
    """

    def __init__(self, weights, base_means, scales, shifts):
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")
        means = np.asarray(base_means, dtype=float)
        if means.ndim != 2 or means.shape[0] != w.shape[0]:
            raise ValueError("base_means must be (n_components, dz)")
        m, dz = means.shape
        scales = _as_matrix(np.asarray(scales, dtype=float), (m, dz), "scales")
        if np.any(scales < 0):
            raise ValueError("scales must be nonnegative")
        shifts = np.asarray(shifts, dtype=float)
        if shifts.ndim != 3 or shifts.shape[:2] != (m, dz):
            raise ValueError("shifts must be (n_components, dz, d)")
        if dz < 2:
            raise ValueError("need at least one feature coordinate plus the outcome")
        self.weights = w
        self.base_means = means
        self.scales = scales
        self.shifts = shifts
        self.data_dim = dz
        self.param_dim = shifts.shape[2]

    def sample(self, theta, n: int, rng: np.random.Generator) -> Batch:
        if n < 1:
            raise ValueError("n must be >= 1")
        theta = as_vector(theta, self.param_dim)
        comp = rng.choice(self.weights.shape[0], size=n, p=self.weights)
        noise = rng.standard_normal((n, self.data_dim))
        offsets = self.shifts @ theta  # (m, dz)
        z = self.base_means[comp] + offsets[comp] + self.scales[comp] * noise
        return Batch(xs=z[:, :-1], ys=z[:, -1])

    def sensitivity(self) -> float:
        norms = np.array([np.linalg.norm(a, 2) for a in self.shifts])
        return float(self.weights @ norms)

    def spec(self) -> dict:
        return {
            "kind": "gaussian_mixture",
            "weights": self.weights.tolist(),
            "base_means": self.base_means.tolist(),
            "scales": self.scales.tolist(),
            "shifts": self.shifts.tolist(),
        }


class StrategicResponseMap:
    """Units move their features to trade score against quadratic effort.

    A unit with original features x0 solves
        max_x theta . x - ||x - x0||^2 / (2 eta)
    whose unique optimum is x0 + eta * theta. Labels are a fixed function of
    the original features, so gaming moves x but never y. The joint law is a
    shift family in theta with exact sensitivity eta.
    """

    def __init__(self, base_mean, base_scale, eta: float, label, noise: str = "gaussian"):
        base_mean = np.atleast_1d(np.asarray(base_mean, dtype=float))
        dx = base_mean.shape[0]
        base_scale = _as_matrix(np.atleast_1d(np.asarray(base_scale, dtype=float)), (dx,), "base_scale")
        if np.any(base_scale < 0):
            raise ValueError("base_scale must be nonnegative")
        if eta <= 0 or not math.isfinite(eta):
            raise ValueError("eta must be finite and > 0")
        if noise not in _NOISE_KINDS:
            raise ValueError(f"noise must be one of {_NOISE_KINDS}")
        self.base_mean = base_mean
        self.base_scale = base_scale
        self.eta = float(eta)
        self.noise = noise
        self.label_spec = None
        if isinstance(label, dict):
            if label.get("kind") != "linear_threshold":
                raise ValueError("label spec must have kind 'linear_threshold'")
            w = _as_matrix(np.atleast_1d(np.asarray(label["w"], dtype=float)), (dx,), "label w")
            c = float(label.get("c", 0.0))
            self.label_spec = {"kind": "linear_threshold", "w": w.tolist(), "c": c}
            self._label_fn = lambda x0: np.where(x0 @ w - c >= 0.0, 1.0, -1.0)
        elif callable(label):
            self._label_fn = label
        else:
            raise ValueError("label must be a spec dict or a callable on original features")
        self.data_dim = dx + 1
        self.param_dim = dx

    def base_features(self, n: int, rng: np.random.Generator) -> Array:
        draws = _draw_base(self.noise, n, self.base_mean.shape[0], rng)
        return self.base_mean[None, :] + self.base_scale[None, :] * draws

    def best_response(self, theta, x0: Array) -> Array:
        theta = as_vector(theta, self.param_dim)
        return x0 + self.eta * theta

    def utility(self, theta, x0: Array, x: Array) -> Array:
        """Score-minus-effort objective each unit maximizes; rows of x0/x pair up."""
        theta = as_vector(theta, self.param_dim)
        x0 = np.atleast_2d(x0)
        x = np.atleast_2d(x)
        return x @ theta - np.sum((x - x0) ** 2, axis=1) / (2.0 * self.eta)

    def sample(self, theta, n: int, rng: np.random.Generator) -> Batch:
        if n < 1:
            raise ValueError("n must be >= 1")
        theta = as_vector(theta, self.param_dim)
        x0 = self.base_features(n, rng)
        xs = x0 + self.eta * theta[None, :]
        ys = np.asarray(self._label_fn(x0), dtype=float)
        if ys.shape != (n,):
            raise ValueError("label function must return one label per row")
        return Batch(xs=xs, ys=ys)

    def sensitivity(self) -> float:
        return self.eta

    def spec(self) -> dict:
        return {
            "kind": "strategic",
            "base_mean": self.base_mean.tolist(),
            "base_scale": self.base_scale.tolist(),
            "eta": self.eta,
            "label": self.label_spec if self.label_spec is not None else {"kind": "custom_callable"},
            "noise": self.noise,
        }


class OutcomePerformativityMap:
    """Predictions causally move outcomes while the feature marginal stays put.

    x is drawn from a fixed base law; the deployed linear predictor scores
    yhat = theta . x; the outcome responds affinely:
        y = c0 + c_yhat * yhat + c_x . x + sigma_y * noise.
    No closed-form sensitivity is certified (the shift depends on x), so
    ``sensitivity`` returns None and probing falls back to sampling.
    """

    def __init__(self, base_mean, base_scale, c0: float, c_yhat: float, c_x, sigma_y: float, noise: str = "gaussian"):
        base_mean = np.atleast_1d(np.asarray(base_mean, dtype=float))
        dx = base_mean.shape[0]
        base_scale = _as_matrix(np.atleast_1d(np.asarray(base_scale, dtype=float)), (dx,), "base_scale")
        c_x = _as_matrix(np.atleast_1d(np.asarray(c_x, dtype=float)), (dx,), "c_x")
        if np.any(base_scale < 0) or sigma_y < 0:
            raise ValueError("scales must be nonnegative")
        if noise not in _NOISE_KINDS:
            raise ValueError(f"noise must be one of {_NOISE_KINDS}")
        self.base_mean = base_mean
        self.base_scale = base_scale
        self.c0 = float(c0)
        self.c_yhat = float(c_yhat)
        self.c_x = c_x
        self.sigma_y = float(sigma_y)
        self.noise = noise
        self.data_dim = dx + 1
        self.param_dim = dx

    def sample(self, theta, n: int, rng: np.random.Generator) -> Batch:
        if n < 1:
            raise ValueError("n must be >= 1")
        theta = as_vector(theta, self.param_dim)
        draws = _draw_base(self.noise, n, self.base_mean.shape[0], rng)
        xs = self.base_mean[None, :] + self.base_scale[None, :] * draws
        yhat = xs @ theta
        ys = self.c0 + self.c_yhat * yhat + xs @ self.c_x + self.sigma_y * rng.standard_normal(n)
        return Batch(xs=xs, ys=ys)

    def sensitivity(self) -> None:
        return None

    def spec(self) -> dict:
        return {
            "kind": "outcome",
            "base_mean": self.base_mean.tolist(),
            "base_scale": self.base_scale.tolist(),
            "c0": self.c0,
            "c_yhat": self.c_yhat,
            "c_x": self.c_x.tolist(),
            "sigma_y": self.sigma_y,
            "noise": self.noise,
        }


@dataclass(frozen=True)
class ScalarResponse:
    """Aggregate response curve R: [0, 1] -> [0, 1] for mean-field equilibria.

    Supported shapes: affine, polynomial (coefficients low order first), and
    continuous piecewise-linear through given knots. The [0, 1] range is
    checked on a 1e-3 grid (plus knots) at construction; a violation is a
    contract error because the fixed-point existence argument needs it.
    """

    kind: str
    coeffs: tuple = ()
    knots_x: tuple = ()
    knots_y: tuple = ()

    def __post_init__(self):
        if self.kind == "affine":
            if len(self.coeffs) != 2:
                raise ValueError("affine response needs (intercept, slope)")
        elif self.kind == "polynomial":
            if len(self.coeffs) < 1:
                raise ValueError("polynomial response needs at least one coefficient")
        elif self.kind == "piecewise_linear":
            xs = np.asarray(self.knots_x, dtype=float)
            ys = np.asarray(self.knots_y, dtype=float)
            if xs.ndim != 1 or xs.shape != ys.shape or xs.shape[0] < 2:
                raise ValueError("piecewise-linear response needs matching knot vectors (>= 2 knots)")
            if xs[0] != 0.0 or xs[-1] != 1.0 or np.any(np.diff(xs) <= 0):
                raise ValueError("knots_x must increase strictly from 0 to 1")
        else:
            raise ValueError(f"unknown response kind {self.kind!r}")
        self.validate_range()

    @staticmethod
    def affine(intercept: float, slope: float) -> "ScalarResponse":
        return ScalarResponse(kind="affine", coeffs=(float(intercept), float(slope)))

    @staticmethod
    def polynomial(coeffs) -> "ScalarResponse":
        return ScalarResponse(kind="polynomial", coeffs=tuple(float(c) for c in coeffs))

    @staticmethod
    def piecewise_linear(knots_x, knots_y) -> "ScalarResponse":
        return ScalarResponse(
            kind="piecewise_linear",
            knots_x=tuple(float(v) for v in knots_x),
            knots_y=tuple(float(v) for v in knots_y),
        )

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "affine":
            out = self.coeffs[0] + self.coeffs[1] * y
        elif self.kind == "polynomial":
            out = np.polynomial.polynomial.polyval(y, np.asarray(self.coeffs))
        else:
            out = np.interp(y, self.knots_x, self.knots_y)
        return float(out) if out.ndim == 0 else out

    def validate_range(self, grid_step: float = 1e-3, tol: float = 1e-12) -> None:
        grid = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
        if self.kind == "piecewise_linear":
            grid = np.union1d(grid, np.asarray(self.knots_x))
        vals = self(grid)
        low, high = float(np.min(vals)), float(np.max(vals))
        if low < -tol or high > 1.0 + tol:
            raise ValueError(
                f"response leaves [0, 1]: observed range [{low:.6g}, {high:.6g}]; "
                f"the equilibrium existence argument requires R to map [0, 1] into itself"
            )

    def spec(self) -> dict:
        if self.kind == "piecewise_linear":
            return {"kind": self.kind, "knots_x": list(self.knots_x), "knots_y": list(self.knots_y)}
        return {"kind": self.kind, "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Certificates:
    """Closed forms for a recognized (map, loss) pair.

    g_map(phi) is the exact retraining target argmin_theta Risk(theta, D(phi));
    theta_ps its fixed point (None if no fixed point exists); theta_po the
    performative-risk minimizer (None when PR is flat). risk_exact(theta, phi)
    = Risk(theta, D(phi)), grad_exact(theta, phi) its theta-gradient, and
    (sigma, L) bound the stochastic gradient second moment.
    """

    g_map: Callable[[Array], Array]
    theta_ps: Array | None
    theta_po: Array | None
    pr_exact: Callable[[Array], float]
    risk_exact: Callable[[Array, Array], float]
    grad_exact: Callable[[Array, Array], Array]
    sigma: float
    L: float
    family: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "theta_ps": None if self.theta_ps is None else list(map(float, self.theta_ps)),
            "theta_po": None if self.theta_po is None else list(map(float, self.theta_po)),
            "sigma": self.sigma,
            "L": self.L,
            "family": self.family,
        }


def equilibrium_certificates(dist_map, loss) -> Certificates | None:
    """Closed forms for the scalar quadratic benchmark; None if unrecognized.

    Recognized family: quadratic loss with ridge lam, location-scale map with
    data (x, y), constant feature x = 1 (zero scale, zero shift), outcome mean
    a * theta + b and theta-independent outcome noise. Then

        G(phi)    = (a phi + b) / (1 + lam)
        theta_ps  = b / (1 + lam - a)
        theta_po  = (1 - a) b / ((1 - a)^2 + lam)
        PR(theta) = ((a - 1) theta + b)^2 / 2 + lam theta^2 / 2 + var / 2
    """
    if not isinstance(loss, QuadraticLoss) or loss.dim != 1:
        return None
    if not isinstance(dist_map, LocationScaleMap):
        return None
    if dist_map.param_dim != 1 or dist_map.data_dim != 2:
        return None
    if dist_map.base_scale[0] != 0.0 or dist_map.mu[0, 0] != 0.0 or dist_map.base_mean[0] != 1.0:
        return None

    a = float(dist_map.mu[1, 0])
    b = float(dist_map.base_mean[1])
    lam = loss.lam
    var = float(dist_map.coordinate_variances()[1])
    gamma = 1.0 + lam

    def g_map(phi) -> Array:
        phi = as_vector(phi, 1)
        return np.array([(a * phi[0] + b) / gamma])

    ps_denom = gamma - a
    theta_ps = None if ps_denom == 0.0 else np.array([b / ps_denom])
    po_denom = (1.0 - a) ** 2 + lam
    theta_po = None if po_denom == 0.0 else np.array([(1.0 - a) * b / po_denom])

    def pr_exact(theta) -> float:
        t = float(np.atleast_1d(theta)[0])
        return 0.5 * ((a - 1.0) * t + b) ** 2 + 0.5 * lam * t**2 + 0.5 * var

    def risk_exact(theta, phi) -> float:
        t = float(np.atleast_1d(theta)[0])
        p = float(np.atleast_1d(phi)[0])
        return 0.5 * ((a * p + b) - t) ** 2 + 0.5 * var + 0.5 * lam * t**2

    def grad_exact(theta, phi) -> Array:
        t = float(np.atleast_1d(theta)[0])
        p = float(np.atleast_1d(phi)[0])
        return np.array([gamma * t - (a * p + b)])

    return Certificates(
        g_map=g_map,
        theta_ps=theta_ps,
        theta_po=theta_po,
        pr_exact=pr_exact,
        risk_exact=risk_exact,
        grad_exact=grad_exact,
        sigma=math.sqrt(var),
        L=gamma,
        family={"name": "scalar_quadratic_location", "a": a, "b": b, "lam": lam, "var": var},
    )


def mixture_dominance_gap(
    loss,
    dist_map: LocationScaleMap,
    theta,
    theta1,
    theta2,
    alpha: float,
    n: int = 1000,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Convexity probe: Risk(theta, D(mix)) minus the mixed risks, with shared noise.

    For location families and losses convex in z, Jensen makes the gap
    nonpositive pointwise under the common-noise coupling, so the returned
    mean should sit below ~3 standard errors of zero. Returns (mean, se).
    """
    if not isinstance(dist_map, LocationScaleMap):
        raise ValueError("the coupled convexity probe is defined for location-scale maps")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if rng is None:
        raise ValueError("needs an rng")
    theta = as_vector(theta, dist_map.param_dim)
    theta1 = as_vector(theta1, dist_map.param_dim)
    theta2 = as_vector(theta2, dist_map.param_dim)
    mix = alpha * theta1 + (1.0 - alpha) * theta2
    draws = _draw_base(dist_map.noise, n, dist_map.data_dim, rng)

    def values(at) -> Array:
        z = dist_map.base_mean[None, :] + dist_map.base_scale[None, :] * draws + (dist_map.mu @ at)[None, :]
        return np.asarray(loss.value(theta, z[:, :-1], z[:, -1]), dtype=float)

    gaps = values(mix) - (alpha * values(theta1) + (1.0 - alpha) * values(theta2))
    se = float(np.std(gaps, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return float(np.mean(gaps)), se


def map_from_spec(spec: dict):
    kind = spec.get("kind")
    if kind == "scalar_location":
        return scalar_location_map(a=spec["a"], b=spec["b"], s=spec["s"], noise=spec.get("noise", "gaussian"))
    if kind == "location_scale":
        return LocationScaleMap(
            base_mean=spec["base_mean"],
            base_scale=spec["base_scale"],
            mu=spec["mu"],
            noise=spec.get("noise", "gaussian"),
        )
    if kind == "gaussian_mixture":
        return GaussianMixtureMeanShiftMap(
            weights=spec["weights"],
            base_means=spec["base_means"],
            scales=spec["scales"],
            shifts=spec["shifts"],
        )
    if kind == "strategic":
        return StrategicResponseMap(
            base_mean=spec["base_mean"],
            base_scale=spec["base_scale"],
            eta=spec["eta"],
            label=spec["label"],
            noise=spec.get("noise", "gaussian"),
        )
    if kind == "outcome":
        return OutcomePerformativityMap(
            base_mean=spec["base_mean"],
            base_scale=spec["base_scale"],
            c0=spec["c0"],
            c_yhat=spec["c_yhat"],
            c_x=spec["c_x"],
            sigma_y=spec["sigma_y"],
            noise=spec.get("noise", "gaussian"),
        )
    raise ValueError(f"unknown map kind {kind!r}")


def response_from_spec(spec: dict) -> ScalarResponse:
    kind = spec.get("kind")
    if kind == "affine":
        return ScalarResponse.affine(*spec["coeffs"])
    if kind == "polynomial":
        return ScalarResponse.polynomial(spec["coeffs"])
    if kind == "piecewise_linear":
        return ScalarResponse.piecewise_linear(spec["knots_x"], spec["knots_y"])
    raise ValueError(f"unknown response kind {kind!r}")
