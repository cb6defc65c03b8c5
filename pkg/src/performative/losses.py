"""Loss models and certified regularity constants.

Both losses expose the same surface: per-sample ``value`` and ``grad``,
a mean Hessian for second-order retraining, and a vectorized
``risk_profile`` used by the bandit to score a whole arm grid against one
batch in a few matrix ops.

``certify_constants`` turns a (loss, map, domain, space) description into
the constants the solver theorems consume. Constants that genuinely need a
bounded domain come back as +inf when no bound is declared; callers that
require finiteness say so and get an error naming the offending constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Array, Batch, RegularityConstants, as_vector


@dataclass(frozen=True)
class DataDomain:
    """Axis-aligned bounding box for data points z = (x, y)."""

    lower: Array
    upper: Array

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("domain bounds must be matching vectors")
        if np.any(lo > hi):
            raise ValueError("empty data domain")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dz(self) -> int:
        return self.lower.shape[0]

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def x_norm_max(self) -> float:
        corner = np.maximum(np.abs(self.lower[:-1]), np.abs(self.upper[:-1]))
        return float(np.linalg.norm(corner))

    def y_bounds(self) -> tuple[float, float]:
        return float(self.lower[-1]), float(self.upper[-1])

    def contains_batch(self, batch: Batch, tol: float = 1e-9) -> bool:
        z = batch.z
        return bool(np.all(z >= self.lower - tol) and np.all(z <= self.upper + tol))

    def spec(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


class QuadraticLoss:
    """Squared error with ridge: l(theta; x, y) = (y - x.theta)^2 / 2 + lam ||theta||^2 / 2.

    The canonical scalar benchmark uses a constant feature x = [1], which
    reduces the loss to (y - theta)^2 / 2 + lam theta^2 / 2.
    """

    kind = "quadratic"

    def __init__(self, lam: float, dim: int = 1):
        if lam < 0 or not math.isfinite(lam):
            raise ValueError("lam must be finite and >= 0")
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.lam = float(lam)
        self.dim = int(dim)

    def value(self, theta, xs, ys) -> Array:
        theta = as_vector(theta, self.dim)
        resid = ys - xs @ theta
        return 0.5 * resid**2 + 0.5 * self.lam * float(theta @ theta)

    def grad(self, theta, xs, ys) -> Array:
        theta = as_vector(theta, self.dim)
        resid = xs @ theta - ys
        return resid[:, None] * xs + self.lam * theta[None, :]

    def hessian_mean(self, theta, xs, ys) -> Array:
        n = xs.shape[0]
        return xs.T @ xs / n + self.lam * np.eye(self.dim)

    def risk_profile(self, thetas: Array, xs, ys) -> Array:
        """Empirical risk of many parameter vectors against one batch.

        Exact reformulation through batch moments; for an (A, d) stack of
        parameters this is O(A d^2 + n d^2) instead of O(A n d).
        """
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        n = xs.shape[0]
        s_xx = xs.T @ xs / n
        s_xy = xs.T @ ys / n
        m_yy = float(ys @ ys) / n
        quad = np.einsum("ad,de,ae->a", thetas, s_xx, thetas)
        ridge = self.lam * np.einsum("ad,ad->a", thetas, thetas)
        return 0.5 * (m_yy - 2.0 * thetas @ s_xy + quad) + 0.5 * ridge

    def value_range(self, domain: DataDomain, space) -> float:
        """Upper bound on the spread of loss values over domain x space.

        The loss is nonnegative, so the max value is itself a valid range
        bound (used for Hoeffding confidence radii).
        """
        if not domain.bounded or not space.bounded:
            return math.inf
        y_lo, y_hi = domain.y_bounds()
        x_max = domain.x_norm_max()
        theta_max = _space_norm_max(space)
        resid_max = max(abs(y_lo), abs(y_hi)) + x_max * theta_max
        return 0.5 * resid_max**2 + 0.5 * self.lam * theta_max**2

    def spec(self) -> dict:
        return {"kind": "quadratic", "lam": self.lam, "dim": self.dim}


class LogisticLoss:
    """Ridge-regularized logistic loss for labels y in {-1, +1}."""

    kind = "logistic"

    def __init__(self, lam: float, dim: int = 1):
        if lam < 0 or not math.isfinite(lam):
            raise ValueError("lam must be finite and >= 0")
        self.lam = float(lam)
        self.dim = int(dim)

    @staticmethod
    def _check_labels(ys):
        if not np.all(np.isin(ys, (-1.0, 1.0))):
            raise ValueError("logistic loss needs labels in {-1, +1}")

    def value(self, theta, xs, ys) -> Array:
        self._check_labels(ys)
        theta = as_vector(theta, self.dim)
        margins = ys * (xs @ theta)
        return np.logaddexp(0.0, -margins) + 0.5 * self.lam * float(theta @ theta)

    def grad(self, theta, xs, ys) -> Array:
        self._check_labels(ys)
        theta = as_vector(theta, self.dim)
        margins = ys * (xs @ theta)
        weights = -ys / (1.0 + np.exp(margins))
        return weights[:, None] * xs + self.lam * theta[None, :]

    def hessian_mean(self, theta, xs, ys) -> Array:
        theta = as_vector(theta, self.dim)
        p = 1.0 / (1.0 + np.exp(-(xs @ theta)))
        w = p * (1.0 - p)
        n = xs.shape[0]
        return (xs * w[:, None]).T @ xs / n + self.lam * np.eye(self.dim)

    def risk_profile(self, thetas: Array, xs, ys) -> Array:
        self._check_labels(ys)
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        out = np.empty(thetas.shape[0])
        chunk = max(1, int(5e6) // max(1, xs.shape[0]))
        for start in range(0, thetas.shape[0], chunk):
            block = thetas[start : start + chunk]
            margins = ys[None, :] * (block @ xs.T)
            out[start : start + block.shape[0]] = np.mean(np.logaddexp(0.0, -margins), axis=1)
        return out + 0.5 * self.lam * np.einsum("ad,ad->a", thetas, thetas)

    def value_range(self, domain: DataDomain, space) -> float:
        if not domain.bounded or not space.bounded:
            return math.inf
        m = domain.x_norm_max() * _space_norm_max(space)
        return float(np.logaddexp(0.0, m)) + 0.5 * self.lam * _space_norm_max(space) ** 2

    def spec(self) -> dict:
        return {"kind": "logistic", "lam": self.lam, "dim": self.dim}


def loss_from_spec(spec: dict):
    kind = spec.get("kind")
    if kind == "quadratic":
        return QuadraticLoss(lam=spec["lam"], dim=int(spec.get("dim", 1)))
    if kind == "logistic":
        return LogisticLoss(lam=spec["lam"], dim=int(spec.get("dim", 1)))
    raise ValueError(f"unknown loss kind {kind!r}")


def _space_norm_max(space) -> float:
    if space is None:
        return math.inf
    if space.kind == "ball":
        return float(np.linalg.norm(space.center)) + float(space.radius)
    if not space.bounded:
        return math.inf
    corner = np.maximum(np.abs(space.lower), np.abs(space.upper))
    return float(np.linalg.norm(corner))


def _constant_feature(dist_map):
    """The fixed feature vector when the map's x-marginal is degenerate, else None."""
    probe = getattr(dist_map, "constant_x", None)
    if callable(probe):
        return probe()
    return None


def certify_constants(
    loss,
    dist_map=None,
    data_domain: DataDomain | None = None,
    space=None,
    require_finite: tuple[str, ...] = (),
) -> RegularityConstants:
    """Derive regularity constants for a loss, optionally tied to a map.

    Quadratic: gamma = lam + the smallest eigenvalue of E[x x^T] when the
    feature law is theta-independent and known (constant feature c gives
    gamma = lam + c^2, so the scalar benchmark gets 1 + lam); otherwise the
    ridge term alone is certified. Logistic: gamma = lam.

    Constants that need a bounded data domain or parameter space (L_z, the
    general beta_z, logistic sigma) are +inf when no bound is declared.
    ``require_finite`` lists constants that must be finite; violations raise
    with the offending name.
    """
    theta_max = _space_norm_max(space)
    x_const = _constant_feature(dist_map) if dist_map is not None else None

    if isinstance(loss, QuadraticLoss):
        second_moment = _feature_second_moment(dist_map, loss.dim)
        if second_moment is not None:
            gamma = loss.lam + float(np.linalg.eigvalsh(second_moment)[0])
        elif x_const is not None:
            gamma = loss.lam + float(x_const @ x_const)
        else:
            gamma = loss.lam
        if x_const is not None:
            c_norm = float(np.linalg.norm(x_const))
            beta_z = c_norm
            beta_theta = c_norm**2 + loss.lam
            if data_domain is not None and data_domain.bounded and math.isfinite(theta_max):
                y_lo, y_hi = data_domain.y_bounds()
                pred_max = c_norm * theta_max
                l_z = c_norm * max(abs(y_lo - pred_max), abs(y_lo + pred_max), abs(y_hi - pred_max), abs(y_hi + pred_max))
            else:
                l_z = math.inf
        else:
            if data_domain is not None and data_domain.bounded:
                x_max = data_domain.x_norm_max()
                y_lo, y_hi = data_domain.y_bounds()
                y_max = max(abs(y_lo), abs(y_hi))
                beta_theta = x_max**2 + loss.lam
                if math.isfinite(theta_max):
                    beta_z = x_max + y_max + 2.0 * x_max * theta_max
                    resid = x_max * theta_max + y_max
                    l_z = resid * math.sqrt(1.0 + theta_max**2)
                else:
                    beta_z = math.inf
                    l_z = math.inf
            else:
                beta_z = math.inf
                beta_theta = math.inf
                l_z = math.inf
        sigma, big_l = _gradient_envelope(loss, dist_map)
    elif isinstance(loss, LogisticLoss):
        gamma = loss.lam
        if data_domain is not None and data_domain.bounded:
            x_max = data_domain.x_norm_max()
            beta_theta = 0.25 * x_max**2 + loss.lam
            if math.isfinite(theta_max):
                beta_z = 1.0 + 0.25 * x_max * theta_max + 0.5 * x_max
                l_z = theta_max + 0.5 * theta_max * x_max
                sigma = x_max + loss.lam * theta_max
            else:
                beta_z = math.inf
                l_z = math.inf
                sigma = math.inf
        else:
            beta_theta = math.inf
            beta_z = math.inf
            l_z = math.inf
            sigma = math.inf
        big_l = 0.0
    else:
        raise ValueError(f"no constant derivations for loss type {type(loss).__name__}")

    epsilon = math.inf
    if dist_map is not None:
        closed = getattr(dist_map, "sensitivity", None)
        if callable(closed):
            eps = closed()
            if eps is not None:
                epsilon = float(eps)

    constants = RegularityConstants(
        gamma=gamma,
        beta_z=beta_z,
        beta_theta=beta_theta,
        L_z=l_z,
        sigma=sigma,
        L=big_l,
        epsilon=epsilon,
    )
    for name in require_finite:
        if not math.isfinite(getattr(constants, name)):
            raise ValueError(
                f"constant {name} is unbounded for this instance; declare a bounded "
                f"data domain / parameter space or use a map with a closed form"
            )
    return constants


def _feature_second_moment(dist_map, dim: int):
    probe = getattr(dist_map, "feature_second_moment", None)
    if callable(probe):
        m = probe()
        if m is not None:
            m = np.asarray(m, dtype=float)
            if m.shape == (dim, dim):
                return m
    return None


def _gradient_envelope(loss, dist_map) -> tuple[float, float]:
    """(sigma, L) with E||grad l(theta'; z)||^2 <= sigma^2 + L^2 ||theta' - argmin||^2.

    Certified through the map's equilibrium closed form when available.
    """
    if dist_map is None:
        return math.inf, math.inf
    from .maps import equilibrium_certificates

    cert = equilibrium_certificates(dist_map, loss)
    if cert is None:
        return math.inf, math.inf
    return cert.sigma, cert.L
