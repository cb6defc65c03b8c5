"""Retraining and optimization procedures under decision-dependent data.

Every solver returns a ``Trace`` whose row k holds the iterate after k
deployments (row 0 is the start), plus per-step diagnostics in ``trace.aux``.
Closed-form paths are used whenever ``equilibrium_certificates`` recognizes
the (map, loss) pair; the sampled paths draw from stream 0 of the seed while
all evaluation-only estimates use stream 1.

Theorem-backed schedules refuse to run outside their premises while
``theorem_mode`` is on: the contraction premise is epsilon * beta_z < gamma.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, asdict

import numpy as np

from .core import ParamSpace, RegularityConstants, as_vector, performative_risk, seed_streams, risk
from .losses import certify_constants
from .maps import ScalarResponse, equilibrium_certificates
from .trace import Trace, config_digest


class ConvergenceError(RuntimeError):
    """Inner optimization ran out of iterations; carries the last iterate."""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DivergenceError(RuntimeError):
    """An iterate left the representable range (divergent retraining dynamics)."""


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by all solvers; each solver reads the subset it understands.

    ``step_size`` is required by rgd and zeroth_order_pr. ``batch_size`` forces
    the sampled path for rrm/rgd even when a closed form exists (None means
    prefer the closed form and fall back to a default batch). Lazy deployment
    runs ceil(lazy_scale * k**lazy_alpha) inner steps during stage k.
    """

    space: ParamSpace
    steps: int = 100
    seed: int = 0
    step_size: float | None = None
    batch_size: int | None = None
    lazy_alpha: float = 1.0
    lazy_scale: float = 1.0
    inner_tol: float = 1e-10
    inner_max_iter: int = 10_000
    theorem_mode: bool = True
    pr_samples: int = 0
    zo_delta: float | None = None
    zo_budget: int = 200
    zo_shrink_patience: int = 20

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.lazy_alpha <= 0 or self.lazy_scale <= 0:
            raise ValueError("lazy schedule needs lazy_alpha > 0 and lazy_scale > 0")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be > 0 when given")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1 when given")
        if self.pr_samples < 0 or self.zo_budget < 1 or self.zo_shrink_patience < 1:
            raise ValueError("sample budgets must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["space"] = self.space.spec()
        return d


def _norm(v) -> float:
    return float(np.linalg.norm(v))


def _check_finite(theta, solver: str):
    if not np.all(np.isfinite(theta)):
        raise DivergenceError(f"{solver} produced a non-finite iterate (divergence)")


def _start_trace(solver: str, loss, dist_map, config: SolverConfig, cert) -> Trace:
    digest = config_digest(
        {"solver": solver, "config": config.to_dict(), "map": dist_map.spec(), "loss": loss.spec()}
    )
    constants = None
    try:
        constants = certify_constants(loss, dist_map, space=config.space).as_dict()
    except ValueError:
        pass
    meta = {"solver": solver, "theorem_mode": config.theorem_mode}
    if cert is not None:
        meta["certificates"] = cert.summary()
    return Trace(dim=dist_map.param_dim, seed=config.seed, digest=digest, constants=constants, meta=meta)


class _Recorder:
    """Appends rows with exact or Monte-Carlo performative risk plus oracle distances."""

    def __init__(self, loss, dist_map, cert, config: SolverConfig, rng_eval):
        self.loss = loss
        self.dist_map = dist_map
        self.cert = cert
        self.config = config
        self.rng_eval = rng_eval

    def row(self, trace: Trace, k: int, theta, deployments: int, samples: int, **aux):
        pr = se = dist_ps = dist_po = None
        if self.cert is not None:
            pr, se = float(self.cert.pr_exact(theta)), 0.0
            if self.cert.theta_ps is not None:
                dist_ps = _norm(theta - self.cert.theta_ps)
            if self.cert.theta_po is not None:
                dist_po = _norm(theta - self.cert.theta_po)
        elif self.config.pr_samples > 0:
            est = performative_risk(
                self.loss, self.dist_map, theta, n=self.config.pr_samples, rng=self.rng_eval, force_mc=True
            )
            pr, se = est.value, est.se
        trace.append(k, theta, deployments, samples, pr_est=pr, pr_se=se, dist_ps=dist_ps, dist_po=dist_po, **aux)


def _empirical_argmin(loss, batch, space: ParamSpace, start, tol: float, max_iter: int):
    """Damped Newton on the empirical risk; assumes an interior minimizer."""
    theta = start.copy()
    val = risk(loss, theta, batch)
    for _ in range(max_iter):
        g = loss.grad(theta, batch.xs, batch.ys).mean(axis=0)
        if _norm(g) <= tol:
            return space.project(theta)
        hess = loss.hessian_mean(theta, batch.xs, batch.ys)
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Hessian in retraining step: {exc}", last_iterate=theta) from exc
        slope = float(g @ step)
        t = 1.0
        while t > 1e-12:
            cand = theta - t * step
            cand_val = risk(loss, cand, batch)
            if cand_val <= val - 0.25 * t * slope:
                break
            t *= 0.5
        else:
            raise ConvergenceError("line search stalled in retraining step", last_iterate=theta)
        theta, val = cand, cand_val
    raise ConvergenceError(
        f"retraining inner solve did not reach tolerance {tol:g} in {max_iter} iterations",
        last_iterate=theta,
    )


def rrm(loss, dist_map, theta0, config: SolverConfig) -> Trace:
    """Repeated risk minimization: retrain to optimality on each deployed law.

    Closed-form path applies the certified G map; otherwise each round draws a
    fresh batch from the current deployment and minimizes the empirical risk
    (damped Newton). Row k records the model after k retraining rounds.
    """
    cert = equilibrium_certificates(dist_map, loss)
    use_exact = cert is not None and config.batch_size is None
    rng_sample, rng_eval = seed_streams(config.seed, 2)
    trace = _start_trace("rrm", loss, dist_map, config, cert)
    trace.meta["path"] = "closed_form" if use_exact else "sampled"
    rec = _Recorder(loss, dist_map, cert, config, rng_eval)

    theta = config.space.project(as_vector(theta0, dist_map.param_dim))
    samples = 0
    rec.row(trace, 0, theta, 0, 0)
    for k in range(1, config.steps + 1):
        if use_exact:
            theta = config.space.project(cert.g_map(theta))
        else:
            n = config.batch_size or 1024
            batch = dist_map.sample(theta, n, rng_sample)
            samples += n
            theta = _empirical_argmin(loss, batch, config.space, theta, config.inner_tol, config.inner_max_iter)
        _check_finite(theta, "rrm")
        rec.row(trace, k, theta, k, samples)
    return trace


def rgd(loss, dist_map, theta0, config: SolverConfig) -> Trace:
    """Repeated gradient descent: one gradient step per deployment.

    The gradient of Risk(. , D(theta_k)) at theta_k is exact under
    certificates, batch-estimated otherwise. When the stable point is known
    the trace carries per-step aux columns: the deployment bias
    ||g_k - g_ps|| and the inner product between the two gradient fields.
    """
    if config.step_size is None:
        raise ValueError("rgd needs config.step_size")
    cert = equilibrium_certificates(dist_map, loss)
    use_exact = cert is not None and config.batch_size is None
    rng_sample, rng_eval = seed_streams(config.seed, 2)
    trace = _start_trace("rgd", loss, dist_map, config, cert)
    trace.meta["path"] = "closed_form" if use_exact else "sampled"
    rec = _Recorder(loss, dist_map, cert, config, rng_eval)

    def deployment_aux(at):
        """Bias diagnostics at one iterate; rows and aux stay index-aligned."""
        if not use_exact or cert.theta_ps is None:
            return {}
        grad_here = cert.grad_exact(at, at)
        grad_ps = cert.grad_exact(at, cert.theta_ps)
        return {
            "bias": _norm(grad_here - grad_ps),
            "dot_ps": float(grad_here @ grad_ps),
            "norm_ps": _norm(grad_ps),
        }

    theta = config.space.project(as_vector(theta0, dist_map.param_dim))
    samples = 0
    rec.row(trace, 0, theta, 0, 0, **deployment_aux(theta))
    for k in range(1, config.steps + 1):
        if use_exact:
            grad = cert.grad_exact(theta, theta)
        else:
            n = config.batch_size or 256
            batch = dist_map.sample(theta, n, rng_sample)
            samples += n
            grad = loss.grad(theta, batch.xs, batch.ys).mean(axis=0)
        theta = config.space.project(theta - config.step_size * grad)
        _check_finite(theta, "rgd")
        rec.row(trace, k, theta, k, samples, **deployment_aux(theta))
    return trace


def theorem2_stepsize(constants: RegularityConstants, k: int) -> float:
    """Decaying schedule eta_k = 1 / (gap * k + 8 L^2 / gap), gap = gamma - epsilon * beta_z."""
    gap = constants.gap
    if gap <= 0:
        raise ValueError("stepsize schedule needs epsilon * beta_z < gamma")
    return 1.0 / (gap * k + 8.0 * constants.L**2 / gap)


def theorem2_bound(constants: RegularityConstants, d1: float, k: int, beta: float | None = None) -> float:
    """Mean-square error envelope M / (gap^2 k + 8 beta^2) after k single-sample steps.

    M = max(2 sigma^2, 8 L^2 d1^2) with d1 the starting distance to the stable
    point. ``beta`` defaults to max(beta_z, beta_theta); pass constants.beta_z
    for the variant that only tracks data-smoothness.
    """
    if beta is None:
        beta = constants.beta_max
    m_const = max(2.0 * constants.sigma**2, 8.0 * constants.L**2 * d1**2)
    return m_const / (constants.gap**2 * k + 8.0 * beta**2)


def _gate_contraction(constants: RegularityConstants, config: SolverConfig, trace_meta: dict, solver: str) -> bool:
    """Apply the theorem-mode contract; returns True when the schedule premise holds."""
    if constants.contractive:
        return True
    if config.theorem_mode:
        raise ValueError(
            f"{solver}: sensitivity too large for the contraction premise "
            f"(epsilon * beta_z = {constants.epsilon * constants.beta_z:g} >= gamma = {constants.gamma:g}); "
            f"set theorem_mode=False to run with a safeguard schedule"
        )
    warnings.warn(f"{solver} running outside the contraction premise; using safeguard stepsizes")
    trace_meta["warning"] = "contraction premise violated; safeguard schedule in use"
    return False


def sgd_greedy(loss, dist_map, theta0, config: SolverConfig) -> Trace:
    """Single-sample stochastic gradient steps, redeploying after every step.

    Uses the decaying schedule from the finite-sample convergence guarantee;
    with the premise violated and theorem_mode off it falls back to
    eta_k = 1 / (beta_theta * (k + 1)).
    """
    constants = certify_constants(
        loss, dist_map, space=config.space, require_finite=("gamma", "beta_z", "epsilon", "sigma", "L")
    )
    cert = equilibrium_certificates(dist_map, loss)
    rng_sample, rng_eval = seed_streams(config.seed, 2)
    trace = _start_trace("sgd_greedy", loss, dist_map, config, cert)
    premise = _gate_contraction(constants, config, trace.meta, "sgd_greedy")
    rec = _Recorder(loss, dist_map, cert, config, rng_eval)

    theta = config.space.project(as_vector(theta0, dist_map.param_dim))
    if cert is not None and cert.theta_ps is not None:
        d1 = _norm(theta - cert.theta_ps)
        trace.meta["theorem2"] = {
            "gap": constants.gap,
            "d1": d1,
            "M": max(2.0 * constants.sigma**2, 8.0 * constants.L**2 * d1**2),
            "beta_z": constants.beta_z,
            "beta_max": constants.beta_max,
        }
    rec.row(trace, 0, theta, 0, 0)
    for k in range(1, config.steps + 1):
        eta = theorem2_stepsize(constants, k) if premise else 1.0 / (constants.beta_theta * (k + 1))
        batch = dist_map.sample(theta, 1, rng_sample)
        grad = loss.grad(theta, batch.xs, batch.ys)[0]
        theta = config.space.project(theta - eta * grad)
        _check_finite(theta, "sgd_greedy")
        rec.row(trace, k, theta, k, k, eta=eta)
    return trace


def sgd_lazy(loss, dist_map, theta0, config: SolverConfig) -> Trace:
    """Deploy rarely, learn in between: stage k runs ceil(lazy_scale * k**lazy_alpha)
    single-sample gradient steps against the frozen deployment D(theta_k) with
    inner stepsizes 1 / (gamma (i + 1)), then redeploys. One trace row per stage.
    """
    constants = certify_constants(loss, dist_map, space=config.space, require_finite=("gamma", "beta_z", "epsilon"))
    if constants.gamma <= 0:
        raise ValueError("sgd_lazy needs gamma > 0 for its inner schedule")
    cert = equilibrium_certificates(dist_map, loss)
    rng_sample, rng_eval = seed_streams(config.seed, 2)
    trace = _start_trace("sgd_lazy", loss, dist_map, config, cert)
    _gate_contraction(constants, config, trace.meta, "sgd_lazy")
    rec = _Recorder(loss, dist_map, cert, config, rng_eval)

    theta = config.space.project(as_vector(theta0, dist_map.param_dim))
    samples = 0
    rec.row(trace, 0, theta, 0, 0)
    for k in range(1, config.steps + 1):
        n_inner = math.ceil(config.lazy_scale * k**config.lazy_alpha)
        batch = dist_map.sample(theta, n_inner, rng_sample)  # frozen deployment for the whole stage
        for i in range(n_inner):
            eta = 1.0 / (constants.gamma * (i + 1))
            grad = loss.grad(theta, batch.xs[i : i + 1], batch.ys[i : i + 1])[0]
            theta = config.space.project(theta - eta * grad)
        _check_finite(theta, "sgd_lazy")
        samples += n_inner
        rec.row(trace, k, theta, k, samples, n_inner=n_inner)
    return trace


def zeroth_order_pr(loss, dist_map, theta0, config: SolverConfig) -> Trace:
    """Derivative-free descent on the performative risk itself.

    Each step probes PR at theta +/- delta u for a unit random direction u,
    forms the symmetric-difference estimator, and steps with config.step_size.
    Every probe counts as a deployment. After zo_shrink_patience consecutive
    non-improving steps delta halves; collapsing below 1e-12 is an error.
    """
    if config.step_size is None:
        raise ValueError("zeroth_order_pr needs config.step_size")
    if not config.space.bounded:
        raise ValueError("zeroth_order_pr needs a bounded parameter space (its default probe radius scales with the diameter)")
    cert = equilibrium_certificates(dist_map, loss)
    rng_sample, rng_eval = seed_streams(config.seed, 2)
    trace = _start_trace("zeroth_order_pr", loss, dist_map, config, cert)
    trace.meta["path"] = "closed_form" if cert is not None else "sampled"
    rec = _Recorder(loss, dist_map, cert, config, rng_eval)

    d = dist_map.param_dim
    delta = config.zo_delta if config.zo_delta is not None else 1e-3 * config.space.diameter()
    if delta <= 0:
        raise ValueError("probe radius must be positive")

    def pr_value(at) -> tuple[float, float]:
        if cert is not None:
            return float(cert.pr_exact(at)), 0.0
        est = performative_risk(loss, dist_map, at, n=config.zo_budget, rng=rng_sample, force_mc=True)
        return est.value, est.se

    theta = config.space.project(as_vector(theta0, d))
    deployments = 0
    samples = 0
    best = math.inf
    streak = 0
    rec.row(trace, 0, theta, 0, 0)
    for k in range(1, config.steps + 1):
        u = rng_sample.standard_normal(d)
        norm_u = _norm(u)
        while norm_u < 1e-12:
            u = rng_sample.standard_normal(d)
            norm_u = _norm(u)
        u /= norm_u
        plus, _ = pr_value(theta + delta * u)
        minus, _ = pr_value(theta - delta * u)
        deployments += 2
        if cert is None:
            samples += 2 * config.zo_budget
        ghat = (plus - minus) / (2.0 * delta) * u
        theta = config.space.project(theta - config.step_size * ghat)
        _check_finite(theta, "zeroth_order_pr")
        proxy = 0.5 * (plus + minus)
        if proxy < best:
            best = proxy
            streak = 0
        else:
            streak += 1
            if streak >= config.zo_shrink_patience:
                delta *= 0.5
                streak = 0
                if delta < 1e-12:
                    raise ValueError("probe radius fell below 1e-12 without further descent")
        if cert is not None:
            rec.row(trace, k, theta, deployments, samples, delta=delta)
        else:
            trace.append(k, theta, deployments, samples, pr_est=proxy, pr_se=None, delta=delta)
    return trace


def gms_fixed_point(response: ScalarResponse, tol: float = 1e-10) -> float:
    """Equilibrium acceptance rate of an aggregate response R: [0,1] -> [0,1].

    Bisection on F(y) = R(y) - y, which is >= 0 at 0 and <= 0 at 1 because R
    maps the interval into itself; continuity of the supported response
    shapes gives a crossing. Returns the first point with |F| <= tol.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    response.validate_range()
    lo, hi = 0.0, 1.0
    f_lo = float(response(lo)) - lo
    f_hi = float(response(hi)) - hi
    if abs(f_lo) <= tol:
        return lo
    if abs(f_hi) <= tol:
        return hi
    if f_lo < 0 or f_hi > 0:
        raise ValueError("response violates the bracket R(0) >= 0 >= R(1) - 1")
    best_y, best_f = (lo, abs(f_lo)) if abs(f_lo) < abs(f_hi) else (hi, abs(f_hi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f_mid = float(response(mid)) - mid
        if abs(f_mid) <= tol:
            return mid
        if abs(f_mid) < best_f:
            best_y, best_f = mid, abs(f_mid)
        if f_mid > 0:
            lo = mid
        else:
            hi = mid
    if best_f <= tol:
        return best_y
    raise ArithmeticError(
        f"bisection exhausted float resolution with residual {best_f:.3e} > tol {tol:g}; "
        f"the response varies too steeply near the crossing"
    )
