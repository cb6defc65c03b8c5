"""Experiment runner: JSON configs in, traces and reports out.

Subcommands:

    run       execute one experiment config, write its outputs, run checks
    sweep     run a grid of configs (dotted-key overrides), tidy long CSV
    validate  parse and dry-build a config without executing it

Every subcommand takes --config; run/sweep also honour --out, --workers and
--seed-override. Exit status: 0 success, 1 runtime or check failure, 2
invalid config.
"""
from __future__ import annotations

import argparse
import copy
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bandit import ArmGrid, successive_elimination
from .collective import SignalPlan, TabularPopulation, revenue_uplift, signal_density, success_curve, success_lower_bound
from .core import ParamSpace, as_vector
from .losses import DataDomain, loss_from_spec
from .maps import equilibrium_certificates, map_from_spec, response_from_spec
from .power import Platform, power_report
from .solvers import SolverConfig, gms_fixed_point, rgd, rrm, sgd_greedy, sgd_lazy, zeroth_order_pr
from .trace import Trace

KINDS = ("solver", "bandit", "power", "collective", "gms", "sweep")
SWEEP_CELL_CAP = 256


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    payload: dict

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if not isinstance(self.payload, dict):
            raise ConfigError("payload must be a mapping")

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        if "kind" not in d:
            raise ConfigError("config needs a 'kind' field")
        payload = {k: v for k, v in d.items() if k not in ("kind", "seed")}
        return ExperimentConfig(kind=d["kind"], seed=int(d.get("seed", 0)), payload=payload)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, **copy.deepcopy(self.payload)}

    @staticmethod
    def load(path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------- builders


def _require(payload: dict, key: str) -> dict:
    if key not in payload:
        raise ConfigError(f"config kind needs a {key!r} section")
    return payload[key]


def _build_space(payload: dict) -> ParamSpace:
    spec = payload.get("space")
    if spec is None:
        return ParamSpace.unbounded(1)
    try:
        return ParamSpace.from_spec(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad space spec: {exc}") from exc


def _build_solver_parts(cfg: ExperimentConfig):
    payload = cfg.payload
    try:
        dist_map = map_from_spec(_require(payload, "map"))
        loss = loss_from_spec(_require(payload, "loss"))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad map/loss spec: {exc}") from exc
    space = _build_space(payload)
    sp = dict(_require(payload, "solver"))
    name = sp.pop("name", None)
    if name not in ("rrm", "rgd", "sgd_greedy", "sgd_lazy", "zeroth_order"):
        raise ConfigError(f"unknown solver {name!r}")
    theta0 = sp.pop("theta0", None)
    if theta0 is None:
        theta0 = np.zeros(loss.dim)
    else:
        theta0 = as_vector(theta0, loss.dim, "theta0")
    try:
        solver_cfg = SolverConfig(space=space, seed=cfg.seed, **sp)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver section: {exc}") from exc
    return name, loss, dist_map, theta0, solver_cfg


def run_solver_config(cfg: ExperimentConfig) -> Trace:
    name, loss, dist_map, theta0, solver_cfg = _build_solver_parts(cfg)
    runner = {
        "rrm": rrm,
        "rgd": rgd,
        "sgd_greedy": sgd_greedy,
        "sgd_lazy": sgd_lazy,
        "zeroth_order": zeroth_order_pr,
    }[name]
    return runner(loss, dist_map, theta0, solver_cfg)


# ---------------------------------------------------------------- checks


def _check_contraction_ratio(trace: Trace, params: dict):
    max_ratio = float(params.get("max_ratio", 1.0))
    floor = float(params.get("min_dist", 1e-12))
    dists = trace.column("dist_ps")
    ratios = [
        dists[i + 1] / dists[i]
        for i in range(len(dists) - 1)
        if math.isfinite(dists[i]) and math.isfinite(dists[i + 1]) and dists[i] > floor
    ]
    if not ratios:
        return False, math.nan
    worst = max(ratios)
    return worst <= max_ratio, worst


def _check_norm_exceeds(trace: Trace, params: dict):
    threshold = float(params["threshold"])
    peak = max(float(np.linalg.norm(th)) for th in trace.thetas)
    return peak >= threshold, peak


def _check_final_dist_below(trace: Trace, params: dict):
    target = params.get("target", "ps")
    if target not in ("ps", "po"):
        raise ConfigError("final_dist_below target must be 'ps' or 'po'")
    tol = float(params["tol"])
    value = trace.column(f"dist_{target}")[-1]
    return (math.isfinite(value) and value <= tol), value


def _check_bias_angle(trace: Trace, params: dict):
    floor = float(params.get("min_norm", 1e-9))
    dots = trace.aux.get("dot_ps")
    norms = trace.aux.get("norm_ps")
    if dots is None or norms is None:
        raise ConfigError("bias_angle needs an rgd trace (dot_ps/norm_ps aux columns)")
    relevant = [d for d, n in zip(dots, norms) if n > floor]
    if not relevant:
        return True, math.nan
    worst = min(relevant)
    return worst >= -1e-12, worst


CHECKS = {
    "contraction_ratio": _check_contraction_ratio,
    "norm_exceeds": _check_norm_exceeds,
    "final_dist_below": _check_final_dist_below,
    "bias_angle": _check_bias_angle,
}


def run_checks(trace: Trace, specs: list) -> list[dict]:
    results = []
    for spec in specs:
        name = spec.get("name")
        if name == "gms_residual":
            raise ConfigError("gms_residual applies to gms configs only")
        if name not in CHECKS:
            raise ConfigError(f"unknown check {name!r}")
        passed, detail = CHECKS[name](trace, spec)
        results.append({"name": name, "passed": bool(passed), "detail": float(detail)})
    return results


def _validate_check_specs(cfg: ExperimentConfig):
    for spec in cfg.payload.get("checks", []):
        name = spec.get("name")
        if cfg.kind == "gms":
            if name != "gms_residual":
                raise ConfigError(f"check {name!r} does not apply to gms configs")
        elif name not in CHECKS:
            raise ConfigError(f"unknown check {name!r}")


# ---------------------------------------------------------------- kind runners


def _emit(text: str, out: str | None):
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _run_solver(cfg: ExperimentConfig, out: str | None) -> int:
    trace = run_solver_config(cfg)
    if out:
        trace.to_csv(out)
        trace.write_sidecar(str(out) + ".meta.json")
    summary = {
        "kind": "solver",
        "rows": len(trace.k),
        "theta_final": [float(v) for v in trace.thetas[-1]],
        "deployments": int(trace.deployments[-1]),
        "samples": int(trace.samples[-1]),
        "config_digest": trace.digest,
    }
    for col in ("pr_est", "dist_ps", "dist_po"):
        value = trace.column(col)[-1]
        summary[f"final_{col}"] = None if math.isnan(value) else float(value)
    checks = run_checks(trace, cfg.payload.get("checks", []))
    if checks:
        summary["checks"] = checks
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0 if all(c["passed"] for c in checks) else 1


def _run_bandit(cfg: ExperimentConfig, out: str | None) -> int:
    payload = cfg.payload
    section = dict(_require(payload, "bandit"))
    dist_map = map_from_spec(_require(payload, "map"))
    loss = loss_from_spec(_require(payload, "loss"))
    arms = section.pop("arms")
    grid = ArmGrid.uniform(float(arms["lower"]), float(arms["upper"]), float(arms["spacing"]))
    domain_spec = section.pop("domain", None)
    domain = None
    if domain_spec is not None:
        domain = DataDomain(
            lower=np.asarray(domain_spec["lower"], dtype=float),
            upper=np.asarray(domain_spec["upper"], dtype=float),
        )
    run = successive_elimination(
        loss,
        dist_map,
        grid,
        horizon=int(section.pop("horizon")),
        batch_size=section.pop("batch_size", None),
        conf_delta=float(section.pop("conf_delta", 0.05)),
        domain=domain,
        seed=cfg.seed,
    )
    if section:
        raise ConfigError(f"unknown bandit options: {sorted(section)}")
    if out:
        run.to_csv(out)
    surviving = int(np.sum(run.grid.active))
    summary = {
        "kind": "bandit",
        "path": run.meta["path"],
        "rounds": int(run.t[-1]),
        "active_arms": surviving,
        "best_arm": [float(v) for v in run.grid.arms[int(np.argmin(run.grid.upper))]],
        "final_regret": None if math.isnan(run.regret_cum[-1]) else float(run.regret_cum[-1]),
        "config_digest": run.digest,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _run_power(cfg: ExperimentConfig, out: str | None) -> int:
    section = _require(cfg.payload, "power")
    platform = Platform(
        scores=np.asarray(section["scores"], dtype=float),
        propensities=np.asarray(section["propensities"], dtype=float),
        affinities=np.asarray(section["affinities"], dtype=float),
        budget=float(section["budget"]),
    )
    report = power_report(
        platform,
        subset_indices=section.get("subset"),
        n=int(section.get("mc_samples", 0)),
        seed=cfg.seed,
    )
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    _emit(text, out)
    if out:
        print(f"wrote {out}")
    return 0


def _run_collective(cfg: ExperimentConfig, out: str | None) -> int:
    section = _require(cfg.payload, "collective")
    pop = TabularPopulation(probs=np.asarray(section["probs"], dtype=float))
    plan = SignalPlan(
        g=np.asarray(section["g"], dtype=int),
        target_label=int(section["target_label"]),
        alpha=float(section["alpha"]),
    )
    alphas = [float(a) for a in section.get("alphas", [plan.alpha])]
    xi = signal_density(pop, plan)
    succ = success_curve(pop, plan, alphas)
    uplift_col = None
    if "h" in section and "beta_perf" in section:
        uplift_col = []
        for a, s in zip(alphas, succ):
            sub_plan = SignalPlan(g=plan.g, target_label=plan.target_label, alpha=a)
            uplift_col.append(revenue_uplift(pop, sub_plan, np.asarray(section["h"], dtype=float), float(section["beta_perf"])))
    header = "alpha,success,lower_bound,xi" + (",uplift" if uplift_col is not None else "")
    lines = [header]
    for i, a in enumerate(alphas):
        bound = success_lower_bound(pop, SignalPlan(g=plan.g, target_label=plan.target_label, alpha=a))
        row = f"{a!r},{float(succ[i])!r},{bound!r},{xi!r}"
        if uplift_col is not None:
            row += f",{uplift_col[i]!r}"
        lines.append(row)
    _emit("\n".join(lines) + "\n", out)
    if out:
        print(f"wrote {out}")
    return 0


def _run_gms(cfg: ExperimentConfig, out: str | None) -> int:
    section = _require(cfg.payload, "gms")
    response = response_from_spec(section["response"])
    tol = float(section.get("tol", 1e-10))
    y = gms_fixed_point(response, tol=tol)
    residual = float(response(y) - y)
    report = {"kind": "gms", "fixed_point": y, "residual": residual, "tol": tol}
    failed = []
    for spec in cfg.payload.get("checks", []):
        if spec.get("name") != "gms_residual":
            raise ConfigError(f"check {spec.get('name')!r} does not apply to gms configs")
        check_tol = float(spec.get("tol", tol))
        passed = abs(residual) <= check_tol
        report.setdefault("checks", []).append(
            {"name": "gms_residual", "passed": passed, "detail": residual}
        )
        if not passed:
            failed.append("gms_residual")
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    _emit(text, out)
    if out:
        print(f"wrote {out}")
    return 1 if failed else 0


# ---------------------------------------------------------------- sweep


def _apply_override(config_dict: dict, dotted: str, value):
    parts = dotted.split(".")
    node = config_dict
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"sweep key {dotted!r} does not exist in the base config")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"sweep key {dotted!r} does not exist in the base config")
    node[parts[-1]] = value


def _sweep_cell(args):
    base_dict, overrides, seed_override = args
    cell = copy.deepcopy(base_dict)
    for key, value in overrides.items():
        _apply_override(cell, key, value)
    if seed_override is not None:
        cell["seed"] = seed_override
    cfg = ExperimentConfig.from_dict(cell)
    name, *_ = _build_solver_parts(cfg)
    trace = run_solver_config(cfg)
    metrics = {
        "final_pr_est": trace.column("pr_est")[-1],
        "final_dist_ps": trace.column("dist_ps")[-1],
        "final_dist_po": trace.column("dist_po")[-1],
        "deployments": float(trace.deployments[-1]),
        "samples": float(trace.samples[-1]),
        "theta_final_0": float(trace.thetas[-1][0]),
    }
    theta_ps = trace.meta.get("certificates", {}).get("theta_ps")
    if theta_ps is not None:
        metrics["theta_ps"] = float(theta_ps[0])
    if name == "sgd_lazy":
        metrics["fit_exponent"] = _lazy_fit_exponent(trace)
    return metrics


def _lazy_fit_exponent(trace: Trace) -> float:
    """Slope of log squared distance-to-rest against log deployments, negated."""
    deps = np.asarray(trace.deployments, dtype=float)
    dist = np.asarray(trace.column("dist_ps"), dtype=float)
    ok = np.isfinite(dist) & (dist > 0) & (deps > 0)
    if ok.sum() < 2:
        return math.nan
    slope = np.polyfit(np.log(deps[ok]), np.log(dist[ok] ** 2), 1)[0]
    return float(-slope)


def _run_sweep(cfg: ExperimentConfig, out: str | None, workers: int, seed_override: int | None) -> int:
    base = _require(cfg.payload, "base")
    grid = _require(cfg.payload, "grid")
    if not grid:
        raise ConfigError("sweep grid must not be empty")
    base_cfg = ExperimentConfig.from_dict(base)
    if base_cfg.kind != "solver":
        raise ConfigError("sweep base config must have kind 'solver'")
    keys = sorted(grid)
    values = [grid[k] if isinstance(grid[k], list) else [grid[k]] for k in keys]
    n_cells = 1
    for v in values:
        n_cells *= len(v)
    if n_cells > SWEEP_CELL_CAP:
        raise ConfigError(f"sweep has {n_cells} cells, cap is {SWEEP_CELL_CAP}")
    combos = list(itertools.product(*values))
    jobs = [(base, dict(zip(keys, combo)), seed_override) for combo in combos]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(job) for job in jobs]

    lines = ["cell," + ",".join(keys) + ",metric,value"]
    for idx, (combo, metrics) in enumerate(zip(combos, results)):
        prefix = f"{idx}," + ",".join(json.dumps(v) for v in combo)
        for metric in sorted(metrics):
            value = metrics[metric]
            rendered = "" if (isinstance(value, float) and math.isnan(value)) else repr(float(value))
            lines.append(f"{prefix},{metric},{rendered}")
    _emit("\n".join(lines) + "\n", out)
    if out:
        print(f"wrote {out} ({n_cells} cells)")
    return 0


# ---------------------------------------------------------------- entry


def validate_config(cfg: ExperimentConfig):
    """Dry-build everything the config names; raise ConfigError on any problem."""
    round_trip = ExperimentConfig.from_dict(cfg.to_dict())
    if round_trip != cfg:
        raise ConfigError("config does not survive a serialization round trip")
    _validate_check_specs(cfg)
    if cfg.kind == "solver":
        _build_solver_parts(cfg)
    elif cfg.kind == "bandit":
        payload = cfg.payload
        map_from_spec(_require(payload, "map"))
        loss_from_spec(_require(payload, "loss"))
        section = _require(payload, "bandit")
        arms = section["arms"]
        ArmGrid.uniform(float(arms["lower"]), float(arms["upper"]), float(arms["spacing"]))
        if int(section["horizon"]) < 1:
            raise ConfigError("bandit horizon must be >= 1")
    elif cfg.kind == "power":
        section = _require(cfg.payload, "power")
        Platform(
            scores=np.asarray(section["scores"], dtype=float),
            propensities=np.asarray(section["propensities"], dtype=float),
            affinities=np.asarray(section["affinities"], dtype=float),
            budget=float(section["budget"]),
        )
    elif cfg.kind == "collective":
        section = _require(cfg.payload, "collective")
        pop = TabularPopulation(probs=np.asarray(section["probs"], dtype=float))
        plan = SignalPlan(
            g=np.asarray(section["g"], dtype=int),
            target_label=int(section["target_label"]),
            alpha=float(section["alpha"]),
        )
        plan.check_domain(pop)
    elif cfg.kind == "gms":
        response_from_spec(_require(cfg.payload, "gms")["response"])
    elif cfg.kind == "sweep":
        base = ExperimentConfig.from_dict(_require(cfg.payload, "base"))
        validate_config(base)
        grid = _require(cfg.payload, "grid")
        probe = copy.deepcopy(base.to_dict())
        n_cells = 1
        for key, vals in grid.items():
            vals = vals if isinstance(vals, list) else [vals]
            if not vals:
                raise ConfigError(f"sweep key {key!r} has no values")
            n_cells *= len(vals)
            _apply_override(probe, key, vals[0])
        if n_cells > SWEEP_CELL_CAP:
            raise ConfigError(f"sweep has {n_cells} cells, cap is {SWEEP_CELL_CAP}")
        validate_config(ExperimentConfig.from_dict(probe))


def _dispatch_run(cfg: ExperimentConfig, args) -> int:
    if cfg.kind == "solver":
        return _run_solver(cfg, args.out)
    if cfg.kind == "bandit":
        return _run_bandit(cfg, args.out)
    if cfg.kind == "power":
        return _run_power(cfg, args.out)
    if cfg.kind == "collective":
        return _run_collective(cfg, args.out)
    if cfg.kind == "gms":
        return _run_gms(cfg, args.out)
    if cfg.kind == "sweep":
        return _run_sweep(cfg, args.out, args.workers, args.seed_override)
    raise ConfigError(f"cannot run kind {cfg.kind!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="performative", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command in ("run", "sweep", "validate"):
        p = sub.add_parser(command)
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--out", default=None, help="output file (CSV or JSON depending on kind)")
        p.add_argument("--workers", type=int, default=1, help="process pool size for sweeps")
        p.add_argument("--seed-override", type=int, default=None, dest="seed_override")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed_override is not None and cfg.kind != "sweep":
            cfg = ExperimentConfig(kind=cfg.kind, seed=args.seed_override, payload=cfg.payload)
        validate_config(cfg)
        if args.command == "validate":
            print(f"valid: kind={cfg.kind} seed={cfg.seed}")
            return 0
        if args.command == "sweep" and cfg.kind != "sweep":
            raise ConfigError("the sweep command needs a config of kind 'sweep'")
        return _dispatch_run(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
