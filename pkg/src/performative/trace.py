"""Run traces: the common record every solver emits, plus serialization.

CSV schema (one row per recorded step, d = parameter dimension):

    k,theta_0..theta_{d-1},deployments,samples,pr_est,pr_se,dist_ps,dist_po

Optional columns are left empty when no oracle or estimate is available.
Floats are written with ``repr`` so identical runs produce byte-identical
files; wall-clock metadata lives only in the JSON sidecar.
"""
from __future__ import annotations

import datetime
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Array, as_vector


def canonical_json(obj) -> str:
    """Deterministic JSON encoding: sorted keys, no whitespace drift."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_digest(obj) -> str:
    """SHA-256 of the canonical JSON form of a config-like object."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def _fmt(value) -> str:
    if value is None:
        return ""
    v = float(value)
    if math.isnan(v):
        return ""
    return repr(v)


@dataclass
class Trace:
    """Step-indexed record of one optimization run.

    ``aux`` holds per-step diagnostics that are not part of the CSV schema
    (gradient bias norms, inner products, stepsizes); ``meta`` holds run-level
    facts (solver kind, certificate values, bound parameters, warnings).
    Aux columns recorded on every row align with the row index; columns that
    only exist per update (stepsizes, inner batch sizes) start at step 1 and
    are one shorter than the row count.
    """

    dim: int
    seed: int
    digest: str
    constants: dict | None = None
    meta: dict = field(default_factory=dict)
    k: list = field(default_factory=list)
    thetas: list = field(default_factory=list)
    deployments: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    pr_est: list = field(default_factory=list)
    pr_se: list = field(default_factory=list)
    dist_ps: list = field(default_factory=list)
    dist_po: list = field(default_factory=list)
    aux: dict = field(default_factory=dict)

    def append(
        self,
        k: int,
        theta,
        deployments: int,
        samples: int,
        pr_est: float | None = None,
        pr_se: float | None = None,
        dist_ps: float | None = None,
        dist_po: float | None = None,
        **aux_values,
    ) -> None:
        theta = as_vector(theta, self.dim)
        if self.k and k <= self.k[-1]:
            raise ValueError("step indices must be strictly increasing")
        if self.deployments and deployments < self.deployments[-1]:
            raise ValueError("deployment counter must be nondecreasing")
        if self.samples and samples < self.samples[-1]:
            raise ValueError("sample counter must be nondecreasing")
        self.k.append(int(k))
        self.thetas.append(theta.copy())
        self.deployments.append(int(deployments))
        self.samples.append(int(samples))
        self.pr_est.append(None if pr_est is None else float(pr_est))
        self.pr_se.append(None if pr_se is None else float(pr_se))
        self.dist_ps.append(None if dist_ps is None else float(dist_ps))
        self.dist_po.append(None if dist_po is None else float(dist_po))
        for name, value in aux_values.items():
            self.aux.setdefault(name, []).append(float(value))

    @property
    def n_rows(self) -> int:
        return len(self.k)

    def theta_array(self) -> Array:
        return np.stack(self.thetas) if self.thetas else np.empty((0, self.dim))

    def column(self, name: str) -> np.ndarray:
        vals = getattr(self, name)
        return np.array([math.nan if v is None else v for v in vals], dtype=float)

    def last_theta(self) -> Array:
        if not self.thetas:
            raise ValueError("empty trace")
        return self.thetas[-1]

    def validate(self) -> None:
        if not self.k:
            raise ValueError("empty trace")
        for theta in self.thetas:
            if not np.all(np.isfinite(theta)):
                raise ValueError("trace contains non-finite iterates")

    def header(self) -> str:
        theta_cols = ",".join(f"theta_{i}" for i in range(self.dim))
        return f"k,{theta_cols},deployments,samples,pr_est,pr_se,dist_ps,dist_po"

    def to_csv(self, path) -> Path:
        path = Path(path)
        lines = [self.header()]
        for i in range(self.n_rows):
            theta_part = ",".join(repr(float(v)) for v in self.thetas[i])
            lines.append(
                f"{self.k[i]},{theta_part},{self.deployments[i]},{self.samples[i]},"
                f"{_fmt(self.pr_est[i])},{_fmt(self.pr_se[i])},{_fmt(self.dist_ps[i])},{_fmt(self.dist_po[i])}"
            )
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def sidecar_dict(self, timestamp: bool = True) -> dict:
        doc = {
            "seed": self.seed,
            "config_digest": self.digest,
            "constants": self.constants,
            "meta": self.meta,
            "rows": self.n_rows,
            "dim": self.dim,
        }
        if timestamp:
            doc["created_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        return doc

    def write_sidecar(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.sidecar_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def read_trace_csv(path) -> dict:
    """Parse a trace CSV back into named float arrays (column name -> array)."""
    lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
    names = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    out = {}
    for j, name in enumerate(names):
        out[name] = np.array([math.nan if row[j] == "" else float(row[j]) for row in rows])
    return out
