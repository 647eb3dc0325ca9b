"""Trajectory metrics and the assembled record written to disk.

CSV layout: a '#'-prefixed header block of key=value metadata lines, then
one row per sample with columns
    t, W, consensus_err, constraint_res, V, sum_y_norm, y1_norm
(nan where a series does not apply to the flow). A JSON sidecar carries the
oracle and analysis summaries. The metadata embeds the full experiment
config, so a run can be reproduced bit-identically from its own output.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .analysis import CoordinateSplit, lyapunov_v, lyapunov_v2, y1_component
from .dynamics import Flow, NetworkState, Problem
from .integrator import Trajectory
from .objective import sum_value

CSV_COLUMNS = ["t", "W", "consensus_err", "constraint_res", "V",
               "sum_y_norm", "y1_norm"]


def w_metric(x: np.ndarray, x_star: np.ndarray) -> float:
    """W = sum_i ||x_i - x*||^2 over the stacked primal x."""
    x_star = np.asarray(x_star, dtype=float)
    n = x_star.shape[0]
    X = np.asarray(x, dtype=float).reshape(-1, n)
    diff = X - x_star
    return float(np.sum(diff * diff))


def consensus_error(x: np.ndarray, n: int) -> float:
    """sum_i ||x_i - xbar||^2 with xbar the mean over agents."""
    X = np.asarray(x, dtype=float).reshape(-1, n)
    diff = X - X.mean(axis=0)
    return float(np.sum(diff * diff))


def constraint_violation(x: np.ndarray, constraints) -> float:
    """max_i ||A_i x_i - b_i||."""
    n = constraints[0].n
    X = np.asarray(x, dtype=float).reshape(-1, n)
    return max(c.residual(X[i]) for i, c in enumerate(constraints))


def agent_mean(x: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1, n).mean(axis=0)


@dataclass
class AnalysisContext:
    """Split and equilibrium pair needed for Lyapunov-level series."""

    split: CoordinateSplit
    y_star: np.ndarray


@dataclass
class TrajectoryRecord:
    """Time-sampled states plus the derived metric series."""

    times: np.ndarray                 # (k,)
    states: np.ndarray                # (k, dim)
    x_dim: int
    n: int                            # per-agent dimension
    W: np.ndarray
    consensus_err: np.ndarray
    constraint_res: np.ndarray
    opt_gap: np.ndarray               # F(xbar(t)) - F(x*)
    V: np.ndarray | None = None
    V2: np.ndarray | None = None
    sum_y_norm: np.ndarray | None = None
    y1_norm: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    stop_reason: str | None = None

    @property
    def has_y(self) -> bool:
        return self.states.shape[1] == 2 * self.x_dim

    def x_at(self, i: int) -> np.ndarray:
        return self.states[i, : self.x_dim]

    def state_at(self, i: int) -> NetworkState:
        x = self.states[i, : self.x_dim]
        y = (self.states[i, self.x_dim:] if self.has_y
             else np.zeros(self.x_dim))
        return NetworkState(x=x, y=y)

    @property
    def final_x(self) -> np.ndarray:
        return self.x_at(len(self.times) - 1)

    def first_time_below(self, threshold: float) -> float | None:
        """First sample time with W <= threshold, None if never."""
        idx = np.nonzero(self.W <= threshold)[0]
        return float(self.times[idx[0]]) if idx.size else None


def build_record(problem: Problem, flow: Flow, traj: Trajectory,
                 x_star: np.ndarray, metadata: dict | None = None,
                 analysis_ctx: AnalysisContext | None = None) -> TrajectoryRecord:
    """Compute the metric series for every sample of a trajectory."""
    k = traj.t.shape[0]
    x_dim = flow.x_dim
    n = problem.n
    x_star = np.asarray(x_star, dtype=float)
    f_star = sum_value(problem.objectives, x_star)

    W = np.empty(k)
    ce = np.empty(k)
    cr = np.empty(k)
    gap = np.empty(k)
    has_y = traj.states.shape[1] == 2 * x_dim
    V = np.empty(k) if (analysis_ctx is not None and has_y) else None
    V2 = np.empty(k) if (analysis_ctx is not None and has_y) else None
    y1 = np.empty(k) if (analysis_ctx is not None and has_y) else None
    sum_y = np.empty(k) if has_y else None

    for i in range(k):
        x = traj.states[i, :x_dim]
        W[i] = w_metric(x, x_star)
        ce[i] = consensus_error(x, n)
        cr[i] = constraint_violation(x, problem.constraints)
        gap[i] = sum_value(problem.objectives, agent_mean(x, n)) - f_star
        if has_y:
            y = traj.states[i, x_dim:]
            sum_y[i] = float(np.linalg.norm(y.reshape(-1, n).sum(axis=0)))
            if analysis_ctx is not None:
                st = NetworkState(x=x, y=y)
                V[i] = lyapunov_v(st, analysis_ctx.split, x_star, analysis_ctx.y_star)
                V2[i] = lyapunov_v2(st, analysis_ctx.split, x_star, analysis_ctx.y_star)
                y1[i] = y1_component(st, analysis_ctx.split, analysis_ctx.y_star)

    return TrajectoryRecord(
        times=traj.t.copy(), states=traj.states.copy(), x_dim=x_dim, n=n,
        W=W, consensus_err=ce, constraint_res=cr, opt_gap=gap,
        V=V, V2=V2, sum_y_norm=sum_y, y1_norm=y1,
        metadata=dict(metadata or {}), stop_reason=traj.stop_reason)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_csv(record: TrajectoryRecord, path) -> None:
    """Write the sampled metric series with a metadata header block."""
    lines = []
    for key in sorted(record.metadata):
        val = record.metadata[key]
        if isinstance(val, dict):
            val = json.dumps(val, sort_keys=True, separators=(",", ":"))
        lines.append(f"# {key}={val}")
    lines.append(",".join(CSV_COLUMNS))
    k = record.times.shape[0]
    nan = float("nan")
    for i in range(k):
        row = [
            record.times[i],
            record.W[i],
            record.consensus_err[i],
            record.constraint_res[i],
            record.V[i] if record.V is not None else nan,
            record.sum_y_norm[i] if record.sum_y_norm is not None else nan,
            record.y1_norm[i] if record.y1_norm is not None else nan,
        ]
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv_metadata(path) -> dict:
    """Parse the '#'-prefixed key=value header block of an output CSV."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" in body:
                key, val = body.split("=", 1)
                meta[key.strip()] = val.strip()
    return meta


def write_json(record: TrajectoryRecord, path, extra: dict | None = None) -> None:
    doc = {
        "metadata": record.metadata,
        "stop_reason": record.stop_reason,
        "n_samples": int(record.times.shape[0]),
        "t_final": float(record.times[-1]),
        "final": {
            "W": float(record.W[-1]),
            "consensus_err": float(record.consensus_err[-1]),
            "constraint_res": float(record.constraint_res[-1]),
            "opt_gap": float(record.opt_gap[-1]),
        },
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
