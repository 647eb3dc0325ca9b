"""Declarative experiments: built-in instances, random generation, runner.

A config is a JSON tree with blocks `problem`, `init`, `algorithm`,
`integrator`, `oracle`, `stop`, `analysis`, `outputs` plus a top-level
sample count. Exactly one problem source must be given: a named builtin,
the random generator, or an explicit instance. Every random draw is tied
to a seed recorded in the config, so a run is reproducible from its own
output metadata.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import _kernels
from .analysis import build_split, equilibrium_residual, equilibrium_y_star, rate_fit
from .constraint import LinearConstraint, build as build_constraint, \
    feasible_point, randomize_feasible, stacked_rank_guard
from .dynamics import DisturbanceSource, Problem, gain_constant, gain_inverse_t, make_flow
from .errors import GenerationFailed
from .graph import Graph, from_neighbor_lists
from .integrator import IntegratorConfig, StopRule, integrate, integrate_to_convergence
from .metrics import AnalysisContext, agent_mean, build_record, config_hash, \
    w_metric, write_csv, write_json
from .objective import ExpSum, Linear, ObjectiveSpec, QuarticNorm, \
    ScaledSquaredNorm, spec_from_dict
from .oracle import kkt_residual, solve

FIVE_AGENT_NEIGHBORS = [[1, 2, 3, 4], [1, 2, 3], [1, 2, 3, 4], [1, 3, 4, 5], [4, 5]]

V_DESCENT_SLACK = 1e-9
FEASIBILITY_TOL = 1e-7
SUM_Y_TOL = 1e-8
Y1_TOL = 1e-6
EQUILIBRIUM_TOL = 1e-8


def _rng(*key):
    return np.random.default_rng(list(key))


DEFAULT_BUILTIN5_SEED = 2


def build_paper_example_5agent(seed: int = DEFAULT_BUILTIN5_SEED):
    """The 5-agent instance of the convergence experiment.

    Topology from the fixed 5-agent neighbor lists; objectives
    f1 = ||x||^2, f2 = ||x - c2||^2, f3 = sum_k e^{x[k]},
    f4 = sum_k e^{-2 x[k]}, f5 = ||x - c5||^4 on R^20; three constraint rows
    per agent, all drawn from one shared 4-dimensional row space, with
    b_i = A_i x_feas for a shared feasible point. c2, c5 and x_feas have
    entries uniform in [-1, 1]; constraint factors are standard normal; all
    draws derive from the seed.

    Constraint rows share a row space because independent dense rows give
    the projected coupling operator near-kernel directions whose time
    constants run to hundreds of seconds; the shared row space removes
    those modes so the exponential rate is visible on a short span.

    Returns (problem, recommended config dict).
    """
    n, n_i, n_rowspace = 20, 3, 4
    g = from_neighbor_lists(FIVE_AGENT_NEIGHBORS)
    c2 = _rng(seed, 1).uniform(-1.0, 1.0, n)
    c5 = _rng(seed, 2).uniform(-1.0, 1.0, n)
    objectives: list[ObjectiveSpec] = [
        ScaledSquaredNorm(weight=1.0, center=np.zeros(n)),
        ScaledSquaredNorm(weight=1.0, center=c2),
        ExpSum(coef=1.0, n=n),
        ExpSum(coef=-2.0, n=n),
        QuarticNorm(center=c5),
    ]
    x_feas = _rng(seed, 3).uniform(-1.0, 1.0, n)
    basis, _ = np.linalg.qr(_rng(seed, 9).standard_normal((n, n_rowspace)))
    constraints = []
    for i in range(g.m):
        A = _rng(seed, 4, i).standard_normal((n_i, n_rowspace)) @ basis.T
        constraints.append(build_constraint(A, A @ x_feas))
    guard = stacked_rank_guard(constraints, n)
    if not guard.ok:
        raise GenerationFailed(f"rank guard failed for seed {seed}: rank {guard.rank}")
    problem = Problem(graph=g, objectives=objectives, constraints=constraints, n=n)
    config = {
        "problem": {"builtin": "paper5", "seed": seed},
        "init": {"scale": 1.0, "seed": seed},
        "algorithm": {"flow": "integral"},
        "integrator": {"method": "rk45", "rel_tol": 1e-11, "abs_tol": 1e-13,
                       "h_max": 1.0, "align_boundaries": True},
        "oracle": {"tol": 1e-11},
        "stop": {"metric": "W", "threshold": 1e-16, "t_max": 200.0},
        "samples": 400,
        "analysis": {"attach": True, "fit_window": [1e-8, 1e-2]},
        "outputs": {},
    }
    return problem, config


def generate_random_instance(m: int, n: int, n_i: int, seed: int,
                             family_weights: dict | None = None,
                             max_retries: int = 5) -> Problem:
    """Seeded random instance: connected graph, mixed objectives, shared-
    feasibility constraints.

    The graph is a random spanning tree plus m extra edges. Objectives are
    drawn from the scaled-norm, exponential and linear families per the
    given weights, with at least one scaled-norm term forced so the
    aggregate is strongly convex. All constraint rows are drawn from one
    shared row space of dimension < n that is orthogonal to the all-ones
    direction; this keeps the stacked rank guard satisfied for any m and
    leaves the consensus direction unconstrained, so a disturbance with a
    nonzero mean cannot accumulate unboundedly in the constraint-normal
    directions (those dynamics are open-loop integrators).
    """
    if m < 2 or n < 1:
        raise ValueError(f"need m >= 2 and n >= 1, got m={m}, n={n}")
    weights = dict(family_weights or {"norm": 1.0, "exp": 1.0, "linear": 1.0})
    families = [k for k in ("norm", "exp", "linear") if weights.get(k, 0.0) > 0]
    probs = np.array([weights[k] for k in families], dtype=float)
    probs /= probs.sum()

    for attempt in range(max_retries):
        rng = _rng(seed, 10, attempt)
        # spanning tree plus extras
        edges = set()
        for node in range(2, m + 1):
            edges.add((int(rng.integers(1, node)), node))
        for _ in range(m):
            i = int(rng.integers(1, m + 1))
            j = int(rng.integers(1, m + 1))
            if i != j:
                edges.add((min(i, j), max(i, j)))
        g = Graph(m=m, edges=frozenset(edges))

        objectives: list[ObjectiveSpec] = []
        for i in range(m):
            fam = rng.choice(families, p=probs)
            if fam == "norm":
                objectives.append(ScaledSquaredNorm(
                    weight=float(rng.uniform(0.5, 1.5)),
                    center=rng.uniform(-1.0, 1.0, n)))
            elif fam == "exp":
                coef = float(rng.uniform(0.5, 2.0)) * (1 if rng.uniform() < 0.5 else -1)
                objectives.append(ExpSum(coef=coef, n=n))
            else:
                objectives.append(Linear(slope=rng.uniform(-1.0, 1.0, n)))
        if not any(isinstance(s, ScaledSquaredNorm) for s in objectives):
            objectives[0] = ScaledSquaredNorm(
                weight=float(rng.uniform(0.5, 1.5)), center=rng.uniform(-1.0, 1.0, n))

        constraints: list[LinearConstraint] = []
        if n_i > 0 and n > 1:
            r = max(1, n - 2)  # shared row-space dim, leaves rank(stack) < n
            raw = rng.standard_normal((n, r))
            ones = np.ones(n) / np.sqrt(n)
            raw -= np.outer(ones, ones @ raw)
            basis, _ = np.linalg.qr(raw)
            x_feas = rng.uniform(-1.0, 1.0, n)
            for i in range(m):
                A = rng.standard_normal((n_i, r)) @ basis.T
                constraints.append(build_constraint(A, A @ x_feas))
        else:
            constraints = [build_constraint(np.zeros((0, n)), np.zeros(0))
                           for _ in range(m)]

        guard = stacked_rank_guard(constraints, n)
        if not guard.ok:
            continue
        return Problem(graph=g, objectives=objectives, constraints=constraints, n=n)
    raise GenerationFailed(f"no valid instance after {max_retries} attempts (seed {seed})")


def fig2_config(seed: int = 0, m: int = 30) -> dict:
    """Disturbance experiment config: integral vs diminishing under held
    uniform [0, 0.01] noise resampled every 0.1 s."""
    return {
        "problem": {"random": {"m": m, "n": 5, "n_i": 2, "seed": seed,
                               "families": {"norm": 1.0, "exp": 1.0, "linear": 1.0}}},
        "init": {"scale": 1.0, "seed": seed},
        "algorithm": {"flow": "integral",
                      "disturbance": {"lo": 0.0, "hi": 0.01, "hold": 0.1,
                                      "seed": seed + 1}},
        "integrator": {"method": "rk45", "rel_tol": 1e-7, "abs_tol": 1e-10,
                       "h_max": 1.0, "align_boundaries": True},
        "oracle": {"tol": 1e-10},
        "stop": {"metric": "W", "threshold": None, "t_max": 500.0},
        "samples": 401,
        "analysis": {"attach": False},
        "outputs": {},
    }


# --- experiment configuration -------------------------------------------------


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @staticmethod
    def from_file(path) -> "ExperimentConfig":
        with open(path) as fh:
            return ExperimentConfig(json.load(fh))

    def validate(self):
        sources = [k for k in ("builtin", "random", "explicit")
                   if k in self.raw.get("problem", {})]
        if len(sources) != 1:
            raise ValueError(f"config needs exactly one problem source, got {sources}")
        for key in ("rel_tol", "abs_tol", "h", "h_min", "h_max"):
            val = self.raw.get("integrator", {}).get(key)
            if val is not None and val <= 0:
                raise ValueError(f"integrator.{key} must be positive")
        tol = self.raw.get("oracle", {}).get("tol", 1e-10)
        if tol <= 0:
            raise ValueError("oracle.tol must be positive")
        stop = self.raw.get("stop", {})
        thr = stop.get("threshold")
        if thr is not None and thr <= 0:
            raise ValueError("stop.threshold must be positive")

    def block(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))


def build_problem(cfg: ExperimentConfig):
    """Problem plus the stacked initial primal vector from the config."""
    pblock = cfg.block("problem")
    if "builtin" in pblock:
        if pblock["builtin"] != "paper5":
            raise ValueError(f"unknown builtin {pblock['builtin']!r}")
        problem, _ = build_paper_example_5agent(int(pblock.get("seed", 0)))
    elif "random" in pblock:
        r = pblock["random"]
        problem = generate_random_instance(
            int(r["m"]), int(r["n"]), int(r.get("n_i", 0)), int(r["seed"]),
            r.get("families"))
    else:
        e = pblock["explicit"]
        n = int(e["n"])
        g = from_neighbor_lists(e["neighbors"])
        objectives = [spec_from_dict(d, n) for d in e["objectives"]]
        constraints = []
        for c in e["constraints"]:
            if c in (None, "none"):
                constraints.append(build_constraint(np.zeros((0, n)), np.zeros(0)))
            else:
                constraints.append(build_constraint(
                    np.asarray(c["A"], dtype=float), np.asarray(c["b"], dtype=float)))
        problem = Problem(graph=g, objectives=objectives, constraints=constraints, n=n)

    init = cfg.block("init")
    scale = float(init.get("scale", 1.0))
    iseed = int(init.get("seed", 0))
    blocks = []
    for i, c in enumerate(problem.constraints):
        if scale == 0.0:
            blocks.append(feasible_point(c))
        else:
            blocks.append(randomize_feasible(c, [iseed, 5, i], scale))
    return problem, np.concatenate(blocks)


def _integrator_config(cfg: ExperimentConfig, samples: np.ndarray) -> IntegratorConfig:
    blk = cfg.block("integrator")
    return IntegratorConfig(
        method=blk.get("method", "rk45"),
        h=float(blk.get("h", 0.01)),
        rel_tol=float(blk.get("rel_tol", 1e-8)),
        abs_tol=float(blk.get("abs_tol", 1e-10)),
        h_min=float(blk.get("h_min", 1e-13)),
        h_max=float(blk.get("h_max", 1.0)),
        align_boundaries=bool(blk.get("align_boundaries", True)),
        samples=samples,
    )


def run_experiment(cfg, out_dir=None, quiet: bool = True):
    """Build, solve, integrate, post-process and (optionally) write a run.

    Returns the TrajectoryRecord; record.metadata["checks"] carries the
    embedded invariant checks and record.metadata["checks_ok"] their
    conjunction, which the CLI maps to its exit status.
    """
    if isinstance(cfg, dict):
        cfg = ExperimentConfig(cfg)
    t_begin = time.perf_counter()
    problem, x0 = build_problem(cfg)

    oracle_tol = float(cfg.block("oracle").get("tol", 1e-10))
    sol = solve(problem, tol=oracle_tol)
    x_star = sol.x_star

    alg = cfg.block("algorithm")
    flow_kind = alg.get("flow", "integral")
    gain = None
    if flow_kind == "diminishing":
        gblock = alg.get("gain", {"kind": "inverse_t"})
        if gblock.get("kind", "inverse_t") == "inverse_t":
            gain = gain_inverse_t()
        else:
            gain = gain_constant(float(gblock["value"]))
    dist = None
    if alg.get("disturbance"):
        d = alg["disturbance"]
        dist = DisturbanceSource(seed=int(d["seed"]), lo=float(d["lo"]),
                                 hi=float(d["hi"]), hold=float(d["hold"]),
                                 n=problem.n)
    flow = make_flow(problem, flow_kind, gain=gain, disturbance=dist)

    t0 = float(alg.get("t0", 1.0 if flow_kind == "diminishing" else 0.0))
    stop_blk = cfg.block("stop")
    t_max = float(stop_blk.get("t_max", 100.0))
    n_samples = int(cfg.raw.get("samples", 400))
    grid = np.linspace(t0, t_max, n_samples)
    icfg = _integrator_config(cfg, grid)

    initial = np.concatenate([x0, np.zeros_like(x0)]) if flow.has_y else x0
    threshold = stop_blk.get("threshold")
    if threshold is not None:
        rule = StopRule(metric=lambda t, z: w_metric(flow.x_part(z), x_star),
                        threshold=float(threshold), t_max=t_max)
        traj = integrate_to_convergence(flow, initial, icfg, rule, t0=t0)
    else:
        traj = integrate(flow, initial, (t0, t_max), icfg)

    ana_blk = cfg.block("analysis")
    ctx = None
    eq_resid = None
    if ana_blk.get("attach", False) and flow.has_y:
        split = build_split(problem)
        y_star = equilibrium_y_star(problem, x_star)
        ctx = AnalysisContext(split=split, y_star=y_star)
        eq_resid = equilibrium_residual(problem, x_star, y_star)

    meta = {
        "config": cfg.raw,
        "config_sha256": config_hash(cfg.raw),
        "backend": _kernels.active().NAME,
        "version": __version__,
        "columns": ",".join(["t", "W", "consensus_err", "constraint_res",
                             "V", "sum_y_norm", "y1_norm"]),
    }
    record = build_record(problem, flow, traj, x_star, metadata=meta,
                          analysis_ctx=ctx)

    checks = {}
    disturbed = dist is not None
    if record.V is not None:
        checks["v_descent"] = bool(np.all(np.diff(record.V) <= V_DESCENT_SLACK)) \
            if not disturbed else None
        checks["y1_conserved"] = bool(np.max(record.y1_norm) <= Y1_TOL) \
            if not disturbed else None
    if record.sum_y_norm is not None:
        checks["sum_y_zero"] = bool(np.max(record.sum_y_norm) <= SUM_Y_TOL)
    if not disturbed:
        checks["feasibility"] = bool(np.max(record.constraint_res) <= FEASIBILITY_TOL)
    if eq_resid is not None:
        checks["equilibrium_fixed_point"] = bool(max(eq_resid) <= EQUILIBRIUM_TOL)
    checks_ok = all(v for v in checks.values() if v is not None) if checks else True
    record.metadata["checks"] = checks
    record.metadata["checks_ok"] = checks_ok

    extra = {"oracle": sol.summary(), "checks": checks, "checks_ok": checks_ok,
             "elapsed_seconds": time.perf_counter() - t_begin}
    stat_mean, feas_mean = kkt_residual(problem, agent_mean(record.final_x, problem.n))
    extra["final_mean_kkt"] = {"stationarity": stat_mean, "feasibility": feas_mean}
    if eq_resid is not None:
        extra["equilibrium_residual"] = {"dx": eq_resid[0], "dy": eq_resid[1]}
    if ctx is not None:
        extra["analysis"] = {
            "max_v_violation": float(np.max(np.maximum(np.diff(record.V), 0.0)))
            if record.V is not None and len(record.V) > 1 else 0.0,
            "max_y1_norm": float(np.max(record.y1_norm)),
            "max_sum_y_norm": float(np.max(record.sum_y_norm)),
        }
        window = ana_blk.get("fit_window")
        if window:
            try:
                fit = rate_fit(record.times, record.W, tuple(window))
                extra["analysis"]["rate_fit"] = {
                    "slope": fit.slope, "intercept": fit.intercept,
                    "r2": fit.r2, "n_samples": fit.n_samples}
            except Exception as exc:  # fit window may be empty on short runs
                extra["analysis"]["rate_fit"] = {"error": str(exc)}

    outputs = cfg.block("outputs")
    if out_dir is not None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        if outputs.get("csv"):
            outputs["csv"] = os.path.join(out_dir, outputs["csv"])
        if outputs.get("json"):
            outputs["json"] = os.path.join(out_dir, outputs["json"])
    if outputs.get("csv"):
        write_csv(record, outputs["csv"])
    if outputs.get("json"):
        write_json(record, outputs["json"], extra=extra)
    record.metadata["extra"] = extra
    if not quiet:
        print(f"[consflow] flow={flow_kind} t_final={record.times[-1]:.3f} "
              f"W_final={record.W[-1]:.3e} checks_ok={checks_ok}")
    return record
