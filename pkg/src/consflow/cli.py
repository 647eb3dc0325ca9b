"""Command-line entry point.

Subcommands:
    run <config.json>   run one experiment from a config file
    paper-fig1          5-agent exponential-convergence experiment
    paper-fig2          disturbance experiment, integral vs diminishing
    check               quick invariant battery on small instances
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np


def _add_common(p):
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    p.add_argument("--emit-plot", action="store_true",
                   help="also write an SVG of ln W against t")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="consflow")
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", help="path to a JSON experiment config")
    _add_common(run_p)

    f1 = sub.add_parser("paper-fig1", help="5-agent exponential convergence run")
    f1.add_argument("--seed", type=int, default=2)
    _add_common(f1)

    f2 = sub.add_parser("paper-fig2", help="disturbed integral vs diminishing pair")
    f2.add_argument("--seed", type=int, default=0)
    f2.add_argument("--agents", type=int, default=30)
    _add_common(f2)

    chk = sub.add_parser("check", help="invariant suite on small instances")
    _add_common(chk)
    return ap


def _emit_plot(curves: dict, path):
    """Bare-bones SVG polyline plot of ln W against t."""
    width, height, pad = 640, 420, 50
    pts_all = [(t, w) for series in curves.values() for t, w in zip(*series) if w > 0]
    if not pts_all:
        return
    ts = [p[0] for p in pts_all]
    ws = [np.log(p[1]) for p in pts_all]
    t_lo, t_hi = min(ts), max(ts)
    w_lo, w_hi = min(ws), max(ws)
    if t_hi == t_lo:
        t_hi = t_lo + 1
    if w_hi == w_lo:
        w_hi = w_lo + 1

    def sx(t):
        return pad + (t - t_lo) / (t_hi - t_lo) * (width - 2 * pad)

    def sy(w):
        return height - pad - (w - w_lo) / (w_hi - w_lo) * (height - 2 * pad)

    colors = ["#1f6fb2", "#c23b22", "#2e8540", "#7d3c98"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{pad}" y1="{height-pad}" x2="{width-pad}" y2="{height-pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height-pad}" stroke="black"/>',
             f'<text x="{width//2}" y="{height-12}" font-size="12">t</text>',
             f'<text x="12" y="{height//2}" font-size="12" transform="rotate(-90 12 {height//2})">ln W(t)</text>']
    for idx, (name, (t, w)) in enumerate(curves.items()):
        pts = " ".join(f"{sx(ti):.2f},{sy(np.log(wi)):.2f}"
                       for ti, wi in zip(t, w) if wi > 0)
        color = colors[idx % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{width-pad-150}" y="{pad+16*(idx+1)}" font-size="12" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def _cmd_run(args) -> int:
    from .harness import ExperimentConfig, run_experiment

    cfg = ExperimentConfig.from_file(args.config)
    record = run_experiment(cfg, out_dir=args.out_dir, quiet=args.quiet)
    if args.emit_plot:
        _emit_plot({"run": (record.times, record.W)}, f"{args.out_dir}/run.svg")
    return 0 if record.metadata["checks_ok"] else 1


def _cmd_fig1(args) -> int:
    from .harness import build_paper_example_5agent, run_experiment

    _, cfg = build_paper_example_5agent(args.seed)
    cfg["outputs"] = {"csv": "fig1_integral.csv", "json": "fig1_integral.json"}
    record = run_experiment(cfg, out_dir=args.out_dir, quiet=args.quiet)
    if args.emit_plot:
        _emit_plot({"integral": (record.times, record.W)},
                   f"{args.out_dir}/fig1.svg")
    if not args.quiet:
        fit = record.metadata["extra"]["analysis"].get("rate_fit", {})
        print(f"[consflow] fig1 slope={fit.get('slope', float('nan')):.4f} "
              f"r2={fit.get('r2', float('nan')):.5f}")
    return 0 if record.metadata["checks_ok"] else 1


def _cmd_fig2(args) -> int:
    from .harness import fig2_config, run_experiment

    base = fig2_config(seed=args.seed, m=args.agents)
    curves = {}
    ok = True
    for kind in ("integral", "diminishing"):
        cfg = json.loads(json.dumps(base))
        cfg["algorithm"]["flow"] = kind
        cfg["outputs"] = {"csv": f"fig2_{kind}.csv", "json": f"fig2_{kind}.json"}
        record = run_experiment(cfg, out_dir=args.out_dir, quiet=args.quiet)
        curves[kind] = (record.times, record.W)
        ok = ok and record.metadata["checks_ok"]
    if args.emit_plot:
        _emit_plot(curves, f"{args.out_dir}/fig2.svg")
    return 0 if ok else 1


def _cmd_check(args) -> int:
    from . import _kernels
    from .constraint import build as build_constraint
    from .graph import from_neighbor_lists, kron_laplacian, laplacian
    from .harness import build_paper_example_5agent, generate_random_instance, run_experiment
    from .objective import finite_diff_gradient, gradient

    failures = []

    def report(name, ok):
        if not args.quiet:
            print(f"[check] {name}: {'PASS' if ok else 'FAIL'}")
        if not ok:
            failures.append(name)

    rng = np.random.default_rng(0)
    g = from_neighbor_lists([[2, 3], [1, 3], [1, 2]])
    L = laplacian(g)
    report("laplacian_kernel", np.linalg.norm(L @ np.ones(3)) == 0.0)
    Lb = kron_laplacian(L, 2)
    v = rng.standard_normal(2)
    report("kron_kernel", np.linalg.norm(Lb @ np.tile(v, 3)) <= 1e-12)

    A = rng.standard_normal((2, 5))
    c = build_constraint(A, A @ rng.standard_normal(5))
    w = rng.standard_normal(5)
    report("projector_idempotent", np.linalg.norm(c.P @ (c.P @ w) - c.P @ w) <= 1e-10)
    report("projector_annihilates", np.linalg.norm(A @ (c.P @ w)) <= 1e-10)

    problem, _ = build_paper_example_5agent(0)
    x = rng.standard_normal(problem.n)
    ok_grad = True
    for spec in problem.objectives:
        gval = gradient(spec, x)
        fd = finite_diff_gradient(spec, x, 1e-5 * (1 + np.linalg.norm(x)))
        ok_grad &= np.linalg.norm(gval - fd) / (1 + np.linalg.norm(gval)) <= 1e-5
    report("gradient_vs_finite_diff", ok_grad)

    small = generate_random_instance(4, 3, 1, seed=1)
    cfg = {
        "problem": {"random": {"m": 4, "n": 3, "n_i": 1, "seed": 1}},
        "init": {"scale": 0.5, "seed": 1},
        "algorithm": {"flow": "integral"},
        "integrator": {"method": "rk45", "rel_tol": 1e-9, "abs_tol": 1e-12},
        "oracle": {"tol": 1e-10},
        "stop": {"metric": "W", "threshold": 1e-10, "t_max": 60.0},
        "samples": 200,
        "analysis": {"attach": True},
        "outputs": {},
    }
    record = run_experiment(cfg, quiet=True)
    for name, ok in record.metadata["checks"].items():
        if ok is not None:
            report(f"run_{name}", ok)
    report("run_converged", record.W[-1] <= 1e-10)
    if not args.quiet:
        print(f"[check] backend={_kernels.active().NAME}")
    return 1 if failures else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "paper-fig1": _cmd_fig1,
                "paper-fig2": _cmd_fig2, "check": _cmd_check}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
