"""Benchmark: compiled kernel extension against the pure numpy fallback.

Times the integral-flow right-hand side (the hot call inside the
integrator) and a full short integration, on the 5-agent instance and on a
30-agent random instance.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from consflow import _kernels
from consflow.constraint import randomize_feasible
from consflow.dynamics import NetworkState, integral_flow, rhs_integral
from consflow.harness import build_paper_example_5agent, generate_random_instance
from consflow.integrator import IntegratorConfig, integrate


def time_rhs(problem, backend, n_calls=3000):
    rng = np.random.default_rng(0)
    state = NetworkState(x=rng.standard_normal(problem.dim),
                         y=rng.standard_normal(problem.dim))
    rhs_integral(state, problem, backend=backend)  # warm up
    t0 = time.perf_counter()
    for _ in range(n_calls):
        rhs_integral(state, problem, backend=backend)
    return (time.perf_counter() - t0) / n_calls


def time_integration(problem, backend, tf=20.0):
    x0 = np.concatenate([randomize_feasible(c, [0, 5, i], 1.0)
                         for i, c in enumerate(problem.constraints)])
    z0 = np.concatenate([x0, np.zeros_like(x0)])
    flow = integral_flow(problem, backend=backend)
    cfg = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12)
    t0 = time.perf_counter()
    traj = integrate(flow, z0, (0.0, tf), cfg)
    return time.perf_counter() - t0, traj.n_accepted


def main():
    if not _kernels.HAVE_COMPILED:
        print("compiled extension not built; timing the pure backend only")
    problems = {
        "paper 5-agent (mn=100)": build_paper_example_5agent(2)[0],
        "random 30-agent (mn=150)": generate_random_instance(30, 5, 2, seed=0),
    }
    backends = ["pure"] + (["compiled"] if _kernels.HAVE_COMPILED else [])
    print(f"{'instance':28s} {'measure':16s} " +
          " ".join(f"{b:>12s}" for b in backends) + "    speedup")
    for name, problem in problems.items():
        rhs_times = {b: time_rhs(problem, b) for b in backends}
        row = " ".join(f"{rhs_times[b] * 1e6:10.1f}us" for b in backends)
        speed = (f"{rhs_times['pure'] / rhs_times['compiled']:.1f}x"
                 if _kernels.HAVE_COMPILED else "-")
        print(f"{name:28s} {'rhs eval':16s} {row}    {speed}")

        int_times = {b: time_integration(problem, b) for b in backends}
        row = " ".join(f"{int_times[b][0]:11.3f}s" for b in backends)
        speed = (f"{int_times['pure'][0] / int_times['compiled'][0]:.1f}x"
                 if _kernels.HAVE_COMPILED else "-")
        steps = int_times[backends[0]][1]
        print(f"{name:28s} {'integrate tf=20':16s} {row}    {speed}  "
              f"({steps} steps)")


if __name__ == "__main__":
    main()
