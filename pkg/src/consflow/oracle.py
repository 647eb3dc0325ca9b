"""Centralized reference solver and KKT certification.

Solves min sum_i f_i(x) over the feasible consensus set {x : A_i x = b_i
for all i} by parameterizing that set as x_f + Z xi (Z an orthonormal basis
of the intersection of the constraint kernels) and minimizing over xi. Two
routes: a damped Newton method on the reduced coordinates (gradient
analytic, Hessian by central differences of the gradient), and, for
all-quadratic instances, a direct solve of the KKT saddle system. The two
agree on quadratic problems and serve as mutual cross-checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyKernelWarning, Infeasible, MaxIters, NoDescent
from .objective import QUADRATIC_FORMS, Linear, ScaledSquaredNorm, sum_gradient, sum_value

DEFAULT_TOL = 1e-10


def reduced_subspace(constraints, tol: float = 1e-10):
    """Feasible point and orthonormal kernel basis of the stacked system.

    Returns (x_f, Z) with every feasible consensus value equal to
    x_f + Z xi. Raises Infeasible when the stacked system is inconsistent;
    warns EmptyKernelWarning when the intersection of kernels is trivial.
    """
    n = constraints[0].n
    rows = [c.A for c in constraints if not c.is_empty]
    if not rows:
        return np.zeros(n), np.eye(n)
    A = np.vstack(rows)
    b = np.concatenate([c.b for c in constraints if not c.is_empty])
    x_f, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = np.linalg.norm(A @ x_f - b)
    if resid > tol * (1.0 + np.linalg.norm(b)):
        raise Infeasible(f"stacked system inconsistent: residual {resid:.3g}")
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > tol * s[0])) if s.size else 0
    Z = vt[rank:].T
    if Z.shape[1] == 0:
        warnings.warn("intersection of constraint kernels is trivial",
                      EmptyKernelWarning)
    return x_f, Z


@dataclass
class SolveResult:
    """Minimizer plus its certificate."""

    x_star: np.ndarray
    f_star: float
    stationarity: float          # ||Z^T grad F(x*)||
    feasibility: float           # max_i ||A_i x* - b_i||
    method: str                  # "kkt" | "newton"
    iterations: int
    z_star: list[np.ndarray] = field(default_factory=list)
    multiplier_residual: float = 0.0

    def summary(self) -> dict:
        return {
            "x_star": self.x_star.tolist(),
            "f_star": self.f_star,
            "stationarity": self.stationarity,
            "feasibility": self.feasibility,
            "method": self.method,
            "iterations": self.iterations,
            "multiplier_residual": self.multiplier_residual,
        }


def is_quadratic(problem) -> bool:
    return all(isinstance(s, QUADRATIC_FORMS) for s in problem.objectives)


def _quadratic_terms(problem):
    """Aggregate grad F(x) = H x + q for all-quadratic instances."""
    n = problem.n
    h_diag = 0.0
    q = np.zeros(n)
    for s in problem.objectives:
        if isinstance(s, ScaledSquaredNorm):
            h_diag += 2.0 * s.weight
            q -= 2.0 * s.weight * s.center
        elif isinstance(s, Linear):
            q += s.slope
    return h_diag * np.eye(n), q


def solve_kkt(problem, tol: float = DEFAULT_TOL) -> SolveResult:
    """Direct minimum-norm solve of the KKT saddle system (quadratic only)."""
    if not is_quadratic(problem):
        raise ValueError("direct KKT solve requires all-quadratic objectives")
    H, q = _quadratic_terms(problem)
    n = problem.n
    rows = [c.A for c in problem.constraints if not c.is_empty]
    if rows:
        A = np.vstack(rows)
        b = np.concatenate([c.b for c in problem.constraints if not c.is_empty])
        k = A.shape[0]
        saddle = np.block([[H, A.T], [A, np.zeros((k, k))]])
        rhs = np.concatenate([-q, b])
        sol, *_ = np.linalg.lstsq(saddle, rhs, rcond=None)
        x = sol[:n]
    else:
        x, *_ = np.linalg.lstsq(H, -q, rcond=None)
    res = kkt_residual(problem, x)
    if res[0] > max(tol, 1e-8) * (1.0 + np.linalg.norm(q)):
        raise NoDescent(
            f"KKT solve is not stationary (residual {res[0]:.3g}); "
            "the quadratic problem may be unbounded")
    return _certify(problem, x, method="kkt", iterations=1, tol=tol)


def solve_newton(problem, tol: float = DEFAULT_TOL, max_iters: int = 100) -> SolveResult:
    """Damped Newton with backtracking on the reduced coordinates."""
    x_f, Z = reduced_subspace(problem.constraints)
    specs = problem.objectives
    if Z.shape[1] == 0:
        return _certify(problem, x_f, method="newton", iterations=0, tol=tol)

    def grad_reduced(xi):
        return Z.T @ sum_gradient(specs, x_f + Z @ xi)

    def val(xi):
        return sum_value(specs, x_f + Z @ xi)

    xi = np.zeros(Z.shape[1])
    lam = 1e-8
    g = grad_reduced(xi)
    for it in range(1, max_iters + 1):
        gn = np.linalg.norm(g)
        if gn <= tol:
            return _certify(problem, x_f + Z @ xi, method="newton",
                            iterations=it - 1, tol=tol)
        H = _fd_hessian(grad_reduced, xi)
        d = None
        for _ in range(8):
            try:
                cand = np.linalg.solve(H + lam * np.eye(H.shape[0]), -g)
            except np.linalg.LinAlgError:
                lam = max(lam * 100.0, 1e-6)
                continue
            if g @ cand < 0:
                d = cand
                break
            lam = max(lam * 100.0, 1e-6)
        if d is None:
            raise NoDescent(f"no descent direction at iteration {it} (|g|={gn:.3g})")
        # full Newton steps contract the gradient near the optimum where value
        # differences fall below float resolution; try that before Armijo
        g_full = grad_reduced(xi + d)
        if np.linalg.norm(g_full) <= 0.9 * gn:
            xi = xi + d
            g = g_full
            lam = max(lam * 0.25, 1e-8)
            continue
        f0 = val(xi)
        slope = g @ d
        step = 1.0
        accepted = False
        for _ in range(50):
            if val(xi + step * d) <= f0 + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise NoDescent(f"line search stalled at iteration {it} (|g|={gn:.3g})")
        xi = xi + step * d
        g = grad_reduced(xi)
        lam = max(lam * 0.25, 1e-8)
    raise MaxIters(f"Newton did not reach tol {tol} in {max_iters} iterations")


def solve(problem, tol: float = DEFAULT_TOL, method: str = "auto") -> SolveResult:
    """Ground-truth minimizer of sum_i f_i over the feasible consensus set.

    method "auto" uses the direct KKT route for all-quadratic instances and
    reduced Newton otherwise.
    """
    if method == "auto":
        method = "kkt" if is_quadratic(problem) else "newton"
    if method == "kkt":
        return solve_kkt(problem, tol)
    if method == "newton":
        return solve_newton(problem, tol)
    raise ValueError(f"unknown method {method!r}")


def _fd_hessian(grad, xi, h_rel: float = 1e-6):
    """Symmetrized central-difference Hessian of the reduced objective."""
    k = xi.shape[0]
    h = h_rel * (1.0 + np.linalg.norm(xi))
    H = np.empty((k, k))
    for j in range(k):
        xp = xi.copy()
        xm = xi.copy()
        xp[j] += h
        xm[j] -= h
        H[:, j] = (grad(xp) - grad(xm)) / (2.0 * h)
    return 0.5 * (H + H.T)


def kkt_residual(problem, x) -> tuple[float, float]:
    """(stationarity, feasibility) at x.

    stationarity = ||Z^T grad F(x)||, the reduced-gradient norm;
    feasibility = max_i ||A_i x - b_i||.
    """
    x = np.asarray(x, dtype=float)
    _, Z = reduced_subspace(problem.constraints)
    stat = float(np.linalg.norm(Z.T @ sum_gradient(problem.objectives, x)))
    feas = max(c.residual(x) for c in problem.constraints)
    return stat, feas


def min_norm_multipliers(problem, x_star):
    """Minimum-norm z solving sum_i A_i^T z_i = grad F(x*).

    Returns (per-agent chunks of z, residual norm). Agents without
    constraints contribute empty chunks.
    """
    g = sum_gradient(problem.objectives, x_star)
    rows = [c.A for c in problem.constraints if not c.is_empty]
    if not rows:
        return [np.zeros(0) for _ in problem.constraints], float(np.linalg.norm(g))
    A = np.vstack(rows)
    z, *_ = np.linalg.lstsq(A.T, g, rcond=None)
    resid = float(np.linalg.norm(A.T @ z - g))
    chunks = []
    offset = 0
    for c in problem.constraints:
        k = c.A.shape[0]
        chunks.append(z[offset:offset + k].copy())
        offset += k
    return chunks, resid


def _certify(problem, x, method, iterations, tol) -> SolveResult:
    stat, feas = kkt_residual(problem, x)
    z_chunks, mres = min_norm_multipliers(problem, x)
    return SolveResult(
        x_star=np.asarray(x, dtype=float),
        f_star=sum_value(problem.objectives, x),
        stationarity=stat,
        feasibility=feas,
        method=method,
        iterations=iterations,
        z_star=z_chunks,
        multiplier_residual=mres,
    )
