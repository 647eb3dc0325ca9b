"""Numerical realization of the convergence-proof machinery.

Builds the equilibrium integral state y* from the minimum-norm multipliers,
the orthogonal split Q = [R1 R2] separating kernel and range of the
projected coupling operator Pbar Lbar Pbar, and the Lyapunov function
evaluated along trajectories. The proof's symbolic constants are never
estimated; their consequences (monotone descent of V, conservation of the
kernel component Y1, an exponential rate) are checked empirically, with the
rate read off a log-linear fit of the W metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import NetworkState, Problem, rhs_integral
from .errors import InsufficientSamples, MultiplierFailure
from .graph import kron_laplacian, laplacian
from .objective import gradient
from .oracle import min_norm_multipliers

SPLIT_TOL = 1e-9


def equilibrium_y_star(problem: Problem, x_star: np.ndarray,
                       tol: float = 1e-8) -> np.ndarray:
    """Equilibrium integral state: y_i* = A_i^T z_i* - grad f_i(x*).

    z* is the minimum-norm multiplier vector, which makes y* well defined
    even when the multipliers are non-unique. The construction guarantees
    sum_i y_i* = 0 up to the multiplier residual, which is exactly the
    condition for y* to lie in the image of the lifted Laplacian.
    """
    x_star = np.asarray(x_star, dtype=float)
    z_chunks, resid = min_norm_multipliers(problem, x_star)
    if resid > tol * (1.0 + np.linalg.norm(x_star)):
        raise MultiplierFailure(f"multiplier system residual {resid:.3g} > {tol:.3g}")
    blocks = []
    for spec, c, z in zip(problem.objectives, problem.constraints, z_chunks):
        g = gradient(spec, x_star)
        if c.is_empty:
            blocks.append(-g)
        else:
            blocks.append(c.A.T @ z - g)
    y_star = np.concatenate(blocks)
    total = y_star.reshape(problem.m, problem.n).sum(axis=0)
    if np.linalg.norm(total) > tol * (1.0 + np.linalg.norm(y_star)):
        raise MultiplierFailure(
            f"sum_i y_i* = {np.linalg.norm(total):.3g}, not in image(Lbar)")
    return y_star


@dataclass
class CoordinateSplit:
    """Orthogonal frame Q = [R1 R2] splitting ker and range of Pbar Lbar Pbar."""

    Q: np.ndarray    # (mn, mn) orthogonal
    R1: np.ndarray   # (mn, n1) kernel basis
    R2: np.ndarray   # (mn, n2) range basis
    S2: np.ndarray   # (n2, n2) positive definite block R2^T Pbar Lbar Pbar R2
    n1: int
    n2: int
    P: np.ndarray    # (m, n, n) per-agent projectors, for applying Pbar

    def apply_pbar(self, v: np.ndarray) -> np.ndarray:
        m, n, _ = self.P.shape
        return np.einsum("ijk,ik->ij", self.P, v.reshape(m, n)).ravel()


def build_split(problem: Problem, tol: float = SPLIT_TOL) -> CoordinateSplit:
    """Eigendecompose Pbar Lbar Pbar; eigenvalues <= tol * lambda_max form R1."""
    Lbar = kron_laplacian(laplacian(problem.graph), problem.n)
    m, n = problem.m, problem.n
    Pbar = np.zeros((m * n, m * n))
    for i in range(m):
        Pbar[i * n:(i + 1) * n, i * n:(i + 1) * n] = problem._P[i]
    M = Pbar @ Lbar @ Pbar
    M = 0.5 * (M + M.T)
    eigvals, eigvecs = np.linalg.eigh(M)
    lam_max = float(eigvals[-1]) if eigvals.size else 0.0
    cut = tol * lam_max if lam_max > 0 else np.inf
    kernel = eigvals <= cut
    R1 = eigvecs[:, kernel]
    R2 = eigvecs[:, ~kernel]
    Q = np.hstack([R1, R2])
    S2 = R2.T @ M @ R2
    S2 = 0.5 * (S2 + S2.T)
    return CoordinateSplit(Q=Q, R1=R1, R2=R2, S2=S2,
                           n1=R1.shape[1], n2=R2.shape[1], P=problem._P)


def _tile(x_star: np.ndarray, m: int) -> np.ndarray:
    return np.tile(np.asarray(x_star, dtype=float), m)


def lyapunov_v(state: NetworkState, split: CoordinateSplit,
               x_star: np.ndarray, y_star: np.ndarray) -> float:
    """V = 1/2 [X^T X + Y2^T S2^{-1} Y2].

    X = Q^T(x - xbar*) so X^T X is just ||x - xbar*||^2; Y2 is the range
    block of Q^T Pbar (y - y*). Zero exactly at the equilibrium pair.
    """
    m = split.P.shape[0]
    xt = state.x - _tile(x_star, m)
    v = float(xt @ xt)
    if split.n2 > 0:
        y2 = split.R2.T @ split.apply_pbar(state.y - y_star)
        v += float(y2 @ np.linalg.solve(split.S2, y2))
    return 0.5 * v


def lyapunov_v2(state: NetworkState, split: CoordinateSplit,
                x_star: np.ndarray, y_star: np.ndarray) -> float:
    """Diagnostic companion 1/2 ||X + Y||^2; logged, never asserted monotone."""
    m = split.P.shape[0]
    X = split.Q.T @ (state.x - _tile(x_star, m))
    Y = split.Q.T @ split.apply_pbar(state.y - y_star)
    s = X + Y
    return 0.5 * float(s @ s)


def y1_component(state: NetworkState, split: CoordinateSplit,
                 y_star: np.ndarray) -> float:
    """||R1^T Pbar (y - y*)||; conserved at zero along exact trajectories."""
    if split.n1 == 0:
        return 0.0
    return float(np.linalg.norm(split.R1.T @ split.apply_pbar(state.y - y_star)))


def equilibrium_residual(problem: Problem, x_star: np.ndarray,
                         y_star: np.ndarray) -> tuple[float, float]:
    """(||dx||, ||dy||) of the integral flow at the constructed equilibrium."""
    state = NetworkState(x=_tile(x_star, problem.m), y=np.asarray(y_star, dtype=float))
    dx, dy = rhs_integral(state, problem)
    return float(np.linalg.norm(dx)), float(np.linalg.norm(dy))


@dataclass
class RateFit:
    slope: float
    intercept: float
    r2: float
    n_samples: int
    window: tuple[float, float]


def rate_fit(times: np.ndarray, w_values: np.ndarray,
             window: tuple[float, float], min_samples: int = 10) -> RateFit:
    """Least-squares line fit of ln W against t over a W-value window."""
    w_lo, w_hi = window
    t = np.asarray(times, dtype=float)
    w = np.asarray(w_values, dtype=float)
    mask = (w >= w_lo) & (w <= w_hi) & (w > 0)
    if int(mask.sum()) < min_samples:
        raise InsufficientSamples(
            f"{int(mask.sum())} samples in W-window [{w_lo:g}, {w_hi:g}], "
            f"need >= {min_samples}")
    ts = t[mask]
    ln_w = np.log(w[mask])
    coeff = np.polyfit(ts, ln_w, 1)
    slope, intercept = float(coeff[0]), float(coeff[1])
    pred = slope * ts + intercept
    ss_res = float(np.sum((ln_w - pred) ** 2))
    ss_tot = float(np.sum((ln_w - ln_w.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(slope=slope, intercept=intercept, r2=r2,
                   n_samples=int(mask.sum()), window=(w_lo, w_hi))
