"""Local linear constraints A x = b and their kernel projectors.

The projector P onto ker A keeps the flow tangent to the affine constraint
set; it is computed once from the SVD of A and cached on the constraint.
An unconstrained agent is represented by an empty (0, n) matrix, whose
projector is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BNotInImage

DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class LinearConstraint:
    """The pair (A, b) with derived kernel projector P and numerical rank."""

    A: np.ndarray  # (n_i, n); n_i may be 0
    b: np.ndarray  # (n_i,)
    P: np.ndarray  # (n, n) orthogonal projector onto ker A
    rank: int

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def is_empty(self) -> bool:
        return self.A.shape[0] == 0

    def residual(self, x: np.ndarray) -> float:
        """||A x - b||, zero for unconstrained agents."""
        if self.is_empty:
            return 0.0
        return float(np.linalg.norm(self.A @ x - self.b))


def build(A: np.ndarray, b: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> LinearConstraint:
    """Construct a constraint, deriving P = I - V_r V_r^T from the SVD of A.

    Singular values <= tol * sigma_max count as zero. Raises BNotInImage when
    the least-squares residual of A x = b exceeds tol * (1 + ||b||).
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"A must be 2-d, got shape {A.shape}")
    n = A.shape[1]
    b = np.asarray(b, dtype=float).reshape(A.shape[0])

    if A.shape[0] == 0:
        return LinearConstraint(A=A, b=b, P=np.eye(n), rank=0)

    _, s, vt = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > tol * s[0])) if s.size else 0
    vr = vt[:rank].T  # orthonormal basis of the row space
    P = np.eye(n) - vr @ vr.T

    x_ls, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = np.linalg.norm(A @ x_ls - b)
    if resid > tol * (1.0 + np.linalg.norm(b)):
        raise BNotInImage(f"b is not in image(A): residual {resid:.3g}")
    return LinearConstraint(A=A, b=b, P=P, rank=rank)


def feasible_point(c: LinearConstraint) -> np.ndarray:
    """Minimum-norm solution of A x = b (the zero vector when unconstrained)."""
    if c.is_empty:
        return np.zeros(c.n)
    x0, *_ = np.linalg.lstsq(c.A, c.b, rcond=None)
    return x0


def randomize_feasible(c: LinearConstraint, seed, scale: float) -> np.ndarray:
    """Feasible point plus a seeded kernel-direction perturbation P z.

    Entries of z are uniform in [-scale, scale]; the result stays feasible
    because P z lies in ker A.
    """
    rng = np.random.default_rng(seed)
    z = rng.uniform(-scale, scale, size=c.n)
    return feasible_point(c) + c.P @ z


@dataclass(frozen=True)
class RankGuard:
    """Numerical rank of the vertically stacked constraint matrices."""

    rank: int
    n: int
    status: str  # "OK" | "WARN"

    @property
    def ok(self) -> bool:
        return self.status == "OK"


def stacked_rank_guard(constraints, n: int, tol: float = DEFAULT_RANK_TOL) -> RankGuard:
    """Rank of col{A_1..A_m}; WARN when it reaches n (consensus set pinned)."""
    rows = [c.A for c in constraints if not c.is_empty]
    if not rows:
        return RankGuard(rank=0, n=n, status="OK")
    stack = np.vstack(rows)
    s = np.linalg.svd(stack, compute_uv=False)
    rank = int(np.sum(s > tol * s[0])) if s.size else 0
    return RankGuard(rank=rank, n=n, status="WARN" if rank >= n else "OK")
