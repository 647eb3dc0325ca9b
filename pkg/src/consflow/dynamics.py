"""Right-hand sides of the simulated flows.

Three flows are defined over a Problem: plain consensus, the projected
diminishing-gain baseline, and the integral-feedback update in stacked
form. The integral term is realized exclusively through the auxiliary
state y (never by quadrature of the history): with y(0) = 0,

    dx = -P(grad f(x) + Lbar x + y)
    dy = Lbar x

is exactly the integral update. A piecewise-constant disturbance can be
added to any flow; it enters additively after the projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .constraint import LinearConstraint
from .errors import DimensionMismatch
from .graph import Graph, is_connected, laplacian
from .objective import ObjectiveSpec, pack_forms


@dataclass(frozen=True)
class Problem:
    """An m-agent instance: graph, per-agent objectives and constraints."""

    graph: Graph
    objectives: list[ObjectiveSpec]
    constraints: list[LinearConstraint]
    n: int

    def __post_init__(self):
        m = self.graph.m
        if len(self.objectives) != m:
            raise DimensionMismatch(f"{len(self.objectives)} objectives for {m} agents")
        if len(self.constraints) != m:
            raise DimensionMismatch(f"{len(self.constraints)} constraints for {m} agents")
        for i, spec in enumerate(self.objectives):
            if spec.dim != self.n:
                raise DimensionMismatch(f"objective {i}: dim {spec.dim} != {self.n}")
        for i, c in enumerate(self.constraints):
            if c.n != self.n:
                raise DimensionMismatch(f"constraint {i}: {c.n} columns != {self.n}")
        if not is_connected(self.graph):
            raise ValueError("graph must be connected")
        # packed arrays shared by both kernel backends
        codes, scal, vecs = pack_forms(self.objectives, self.n)
        object.__setattr__(self, "_L", laplacian(self.graph))
        object.__setattr__(self, "_P", np.ascontiguousarray(
            np.stack([c.P for c in self.constraints])))
        object.__setattr__(self, "_codes", codes)
        object.__setattr__(self, "_scal", scal)
        object.__setattr__(self, "_vecs", vecs)

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def dim(self) -> int:
        """Stacked primal dimension m*n."""
        return self.m * self.n

    def agent_block(self, v: np.ndarray, i: int) -> np.ndarray:
        """Agent i's (0-based) block of a stacked (m*n,) vector."""
        return v[i * self.n:(i + 1) * self.n]


@dataclass
class NetworkState:
    """Stacked primal x and integral state y, each of length m*n."""

    x: np.ndarray
    y: np.ndarray

    @staticmethod
    def initial(x0: np.ndarray) -> "NetworkState":
        x0 = np.asarray(x0, dtype=float)
        return NetworkState(x=x0.copy(), y=np.zeros_like(x0))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @staticmethod
    def from_stacked(z: np.ndarray) -> "NetworkState":
        half = z.shape[0] // 2
        return NetworkState(x=z[:half], y=z[half:])


@dataclass(frozen=True)
class DisturbanceSource:
    """Piecewise-constant bounded disturbance, held over intervals of `hold`.

    The sample for agent i on [k*hold, (k+1)*hold) is fully determined by
    (seed, k, i) via a counter-based generator, so lookups are random-access
    and reproducible.
    """

    seed: int
    lo: float
    hi: float
    hold: float
    n: int

    def __post_init__(self):
        if self.hold <= 0:
            raise ValueError(f"hold interval must be positive, got {self.hold}")
        if self.hi < self.lo:
            raise ValueError(f"empty amplitude range [{self.lo}, {self.hi}]")

    def interval_index(self, t: float) -> int:
        return int(np.floor(t / self.hold))

    def value_at_interval(self, i: int, k: int) -> np.ndarray:
        """Held sample for agent i (0-based) on hold interval k."""
        bg = np.random.Philox(key=self.seed, counter=[0, 0, k, i])
        rng = np.random.Generator(bg)
        return rng.uniform(self.lo, self.hi, size=self.n)

    def stacked_at_interval(self, m: int, k: int) -> np.ndarray:
        return np.concatenate([self.value_at_interval(i, k) for i in range(m)])


def disturbance_value(d: DisturbanceSource, i: int, t: float) -> np.ndarray:
    """Disturbance of agent i (0-based) at time t >= 0."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return d.value_at_interval(i, d.interval_index(t))


# --- standalone RHS functions -------------------------------------------------

def rhs_consensus(x: np.ndarray, p: Problem, backend=None) -> np.ndarray:
    """dx = -Lbar x (no gradients, no projection)."""
    k = _kernels.get(backend)
    return k.consensus_rhs(np.asarray(x, dtype=float), p._L, p.n)


def rhs_integral(s: NetworkState, p: Problem, t: float = 0.0,
                 backend=None) -> tuple[np.ndarray, np.ndarray]:
    """Integral-feedback update: returns (dx, dy)."""
    k = _kernels.get(backend)
    return k.integral_rhs(np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float),
                          p._L, p._P, p._codes, p._scal, p._vecs)


def rhs_diminishing(x: np.ndarray, p: Problem, t: float,
                    gain: Callable[[float], float], backend=None) -> np.ndarray:
    """Projected baseline dx_i = -P_i(gain(t) grad f_i + sum_j (x_i - x_j))."""
    alpha = float(gain(t))
    if alpha < 0:
        raise ValueError(f"gain must be positive on the span, got {alpha} at t={t}")
    k = _kernels.get(backend)
    return k.diminishing_rhs(np.asarray(x, dtype=float), alpha,
                             p._L, p._P, p._codes, p._scal, p._vecs)


def gain_inverse_t() -> Callable[[float], float]:
    """alpha(t) = 1/t; runs using it must start at t0 > 0."""
    return lambda t: 1.0 / t


def gain_constant(c: float) -> Callable[[float], float]:
    return lambda t: c


# --- integrator-facing flow objects ------------------------------------------

@dataclass
class Flow:
    """A flow the integrator can drive.

    `rhs(t, z)` maps the flat state to its derivative. `x_dim` is the length
    of the primal block at the front of z (the rest, if any, is the integral
    state y). `hold` is the disturbance hold interval when the flow is
    discontinuous in t; `segment(k)` then returns the smooth RHS valid on
    hold interval k, which the integrator uses so that steps never straddle
    a discontinuity.
    """

    rhs: Callable[[float, np.ndarray], np.ndarray]
    dim: int
    x_dim: int
    kind: str
    problem: Problem
    hold: float | None = None
    segment: Callable[[int], Callable] | None = None

    @property
    def has_y(self) -> bool:
        return self.dim == 2 * self.x_dim

    def x_part(self, z: np.ndarray) -> np.ndarray:
        return z[..., : self.x_dim]

    def y_part(self, z: np.ndarray) -> np.ndarray | None:
        return z[..., self.x_dim:] if self.has_y else None


def consensus_flow(p: Problem, backend=None) -> Flow:
    k = _kernels.get(backend)
    L, n = p._L, p.n

    def rhs(t, x):
        return k.consensus_rhs(x, L, n)

    return Flow(rhs=rhs, dim=p.dim, x_dim=p.dim, kind="consensus", problem=p)


def integral_flow(p: Problem, backend=None) -> Flow:
    k = _kernels.get(backend)
    L, P, codes, scal, vecs = p._L, p._P, p._codes, p._scal, p._vecs
    d = p.dim

    def rhs(t, z):
        dx, dy = k.integral_rhs(z[:d], z[d:], L, P, codes, scal, vecs)
        return np.concatenate([dx, dy])

    return Flow(rhs=rhs, dim=2 * d, x_dim=d, kind="integral", problem=p)


def diminishing_flow(p: Problem, gain: Callable[[float], float],
                     backend=None) -> Flow:
    k = _kernels.get(backend)
    L, P, codes, scal, vecs = p._L, p._P, p._codes, p._scal, p._vecs

    def rhs(t, x):
        return k.diminishing_rhs(x, float(gain(t)), L, P, codes, scal, vecs)

    return Flow(rhs=rhs, dim=p.dim, x_dim=p.dim, kind="diminishing", problem=p)


def rhs_with_disturbance(base: Flow, d: DisturbanceSource) -> Flow:
    """Add the stacked disturbance to the primal derivative, after projection.

    dy (when present) is untouched. The returned flow carries the hold
    interval so the integrator can align steps with the discontinuities.
    """
    if d.n != base.problem.n:
        raise DimensionMismatch(f"disturbance dim {d.n} != agent dim {base.problem.n}")
    m = base.problem.m
    x_dim = base.x_dim

    def make_segment(k: int):
        v = d.stacked_at_interval(m, k)

        def rhs(t, z):
            dz = base.rhs(t, z)
            dz[:x_dim] += v
            return dz

        return rhs

    def rhs(t, z):
        return make_segment(d.interval_index(t))(t, z)

    return Flow(rhs=rhs, dim=base.dim, x_dim=x_dim,
                kind=base.kind + "+disturbance", problem=base.problem,
                hold=d.hold, segment=make_segment)


def make_flow(p: Problem, kind: str, gain: Callable[[float], float] | None = None,
              disturbance: DisturbanceSource | None = None, backend=None) -> Flow:
    """Flow selection by name: "integral" | "diminishing" | "consensus"."""
    if kind == "integral":
        flow = integral_flow(p, backend)
    elif kind == "diminishing":
        if gain is None:
            gain = gain_inverse_t()
        flow = diminishing_flow(p, gain, backend)
    elif kind == "consensus":
        flow = consensus_flow(p, backend)
    else:
        raise ValueError(f"unknown flow {kind!r}")
    if disturbance is not None:
        flow = rhs_with_disturbance(flow, disturbance)
    return flow
