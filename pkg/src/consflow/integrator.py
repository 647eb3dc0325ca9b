"""Time integration of the network flows.

Two methods: a fixed-step classical RK4 and an adaptive embedded 4(5)
Runge-Kutta pair (Dormand-Prince coefficients) with PI step-size control.
Output samples are produced by cubic Hermite interpolation between accepted
steps, so the sample grid is independent of the step sequence.

Flows that carry a disturbance hold interval are integrated segment by
segment so that no step straddles a discontinuity of the right-hand side;
the held disturbance is frozen per segment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StepUnderflow

# Dormand-Prince 5(4) tableau; stage 7 reuses the 5th-order result (FSAL).
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4

_SAFETY = 0.9
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0


@dataclass
class IntegratorConfig:
    method: str = "rk45"          # "rk45" | "rk4"
    h: float = 0.01               # fixed step for rk4
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    h_min: float = 1e-13
    h_max: float = 1.0
    align_boundaries: bool = True
    samples: np.ndarray | None = None   # output grid; accepted steps if None

    def __post_init__(self):
        if self.h <= 0 or self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("step size and tolerances must be positive")
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.samples is not None:
            s = np.asarray(self.samples, dtype=float)
            if s.ndim != 1 or (s.size > 1 and not np.all(np.diff(s) > 0)):
                raise ValueError("sample times must be strictly increasing")
            self.samples = s


@dataclass
class StopRule:
    """Halt integration when metric(t, y) <= threshold, or at t_max."""

    metric: Callable[[float, np.ndarray], float]
    threshold: float
    t_max: float

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")


@dataclass
class Trajectory:
    t: np.ndarray            # (k,)
    states: np.ndarray       # (k, dim)
    n_accepted: int = 0
    n_rejected: int = 0
    stop_reason: str | None = None

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _hermite(t0, y0, f0, t1, y1, f1, ts):
    """Cubic Hermite value at ts in [t0, t1]."""
    h = t1 - t0
    s = (ts - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1


class _SampleCollector:
    """Emits interpolated states whenever accepted steps pass sample times."""

    def __init__(self, samples: np.ndarray | None):
        self.grid = samples
        self.idx = 0
        self.t_out: list[float] = []
        self.y_out: list[np.ndarray] = []

    def start(self, t0: float, y0: np.ndarray):
        if self.grid is None:
            self._emit(t0, y0.copy())
            return
        while self.idx < self.grid.size and self.grid[self.idx] < t0:
            self.idx += 1
        if self.idx < self.grid.size and self.grid[self.idx] == t0:
            self._emit(t0, y0.copy())
            self.idx += 1

    def step(self, t0, y0, f0, t1, y1, f1):
        if self.grid is None:
            self._emit(t1, y1.copy())
            return
        while self.idx < self.grid.size and self.grid[self.idx] <= t1:
            ts = self.grid[self.idx]
            if ts == t1:
                self._emit(t1, y1.copy())
            else:
                self._emit(ts, _hermite(t0, y0, f0, t1, y1, f1, ts))
            self.idx += 1

    def finish(self, t_end: float, y_end: np.ndarray):
        if not self.t_out or self.t_out[-1] < t_end:
            self._emit(t_end, y_end.copy())

    def _emit(self, t: float, y: np.ndarray):
        self.t_out.append(float(t))
        self.y_out.append(y)

    def result(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.t_out), np.array(self.y_out)


def _error_norm(delta, y_old, y_new, rel_tol, abs_tol):
    scale = abs_tol + rel_tol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean((delta / scale) ** 2)))


def _initial_step(rhs, t0, y0, f0, seg_len, rel_tol, abs_tol, h_max):
    """Standard two-probe starting-step heuristic."""
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, seg_len, h_max)
    f1 = rhs(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, seg_len, h_max)


class _SegmentedRHS:
    """Resolve a flow into per-segment smooth right-hand sides."""

    def __init__(self, flow, cfg: IntegratorConfig):
        self.hold = getattr(flow, "hold", None)
        self.segment = getattr(flow, "segment", None)
        self.align = bool(cfg.align_boundaries and self.hold and self.segment)
        self.base = flow.rhs if hasattr(flow, "rhs") else flow

    def segments(self, t0: float, tf: float):
        """Yield (rhs, seg_start, seg_end) covering [t0, tf]."""
        if not self.align:
            yield self.base, t0, tf
            return
        hold = self.hold
        k = int(np.floor(t0 / hold + 1e-9))
        t = t0
        while t < tf:
            seg_end = min(tf, (k + 1) * hold)
            if seg_end > t:
                yield self.segment(k), t, seg_end
            t = seg_end
            k += 1


class _StepControl:
    """Adaptive step state carried across segment boundaries."""

    def __init__(self):
        self.h: float | None = None
        self.err_prev: float = 1.0


def integrate(flow, initial: np.ndarray, span: tuple[float, float],
              cfg: IntegratorConfig, stop: StopRule | None = None) -> Trajectory:
    """Integrate `flow` over span, sampling per cfg.

    `flow` is either a plain callable f(t, y) or a dynamics.Flow. The final
    state is always the last sample. With a StopRule, integration halts at
    the first accepted step whose metric falls to the threshold (stop_reason
    "threshold") or at the end of the span (stop_reason "t_max").
    """
    t0, tf = float(span[0]), float(span[1])
    if tf < t0:
        raise ValueError(f"span end {tf} before start {t0}")
    y = np.array(initial, dtype=float)
    collector = _SampleCollector(cfg.samples)
    collector.start(t0, y)

    if stop is not None and stop.metric(t0, y) <= stop.threshold:
        collector.finish(t0, y)
        t_arr, y_arr = collector.result()
        return Trajectory(t_arr, y_arr, 0, 0, "threshold")

    seg_iter = _SegmentedRHS(flow, cfg)
    stepper = _rk45_segment if cfg.method == "rk45" else _rk4_segment
    ctl = _StepControl()
    n_acc = n_rej = 0
    stopped = False
    t_end, y_end = t0, y
    for rhs, seg_start, seg_end in seg_iter.segments(t0, tf):
        t_end, y_end, acc, rej, stopped = stepper(
            rhs, y_end, seg_start, seg_end, cfg, collector, stop, ctl)
        n_acc += acc
        n_rej += rej
        if stopped:
            break

    collector.finish(t_end, y_end)
    t_arr, y_arr = collector.result()
    reason = None
    if stop is not None:
        reason = "threshold" if stopped else "t_max"
    return Trajectory(t_arr, y_arr, n_acc, n_rej, reason)


def integrate_to_convergence(flow, initial: np.ndarray, cfg: IntegratorConfig,
                             stop: StopRule, t0: float = 0.0) -> Trajectory:
    """Integrate from t0 until the stop metric falls below its threshold or
    t reaches stop.t_max, whichever comes first."""
    return integrate(flow, initial, (t0, stop.t_max), cfg, stop=stop)


def _rk45_segment(rhs, y, t, t_end, cfg, collector, stop, ctl):
    n_acc = n_rej = 0
    f = rhs(t, y)
    if ctl.h is None:
        ctl.h = _initial_step(rhs, t, y, f, max(t_end - t, 1e-12),
                              cfg.rel_tol, cfg.abs_tol, cfg.h_max)
    K = np.empty((7, y.shape[0]))
    while t < t_end:
        h = min(ctl.h, cfg.h_max)
        if h < cfg.h_min:
            raise StepUnderflow(t, np.nan, h)
        h_step = min(h, t_end - t)
        K[0] = f
        for i in range(1, 7):
            yi = y + h_step * (_DP_A[i] @ K[:i])
            K[i] = rhs(t + _DP_C[i] * h_step, yi)
        y_new = y + h_step * (_DP_B5 @ K)
        err = _error_norm(h_step * (_DP_E @ K), y, y_new, cfg.rel_tol, cfg.abs_tol)
        if not np.isfinite(err) or err > 1.0:
            n_rej += 1
            shrink = 0.1 if not np.isfinite(err) else max(0.1, _SAFETY * err ** -0.2)
            ctl.h = h_step * min(1.0, shrink)
            if ctl.h < cfg.h_min:
                raise StepUnderflow(t, err, ctl.h)
            continue
        t_new = t_end if h_step >= t_end - t else t + h_step
        if t_new == t:
            raise StepUnderflow(t, err, h_step)
        f_new = K[6].copy()  # FSAL: stage 7 is f at (t_new, y_new)
        collector.step(t, y, f, t_new, y_new, f_new)
        n_acc += 1
        fac = _SAFETY * (max(err, 1e-10) ** -_PI_ALPHA) * (ctl.err_prev ** _PI_BETA)
        ctl.err_prev = max(err, 1e-10)
        ctl.h = h_step * min(10.0, max(0.2, fac))
        t, y, f = t_new, y_new, f_new
        if stop is not None and stop.metric(t, y) <= stop.threshold:
            return t, y, n_acc, n_rej, True
    return t, y, n_acc, n_rej, False


def _rk4_segment(rhs, y, t, t_end, cfg, collector, stop, ctl):
    n_acc = 0
    f = rhs(t, y)
    while t < t_end:
        h = min(cfg.h, t_end - t)
        k1 = f
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_new = t_end if h >= t_end - t else t + h
        if t_new == t:
            raise StepUnderflow(t, np.nan, h)
        f_new = rhs(t_new, y_new)
        collector.step(t, y, f, t_new, y_new, f_new)
        n_acc += 1
        t, y, f = t_new, y_new, f_new
        if stop is not None and stop.metric(t, y) <= stop.threshold:
            return t, y, n_acc, 0, True
    return t, y, n_acc, 0, False
