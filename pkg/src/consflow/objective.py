"""Per-agent convex objectives with analytic values and gradients.

The objective families are a closed enumeration: scaled squared norm,
entrywise exponential sum, quartic norm, linear, and zero. Analytic
gradients exist for every family, so no autodiff is needed; a central
finite-difference gradient is provided as an independent test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

# form codes used by the flow kernels
FORM_ZERO = 0
FORM_SCALED_SQUARED_NORM = 1
FORM_EXP_SUM = 2
FORM_QUARTIC_NORM = 3
FORM_LINEAR = 4


@dataclass(frozen=True)
class ScaledSquaredNorm:
    """f(x) = w * ||x - c||^2 with w > 0."""

    weight: float
    center: np.ndarray

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError(f"weight must be positive, got {self.weight}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def value(self, x: np.ndarray) -> float:
        r = x - self.center
        return self.weight * float(r @ r)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * self.weight * (x - self.center)


@dataclass(frozen=True)
class ExpSum:
    """f(x) = sum_k exp(a * x[k])."""

    coef: float
    n: int

    @property
    def dim(self) -> int:
        return self.n

    def value(self, x: np.ndarray) -> float:
        return float(np.sum(np.exp(self.coef * x)))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.coef * np.exp(self.coef * x)


@dataclass(frozen=True)
class QuarticNorm:
    """f(x) = ||x - c||^4; smooth everywhere, gradient exactly 0 at c."""

    center: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def value(self, x: np.ndarray) -> float:
        r = x - self.center
        return float(r @ r) ** 2

    def gradient(self, x: np.ndarray) -> np.ndarray:
        r = x - self.center
        return 4.0 * float(r @ r) * r


@dataclass(frozen=True)
class Linear:
    """f(x) = g . x."""

    slope: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "slope", np.asarray(self.slope, dtype=float))

    @property
    def dim(self) -> int:
        return self.slope.shape[0]

    def value(self, x: np.ndarray) -> float:
        return float(self.slope @ x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.slope.copy()


@dataclass(frozen=True)
class Zero:
    """f(x) = 0."""

    n: int

    @property
    def dim(self) -> int:
        return self.n

    def value(self, x: np.ndarray) -> float:
        return 0.0

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.n)


ObjectiveSpec = ScaledSquaredNorm | ExpSum | QuarticNorm | Linear | Zero

# objectives whose aggregate is quadratic, enabling a direct KKT solve
QUADRATIC_FORMS = (ScaledSquaredNorm, Linear, Zero)


def _check_dim(spec: ObjectiveSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise DimensionMismatch(f"expected shape ({spec.dim},), got {x.shape}")
    return x


def value(spec: ObjectiveSpec, x: np.ndarray) -> float:
    return spec.value(_check_dim(spec, x))


def gradient(spec: ObjectiveSpec, x: np.ndarray) -> np.ndarray:
    return spec.gradient(_check_dim(spec, x))


def finite_diff_gradient(spec: ObjectiveSpec, x: np.ndarray, h: float) -> np.ndarray:
    """Central difference (f(x + h e_k) - f(x - h e_k)) / (2h), per coordinate."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        g[k] = (spec.value(xp) - spec.value(xm)) / (2.0 * h)
    return g


def sum_gradient(specs, x: np.ndarray) -> np.ndarray:
    """Gradient of the aggregate F(x) = sum_i f_i(x) at a common point x."""
    total = np.zeros_like(np.asarray(x, dtype=float))
    for spec in specs:
        total += gradient(spec, x)
    return total


def sum_value(specs, x: np.ndarray) -> float:
    """Aggregate F(x) = sum_i f_i(x)."""
    return sum(value(spec, x) for spec in specs)


def pack_forms(specs, n: int):
    """Flatten specs into (codes, scal, vecs) arrays consumed by the kernels.

    codes[i] is the form tag; scal[i] carries the weight (squared norm) or
    exponent coefficient; vecs[i] carries the center or slope vector.
    """
    m = len(specs)
    codes = np.zeros(m, dtype=np.int32)
    scal = np.zeros(m)
    vecs = np.zeros((m, n))
    for i, spec in enumerate(specs):
        if spec.dim != n:
            raise DimensionMismatch(f"objective {i} has dim {spec.dim}, expected {n}")
        if isinstance(spec, Zero):
            codes[i] = FORM_ZERO
        elif isinstance(spec, ScaledSquaredNorm):
            codes[i] = FORM_SCALED_SQUARED_NORM
            scal[i] = spec.weight
            vecs[i] = spec.center
        elif isinstance(spec, ExpSum):
            codes[i] = FORM_EXP_SUM
            scal[i] = spec.coef
        elif isinstance(spec, QuarticNorm):
            codes[i] = FORM_QUARTIC_NORM
            vecs[i] = spec.center
        elif isinstance(spec, Linear):
            codes[i] = FORM_LINEAR
            vecs[i] = spec.slope
        else:
            raise TypeError(f"unknown objective form: {type(spec).__name__}")
    return codes, scal, vecs


_FORM_NAMES = {
    "zero": Zero,
    "scaled_squared_norm": ScaledSquaredNorm,
    "exp_sum": ExpSum,
    "quartic_norm": QuarticNorm,
    "linear": Linear,
}


def spec_from_dict(d: dict, n: int) -> ObjectiveSpec:
    """Construct an objective from its config-file description."""
    kind = d["form"]
    if kind == "zero":
        return Zero(n=n)
    if kind == "scaled_squared_norm":
        center = np.asarray(d.get("center", np.zeros(n)), dtype=float)
        return ScaledSquaredNorm(weight=float(d.get("weight", 1.0)), center=center)
    if kind == "exp_sum":
        return ExpSum(coef=float(d["coef"]), n=n)
    if kind == "quartic_norm":
        return QuarticNorm(center=np.asarray(d["center"], dtype=float))
    if kind == "linear":
        return Linear(slope=np.asarray(d["slope"], dtype=float))
    raise ValueError(f"unknown objective form {kind!r}")


def spec_to_dict(spec: ObjectiveSpec) -> dict:
    if isinstance(spec, Zero):
        return {"form": "zero"}
    if isinstance(spec, ScaledSquaredNorm):
        return {
            "form": "scaled_squared_norm",
            "weight": spec.weight,
            "center": spec.center.tolist(),
        }
    if isinstance(spec, ExpSum):
        return {"form": "exp_sum", "coef": spec.coef}
    if isinstance(spec, QuarticNorm):
        return {"form": "quartic_norm", "center": spec.center.tolist()}
    if isinstance(spec, Linear):
        return {"form": "linear", "slope": spec.slope.tolist()}
    raise TypeError(f"unknown objective form: {type(spec).__name__}")
