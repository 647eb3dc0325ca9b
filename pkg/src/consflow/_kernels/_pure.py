"""Pure numpy implementations of the flow right-hand-side kernels.

This is the fallback backend when the compiled extension is unavailable,
and the reference the extension is checked against. All state vectors are
flat (m*n,) stacks; L is the (m, m) Laplacian (the (mn, mn) lift is never
materialized here), P is the (m, n, n) stack of per-agent projectors, and
(codes, scal, vecs) is the packed objective description.
"""

import numpy as np

NAME = "pure"

_ZERO = 0
_SSN = 1
_EXP = 2
_QUARTIC = 3
_LINEAR = 4


def gradient_stack(x, codes, scal, vecs):
    """Stacked per-agent gradient col{grad f_1(x_1), ..., grad f_m(x_m)}."""
    m, n = vecs.shape
    X = x.reshape(m, n)
    G = np.zeros((m, n))
    for code in np.unique(codes):
        idx = codes == code
        if code == _SSN:
            G[idx] = 2.0 * scal[idx, None] * (X[idx] - vecs[idx])
        elif code == _EXP:
            a = scal[idx, None]
            G[idx] = a * np.exp(a * X[idx])
        elif code == _QUARTIC:
            r = X[idx] - vecs[idx]
            G[idx] = 4.0 * np.sum(r * r, axis=1, keepdims=True) * r
        elif code == _LINEAR:
            G[idx] = vecs[idx]
    return G.ravel()


def consensus_rhs(x, L, n):
    """dx = -(L (x) I_n) x, computed as -L X row-block-wise."""
    m = L.shape[0]
    X = x.reshape(m, n)
    return -(L @ X).ravel()


def integral_rhs(x, y, L, P, codes, scal, vecs):
    """dx = -P(grad f(x) + Lbar x + y); dy = Lbar x."""
    m, n = vecs.shape
    X = x.reshape(m, n)
    LX = L @ X
    G = gradient_stack(x, codes, scal, vecs).reshape(m, n)
    W = G + LX + y.reshape(m, n)
    dx = -np.einsum("ijk,ik->ij", P, W)
    return dx.ravel(), LX.ravel()


def diminishing_rhs(x, alpha, L, P, codes, scal, vecs):
    """dx = -P(alpha * grad f(x) + Lbar x) for the baseline flow."""
    m, n = vecs.shape
    X = x.reshape(m, n)
    LX = L @ X
    G = gradient_stack(x, codes, scal, vecs).reshape(m, n)
    W = alpha * G + LX
    return -np.einsum("ijk,ik->ij", P, W).ravel()
