import numpy as np
import pytest

from consflow import _kernels
from consflow.objective import gradient, pack_forms


def test_backend_selection(monkeypatch):
    assert _kernels.get("pure").NAME == "pure"
    monkeypatch.setenv("CONSFLOW_PURE", "1")
    assert _kernels.active().NAME == "pure"
    monkeypatch.delenv("CONSFLOW_PURE")
    if _kernels.HAVE_COMPILED:
        assert _kernels.active().NAME == "compiled"
        assert _kernels.get("compiled").NAME == "compiled"
    with pytest.raises(ValueError):
        _kernels.get("gpu")


def test_pure_gradient_stack_matches_specs(builtin5, rng):
    problem, _ = builtin5
    codes, scal, vecs = pack_forms(problem.objectives, problem.n)
    x = rng.standard_normal(problem.dim)
    stacked = _kernels.get("pure").gradient_stack(x, codes, scal, vecs)
    for i, spec in enumerate(problem.objectives):
        xi = x[i * problem.n:(i + 1) * problem.n]
        assert np.allclose(stacked[i * problem.n:(i + 1) * problem.n],
                           gradient(spec, xi), atol=1e-13)


@pytest.mark.skipif(not _kernels.HAVE_COMPILED, reason="compiled kernels not built")
def test_compiled_gradient_stack_matches_pure(builtin5, rng):
    problem, _ = builtin5
    codes, scal, vecs = pack_forms(problem.objectives, problem.n)
    for _ in range(10):
        x = rng.standard_normal(problem.dim)
        a = _kernels.get("compiled").gradient_stack(x, codes, scal, vecs)
        b = _kernels.get("pure").gradient_stack(x, codes, scal, vecs)
        assert np.linalg.norm(a - b) <= 1e-13 * (1 + np.linalg.norm(b))
