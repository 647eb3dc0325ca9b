import numpy as np
import pytest

from consflow import _kernels
from consflow.constraint import build, feasible_point
from consflow.dynamics import DisturbanceSource, NetworkState, Problem, \
    gain_constant, integral_flow, make_flow, rhs_consensus, rhs_diminishing, \
    rhs_integral, rhs_with_disturbance, disturbance_value
from consflow.graph import Graph, from_neighbor_lists
from consflow.objective import ScaledSquaredNorm, Zero


def _no_constraints(m, n):
    return [build(np.zeros((0, n)), np.zeros(0)) for _ in range(m)]


def _path2(n=1, objectives=None):
    g = from_neighbor_lists([[2], [1]])
    objs = objectives or [Zero(n), Zero(n)]
    return Problem(graph=g, objectives=objs, constraints=_no_constraints(2, n), n=n)


def test_consensus_rhs_examples(rng):
    p = _path2()
    assert np.allclose(rhs_consensus(np.array([1.0, 0.0]), p), [-1.0, 1.0])
    u = rng.standard_normal(1)
    assert np.allclose(rhs_consensus(np.tile(u, 2), p), np.zeros(2), atol=1e-14)


def test_consensus_rhs_column_sums_vanish(rng):
    p, _ = _builtin5_problem()
    x = rng.standard_normal(p.dim)
    dx = rhs_consensus(x, p)
    assert np.linalg.norm(dx.reshape(p.m, p.n).sum(axis=0)) <= 1e-12


def _builtin5_problem():
    from consflow.harness import build_paper_example_5agent

    return build_paper_example_5agent(2)


def test_integral_rhs_reduces_to_consensus(rng):
    p = _path2(n=3)
    x = rng.standard_normal(6)
    s = NetworkState.initial(x)
    dx, dy = rhs_integral(s, p)
    assert np.allclose(dx, rhs_consensus(x, p), atol=1e-14)
    assert np.allclose(dy, -rhs_consensus(x, p), atol=1e-14)


def test_integral_rhs_single_agent_gradient_descent(rng):
    g = Graph(m=1, edges=frozenset())
    p = Problem(graph=g, objectives=[ScaledSquaredNorm(1.0, np.zeros(2))],
                constraints=_no_constraints(1, 2), n=2)
    x = rng.standard_normal(2)
    dx, dy = rhs_integral(NetworkState.initial(x), p)
    assert np.allclose(dx, -2.0 * x, atol=1e-14)
    assert np.array_equal(dy, np.zeros(2))


def test_integral_equilibrium_is_fixed_point(builtin5):
    from consflow.analysis import equilibrium_y_star
    from consflow.oracle import solve

    problem, config = builtin5
    x_star = solve(problem, tol=float(config["oracle"]["tol"])).x_star
    y_star = equilibrium_y_star(problem, x_star)
    state = NetworkState(x=np.tile(x_star, problem.m), y=y_star)
    dx, dy = rhs_integral(state, problem)
    assert np.linalg.norm(dx) <= 1e-8
    assert np.linalg.norm(dy) <= 1e-12


def test_diminishing_zero_gain_is_projected_consensus(rng):
    p, _ = _builtin5_problem()
    x = rng.standard_normal(p.dim)
    dx = rhs_diminishing(x, p, 1.0, gain_constant(1e-300))
    lx = -rhs_consensus(x, p)
    proj = -np.einsum("ijk,ik->ij", p._P, lx.reshape(p.m, p.n)).ravel()
    assert np.allclose(dx, proj, atol=1e-12)


def test_diminishing_unit_gain_unprojected_form(rng):
    n = 2
    c = rng.standard_normal(n)
    p = _path2(n=n, objectives=[ScaledSquaredNorm(1.0, np.zeros(n)),
                                ScaledSquaredNorm(1.0, c)])
    x = rng.standard_normal(2 * n)
    dx = rhs_diminishing(x, p, 5.0, gain_constant(1.0))
    x1, x2 = x[:n], x[n:]
    assert np.allclose(dx[:n], -(2 * x1 + (x1 - x2)), atol=1e-13)
    assert np.allclose(dx[n:], -(2 * (x2 - c) + (x2 - x1)), atol=1e-13)


def test_constant_gain_has_no_consensus_steady_state(rng):
    # at exact consensus u = 0, agent gradients do not cancel, so dx != 0
    c = rng.standard_normal(2) + 3.0
    p = _path2(n=2, objectives=[ScaledSquaredNorm(1.0, np.zeros(2)),
                                ScaledSquaredNorm(1.0, c)])
    x = np.zeros(4)
    dx = rhs_diminishing(x, p, 1.0, gain_constant(1.0))
    assert np.linalg.norm(dx) > 1.0


def test_disturbance_value_contract():
    d = DisturbanceSource(seed=5, lo=0.0, hi=0.0, hold=0.1, n=3)
    assert np.array_equal(disturbance_value(d, 0, 0.25), np.zeros(3))

    d = DisturbanceSource(seed=5, lo=0.0, hi=0.01, hold=0.1, n=3)
    assert np.array_equal(disturbance_value(d, 1, 0.05), disturbance_value(d, 1, 0.09))
    assert not np.array_equal(disturbance_value(d, 1, 0.05),
                              disturbance_value(d, 1, 0.15))
    assert not np.array_equal(disturbance_value(d, 1, 0.05),
                              disturbance_value(d, 2, 0.05))


def test_disturbance_statistics():
    d = DisturbanceSource(seed=11, lo=0.0, hi=0.01, hold=0.1, n=10)
    samples = np.concatenate([d.value_at_interval(i, k)
                              for i in range(10) for k in range(10)])
    assert samples.shape == (1000,)
    assert samples.min() >= 0.0 and samples.max() <= 0.01
    assert 0.004 <= samples.mean() <= 0.006


def test_disturbed_flow_zero_range_matches_base(rng):
    p, _ = _builtin5_problem()
    base = integral_flow(p)
    d = DisturbanceSource(seed=1, lo=0.0, hi=0.0, hold=0.1, n=p.n)
    disturbed = rhs_with_disturbance(base, d)
    z = rng.standard_normal(2 * p.dim)
    assert np.array_equal(base.rhs(0.37, z.copy()), disturbed.rhs(0.37, z.copy()))
    assert disturbed.hold == 0.1


def test_disturbed_flow_adds_outside_projection(rng):
    p, _ = _builtin5_problem()
    base = integral_flow(p)
    d = DisturbanceSource(seed=1, lo=0.5, hi=1.0, hold=0.1, n=p.n)
    disturbed = rhs_with_disturbance(base, d)
    z = rng.standard_normal(2 * p.dim)
    dz_b = base.rhs(0.0, z.copy())
    dz_d = disturbed.rhs(0.0, z.copy())
    # dy is untouched, dx gains the stacked held sample
    assert np.array_equal(dz_b[p.dim:], dz_d[p.dim:])
    v = dz_d[:p.dim] - dz_b[:p.dim]
    assert np.all(v >= 0.5) and np.all(v <= 1.0)
    # the added disturbance is generally not tangent to the constraints
    A0 = p.constraints[0].A
    assert np.linalg.norm(A0 @ v[:p.n]) > 1e-6


def test_integral_dy_in_image_of_laplacian(rng):
    p, _ = _builtin5_problem()
    s = NetworkState(x=rng.standard_normal(p.dim), y=rng.standard_normal(p.dim))
    _, dy = rhs_integral(s, p)
    assert np.linalg.norm(dy.reshape(p.m, p.n).sum(axis=0)) <= 1e-12


def test_integral_flow_tangent_at_feasible_points(rng):
    p, _ = _builtin5_problem()
    x = np.concatenate([feasible_point(c) for c in p.constraints])
    s = NetworkState(x=x, y=rng.standard_normal(p.dim))
    dx, _ = rhs_integral(s, p)
    for i, c in enumerate(p.constraints):
        assert np.linalg.norm(c.A @ dx[i * p.n:(i + 1) * p.n]) <= 1e-10


def test_integral_rhs_ignores_row_space_shifts_of_y(rng):
    p, _ = _builtin5_problem()
    s = NetworkState(x=rng.standard_normal(p.dim), y=rng.standard_normal(p.dim))
    shift = np.concatenate([c.A.T @ rng.standard_normal(c.A.shape[0])
                            for c in p.constraints])
    dx0, _ = rhs_integral(s, p)
    dx1, _ = rhs_integral(NetworkState(x=s.x, y=s.y + shift), p)
    assert np.linalg.norm(dx0 - dx1) <= 1e-12 * (1 + np.linalg.norm(dx0))


def test_rhs_deterministic_across_calls(rng):
    p, _ = _builtin5_problem()
    s = NetworkState(x=rng.standard_normal(p.dim), y=rng.standard_normal(p.dim))
    dx0, dy0 = rhs_integral(s, p)
    dx1, dy1 = rhs_integral(s, p)
    assert np.array_equal(dx0, dx1) and np.array_equal(dy0, dy1)


@pytest.mark.skipif(not _kernels.HAVE_COMPILED, reason="compiled kernels not built")
def test_backends_agree(rng):
    p, _ = _builtin5_problem()
    s = NetworkState(x=rng.standard_normal(p.dim), y=rng.standard_normal(p.dim))
    for backend_pair in [("compiled", "pure")]:
        a, b = backend_pair
        dxa, dya = rhs_integral(s, p, backend=a)
        dxb, dyb = rhs_integral(s, p, backend=b)
        scale = 1 + np.linalg.norm(dxa)
        assert np.linalg.norm(dxa - dxb) / scale <= 1e-13
        assert np.linalg.norm(dya - dyb) <= 1e-13 * (1 + np.linalg.norm(dya))
        da = rhs_diminishing(s.x, p, 2.0, gain_constant(0.5), backend=a)
        db = rhs_diminishing(s.x, p, 2.0, gain_constant(0.5), backend=b)
        assert np.linalg.norm(da - db) / (1 + np.linalg.norm(da)) <= 1e-13
        ca = rhs_consensus(s.x, p, backend=a)
        cb = rhs_consensus(s.x, p, backend=b)
        assert np.linalg.norm(ca - cb) / (1 + np.linalg.norm(ca)) <= 1e-13


def test_make_flow_selection():
    p, _ = _builtin5_problem()
    assert make_flow(p, "integral").has_y
    assert not make_flow(p, "consensus").has_y
    assert make_flow(p, "diminishing").kind == "diminishing"
    with pytest.raises(ValueError):
        make_flow(p, "unknown")
