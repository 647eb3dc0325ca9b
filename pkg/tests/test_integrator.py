import numpy as np
import pytest

from consflow.dynamics import Flow, integral_flow
from consflow.errors import StepUnderflow
from consflow.integrator import IntegratorConfig, StopRule, integrate, \
    integrate_to_convergence


def exp_decay(t, y):
    return -y


def test_exponential_accuracy():
    cfg = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12)
    traj = integrate(exp_decay, np.array([1.0]), (0.0, 1.0), cfg)
    assert abs(traj.final_state[0] - np.exp(-1.0)) <= 1e-8


def test_harmonic_oscillator_period():
    def rhs(t, y):
        return np.array([y[1], -y[0]])

    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
    traj = integrate(rhs, np.array([1.0, 0.0]), (0.0, 2 * np.pi), cfg)
    assert np.linalg.norm(traj.final_state - np.array([1.0, 0.0])) <= 1e-6
    energy = traj.states[:, 0] ** 2 + traj.states[:, 1] ** 2
    assert np.max(np.abs(energy - 1.0)) <= 1e-7


def test_rk4_matches_rk45_on_network_flow(builtin5):
    problem, config = builtin5
    from consflow.constraint import randomize_feasible

    x0 = np.concatenate([randomize_feasible(c, [2, 5, i], 1.0)
                         for i, c in enumerate(problem.constraints)])
    z0 = np.concatenate([x0, np.zeros_like(x0)])
    flow = integral_flow(problem)
    adaptive = integrate(flow, z0, (0.0, 10.0),
                         IntegratorConfig(method="rk45", rel_tol=1e-10, abs_tol=1e-12))
    fixed = integrate(flow, z0, (0.0, 10.0),
                      IntegratorConfig(method="rk4", h=0.002))
    assert np.linalg.norm(adaptive.final_state - fixed.final_state) <= 1e-6


def test_convergence_stop_on_analytic_decay():
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-13)
    rule = StopRule(metric=lambda t, y: abs(y[0]), threshold=1e-6, t_max=50.0)
    traj = integrate_to_convergence(exp_decay, np.array([1.0]), cfg, rule)
    assert traj.stop_reason == "threshold"
    assert abs(traj.t_final - 6 * np.log(10.0)) <= 0.5


def test_convergence_stop_immediate():
    cfg = IntegratorConfig()
    rule = StopRule(metric=lambda t, y: abs(y[0]), threshold=1.0, t_max=10.0)
    traj = integrate_to_convergence(exp_decay, np.array([0.5]), cfg, rule)
    assert traj.stop_reason == "threshold"
    assert traj.t_final == 0.0
    assert traj.n_accepted == 0


def test_convergence_stop_t_max():
    cfg = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10)
    rule = StopRule(metric=lambda t, y: abs(y[0]), threshold=1e-12, t_max=2.0)
    traj = integrate_to_convergence(exp_decay, np.array([1.0]), cfg, rule)
    assert traj.stop_reason == "t_max"
    assert traj.t_final == pytest.approx(2.0)


def test_convergence_stop_t_max_on_disturbed_run(builtin5):
    from consflow.dynamics import DisturbanceSource, integral_flow, \
        rhs_with_disturbance
    from consflow.constraint import randomize_feasible
    from consflow.metrics import w_metric

    problem, _ = builtin5
    x0 = np.concatenate([randomize_feasible(c, [2, 5, i], 1.0)
                         for i, c in enumerate(problem.constraints)])
    d = DisturbanceSource(seed=9, lo=0.0, hi=0.01, hold=0.1, n=problem.n)
    flow = rhs_with_disturbance(integral_flow(problem), d)
    cfg = IntegratorConfig(rel_tol=1e-7, abs_tol=1e-10)
    rule = StopRule(metric=lambda t, z: w_metric(z[:problem.dim], np.zeros(problem.n)),
                    threshold=1e-300, t_max=2.0)
    traj = integrate_to_convergence(flow, np.concatenate([x0, 0 * x0]), cfg, rule)
    assert traj.stop_reason == "t_max"
    assert traj.t_final == pytest.approx(2.0)


def test_rk4_order_via_step_halving():
    # reference from a much tighter adaptive run
    ref = integrate(exp_decay, np.array([1.0]), (0.0, 1.0),
                    IntegratorConfig(rel_tol=1e-13, abs_tol=1e-15)).final_state[0]
    err = []
    for h in (0.1, 0.05):
        out = integrate(exp_decay, np.array([1.0]), (0.0, 1.0),
                        IntegratorConfig(method="rk4", h=h)).final_state[0]
        err.append(abs(out - ref))
    ratio = err[0] / err[1]
    assert 12.0 <= ratio <= 20.0


def test_determinism():
    cfg = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12,
                           samples=np.linspace(0, 1, 50))
    t1 = integrate(exp_decay, np.array([1.0]), (0.0, 1.0), cfg)
    t2 = integrate(exp_decay, np.array([1.0]), (0.0, 1.0), cfg)
    assert np.array_equal(t1.t, t2.t)
    assert np.array_equal(t1.states, t2.states)


def test_dense_output_interpolation_error():
    rel = 1e-8
    cfg = IntegratorConfig(rel_tol=rel, abs_tol=1e-12,
                           samples=np.linspace(0.0, 1.0, 197))
    traj = integrate(exp_decay, np.array([1.0]), (0.0, 1.0), cfg)
    exact = np.exp(-traj.t)
    assert np.max(np.abs(traj.states[:, 0] - exact)) <= 10 * rel


def test_sample_grid_respected():
    grid = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    cfg = IntegratorConfig(samples=grid)
    traj = integrate(exp_decay, np.array([1.0]), (0.0, 1.0), cfg)
    assert np.array_equal(traj.t, grid)


def test_final_state_always_sampled():
    grid = np.array([0.0, 0.4])
    cfg = IntegratorConfig(samples=grid)
    traj = integrate(exp_decay, np.array([1.0]), (0.0, 1.0), cfg)
    assert traj.t[-1] == 1.0


def test_step_underflow():
    def rough(t, y):
        return np.array([np.sign(np.sin(50.0 / max(t, 1e-9)))])

    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, h_min=1e-2, h_max=0.5)
    with pytest.raises(StepUnderflow):
        integrate(rough, np.array([0.0]), (0.0, 1.0), cfg)


def test_boundary_alignment_integrates_piecewise_constant_exactly():
    # derivative jumps at integer times; aligned segments integrate it exactly
    def segment(k):
        val = float(k + 1)

        def rhs(t, y):
            return np.array([val])

        return rhs

    flow = Flow(rhs=lambda t, y: segment(int(np.floor(t)))(t, y),
                dim=1, x_dim=1, kind="test", problem=None,
                hold=1.0, segment=segment)
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, align_boundaries=True)
    traj = integrate(flow, np.array([0.0]), (0.0, 3.5), cfg)
    # integral of (1, 2, 3, 4) over (1, 1, 1, 0.5) seconds
    assert abs(traj.final_state[0] - 8.0) <= 1e-12
    assert traj.n_rejected == 0


def test_invalid_configs():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=-1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(samples=np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        StopRule(metric=lambda t, y: 0.0, threshold=0.0, t_max=1.0)
    with pytest.raises(ValueError):
        integrate(exp_decay, np.array([1.0]), (1.0, 0.0), IntegratorConfig())
