import math

import numpy as np
import pytest

from glebench.coupling import (CoupledPair, check_lambda, control_u0, coupled_step, coupling_cost_bound,
                               default_lambda, difference_envelope, difference_ode_exact,
                               exponential_tail_diagnostic, run_coupling_experiment, wilson_interval)
from glebench.data import State
from glebench.dynamics import SimConfig
from glebench.enums import RegimeTag
from glebench.kernel import KernelSpec, build_modes


@pytest.fixture
def coupling_sim():
    return SimConfig(m=1.0, gamma=1.0, dt=0.001, t_final=2.0, seed=7, thin_stride=100)


def _pair(n_modes, xbar=1.0):
    primary = State(1.0, 0.0, np.zeros(n_modes))
    return primary, State(1.0 - xbar, 0.0, np.zeros(n_modes))


def test_control_u0(harmonic, three_modes):
    primary, shifted = _pair(3)
    u0 = control_u0(primary, shifted, three_modes, harmonic, 1.0, 1.0, 2.0)
    assert u0 == pytest.approx(7 / math.sqrt(2))


def test_control_requires_drag(harmonic, three_modes):
    primary, shifted = _pair(3)
    with pytest.raises(RuntimeError):
        control_u0(primary, shifted, three_modes, harmonic, 1.0, 0.0, 2.0)


def test_control_rate(diffusive_modes):
    assert default_lambda(diffusive_modes) == 2.0
    assert check_lambda(diffusive_modes, 2.0) == 2.0
    with pytest.raises(RuntimeError):
        check_lambda(diffusive_modes, 0.5)
    with pytest.raises(RuntimeError):
        check_lambda(diffusive_modes, 1.0)


def test_closed_form_position():
    modes = build_modes(KernelSpec(3.0, 3.0, 5))
    solution = difference_ode_exact(1.0, 0.0, np.zeros(5), modes, 2.0, 1.0)
    assert solution.xbar == pytest.approx(2 * math.exp(-2) - math.exp(-4))
    assert solution.xbar == pytest.approx(0.252355, abs=1e-6)
    assert solution.vbar == pytest.approx(-4 * math.exp(-2) + 4 * math.exp(-4))
    assert solution.full_norm ** 2 == pytest.approx(solution.xbar ** 2 + solution.vbar ** 2
                                                    + solution.zbar_norm ** 2)


def test_closed_form_at_zero(contracting_modes):
    zbar0 = np.linspace(0.1, 0.5, 50)
    solution = difference_ode_exact(0.3, -0.2, zbar0, contracting_modes, 2.0, 0.0)
    assert solution.xbar == pytest.approx(0.3)
    assert solution.vbar == pytest.approx(-0.2)
    assert solution.zbar == pytest.approx(zbar0)
    with pytest.raises(RuntimeError):
        difference_ode_exact(0.3, -0.2, zbar0, contracting_modes, 2.0, -1.0)


def test_difference_envelope(contracting_modes):
    c1, c2 = difference_envelope(0.7, -1.3, 2.0)
    for t in np.linspace(0, 10, 101):
        solution = difference_ode_exact(0.7, -1.3, np.zeros(50), contracting_modes, 2.0, float(t))
        assert abs(solution.xbar) <= c1 * math.exp(-2.0 * t) + 1e-12
        assert abs(solution.vbar) <= c2 * math.exp(-2.0 * t) + 1e-12


def test_coupled_step_stops_on_budget(harmonic, three_modes, sim_config, rng):
    primary, shifted = _pair(3)
    pair = CoupledPair.start(primary, shifted, 2.0, 1e-6)
    assert pair.shifted_state.x == pytest.approx(0.0)
    advanced = coupled_step(pair, three_modes, harmonic, sim_config, rng)
    assert advanced.stopped
    assert advanced.stop_time == pytest.approx(sim_config.dt)
    assert advanced.girsanov_cost == pytest.approx(24.5 * sim_config.dt)
    again = coupled_step(advanced, three_modes, harmonic, sim_config, rng)
    assert again.stopped
    assert again.girsanov_cost == advanced.girsanov_cost
    assert again.stop_time == advanced.stop_time


def test_coupled_step_cancels_noise(harmonic, three_modes, sim_config):
    primary, shifted = _pair(3)
    pair = CoupledPair.start(primary, shifted, 2.0, 1e6)
    first = coupled_step(pair, three_modes, harmonic, sim_config, np.random.default_rng(1))
    second = coupled_step(pair, three_modes, harmonic, sim_config, np.random.default_rng(2))
    assert first.primary_state.x != second.primary_state.x
    assert first.difference.x == pytest.approx(second.difference.x, abs=1e-12)
    assert first.difference.v == pytest.approx(second.difference.v, abs=1e-12)


def test_identical_copies_cost_nothing(harmonic, contracting_modes, coupling_sim):
    start = State(0.5, 0.1, np.zeros(50))
    report = run_coupling_experiment(start, start.copy(), contracting_modes, harmonic, coupling_sim, 2.0, 1.0,
                                     n_runs=2)
    assert report.runs["cost"].tolist() == [0.0, 0.0]
    assert report.runs["final_norm"].tolist() == [0.0, 0.0]
    assert report.never_stopped_fraction == 1.0


def test_simulated_difference_follows_closed_form(harmonic, contracting_modes, coupling_sim):
    primary, shifted = _pair(50)
    report = run_coupling_experiment(primary, shifted, contracting_modes, harmonic, coupling_sim, 2.0, 1e6)
    curve = report.curves[report.curves["run"] == 0]
    at_one = curve[np.isclose(curve["t"], 1.0)]["xbar"].iloc[0]
    assert at_one == pytest.approx(2 * math.exp(-2) - math.exp(-4), abs=10 * coupling_sim.dt)
    assert report.regime == RegimeTag.DIFFUSIVE
    assert not report.runs["stopped"].iloc[0]


def test_contraction(harmonic, contracting_modes):
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.001, t_final=10.0, seed=7, thin_stride=1000)
    primary, shifted = _pair(50)
    report = run_coupling_experiment(primary, shifted, contracting_modes, harmonic, cfg, 2.0, 1e6, n_runs=2)
    assert (report.runs["ratio"] < 1e-2).all()
    assert report.runs["ratio"].iloc[0] == pytest.approx(report.runs["ratio"].iloc[1], rel=1e-6)
    assert report.curves["norm"].iloc[-1] < report.curves["norm"].iloc[0]
    summary = report.summary()
    assert summary["n_runs"] == 2
    assert summary["max_ratio"] < 1e-2


def test_automatic_budget(harmonic, contracting_modes, coupling_sim):
    primary, shifted = _pair(50)
    report = run_coupling_experiment(primary, shifted, contracting_modes, harmonic, coupling_sim, kappa="auto")
    assert report.lambda_ctrl == 2.0
    assert report.kappa == pytest.approx(report.cost_bound.kappa_auto)
    assert report.cost_bound.kappa_auto == pytest.approx(2 * report.cost_bound.total)


def test_contraction_with_automatic_budget(harmonic, contracting_modes):
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.001, t_final=10.0, seed=7, thin_stride=1000)
    primary, shifted = _pair(50)
    report = run_coupling_experiment(primary, shifted, contracting_modes, harmonic, cfg, 2.0, "auto", n_runs=4,
                                     record_stride=100)
    assert report.regime == RegimeTag.DIFFUSIVE
    assert report.kappa == pytest.approx(report.cost_bound.kappa_auto)
    assert not report.runs["stopped"].any()
    assert (report.runs["cost"] < report.kappa).all()
    assert (report.runs["ratio"] < 1e-2).all()
    assert report.never_stopped_fraction == 1.0
    curve = report.curves[report.curves["run"] == 0]
    at_one = curve[np.isclose(curve["t"], 1.0)]["xbar"].iloc[0]
    assert at_one == pytest.approx(0.252355, abs=10 * cfg.dt)


def test_slow_modes_follow_closed_form(harmonic, diffusive_modes):
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.001, t_final=10.0, seed=7, thin_stride=1000)
    primary, shifted = _pair(50)
    report = run_coupling_experiment(primary, shifted, diffusive_modes, harmonic, cfg, kappa="auto")
    exact = difference_ode_exact(1.0, 0.0, np.zeros(50), diffusive_modes, 2.0, 10.0)
    assert not report.runs["stopped"].iloc[0]
    assert report.runs["final_norm"].iloc[0] == pytest.approx(exact.full_norm, rel=0.05)
    assert exact.zbar_norm > abs(exact.xbar) + abs(exact.vbar)
    curve = report.curves[report.curves["run"] == 0]
    assert np.all(np.diff(curve[curve["t"] >= 2.0]["norm"].to_numpy()) < 0)


@pytest.mark.slow
def test_double_well_survival(double_well, diffusive_modes):
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.01, t_final=20.0, seed=11, thin_stride=100)
    primary, shifted = _pair(50)
    report = run_coupling_experiment(primary, shifted, diffusive_modes, double_well, cfg, kappa="auto",
                                     n_runs=200, cpu_count=-1)
    assert report.cost_bound.functional == "theta"
    assert len(report.runs) == 200
    assert report.never_stopped_fraction > 0
    low, high = report.confidence_interval
    assert 0 < low <= report.never_stopped_fraction <= high
    assert report.summary()["confidence_interval"] == [low, high]



def test_coupling_outside_diffusive_regime_warns(harmonic, three_modes, coupling_sim):
    primary, shifted = _pair(3)
    with pytest.warns(UserWarning):
        report = run_coupling_experiment(primary, shifted, three_modes, harmonic, coupling_sim, 2.0, 1e6)
    assert report.regime == RegimeTag.CRITICAL
    assert report.cost_bound.functional == "psi"


def test_cost_bound(double_well, contracting_modes):
    primary, shifted = _pair(50, xbar=0.5)
    bound = coupling_cost_bound(primary, primary - shifted, contracting_modes, double_well, 1.0, 1.0, 2.0)
    assert bound.functional == "theta"
    assert bound.total == pytest.approx(bound.control_term + bound.memory_term + bound.kernel_term
                                        + bound.force_term)
    assert bound.C1 == pytest.approx(1.5)
    assert bound.C2 == pytest.approx(4.0)
    assert bound.total > 0
    assert bound.to_dict()["kappa_auto"] == pytest.approx(2 * bound.total)


def test_cost_bound_vanishes_without_difference(harmonic, contracting_modes):
    start = State(0.5, 0.1, np.zeros(50))
    bound = coupling_cost_bound(start, State.zeros(50), contracting_modes, harmonic, 1.0, 1.0, 2.0)
    assert bound.total == 0.0


def test_wilson_interval():
    low, high = wilson_interval(0, 10)
    assert low == pytest.approx(0.0, abs=1e-12)
    assert high == pytest.approx(1.96 ** 2 / (10 + 1.96 ** 2), abs=1e-3)
    low, high = wilson_interval(5, 10)
    assert low < 0.5 < high
    assert 0.5 - low == pytest.approx(high - 0.5)


def test_tail_diagnostic(harmonic, three_modes):
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.01, t_final=2.0, seed=3)
    diagnostic = exponential_tail_diagnostic(State(0.5, 0.0, np.zeros(3)), three_modes, harmonic, cfg, 64)
    assert list(diagnostic.table.columns) == ["r", "exceedance"]
    assert np.all(np.diff(diagnostic.table["exceedance"].to_numpy()) <= 0)
    assert diagnostic.functional == "psi"
    assert len(diagnostic.samples) == 64
    with pytest.raises(RuntimeError):
        exponential_tail_diagnostic(State(0.5, 0.0, np.zeros(3)), three_modes, harmonic, cfg, 64, eta=0.0)
