from dataclasses import replace

import numpy as np
import pytest
from pandas.testing import assert_frame_equal
from pandera.errors import SchemaErrors

from glebench.data import State
from glebench.dynamics import (BlowUpError, SimConfig, cutoff_theta, drift, force, init_state, propagate, simulate,
                                step)
from glebench.ensemble import FromPoint, merge, run_ensemble, simulate_block
from glebench.enums import Scheme
from glebench.kernel import KernelSpec, ModeSet, build_modes
from glebench.potential import DoubleWell, Harmonic, Zero
from glebench.streams import trajectory_streams


def test_drift(harmonic):
    modes = build_modes(KernelSpec(1.0, 2.0, 2))
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.01, t_final=1.0, seed=0)
    increments = drift(State(0.0, 1.0, np.zeros(2)), modes, harmonic, cfg)
    assert increments.x == pytest.approx(1.0)
    assert increments.v == pytest.approx(-1.0)
    assert increments.z == pytest.approx([1.0, 0.35355], abs=1e-5)


def test_drift_rejects_dimension_mismatch(harmonic, three_modes, sim_config):
    with pytest.raises(RuntimeError):
        drift(State.zeros(2), three_modes, harmonic, sim_config)


def test_cutoff(harmonic):
    assert cutoff_theta(np.array([0.0, 1.0, 2.0, 5.0]), 1.0) == pytest.approx([1.0, 1.0, 0.0, 0.0])
    assert force(np.array([5.0, 0.5]), harmonic, 1.0) == pytest.approx([0.0, 0.5])
    assert force(np.array([5.0]), harmonic, None) == pytest.approx([5.0])
    theta = cutoff_theta(np.linspace(0, 3, 301), 1.0)
    assert np.all(np.diff(theta) <= 0)


def test_init_state_is_seeded():
    first = init_state(1.0, 2.0, 5, 4)
    second = init_state(1.0, 2.0, 5, 4)
    assert first.x == 1.0 and first.v == 2.0
    assert first.z.shape == (4,)
    assert np.array_equal(first.z, second.z)
    with pytest.raises(RuntimeError):
        init_state(0.0, 0.0, 5, 0)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_free_motion(scheme):
    modes = ModeSet(np.array([0.0]), np.array([0.0]))
    cfg = SimConfig(m=1.0, gamma=0.0, dt=0.01, t_final=1.0, seed=1, scheme=scheme, thermal_noise=False)
    trajectory = simulate(0.5, 2.0, modes, Zero(), cfg, s=0.6)
    assert trajectory.table["x"].to_numpy() == pytest.approx(0.5 + 2.0 * trajectory.times)
    assert trajectory.table["v"].to_numpy() == pytest.approx(np.full(len(trajectory), 2.0))


def test_single_step_trajectory(harmonic, three_modes, sim_config):
    cfg = replace(sim_config, t_final=1.5 * sim_config.dt)
    trajectory = simulate(0.0, 0.0, three_modes, harmonic, cfg)
    assert len(trajectory) == 2
    assert trajectory.times == pytest.approx([0.0, sim_config.dt])
    assert list(trajectory.table.columns) == ["t", "x", "v", "z1", "z2", "z3"]
    trajectory.validate()


def test_simulate_is_deterministic(double_well, diffusive_modes, sim_config):
    first = simulate(0.3, -0.2, diffusive_modes, double_well, sim_config)
    second = simulate(0.3, -0.2, diffusive_modes, double_well, sim_config)
    assert_frame_equal(first.table, second.table)
    assert first.sup_norm == second.sup_norm
    assert first.seed_used == 42


def test_seed_changes_path(harmonic, three_modes, sim_config):
    first = simulate(0.0, 0.0, three_modes, harmonic, sim_config)
    second = simulate(0.0, 0.0, three_modes, harmonic, replace(sim_config, seed=43))
    assert not np.array_equal(first.table["x"].to_numpy(), second.table["x"].to_numpy())


def test_path_does_not_depend_on_s(harmonic, diffusive_modes, sim_config):
    first = simulate(0.1, 0.0, diffusive_modes, harmonic, sim_config, s=0.6)
    second = simulate(0.1, 0.0, diffusive_modes, harmonic, sim_config, s=0.7)
    assert_frame_equal(first.table, second.table)
    assert first.sup_norm != second.sup_norm


def test_inactive_cutoff_leaves_path_unchanged(harmonic, diffusive_modes, sim_config):
    plain = simulate(0.1, 0.0, diffusive_modes, harmonic, sim_config)
    cut = simulate(0.1, 0.0, diffusive_modes, harmonic, replace(sim_config, cutoff_R=100.0))
    assert_frame_equal(plain.table, cut.table)


def test_thin_stride(harmonic, three_modes, sim_config):
    trajectory = simulate(0.0, 0.0, three_modes, harmonic, replace(sim_config, thin_stride=10), record_modes=False)
    assert len(trajectory) == 11
    assert list(trajectory.table.columns) == ["t", "x", "v"]
    assert trajectory.times[-1] == pytest.approx(1.0)


def test_propagate_records_requested_steps(harmonic, three_modes, sim_config):
    initial = State.zeros(3, batch_size=2)
    result = propagate(initial, three_modes, harmonic, sim_config, trajectory_streams(42, [0, 1]),
                       record_steps=np.array([0, 7, 7, 100]), mode_columns=[2])
    assert result.times == pytest.approx([0.0, 0.07, 0.07, 1.0])
    assert result.x.shape == (4, 2)
    assert result.v.shape == (4, 2)
    assert result.z.shape == (4, 2, 1)
    assert np.array_equal(result.x[1], result.x[2])
    assert np.array_equal(result.x[-1], result.final.x)
    assert np.array_equal(result.z[-1, :, 0], result.final.z[:, 2])


def test_propagate_drops_unreached_records(harmonic, three_modes, sim_config):
    result = propagate(State.zeros(3, batch_size=1), three_modes, harmonic, sim_config,
                       trajectory_streams(42, [0]), record_steps=np.array([0, 50, 500]), mode_columns=[])
    assert result.times == pytest.approx([0.0, 0.5])
    assert result.x.shape == (2, 1)
    assert result.z.shape == (2, 1, 0)


def test_validate_rejects_non_finite_values(harmonic, three_modes, sim_config):
    trajectory = simulate(0.0, 0.0, three_modes, harmonic, sim_config)
    trajectory.table.loc[3, "z2"] = np.inf
    with pytest.raises(RuntimeError, match="Can't validate trajectory with seed 42") as error:
        trajectory.validate()
    assert isinstance(error.value.__cause__, SchemaErrors)


def test_validate_rejects_repeated_times(harmonic, three_modes, sim_config):
    trajectory = simulate(0.0, 0.0, three_modes, harmonic, sim_config, record_modes=False)
    trajectory.table.loc[5, "t"] = trajectory.table.loc[4, "t"]
    with pytest.raises(RuntimeError):
        trajectory.validate()



@pytest.mark.parametrize("changes", [{"dt": 1.5, "t_final": 10.0, "scheme": Scheme.EULER_MARUYAMA},
                                     {"dt": 2.0}, {"m": 0.0}, {"gamma": -1.0}, {"thin_stride": 0},
                                     {"cutoff_R": -1.0}, {"seed": -1}])
def test_invalid_settings(sim_config, changes):
    with pytest.raises(RuntimeError):
        replace(sim_config, **changes).validate()


def test_splitting_accepts_large_step(sim_config):
    replace(sim_config, dt=1.5, t_final=10.0).validate()


def test_blow_up_is_reported(three_modes):
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.5, t_final=50.0, seed=0, scheme=Scheme.EULER_MARUYAMA)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(BlowUpError) as error:
            simulate(50.0, 0.0, three_modes, DoubleWell(1.0, 1.0), cfg)
    assert error.value.trajectories == [0]
    assert error.value.step >= 1


def test_step_requires_noise_source(harmonic, three_modes, sim_config):
    with pytest.raises(RuntimeError):
        step(State.zeros(3), three_modes, harmonic, sim_config)


def test_step_batch(harmonic, three_modes, sim_config, rng):
    advanced = step(State.zeros(3, batch_size=4), three_modes, harmonic, sim_config, rng=rng)
    assert advanced.batch_size == 4
    assert advanced.is_finite()


def test_ornstein_uhlenbeck_stationary_variance():
    modes = ModeSet(np.array([0.0]), np.array([1.0]))
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.1, t_final=10000.0, seed=11)
    trajectory = simulate(0.0, 0.0, modes, Harmonic(1.0), cfg, s=0.6)
    assert np.var(trajectory.table["z1"].to_numpy()) == pytest.approx(1.0, abs=0.1)
    assert np.var(trajectory.table["v"].to_numpy()) == pytest.approx(1.0, abs=0.1)


def test_ensemble_reproduces_single_trajectory(harmonic, three_modes, sim_config):
    trajectory = simulate(0.5, 0.0, three_modes, harmonic, sim_config)
    ensemble = run_ensemble(FromPoint(0.5, 0.0), 3, three_modes, harmonic, sim_config)
    assert np.array_equal(ensemble.x[:, 0], trajectory.table["x"].to_numpy())
    assert ensemble.x.shape == (len(trajectory), 3)


def test_ensemble_does_not_depend_on_blocks(harmonic, three_modes, sim_config):
    init = FromPoint(0.0)
    whole = simulate_block(list(range(6)), init, three_modes, harmonic, sim_config)
    parts = merge([simulate_block([0, 1], init, three_modes, harmonic, sim_config),
                   simulate_block([2, 3, 4, 5], init, three_modes, harmonic, sim_config)])
    assert np.array_equal(whole.x, parts.x)
    assert np.array_equal(whole.final.z, parts.final.z)


@pytest.mark.slow
def test_euler_maruyama_strong_convergence(double_well):
    modes = build_modes(KernelSpec(1.5, 3.0, 5))
    fine_dt, n_paths = 1 / 800, 200
    cfg = SimConfig(m=1.0, gamma=1.0, dt=fine_dt, t_final=1.0, seed=5, scheme=Scheme.EULER_MARUYAMA)
    noise = np.random.default_rng(2024).standard_normal((800, n_paths, modes.n_modes + 1))
    start = State(np.full(n_paths, 0.5), np.zeros(n_paths), np.zeros((n_paths, modes.n_modes)))

    def endpoint(factor):
        coarse = replace(cfg, dt=fine_dt * factor)
        state = start.copy()
        for block in noise.reshape(800 // factor, factor, n_paths, -1):
            state = step(state, modes, double_well, coarse, noise=block.sum(axis=0) / np.sqrt(factor))
        return state.x

    reference = endpoint(1)
    error_8 = np.mean(np.abs(endpoint(8) - reference))
    error_16 = np.mean(np.abs(endpoint(16) - reference))
    assert 1.3 < error_16 / error_8 < 3.5
