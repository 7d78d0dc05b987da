import numpy as np
import pytest
from scipy.stats import kstest, norm

from glebench.dynamics import SimConfig, simulate
from glebench.enums import InitialLaw
from glebench.ensemble import FromPoint
from glebench.kernel import KernelSpec, ModeSet, build_modes
from glebench.observables import (One, PositionSquared, TotalEnergy, VelocitySquared, observable_names,
                                  resolve_observable)
from glebench.potential import Harmonic
from glebench.statistics import (EnsembleSpec, batch_means, default_msd_window, histogram_l1, histogram_table,
                                 integrated_autocorrelation_time, invariance_propagation_test, ks_pvalue,
                                 ks_statistic, log_spaced_steps, marginal_tests, msd_ensemble, stationarity_test,
                                 thin, time_average)
from glebench.targets import CustomDensity, GibbsPositionLaw, StandardNormal, VelocityLaw


def _uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)


def test_ks_statistic_by_hand():
    assert ks_statistic(np.array([0.5]), _uniform_cdf) == pytest.approx(0.5)
    assert ks_statistic(np.array([0.9, 0.1, 0.2]), _uniform_cdf) == pytest.approx(2 / 3 - 0.2)


def test_ks_statistic_of_constant_samples():
    assert ks_statistic(np.full(1000, 5.0), norm.cdf) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(RuntimeError):
        ks_statistic(np.array([]), norm.cdf)


def test_ks_matches_scipy(rng):
    samples = rng.normal(size=500)
    statistic = ks_statistic(samples, norm.cdf)
    reference = kstest(samples, "norm")
    assert statistic == pytest.approx(reference.statistic)
    assert ks_pvalue(statistic, 500) == pytest.approx(reference.pvalue, rel=1e-6)


def test_histogram_l1(rng):
    assert histogram_l1(rng.normal(size=100000), StandardNormal()) < 0.05
    assert histogram_l1(rng.normal(2.0, 1.0, size=100000), StandardNormal()) > 0.5


def test_histogram_table(rng):
    table = histogram_table("x", rng.normal(size=2000), StandardNormal(), 20, (-3.0, 3.0))
    assert list(table.columns) == ["marginal", "left", "right", "empirical", "target"]
    assert len(table) == 20
    width = 6.0 / 20
    assert table["target"].sum() * width == pytest.approx(norm.cdf(3) - norm.cdf(-3))


def test_marginal_tests(rng):
    result = marginal_tests(rng.normal(size=5000), StandardNormal())
    assert result.target == "standard_normal"
    assert result.n_samples == 5000
    assert result.ks_stat < 0.05
    with pytest.raises(RuntimeError):
        marginal_tests(rng.normal(size=999), StandardNormal())


def test_batch_means():
    assert batch_means(np.arange(10.0), 3).tolist() == [1.0, 4.0, 7.0]
    assert len(batch_means(np.arange(100.0))) == 10


def test_autocorrelation_time(rng):
    assert integrated_autocorrelation_time(rng.normal(size=10000)) < 2.0
    assert integrated_autocorrelation_time(np.ones(100)) == 1.0
    noise = rng.normal(size=100000)
    series = np.empty_like(noise)
    series[0] = noise[0]
    for i in range(1, len(noise)):
        series[i] = 0.9 * series[i - 1] + noise[i]
    assert 10.0 < integrated_autocorrelation_time(series) < 30.0
    with pytest.raises(RuntimeError):
        integrated_autocorrelation_time(np.arange(3.0))


def test_thin():
    assert thin(np.arange(10), 2.5).tolist() == [0, 3, 6, 9]
    assert thin(np.arange(4), 0.5).tolist() == [0, 1, 2, 3]


def test_time_average_of_one(harmonic, three_modes, sim_config):
    trajectory = simulate(0.2, 0.0, three_modes, harmonic, sim_config, record_modes=False)
    average = time_average(trajectory, One)
    assert average.value == 1.0
    assert average.running["average"].to_numpy() == pytest.approx(np.ones(len(trajectory) - 1))
    assert average.observable == "one"


def test_time_average_of_linear_path(zero_potential):
    free = ModeSet(np.zeros(2), np.ones(2))
    cfg = SimConfig(m=1.0, gamma=0.0, dt=0.01, t_final=2.0, seed=0, thermal_noise=False)
    trajectory = simulate(0.0, 1.0, free, zero_potential, cfg, s=0.6)
    assert time_average(trajectory, PositionSquared).value == pytest.approx(4.0 / 3.0, rel=1e-4)


def test_log_spaced_steps():
    assert log_spaced_steps(1000, 4).tolist() == [0, 1, 10, 100, 1000]
    steps = log_spaced_steps(50, 100)
    assert steps[0] == 0 and steps[-1] == 50
    assert np.all(np.diff(steps) > 0)


def test_default_msd_window():
    modes = build_modes(KernelSpec(1.5, 3.0, 10))
    assert default_msd_window(modes, 20.0) == pytest.approx((10.0, 20.0))
    assert default_msd_window(modes, 1000.0) == pytest.approx((10.0, 50.0))


def test_msd_rejects_confining_potential(harmonic, three_modes, sim_config):
    with pytest.raises(RuntimeError):
        msd_ensemble(EnsembleSpec(4, FromPoint(0.0)), three_modes, harmonic, sim_config)


def test_msd_requires_start_at_origin(zero_potential, three_modes, sim_config):
    with pytest.raises(RuntimeError):
        msd_ensemble(EnsembleSpec(4, FromPoint(1.0)), three_modes, zero_potential, sim_config)


def test_ensemble_spec_validation():
    with pytest.raises(RuntimeError):
        EnsembleSpec(0, FromPoint(0.0)).validate()
    with pytest.raises(RuntimeError):
        EnsembleSpec(4, FromPoint(0.0), thinning=0).validate()


def test_msd_ballistic_start(zero_potential):
    modes = build_modes(KernelSpec(1.5, 3.0, 10))
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.01, t_final=20.0, seed=3)
    result = msd_ensemble(EnsembleSpec(64, FromPoint(0.0)), modes, zero_potential, cfg, window=(2.0, 20.0),
                          n_points=30)
    assert result.curve.msd[0] == 0.0
    assert np.all(result.curve.msd >= 0)
    assert result.early_fit is not None
    assert result.early_fit.slope == pytest.approx(2.0, abs=0.3)
    assert result.window == (2.0, 20.0)
    assert list(result.curve.to_frame().columns) == ["t", "msd", "stderr"]
    assert result.summary()["n_traj"] == 64


@pytest.mark.slow
def test_msd_diffusive_scaling(zero_potential):
    modes = build_modes(KernelSpec(1.5, 3.0, 1000))
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.05, t_final=500.0, seed=17)
    result = msd_ensemble(EnsembleSpec(1000, FromPoint(0.0)), modes, zero_potential, cfg, window=(50.0, 500.0),
                          cpu_count=-1)
    assert result.late_fit.slope == pytest.approx(1.0, abs=0.1)


@pytest.mark.slow
def test_msd_subdiffusive_scaling(zero_potential):
    modes = build_modes(KernelSpec(0.5, 3.0, 1000, s=0.6))
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.1, t_final=500.0, seed=19)
    result = msd_ensemble(EnsembleSpec(10000, FromPoint(0.0)), modes, zero_potential, cfg, cpu_count=-1)
    assert result.window == pytest.approx((10.0, 500.0))
    assert result.late_fit.slope == pytest.approx(0.5, abs=0.15)
    summary = result.summary()
    assert summary["window"] == pytest.approx([10.0, 500.0])
    assert summary["late_slope"] == result.late_fit.slope



def test_invariance_from_mu(harmonic, three_modes, sim_config):
    report = invariance_propagation_test(three_modes, harmonic, sim_config, 200, [0.0, 1.0])
    assert sorted(report.moments["t"].unique()) == [0.0, 1.0]
    assert report.max_abs_z < 5
    assert report.marginals.empty
    assert report.summary()["initial_law"] == "mu"


def test_invariance_with_quiescent_modes(harmonic, three_modes, sim_config):
    report = invariance_propagation_test(three_modes, harmonic, sim_config, 200, [0.0, 1.0], "quiescent_modes")
    at_start = report.moments[(report.moments["t"] == 0.0) & (report.moments["moment"] == "E z1^2")]
    assert abs(at_start["z_score"].iloc[0]) > 10
    assert report.initial_law == InitialLaw.QUIESCENT_MODES


def test_invariance_marginals(harmonic, three_modes, sim_config):
    report = invariance_propagation_test(three_modes, harmonic, sim_config, 1000, [0.0, 1.0])
    assert len(report.marginals) == 4
    assert set(report.marginals["marginal"]) == {"x", "v"}
    assert (report.marginals["ks_stat"] < 0.07).all()


@pytest.mark.slow
def test_invariance_at_scale(harmonic, diffusive_modes):
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.005, t_final=5.0, seed=23)
    report = invariance_propagation_test(diffusive_modes, harmonic, cfg, 10000, [1.0, 5.0], cpu_count=-1)
    assert sorted(report.moments["t"].unique()) == pytest.approx([1.0, 5.0])
    assert set(report.moments["moment"]) == {"E x", "E x^2", "E v^2", "E z1^2", "E zN^2"}
    assert (report.moments["z_score"].abs() <= 4).all()
    assert (report.marginals["ks_stat"] < 0.03).all()



def test_invariance_rejects_checkpoints(harmonic, three_modes, sim_config):
    with pytest.raises(RuntimeError):
        invariance_propagation_test(three_modes, harmonic, sim_config, 10, [0.0, 5.0])


def test_stationarity_needs_samples(harmonic, three_modes, sim_config):
    with pytest.raises(RuntimeError):
        stationarity_test(0.0, 0.0, three_modes, harmonic, sim_config)


@pytest.mark.slow
def test_stationarity(harmonic, three_modes):
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.05, t_final=20000.0, seed=21)
    report = stationarity_test(0.0, 0.0, three_modes, harmonic, cfg)
    assert (report.marginals["ks_stat"] < 0.05).all()
    assert (report.averages["z_score"].abs() < 5).all()
    assert set(report.autocorrelation) == {"x", "v"}


@pytest.mark.slow
def test_stationarity_with_fine_step(harmonic, diffusive_modes):
    cfg = SimConfig(m=1.0, gamma=1.0, dt=0.001, t_final=10000.0, seed=29, thin_stride=50)
    report = stationarity_test(0.0, 0.0, diffusive_modes, harmonic, cfg)
    assert len(report.trajectory) == 200001
    assert list(report.trajectory.table.columns) == ["t", "x", "v"]
    assert (report.marginals["ks_stat"] < 0.05).all()



def test_targets():
    assert VelocityLaw(4.0).moment(2) == pytest.approx(0.25)
    harmonic_law = GibbsPositionLaw(Harmonic(1.0))
    assert harmonic_law.moment(2) == pytest.approx(1.0, abs=1e-8)
    assert harmonic_law.cdf(np.array([0.0]))[0] == pytest.approx(0.5, abs=1e-6)
    assert harmonic_law.cdf(np.array([1.0]))[0] == pytest.approx(norm.cdf(1.0), abs=1e-6)


def test_double_well_law_is_symmetric(double_well):
    law = GibbsPositionLaw(double_well)
    assert law.moment(1) == pytest.approx(0.0, abs=1e-8)
    assert law.cdf(np.array([0.0]))[0] == pytest.approx(0.5, abs=1e-6)
    assert np.all(np.diff(law.cdf(np.linspace(-3, 3, 100))) >= 0)


def test_custom_density():
    uniform = CustomDensity(lambda x: np.ones_like(x), (0.0, 1.0))
    assert uniform.cdf(np.array([0.25, 2.0])) == pytest.approx([0.25, 1.0])
    assert uniform.moment(1) == pytest.approx(0.5)
    with pytest.raises(RuntimeError):
        CustomDensity(lambda x: np.ones_like(x))


def test_gibbs_law_rejects_zero_potential(zero_potential):
    with pytest.warns(UserWarning):
        with pytest.raises(RuntimeError):
            GibbsPositionLaw(zero_potential)


def test_observables(harmonic):
    assert resolve_observable("x2") is PositionSquared
    assert resolve_observable("v2") is VelocitySquared
    assert observable_names() == ["one", "x", "x2", "v", "v2", "energy"]
    assert TotalEnergy.expectation(harmonic, 1.0) == pytest.approx(1.0, abs=1e-8)
    assert TotalEnergy.evaluate(np.array([2.0]), np.array([2.0]), harmonic) == pytest.approx([4.0])
    assert VelocitySquared.expectation(harmonic, 4.0) == 0.25
    with pytest.raises(RuntimeError):
        TotalEnergy.evaluate(np.array([1.0]), np.array([1.0]))
    with pytest.raises(RuntimeError):
        resolve_observable("momentum")
