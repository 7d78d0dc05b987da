"""
Ensemble statistics: mean squared displacement, ergodic time averages and distributional tests of the marginals.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Type, Union

import numpy as np
from pandas import DataFrame, concat
from scipy.integrate import cumulative_trapezoid
from scipy.stats import kstwo

from glebench import log
from glebench.config import MSD_WINDOW_FACTOR, MSD_WINDOW_START
from glebench.data import State, Trajectory
from glebench.dynamics import SimConfig, simulate
from glebench.enums import InitialLaw
from glebench.ensemble import FromMu, FromPoint, InitialCondition, run_ensemble
from glebench.kernel import ModeSet, PowerLawFit, fit_power_law
from glebench.measure import GibbsSampler, moment_table
from glebench.observables import Observable, PositionSquared, VelocitySquared, resolve_observable
from glebench.potential import Potential
from glebench.targets import GibbsPositionLaw, TargetDistribution, VelocityLaw

MIN_TEST_SAMPLES = 1000


@dataclass(frozen=True)
class EnsembleSpec:
    """ An ensemble of independent trajectories.

    Parameters
    ----------
    n_traj
        The number of trajectories, at least 1
    init
        The initial law
    observables
        The observables evaluated along the trajectories
    thinning
        Every `thinning`-th step is recorded
    """
    n_traj: int
    init: InitialCondition
    observables: Sequence[Type[Observable]] = ()
    thinning: int = 1

    def validate(self):
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise RuntimeError(f"Can't run an ensemble of {self.n_traj} trajectories: n_traj has to be >= 1")
        if int(self.thinning) != self.thinning or self.thinning < 1:
            raise RuntimeError(f"Can't thin by {self.thinning}: thinning has to be an integer >= 1")


@dataclass(frozen=True)
class MsdCurve:
    """ Ensemble estimate of :math:`E[x(t)^2]` with standard errors. """
    times: np.ndarray
    msd: np.ndarray
    stderr: np.ndarray

    def to_frame(self) -> DataFrame:
        return DataFrame({"t": self.times, "msd": self.msd, "stderr": self.stderr})


@dataclass(frozen=True)
class MsdResult:
    """ The MSD curve, the log-log fits and their windows. """
    curve: MsdCurve
    late_fit: PowerLawFit
    early_fit: Optional[PowerLawFit]
    window: Tuple[float, float]
    early_window: Tuple[float, float]
    n_traj: int

    def summary(self) -> dict:
        return {"n_traj": self.n_traj,
                "window": list(self.window),
                "late_slope": self.late_fit.slope,
                "late_fit": self.late_fit.to_dict(),
                "early_window": list(self.early_window),
                "early_slope": self.early_fit.slope if self.early_fit is not None else None,
                "early_fit": self.early_fit.to_dict() if self.early_fit is not None else None}


def log_spaced_steps(n_steps: int, n_points: int) -> np.ndarray:
    """ Return up to `n_points` distinct, logarithmically spaced step indices in [1, n_steps], starting with 0. """
    steps = np.unique(np.round(np.geomspace(1, n_steps, n_points)).astype(int))
    return np.concatenate([[0], steps])


def default_msd_window(modes: ModeSet, t_final: float) -> Tuple[float, float]:
    """ Return ``[MSD_WINDOW_START, min(MSD_WINDOW_FACTOR / lambda_N, t_final)]``. """
    return MSD_WINDOW_START, min(MSD_WINDOW_FACTOR / float(modes.lam[-1]), t_final)


def msd_ensemble(spec: EnsembleSpec, modes: ModeSet, p: Potential, cfg: SimConfig,
                 window: Optional[Tuple[float, float]] = None, early_window: Optional[Tuple[float, float]] = None,
                 n_points: int = 60, cpu_count: int = 1) -> MsdResult:
    """ Estimate the mean squared displacement of the free particle and fit its scaling.

    Parameters
    ----------
    spec :
        The ensemble; the initial position has to be 0
    modes :
        The modes of the kernel
    p :
        The potential, it has to be the zero potential
    cfg :
        The integrator settings
    window :
        The late fit window; by default :func:`default_msd_window`
    early_window :
        The ballistic fit window; by default ``[dt, 10 dt]``
    n_points :
        The number of logarithmically spaced record times
    cpu_count :
        The number of worker processes

    Returns
    -------
    MsdResult
        The curve and the fits; the early fit is None if its window holds fewer than two record times

    Raises
    ------
    RuntimeError
        If the potential is confining or the ensemble does not start at x = 0
    """
    spec.validate()
    if p.conforming:
        raise RuntimeError(f"Can't estimate MSD scaling with the confining potential {p!r}: the MSD saturates; "
                           f"use the zero potential")
    if not isinstance(spec.init, FromPoint) or spec.init.x0 != 0:
        raise RuntimeError("Can't estimate the MSD: the ensemble has to start at x = 0")
    record_steps = log_spaced_steps(cfg.n_steps, n_points)
    result = run_ensemble(spec.init, spec.n_traj, modes, p, cfg, record_steps, mode_columns=[], cpu_count=cpu_count)
    squares = np.square(result.x)
    msd = squares.mean(axis=1)
    stderr = squares.std(axis=1, ddof=1) / math.sqrt(spec.n_traj) if spec.n_traj > 1 else np.zeros_like(msd)
    curve = MsdCurve(result.times, msd, stderr)

    window = default_msd_window(modes, cfg.t_final) if window is None else tuple(window)
    late_fit = fit_power_law(curve.times, curve.msd, window)
    first = float(curve.times[1]) if len(curve.times) > 1 else cfg.dt
    early_window = (first, 10 * first) if early_window is None else tuple(early_window)
    try:
        early_fit = fit_power_law(curve.times, curve.msd, early_window)
    except RuntimeError as error:
        log.debug(f"No early MSD fit: {error}")
        early_fit = None
    log.debug(f"MSD slope {late_fit.slope} on {window}")
    return MsdResult(curve, late_fit, early_fit, window, early_window, spec.n_traj)


def batch_means(values: np.ndarray, batch_size: Optional[int] = None) -> np.ndarray:
    """ Return the means of consecutive batches; the default batch size is ``floor(sqrt(n))``. """
    values = np.asarray(values, dtype=float)
    batch_size = max(1, int(math.isqrt(len(values)))) if batch_size is None else int(batch_size)
    n_batches = len(values) // batch_size
    return values[:n_batches * batch_size].reshape(n_batches, batch_size).mean(axis=1)


def integrated_autocorrelation_time(series: np.ndarray) -> float:
    """ Estimate the integrated autocorrelation time in samples by batch means.

    With batch size :math:`b = \\lfloor \\sqrt{n} \\rfloor`, :math:`\\tau = b \\operatorname{Var}(\\bar x_b) /
    \\operatorname{Var}(x)`; the estimate is at least 1.
    """
    series = np.asarray(series, dtype=float)
    if len(series) < 4:
        raise RuntimeError(f"Can't estimate an autocorrelation time from {len(series)} samples")
    variance = np.var(series, ddof=1)
    if variance == 0:
        return 1.0
    batch_size = max(1, int(math.isqrt(len(series))))
    means = batch_means(series, batch_size)
    return max(1.0, float(batch_size * np.var(means, ddof=1) / variance))


def thin(series: np.ndarray, tau: float) -> np.ndarray:
    """ Keep every ``ceil(tau)``-th sample. """
    return np.asarray(series)[::max(1, int(math.ceil(tau)))]


@dataclass(frozen=True)
class TimeAverage:
    """ A trapezoidal time average with its batch-means standard error and running curve. """
    observable: str
    value: float
    stderr: float
    running: DataFrame = field(repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"observable": self.observable, "value": self.value, "stderr": self.stderr}


def time_average(traj: Trajectory, f: Type[Observable], potential: Optional[Potential] = None) -> TimeAverage:
    """ Compute :math:`\\frac1t \\int_0^t f(x(s), v(s)) ds` by the trapezoidal rule.

    Numerator and elapsed time are computed by the same quadrature, so f = 1 gives exactly 1.

    Returns
    -------
    TimeAverage
        The average over the full path, its standard error and the running average ``(t, average)``
    """
    times = traj.times
    if len(times) < 2:
        raise RuntimeError("Can't average over a path with fewer than two recorded times")
    values = np.asarray(f.evaluate(traj.table["x"].to_numpy(), traj.table["v"].to_numpy(), potential), dtype=float)
    integral = cumulative_trapezoid(values, times, initial=0.0)
    elapsed = cumulative_trapezoid(np.ones_like(values), times, initial=0.0)
    running = integral[1:] / elapsed[1:]
    means = batch_means(values)
    stderr = float(np.std(means, ddof=1) / math.sqrt(len(means))) if len(means) > 1 else float("nan")
    return TimeAverage(f.name(), float(running[-1]), stderr, DataFrame({"t": times[1:], "average": running}))


def ks_statistic(samples: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """ Return :math:`\\sup_x |F_n(x) - F(x)|`, the largest gap between the empirical and the target CDF. """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise RuntimeError("Can't compute a KS statistic without samples")
    target = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - target
    lower = target - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def ks_pvalue(statistic: float, n: int) -> float:
    """ The exact one-sample p-value of a KS statistic for n samples. """
    return float(kstwo.sf(statistic, n))


def histogram_l1(samples: np.ndarray, target: TargetDistribution, bins: int = 100,
                 hist_range: Tuple[float, float] = (-3.0, 3.0)) -> float:
    """ Return :math:`\\sum_i |n_i/n - p_i|` over the bins of `hist_range`. """
    counts, edges = np.histogram(samples, bins=bins, range=hist_range)
    return float(np.sum(np.abs(counts / len(samples) - target.bin_probabilities(edges))))


@dataclass(frozen=True)
class MarginalTest:
    target: str
    n_samples: int
    ks_stat: float
    p_value: float
    l1_hist: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def marginal_tests(samples: np.ndarray, target: TargetDistribution, bins: int = 100,
                   hist_range: Tuple[float, float] = (-3.0, 3.0)) -> MarginalTest:
    """ Compare samples with a target law by the KS statistic and the L1 histogram distance.

    Raises
    ------
    RuntimeError
        If fewer than 1000 samples are given
    """
    samples = np.asarray(samples, dtype=float)
    if len(samples) < MIN_TEST_SAMPLES:
        raise RuntimeError(f"Can't test a marginal with {len(samples)} samples: at least {MIN_TEST_SAMPLES} "
                           f"are required")
    statistic = ks_statistic(samples, target.cdf)
    return MarginalTest(target.name(), len(samples), statistic, ks_pvalue(statistic, len(samples)),
                        histogram_l1(samples, target, bins, hist_range))


@dataclass
class InvarianceReport:
    """ Moments and marginal tests at every checkpoint.

    Parameters
    ----------
    moments
        Columns ``t``, ``moment``, ``estimate``, ``expected``, ``stderr``, ``z_score``
    marginals
        Columns ``t``, ``marginal``, ``target``, ``n_samples``, ``ks_stat``, ``p_value``, ``l1_hist``; empty for
        fewer than 1000 trajectories
    initial_law
        The initial law of the ensemble
    """
    moments: DataFrame
    marginals: DataFrame
    initial_law: InitialLaw

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.moments["z_score"])))

    def summary(self) -> dict:
        return {"initial_law": str(self.initial_law), "max_abs_z": self.max_abs_z,
                "checkpoints": sorted(float(t) for t in self.moments["t"].unique())}


def _mu_moments(position_law: GibbsPositionLaw, m: float) -> dict:
    return {"E x": position_law.moment(1), "E x^2": position_law.moment(2), "E v^2": 1.0 / m,
            "E z1^2": 1.0, "E zN^2": 1.0}


MOMENT_COLUMNS = {"E x": lambda s: s.x,
                  "E x^2": lambda s: np.square(s.x),
                  "E v^2": lambda s: np.square(s.v),
                  "E z1^2": lambda s: np.square(s.z[:, 0]),
                  "E zN^2": lambda s: np.square(s.z[:, -1])}


def invariance_propagation_test(modes: ModeSet, p: Potential, cfg: SimConfig, n_traj: int,
                                checkpoints: Sequence[float], initial_law: Union[InitialLaw, str] = InitialLaw.MU,
                                bins: int = 100, hist_range: Tuple[float, float] = (-3.0, 3.0),
                                cpu_count: int = 1) -> InvarianceReport:
    """ Start an ensemble from the invariant measure and compare its moments with those of the measure.

    Parameters
    ----------
    modes :
        The modes of the kernel
    p :
        A confining potential
    cfg :
        The integrator settings; the checkpoints are rounded to the step grid
    n_traj :
        The number of trajectories
    checkpoints :
        The times in [0, t_final] at which the ensemble is compared with the measure
    initial_law :
        :attr:`InitialLaw.MU` for exact samples, :attr:`InitialLaw.QUIESCENT_MODES` to start all modes at 0
    bins, hist_range :
        The histogram of the L1 distance
    cpu_count :
        The number of worker processes

    Returns
    -------
    InvarianceReport
        The z-scores of the moments and, for at least 1000 trajectories, the KS statistics of x and v
    """
    initial_law = InitialLaw.resolve(initial_law) if isinstance(initial_law, str) else initial_law
    checkpoints = sorted(float(t) for t in checkpoints)
    if not checkpoints or checkpoints[0] < 0 or checkpoints[-1] > cfg.t_final + 1e-12:
        raise RuntimeError(f"Can't use checkpoints {checkpoints}: they have to lie in [0, t_final={cfg.t_final}]")
    sampler = GibbsSampler.from_potential(p, cfg.m, modes.n_modes, cfg.seed)
    init = FromMu(sampler, quiescent_modes=initial_law == InitialLaw.QUIESCENT_MODES)
    record_steps = np.unique([int(round(t / cfg.dt)) for t in checkpoints])
    result = run_ensemble(init, n_traj, modes, p, cfg, record_steps, mode_columns=[0, modes.n_modes - 1],
                          cpu_count=cpu_count)
    position_law = GibbsPositionLaw(p)
    velocity_law = VelocityLaw(cfg.m)
    expected = _mu_moments(position_law, cfg.m)
    moments, marginals = [], []
    for index, t in enumerate(result.times):
        states = State(result.x[index], result.v[index], result.z[index])
        table = moment_table(states, expected, MOMENT_COLUMNS)
        table.insert(0, "t", float(t))
        moments.append(table)
        if n_traj >= MIN_TEST_SAMPLES:
            for marginal, samples, target in (("x", states.x, position_law), ("v", states.v, velocity_law)):
                row = {"t": float(t), "marginal": marginal}
                row.update(marginal_tests(samples, target, bins, hist_range).to_dict())
                marginals.append(row)
    columns = ["t", "marginal", "target", "n_samples", "ks_stat", "p_value", "l1_hist"]
    report = InvarianceReport(concat(moments, ignore_index=True), DataFrame(marginals, columns=columns),
                              initial_law)
    log.debug(f"Invariance test: max |z| = {report.max_abs_z}")
    return report


@dataclass
class StationarityReport:
    """ Marginal tests and time averages along one long path.

    Parameters
    ----------
    marginals
        One row per marginal with the KS statistic, p-value and L1 distance of the thinned samples
    averages
        Columns ``observable``, ``value``, ``stderr``, ``expected``, ``z_score``
    autocorrelation
        The integrated autocorrelation times of x and v in recorded samples
    trajectory
        The recorded path
    histograms
        Columns ``marginal``, ``left``, ``right``, ``empirical``, ``target`` of the histogram overlays
    """
    marginals: DataFrame
    averages: DataFrame
    autocorrelation: dict
    trajectory: Trajectory = field(repr=False)
    histograms: DataFrame = field(repr=False)

    def summary(self) -> dict:
        return {"autocorrelation": self.autocorrelation,
                "marginals": self.marginals.to_dict(orient="records"),
                "averages": self.averages.to_dict(orient="records")}


def histogram_table(marginal: str, samples: np.ndarray, target: TargetDistribution, bins: int,
                    hist_range: Tuple[float, float]) -> DataFrame:
    counts, edges = np.histogram(samples, bins=bins, range=hist_range)
    width = edges[1] - edges[0]
    return DataFrame({"marginal": marginal, "left": edges[:-1], "right": edges[1:],
                      "empirical": counts / (len(samples) * width),
                      "target": target.bin_probabilities(edges) / width})


def stationarity_test(x0: float, v0: float, modes: ModeSet, p: Potential, cfg: SimConfig,
                      observables: Sequence[Type[Observable]] = (PositionSquared, VelocitySquared),
                      bins: int = 100, hist_range: Tuple[float, float] = (-3.0, 3.0)) -> StationarityReport:
    """ Test the marginals of :math:`\\pi` along one long path.

    The x and v series are thinned by their integrated autocorrelation times before the KS and histogram tests;
    the time averages use the full recorded path.

    Raises
    ------
    RuntimeError
        If fewer than 1000 samples remain after thinning
    """
    traj = simulate(x0, v0, modes, p, cfg, record_modes=False)
    position_law = GibbsPositionLaw(p)
    velocity_law = VelocityLaw(cfg.m)
    taus, rows, histograms = {}, [], []
    for marginal, target in (("x", position_law), ("v", velocity_law)):
        series = traj.table[marginal].to_numpy()
        taus[marginal] = integrated_autocorrelation_time(series)
        thinned = thin(series, taus[marginal])
        row = {"marginal": marginal}
        row.update(marginal_tests(thinned, target, bins, hist_range).to_dict())
        rows.append(row)
        histograms.append(histogram_table(marginal, thinned, target, bins, hist_range))
    averages = []
    for observable in observables:
        average = time_average(traj, observable, p)
        expected = observable.expectation(p, cfg.m, position_law)
        z_score = (average.value - expected) / average.stderr if average.stderr > 0 else float("nan")
        averages.append({"observable": average.observable, "value": average.value, "stderr": average.stderr,
                         "expected": expected, "z_score": z_score})
    log.debug(f"Autocorrelation times: {taus}")
    return StationarityReport(DataFrame(rows), DataFrame(averages), taus, traj, concat(histograms, ignore_index=True))


def sample_moment_columns(s: float) -> dict:
    """ Moment summands of sampled states including :math:`\\|X\\|_{-s}^2`. """
    columns = dict(MOMENT_COLUMNS)
    columns["E |X|^2"] = lambda states: (np.square(states.x) + np.square(states.v)
                                         + np.sum(np.arange(1, states.n_modes + 1) ** (-2.0 * s)
                                                  * np.square(states.z), axis=1))
    return columns


def sample_moment_expectations(position_law: GibbsPositionLaw, m: float, n_modes: int, s: float) -> dict:
    """ The moments of :math:`\\mu`; :math:`E\\|X\\|^2_{-s} = E x^2 + 1/m + \\sum_{k \\leq N} k^{-2s}`. """
    expected = _mu_moments(position_law, m)
    expected["E |X|^2"] = (position_law.moment(2) + 1.0 / m
                           + float(np.sum(np.arange(1, n_modes + 1, dtype=float) ** (-2.0 * s))))
    return expected


def observables_from_names(names: Sequence[str]) -> List[Type[Observable]]:
    return [resolve_observable(name) for name in names]
