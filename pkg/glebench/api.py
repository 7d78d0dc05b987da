import warnings
from dataclasses import asdict
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, Tuple, Union

import numpy as np
import pandas
import scipy
from pandas import DataFrame, concat

import glebench
from glebench import log
from glebench.config import FIT_WINDOW_FACTOR
from glebench.coupling import difference_ode_exact, exponential_tail_diagnostic, run_coupling_experiment
from glebench.data import State
from glebench.dynamics import SimConfig, init_state, simulate
from glebench.ensemble import FromPoint
from glebench.kernel import (ModeSet, build_modes, classify_regime, fit_tail_exponent, kernel_table, tail_mass,
                             truncation_bound)
from glebench.measure import (GibbsSampler, count_drift_violations, moment_table, psi_drift_constants, sample_box,
                              select_split, theta_drift_constants)
from glebench.potential import Potential
from glebench.predicates import admits_theta
from glebench.report import ExperimentReport
from glebench.runconfig import RunConfig, RunConfigBuilder, load_config
from glebench.statistics import (EnsembleSpec, histogram_table, invariance_propagation_test, marginal_tests,
                                 msd_ensemble, observables_from_names, sample_moment_columns,
                                 sample_moment_expectations, stationarity_test)
from glebench.streams import trajectory_stream
from glebench.targets import GibbsPositionLaw, StandardNormal, VelocityLaw
from glebench.utils import (gnuplot_contraction, gnuplot_histogram, gnuplot_kernel, gnuplot_msd, plot_contraction,
                            plot_histograms, plot_kernel, plot_msd)


def versions() -> dict:
    return {"glebench": glebench.__version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pandas": pandas.__version__}


def build_manifest(command: str, config: RunConfig, derived: dict) -> dict:
    """ Collect everything needed to replay a run.

    Parameters
    ----------
    command : str
        The subcommand
    config : RunConfig
        The resolved configuration
    derived : dict
        The numbers computed by the run that are not part of the configuration

    Returns
    -------
    dict
        The manifest with the keys ``command``, ``config``, ``seed``, ``versions``, ``checks`` and ``derived``
    """
    return {"command": command,
            "config": config.to_dict(),
            "seed": config.seed,
            "versions": versions(),
            "checks": config.checks,
            "derived": derived}


def prepare(config: RunConfig) -> Tuple[ModeSet, Potential, SimConfig]:
    """ Build the modes, the potential and the integrator settings of a configuration. """
    modes = build_modes(config.kernel)
    cfg = config.sim_config()
    cfg.validate()
    return modes, config.physics.potential, cfg


def default_fit_window(t_min: float, t_max: float) -> Tuple[float, float]:
    """ Return ``[10, t_max]`` if ``t_max > 10``, else the whole tabulated range. """
    return (10.0, t_max) if t_max > 10 else (t_min, t_max)


def run_kernel(config: RunConfig, cpu_count: int = 1) -> ExperimentReport:
    """ Tabulate the kernel, classify the regime and fit the tail exponent. """
    settings = config.experiment["kernel"]
    if not settings["t_min"] < settings["t_max"]:
        raise RuntimeError(f"Can't tabulate the kernel on [{settings['t_min']}, {settings['t_max']}]: "
                           f"t_min has to be < t_max")
    modes = build_modes(config.kernel)
    table = kernel_table(modes, np.geomspace(settings["t_min"], settings["t_max"], settings["n_points"]))
    window = settings["fit_window"] or default_fit_window(settings["t_min"], settings["t_max"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        slope = fit_tail_exponent(modes, tuple(window), settings["fit_points"])
    for warning in caught:
        log.warning(str(warning.message))
    summary = {"regime": classify_regime(config.kernel).to_dict(),
               "fitted_slope": slope,
               "expected_slope": -config.kernel.alpha,
               "fit_window": list(window),
               "plateau_end": FIT_WINDOW_FACTOR / float(modes.lam[-1]),
               "fit_warnings": [str(warning.message) for warning in caught],
               "K0": float(np.sum(modes.c)),
               "truncation_bound": truncation_bound(config.kernel),
               "tail_mass": tail_mass(config.kernel)}
    report = ExperimentReport("kernel", summary, {"kernel": table},
                              build_manifest("kernel", config, {"fit_window": list(window)}))
    if config.plots:
        report.figures["kernel.png"] = lambda path: plot_kernel(table, path)
        report.scripts["kernel.gp"] = gnuplot_kernel("kernel.csv")
    return report


def run_simulate(config: RunConfig, cpu_count: int = 1) -> ExperimentReport:
    """ Simulate one trajectory and record it with the configured stride. """
    settings = config.experiment["simulate"]
    modes, p, cfg = prepare(config)
    traj = simulate(settings["x0"], settings["v0"], modes, p, cfg, record_modes=settings["record_modes"])
    traj.validate()
    final = traj.table.iloc[-1]
    summary = {"n_records": len(traj),
               "n_steps": cfg.n_steps,
               "sup_norm": traj.sup_norm,
               "s": traj.s,
               "final": {"t": float(final["t"]), "x": float(final["x"]), "v": float(final["v"])}}
    return ExperimentReport("simulate", summary, {"trajectory": traj.table},
                            build_manifest("simulate", config, {"n_steps": cfg.n_steps}))


def run_msd(config: RunConfig, cpu_count: int = 1) -> ExperimentReport:
    """ Estimate the MSD of the free particle and fit its late and early scaling. """
    settings = config.experiment["msd"]
    modes, p, cfg = prepare(config)
    spec = EnsembleSpec(settings["n_traj"], FromPoint(0.0))
    result = msd_ensemble(spec, modes, p, cfg, settings["window"], settings["early_window"], settings["n_points"],
                          cpu_count)
    summary = result.summary()
    summary["alpha"] = config.kernel.alpha
    table = result.curve.to_frame()
    report = ExperimentReport("msd", summary, {"msd": table},
                              build_manifest("msd", config, {"window": list(result.window),
                                                             "early_window": list(result.early_window),
                                                             "initial_law": spec.init.to_dict()}))
    if config.plots:
        report.figures["msd.png"] = lambda path: plot_msd(table, path, result.late_fit)
        report.scripts["msd.gp"] = gnuplot_msd("msd.csv", result.late_fit)
    return report


def run_stationarity(config: RunConfig, cpu_count: int = 1) -> ExperimentReport:
    """ Test the marginals and time averages along one long path. """
    settings = config.experiment["stationarity"]
    modes, p, cfg = prepare(config)
    result = stationarity_test(settings["x0"], settings["v0"], modes, p, cfg,
                               observables_from_names(settings["observables"]), settings["bins"],
                               tuple(settings["hist_range"]))
    tables = {"marginals": result.marginals, "averages": result.averages, "histograms": result.histograms}
    report = ExperimentReport("stationarity", result.summary(), tables,
                              build_manifest("stationarity", config,
                                             {"autocorrelation": result.autocorrelation,
                                              "n_records": len(result.trajectory)}))
    if config.plots:
        report.figures["histograms.png"] = lambda path: plot_histograms(result.histograms, path)
        for marginal in ("x", "v"):
            report.scripts[f"histogram_{marginal}.gp"] = gnuplot_histogram("histograms.csv", marginal)
    return report


def run_invariance(config: RunConfig, cpu_count: int = 1) -> ExperimentReport:
    """ Propagate exact samples of the invariant measure and compare moments at the checkpoints. """
    settings = config.experiment["invariance"]
    modes, p, cfg = prepare(config)
    result = invariance_propagation_test(modes, p, cfg, settings["n_traj"], settings["checkpoints"],
                                         settings["initial_law"], settings["bins"], tuple(settings["hist_range"]),
                                         cpu_count)
    return ExperimentReport("invariance", result.summary(),
                            {"moments": result.moments, "marginals": result.marginals},
                            build_manifest("invariance", config,
                                           {"record_steps": [int(round(t / cfg.dt))
                                                             for t in sorted(settings["checkpoints"])]}))


def run_measure(config: RunConfig, cpu_count: int = 1) -> ExperimentReport:
    """ Sample the invariant measure, compare its moments and marginals and count drift violations. """
    settings = config.experiment["measure"]
    modes, p, cfg = prepare(config)
    s = config.kernel.s
    n = settings["n_samples"]
    sampler = GibbsSampler.from_potential(p, cfg.m, modes.n_modes, config.seed)
    states = sampler.sample(n)
    box = sample_box(n, modes.n_modes, settings["box_half_width"], trajectory_stream(config.seed, 0))

    position_law = GibbsPositionLaw(p)
    moments = moment_table(states, sample_moment_expectations(position_law, cfg.m, modes.n_modes, s),
                           sample_moment_columns(s))
    bins, hist_range = settings["bins"], tuple(settings["hist_range"])
    marginals, histograms = [], []
    for marginal, samples, target in (("x", states.x, position_law), ("v", states.v, VelocityLaw(cfg.m)),
                                      ("z1", states.z[:, 0], StandardNormal())):
        row = {"marginal": marginal}
        row.update(marginal_tests(samples, target, bins, hist_range).to_dict())
        marginals.append(row)
        histograms.append(histogram_table(marginal, samples, target, bins, hist_range))

    psi_constants = psi_drift_constants(modes, cfg.m, cfg.gamma, s)
    split_N, theta_constants, admissible = None, None, None
    if admits_theta(modes, cfg.gamma):
        split_N, admissible = select_split(modes, cfg.m, cfg.gamma, s)
        theta_constants = asdict(theta_drift_constants(modes, cfg.m, cfg.gamma, s, split_N))
    violations = {name: asdict(count_drift_violations(batch, modes, p, cfg.m, cfg.gamma, s, split_N))
                  for name, batch in (("mu", states), ("box", box))}

    summary = {"psi_constants": asdict(psi_constants),
               "theta_constants": theta_constants,
               "split_N": split_N,
               "split_admissible": admissible,
               "violations": violations,
               "envelope_b": sampler.envelope_b,
               "max_abs_z": float(np.max(np.abs(moments["z_score"])))}
    tables = {"moments": moments, "marginals": DataFrame(marginals),
              "histograms": concat(histograms, ignore_index=True)}
    report = ExperimentReport("measure", summary, tables,
                              build_manifest("measure", config, {"psi_constants": asdict(psi_constants),
                                                                 "theta_constants": theta_constants,
                                                                 "split_N": split_N,
                                                                 "envelope_b": sampler.envelope_b}))
    if config.plots:
        report.figures["histograms.png"] = lambda path: plot_histograms(tables["histograms"], path)
        for marginal in ("x", "v", "z1"):
            report.scripts[f"histogram_{marginal}.gp"] = gnuplot_histogram("histograms.csv", marginal)
    return report


def run_coupling(config: RunConfig, cpu_count: int = 1) -> ExperimentReport:
    """ Run the coupling experiment; both copies share the initial modes drawn from the master seed. """
    settings = config.experiment["coupling"]
    modes, p, cfg = prepare(config)
    s = config.kernel.s
    X0 = init_state(settings["x0"], settings["v0"], config.seed, modes.n_modes)
    Xt0 = State(settings["shifted_x0"], settings["shifted_v0"], X0.z.copy())
    result = run_coupling_experiment(X0, Xt0, modes, p, cfg, settings["lambda"], settings["kappa"],
                                     settings["n_runs"], s, settings["tail_margin"], settings["record_stride"],
                                     cpu_count)
    diff = X0 - Xt0
    closed_form = difference_ode_exact(float(diff.x), float(diff.v), diff.z, modes, result.lambda_ctrl,
                                       cfg.n_steps * cfg.dt, s)
    summary = result.summary()
    summary["closed_form_final"] = closed_form.to_dict()
    tables = {"runs": result.runs, "curves": result.curves}
    derived = {"lambda": result.lambda_ctrl, "kappa": result.kappa, "kappa_auto": result.cost_bound.kappa_auto,
               "cost_bound": result.cost_bound.to_dict(), "initial_state": {"x": float(X0.x), "v": float(X0.v),
                                                                            "z": X0.z}}
    if admits_theta(modes, cfg.gamma):
        derived["split_N"] = select_split(modes, cfg.m, cfg.gamma, s)[0]
    if settings["tail_paths"] > 0:
        tail = exponential_tail_diagnostic(X0, modes, p, cfg, settings["tail_paths"], settings["eta"], s=s)
        summary["tail"] = tail.to_dict()
        tables["tail"] = tail.table
    report = ExperimentReport("coupling", summary, tables, build_manifest("coupling", config, derived))
    if config.plots:
        report.figures["contraction.png"] = lambda path: plot_contraction(result.curves, path)
        report.scripts["contraction.gp"] = gnuplot_contraction("curves.csv")
    return report


COMMANDS: Dict[str, Callable[[RunConfig, int], ExperimentReport]] = {"kernel": run_kernel,
                                                                      "simulate": run_simulate,
                                                                      "msd": run_msd,
                                                                      "stationarity": run_stationarity,
                                                                      "invariance": run_invariance,
                                                                      "measure": run_measure,
                                                                      "coupling": run_coupling}


def run_experiment(command: str, config: RunConfig, cpu_count: int = 1) -> ExperimentReport:
    """ Run a subcommand on a configuration.

    Parameters
    ----------
    command : str
        One of ``kernel``, ``simulate``, ``msd``, ``stationarity``, ``invariance``, ``measure``, ``coupling``
    config : RunConfig
        The resolved configuration
    cpu_count : int
        The number of worker processes; -1 uses all but one CPU

    Returns
    -------
    ExperimentReport
        The report; nothing is written
    """
    if command not in COMMANDS:
        raise RuntimeError(f"Can't run unknown subcommand '{command}', known are {sorted(COMMANDS)}")
    log.info(f"Run {command}")
    start_time = datetime.now()
    log.info(f"Start time: {start_time}")
    log.debug(f"Seed: {config.seed}, workers: {cpu_count}")
    report = COMMANDS[command](config, cpu_count)
    stop_time = datetime.now()
    log.info(f"Stop time: {stop_time}")
    log.info(f"Finished in: {stop_time - start_time}")
    return report


def run_from_file(command: str, config_path: Union[str, Path], output_dir: Union[str, Path, None] = None,
                  cpu_count: int = 1) -> ExperimentReport:
    """ Load a configuration, run a subcommand and write its artifacts to `output_dir` or the configured one. """
    config = load_config(config_path)
    report = run_experiment(command, config, cpu_count)
    report.write(output_dir if output_dir is not None else config.output_dir)
    return report


def replay(manifest: dict, output_dir: Union[str, Path, None] = None, cpu_count: int = 1) -> ExperimentReport:
    """ Re-run the subcommand recorded in a manifest from the manifest alone.

    Raises
    ------
    RuntimeError
        If the manifest names no command or no configuration
    """
    if "command" not in manifest or "config" not in manifest:
        raise RuntimeError("Can't replay: the manifest has to contain 'command' and 'config'")
    config = RunConfigBuilder.build(manifest["config"])
    recorded = manifest.get("versions", {})
    if recorded and recorded != versions():
        log.warning(f"Replaying with versions {versions()} instead of {recorded}")
    report = run_experiment(manifest["command"], config, cpu_count)
    report.write(output_dir if output_dir is not None else config.output_dir)
    return report
