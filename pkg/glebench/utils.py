"""
Figures and plot scripts of the experiments.

Figures are drawn with matplotlib; the scripts are gnuplot command files that reproduce them from the CSV artifacts.
"""
from pathlib import Path
from typing import Optional

import matplotlib as mpl
import matplotlib.pyplot as plt
import numpy as np
from pandas import DataFrame

from glebench import log
from glebench.kernel import PowerLawFit
from glebench.report import ExperimentReport


def _save(path: Path):
    mpl.rcParams['figure.dpi'] = 150
    plt.tight_layout()
    plt.savefig(path, metadata={"Software": None})
    plt.close()


def plot_kernel(table: DataFrame, path: Path):
    """ Plot K(t) and the truncation bound on log-log axes.

    Parameters
    ----------
    table :
        The kernel table with the columns ``t``, ``K``, ``tail_bound``
    path :
        The image file
    """
    plt.figure()
    plt.loglog(table["t"], table["K"], label="K_N(t)")
    plt.loglog(table["t"], table["tail_bound"], color='navy', linestyle='--', label="truncation bound")
    plt.xlabel('t')
    plt.ylabel('K(t)')
    plt.title('Memory kernel')
    plt.legend(loc='best')
    _save(path)


def plot_msd(table: DataFrame, path: Path, fit: Optional[PowerLawFit] = None):
    """ Plot the MSD curve with its fitted power law on log-log axes. """
    table = table[table["t"] > 0]
    plt.figure()
    plt.errorbar(table["t"], table["msd"], yerr=table["stderr"], fmt='o', markersize=3, label="MSD")
    if fit is not None:
        t = np.geomspace(*fit.window, 50)
        plt.loglog(t, np.exp(fit.intercept) * t ** fit.slope, color='navy', linestyle='--',
                   label=f"slope {fit.slope:.3f}")
    plt.xscale('log')
    plt.yscale('log')
    plt.xlabel('t')
    plt.ylabel('E[x(t)^2]')
    plt.title('Mean squared displacement')
    plt.legend(loc='best')
    _save(path)


def plot_histograms(table: DataFrame, path: Path):
    """ Overlay the empirical and the target densities of every marginal. """
    marginals = list(table["marginal"].unique())
    fig, axes = plt.subplots(1, len(marginals), figsize=(5 * len(marginals), 4), squeeze=False)
    for axis, marginal in zip(axes[0], marginals):
        rows = table[table["marginal"] == marginal]
        centers = 0.5 * (rows["left"] + rows["right"])
        axis.bar(centers, rows["empirical"], width=rows["right"] - rows["left"], alpha=0.5, label="empirical")
        axis.plot(centers, rows["target"], color='navy', label="target")
        axis.set_xlabel(marginal)
        axis.legend(loc='best')
    _save(path)


def plot_contraction(curves: DataFrame, path: Path):
    """ Plot the difference norm of every coupling run on a log scale. """
    plt.figure()
    for run, rows in curves.groupby("run"):
        positive = rows[rows["norm"] > 0]
        plt.semilogy(positive["t"], positive["norm"], linewidth=0.8)
    plt.xlabel('t')
    plt.ylabel('|X(t) - X~(t)|_{-s}')
    plt.title('Coupling contraction')
    _save(path)


def gnuplot_kernel(csv_name: str) -> str:
    return "\n".join(["set datafile separator ','",
                      "set logscale xy",
                      "set xlabel 't'",
                      "set ylabel 'K(t)'",
                      f"plot '{csv_name}' using 1:2 skip 1 with lines title 'K_N(t)', \\",
                      f"     '{csv_name}' using 1:3 skip 1 with lines dashtype 2 title 'truncation bound'",
                      ""])


def gnuplot_msd(csv_name: str, fit: PowerLawFit) -> str:
    return "\n".join(["set datafile separator ','",
                      "set logscale xy",
                      "set xlabel 't'",
                      "set ylabel 'E[x(t)^2]'",
                      f"f(t) = exp({fit.intercept!r}) * t**({fit.slope!r})",
                      f"set xrange [{fit.window[0]!r}:{fit.window[1]!r}] writeback",
                      "set xrange restore",
                      f"plot '{csv_name}' using 1:2:3 skip 1 with yerrorbars title 'MSD', \\",
                      f"     f(x) with lines dashtype 2 title 'slope {fit.slope:.3f}'",
                      ""])


def gnuplot_histogram(csv_name: str, marginal: str) -> str:
    return "\n".join(["set datafile separator ','",
                      "set style fill transparent solid 0.5",
                      f"set xlabel '{marginal}'",
                      f"plot '{csv_name}' using ((strcol(1) eq '{marginal}') ? ($2+$3)/2 : 1/0):4 skip 1 "
                      f"with boxes title 'empirical', \\",
                      f"     '{csv_name}' using ((strcol(1) eq '{marginal}') ? ($2+$3)/2 : 1/0):5 skip 1 "
                      f"with lines title 'target'",
                      ""])


def gnuplot_contraction(csv_name: str) -> str:
    return "\n".join(["set datafile separator ','",
                      "set logscale y",
                      "set xlabel 't'",
                      "set ylabel 'difference norm'",
                      f"plot '{csv_name}' using 2:3 skip 1 with lines notitle",
                      ""])


def report_summary(report: ExperimentReport):
    """ Log the scalar entries of a report summary. """
    log.info(f"Summary of {report.command}")
    for key, value in sorted(report.summary.items()):
        if isinstance(value, (int, float, str, bool)) or value is None:
            log.info(f"{key}: {value}")
