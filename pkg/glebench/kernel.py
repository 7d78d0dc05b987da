"""
Exponential mode family of the power-law memory kernel.

The kernel is the truncated sum :math:`K_N(t) = \\sum_{k=1}^N c_k e^{-\\lambda_k t}` with
:math:`c_k = k^{-(1+\\alpha\\beta)}` and :math:`\\lambda_k = k^{-\\beta}`.
"""
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np
from pandas import DataFrame
from scipy.special import zeta
from sklearn.linear_model import LinearRegression

from glebench import log
from glebench.config import FIT_WINDOW_FACTOR
from glebench.enums import RegimeTag


@dataclass(frozen=True)
class KernelSpec:
    """ Parameters of the memory kernel.

    Parameters
    ----------
    alpha
        The tail exponent, :math:`K(t) \\sim t^{-\\alpha}`
    beta
        The mode-spacing exponent
    n_modes
        The truncation N
    s
        The weight of the phase-space norm; only used by diagnostics
    """
    alpha: float
    beta: float
    n_modes: int
    s: float = 0.6

    def validate(self):
        """ Check the constraints alpha > 0, beta > 0, n_modes >= 1 and s > 1/2.

        Raises
        ------
        RuntimeError
            If a constraint is violated
        """
        if not np.isfinite(self.alpha) or self.alpha <= 0:
            raise RuntimeError(f"Can't use alpha={self.alpha}: alpha has to be > 0")
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise RuntimeError(f"Can't use beta={self.beta}: beta has to be > 0")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise RuntimeError(f"Can't use n_modes={self.n_modes}: n_modes has to be an integer >= 1")
        if not self.s > 0.5:
            raise RuntimeError(f"Can't use s={self.s}: s has to be > 1/2")

    @property
    def decay_exponent(self) -> float:
        """ The exponent 1 + alpha*beta of the coupling weights. """
        return 1.0 + self.alpha * self.beta


@dataclass(frozen=True, eq=False)
class ModeSet:
    """ The coupling weights and relaxation rates of the truncated kernel.

    Parameters
    ----------
    c
        The coupling weights :math:`c_k`
    lam
        The relaxation rates :math:`\\lambda_k`
    spec
        The kernel parameters the modes were built from, if any
    """
    c: np.ndarray
    lam: np.ndarray
    spec: Optional[KernelSpec] = None

    @property
    def n_modes(self) -> int:
        return len(self.c)

    @property
    def sqrt_c(self) -> np.ndarray:
        return np.sqrt(self.c)

    @property
    def indices(self) -> np.ndarray:
        """ The mode indices k = 1..N as floats. """
        return np.arange(1, self.n_modes + 1, dtype=float)

    def norm_weights(self, s: float) -> np.ndarray:
        """ The weights :math:`k^{-2s}` of the phase-space norm. """
        return self.indices ** (-2.0 * s)

    def resolve_s(self, s: Optional[float] = None) -> float:
        """ Return `s` or, if it is None, the norm weight of the kernel parameters.

        Raises
        ------
        RuntimeError
            If neither is available
        """
        if s is not None:
            return s
        if self.spec is None:
            raise RuntimeError("Can't determine the norm weight s: the modes carry no kernel parameters")
        return self.spec.s

    def truncate(self, n_modes: int) -> 'ModeSet':
        """ Return the first `n_modes` modes. """
        spec = replace(self.spec, n_modes=n_modes) if self.spec is not None else None
        return ModeSet(self.c[:n_modes].copy(), self.lam[:n_modes].copy(), spec)


@dataclass(frozen=True)
class Regime:
    """ The regime of a kernel parameterization.

    Parameters
    ----------
    tag
        The matching condition
    s_range
        The open interval of admissible norm weights; None for unclassified parameters
    s_in_range
        Whether the norm weight of the parameters lies in `s_range`
    """
    tag: RegimeTag
    s_range: Optional[Tuple[float, float]]
    s_in_range: bool

    def to_dict(self) -> dict:
        return {"tag": str(self.tag),
                "condition": self.tag.label,
                "s_range": list(self.s_range) if self.s_range is not None else None,
                "s_in_range": self.s_in_range}


@dataclass(frozen=True)
class PowerLawFit:
    """ Result of a least-squares fit of log y against log t.

    Parameters
    ----------
    slope
        The fitted exponent
    intercept
        The fitted log prefactor
    window
        The time window containing the fitted points
    n_points
        The number of points used by the fit
    """
    slope: float
    intercept: float
    window: Tuple[float, float]
    n_points: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "window": list(self.window),
                "n_points": self.n_points}


def build_modes(spec: KernelSpec) -> ModeSet:
    """ Build the coupling weights and relaxation rates of the truncated kernel.

    Parameters
    ----------
    spec :
        The kernel parameters

    Returns
    -------
    ModeSet
        The arrays :math:`c_k = k^{-(1+\\alpha\\beta)}` and :math:`\\lambda_k = k^{-\\beta}` for k = 1..N

    Raises
    ------
    RuntimeError
        If the parameters are invalid
    """
    spec.validate()
    k = np.arange(1, int(spec.n_modes) + 1, dtype=float)
    c = k ** (-spec.decay_exponent)
    lam = k ** (-spec.beta)
    return ModeSet(c, lam, spec)


def eval_kernel(modes: ModeSet, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """ Evaluate :math:`K_N(t) = \\sum_k c_k e^{-\\lambda_k t}`.

    Parameters
    ----------
    modes :
        The modes of the kernel
    t :
        A time or an array of times, all >= 0

    Returns
    -------
    Union[float, numpy.ndarray]
        The kernel values with the shape of `t`

    Raises
    ------
    RuntimeError
        If a time is negative
    """
    times = np.asarray(t, dtype=float)
    if np.any(times < 0) or not np.all(np.isfinite(times)):
        raise RuntimeError(f"Can't evaluate the kernel at negative or non-finite times")
    flat = times.reshape(-1)
    values = np.empty_like(flat)
    rows = max(1, 2 ** 22 // max(modes.n_modes, 1))
    for start in range(0, len(flat), rows):
        chunk = flat[start:start + rows]
        values[start:start + rows] = np.exp(-np.outer(chunk, modes.lam)) @ modes.c
    if times.ndim == 0:
        return float(values[0])
    return values.reshape(times.shape)


def truncation_bound(spec: KernelSpec) -> float:
    """ Analytic bound :math:`N^{-\\alpha\\beta}/(\\alpha\\beta)` of the kernel mass beyond the truncation. """
    ab = spec.alpha * spec.beta
    return float(spec.n_modes ** (-ab) / ab)


def tail_mass(spec: KernelSpec) -> float:
    """ Exact mass :math:`\\sum_{k>N} c_k` of the modes beyond the truncation. """
    return float(zeta(spec.decay_exponent, spec.n_modes + 1))


def kernel_l2_norm(modes: ModeSet) -> float:
    """ Return :math:`\\int_0^\\infty K_N(t)^2 dt = \\sum_j \\sum_k c_j c_k / (\\lambda_j + \\lambda_k)`. """
    total = 0.0
    rows = max(1, 2 ** 20 // modes.n_modes)
    for start in range(0, modes.n_modes, rows):
        c_j = modes.c[start:start + rows, None]
        lam_j = modes.lam[start:start + rows, None]
        total += float(np.sum(c_j * modes.c[None, :] / (lam_j + modes.lam[None, :])))
    return total


def classify_regime(spec: KernelSpec) -> Regime:
    """ Classify the kernel parameters.

    The conditions are

        * (D) alpha > 1 and beta > 1/(alpha-1), s in (1/2, (alpha-1)beta/2)
        * (C) alpha = 1 and beta > 1, s in (1/2, beta/2)
        * (SD) 0 < alpha < 1 and beta > 1/alpha, s in (1/2, alpha*beta/2)

    Parameters
    ----------
    spec :
        The kernel parameters

    Returns
    -------
    Regime
        The matching regime, :attr:`RegimeTag.UNCLASSIFIED` if no condition holds
    """
    alpha, beta = spec.alpha, spec.beta
    if alpha > 1 and beta > 1 / (alpha - 1):
        tag, upper = RegimeTag.DIFFUSIVE, (alpha - 1) * beta / 2
    elif alpha == 1 and beta > 1:
        tag, upper = RegimeTag.CRITICAL, beta / 2
    elif 0 < alpha < 1 and beta > 1 / alpha:
        tag, upper = RegimeTag.SUBDIFFUSIVE, alpha * beta / 2
    else:
        return Regime(RegimeTag.UNCLASSIFIED, None, False)
    return Regime(tag, (0.5, upper), bool(0.5 < spec.s < upper))


def regime_condition(spec: KernelSpec) -> str:
    """ Describe the condition the parameters would have to satisfy for their range of alpha. """
    if spec.alpha > 1:
        return "(D) requires alpha > 1 and beta > 1/(alpha-1), with 1/2 < s < (alpha-1)*beta/2"
    if spec.alpha == 1:
        return "(C) requires alpha = 1 and beta > 1, with 1/2 < s < beta/2"
    return "(SD) requires 0 < alpha < 1 and beta > 1/alpha, with 1/2 < s < alpha*beta/2"


def fit_power_law(t: np.ndarray, y: np.ndarray, window: Optional[Tuple[float, float]] = None) -> PowerLawFit:
    """ Fit :math:`y \\approx e^b t^a` by ordinary least squares in log-log coordinates.

    Parameters
    ----------
    t :
        The positive abscissae
    y :
        The positive values
    window :
        If given only points with ``window[0] <= t <= window[1]`` are used

    Returns
    -------
    PowerLawFit
        The slope a and intercept b

    Raises
    ------
    RuntimeError
        If fewer than two usable points remain
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (t > 0) & (y > 0) & np.isfinite(y)
    if window is not None:
        mask &= (t >= window[0]) & (t <= window[1])
    if np.count_nonzero(mask) < 2:
        raise RuntimeError(f"Can't fit a power law: only {np.count_nonzero(mask)} usable points in window {window}")
    log_t = np.log(t[mask]).reshape(-1, 1)
    regression = LinearRegression().fit(log_t, np.log(y[mask]))
    used = t[mask]
    return PowerLawFit(float(regression.coef_[0]), float(regression.intercept_),
                       (float(used.min()), float(used.max())), int(mask.sum()))


def fit_tail_exponent(modes: ModeSet, t_window: Tuple[float, float], n_points: int = 50) -> float:
    """ Fit the log-log slope of the kernel over a window.

    For many modes and a window inside the power-law plateau the slope approximates :math:`-\\alpha`.
    A warning is issued when the window ends after ``FIT_WINDOW_FACTOR / lambda_N``.

    Parameters
    ----------
    modes :
        The modes of the kernel
    t_window :
        The window (t_min, t_max) with 0 < t_min < t_max
    n_points :
        The number of logarithmically spaced points, at least 10

    Returns
    -------
    float
        The fitted slope
    """
    t_min, t_max = t_window
    if t_min <= 0 or t_max <= t_min:
        raise RuntimeError(f"Can't fit the kernel tail on window {t_window}: it has to satisfy 0 < t_min < t_max")
    if n_points < 10:
        raise RuntimeError(f"Can't fit the kernel tail with {n_points} points: at least 10 are required")
    plateau_end = FIT_WINDOW_FACTOR / modes.lam[-1]
    if t_max > plateau_end:
        warnings.warn(f"Fit window ends at {t_max} after the power-law plateau of {modes.n_modes} modes "
                      f"(ends near {plateau_end:.6g}); the slope reflects the exponential cut-off")
    t = np.geomspace(t_min, t_max, n_points)
    fit = fit_power_law(t, eval_kernel(modes, t))
    log.debug(f"Kernel tail fit on [{t_min}, {t_max}]: slope {fit.slope}")
    return fit.slope


def kernel_table(modes: ModeSet, times: np.ndarray) -> DataFrame:
    """ Tabulate the kernel and the truncation bound at the given times.

    Returns
    -------
    DataFrame
        Columns ``t``, ``K``, ``tail_bound``
    """
    times = np.asarray(times, dtype=float)
    bound = truncation_bound(modes.spec) if modes.spec is not None else np.nan
    return DataFrame({"t": times, "K": eval_kernel(modes, times), "tail_bound": np.full(len(times), bound)})
