"""
Asymptotic coupling of two copies of the system.

The shifted copy :math:`\\tilde X` is driven by the same noise as the primary copy :math:`X` plus the control
:math:`\\sqrt{2\\gamma}/m \\, u_0` in the velocity equation until the accumulated cost :math:`\\int u_0^2 dt` reaches
the budget :math:`\\kappa`. The difference :math:`\\bar X = X - \\tilde X` is integrated directly and never touches
the random streams, so the noise cancels exactly.
"""
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.random import Generator
from pandas import DataFrame
from scipy.stats import binomtest
from sklearn.linear_model import LinearRegression

from glebench import log
from glebench.config import NOISE_BUFFER_SIZE
from glebench.data import State
from glebench.dynamics import BlowUpError, Integrator, SimConfig, force, propagate
from glebench.enums import RegimeTag
from glebench.ensemble import run_blocks
from glebench.kernel import ModeSet, classify_regime, kernel_l2_norm
from glebench.measure import (lyapunov_psi, lyapunov_theta, norm_minus_s, psi_drift_constants, select_split,
                              theta_drift_constants)
from glebench.potential import Potential, derivative_power, lipschitz_envelope
from glebench.predicates import admits_theta
from glebench.streams import draw_noise, trajectory_streams


@dataclass
class CoupledPair:
    """ The primary copy, the difference to the shifted copy and the accumulated control cost.

    Parameters
    ----------
    primary_state
        The primary copy X
    difference
        :math:`\\bar X = X - \\tilde X`
    girsanov_cost
        :math:`\\int_0^t u_0^2 ds` accumulated while the control is on
    stopped
        Whether the cost has reached `kappa`; never reverts
    lambda_ctrl
        The contraction rate of the control
    kappa
        The cost budget
    time
        The time reached
    stop_time
        The time at which the control was switched off, None while running
    """
    primary_state: State
    difference: State
    girsanov_cost: float
    stopped: bool
    lambda_ctrl: float
    kappa: float
    time: float = 0.0
    stop_time: Optional[float] = None

    @staticmethod
    def start(primary: State, shifted: State, lambda_ctrl: float, kappa: float) -> 'CoupledPair':
        return CoupledPair(primary.copy(), primary - shifted, 0.0, False, lambda_ctrl, kappa)

    @property
    def shifted_state(self) -> State:
        """ The shifted copy :math:`\\tilde X = X - \\bar X`. """
        return self.primary_state - self.difference


@dataclass(frozen=True)
class DifferenceDiagnostics:
    """ The difference of the copies at one time.

    `zbar_norm` is :math:`(\\sum_k k^{-2s} \\bar z_k^2)^{1/2}` so that
    ``full_norm**2 == xbar**2 + vbar**2 + zbar_norm**2``.
    """
    xbar: float
    vbar: float
    zbar_norm: float
    full_norm: float
    zbar: np.ndarray = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"xbar": self.xbar, "vbar": self.vbar, "zbar_norm": self.zbar_norm, "full_norm": self.full_norm}


def _require_drag(gamma: float):
    if not gamma > 0:
        raise RuntimeError(f"Can't build the coupling control with gamma={gamma}: the drag has to be > 0")


def _control(x, xb, vb, zb, sqrt_c: np.ndarray, p: Potential, m: float, gamma: float, lambda_ctrl: float,
             R: Optional[float] = None):
    delta = force(x, p, R) - force(x - xb, p, R)
    memory = np.sum(sqrt_c * zb, axis=-1)
    return m / math.sqrt(2 * gamma) * ((3 * lambda_ctrl - gamma / m) * vb + 2 * lambda_ctrl ** 2 * xb
                                       - delta / m - memory / m)


def control_u0(X: State, Xt: State, modes: ModeSet, p: Potential, m: float, gamma: float,
               lambda_ctrl: float) -> float:
    """ Evaluate the control

    .. math::

        u_0 = \\frac{m}{\\sqrt{2\\gamma}} \\Big[(3\\lambda - \\gamma/m)\\bar v + 2\\lambda^2 \\bar x
        - \\frac1m(\\Phi'(x) - \\Phi'(\\tilde x)) - \\frac1m \\sum_k \\sqrt{c_k} \\bar z_k\\Big]

    Raises
    ------
    RuntimeError
        If gamma <= 0
    """
    _require_drag(gamma)
    diff = X - Xt
    return float(_control(X.x, diff.x, diff.v, diff.z, modes.sqrt_c, p, m, gamma, lambda_ctrl))


def default_lambda(modes: ModeSet) -> float:
    """ Return :math:`\\lambda_1 + 1`, i.e. 2 for the power-law mode family. """
    if modes.n_modes < 1:
        raise RuntimeError("Can't choose a control rate without modes")
    return float(modes.lam[0] + 1)


def check_lambda(modes: ModeSet, lambda_ctrl: float) -> float:
    """ Return the control rate if it exceeds every relaxation rate.

    Raises
    ------
    RuntimeError
        If ``lambda_ctrl <= max(lambda_k)``
    """
    largest = float(np.max(modes.lam))
    if not lambda_ctrl > largest:
        raise RuntimeError(f"Can't use control rate lambda={lambda_ctrl}: it has to exceed every relaxation rate "
                           f"(max lambda_k = {largest})")
    return float(lambda_ctrl)


def _advance_pair(integrator: Integrator, lambda_ctrl: float, kappa: float, x, v, z, xb, vb, zb, cost, stopped, xi):
    cfg = integrator.cfg
    u0 = _control(x, xb, vb, zb, integrator.sqrt_c, integrator.p, cfg.m, cfg.gamma, lambda_ctrl, cfg.cutoff_R)
    u0 = np.where(stopped, 0.0, u0)
    shift = math.sqrt(2 * cfg.gamma) / cfg.m * u0 * cfg.dt
    x_new, v_new, z_new = integrator.advance(x, v, z, xi)
    xb, vb, zb = integrator.advance_difference(x, x_new, xb, vb, zb, shift)
    cost = cost + u0 ** 2 * cfg.dt
    newly = ~stopped & (cost >= kappa)
    return x_new, v_new, z_new, xb, vb, zb, cost, stopped | newly, newly


def coupled_step(pair: CoupledPair, modes: ModeSet, p: Potential, cfg: SimConfig, rng: Generator) -> CoupledPair:
    """ Advance both copies by one step with the same normals.

    While running the control shift is added to the velocity of the shifted copy and :math:`u_0^2 dt` is added
    to the cost; once the cost reaches kappa the pair is stopped and both copies evolve without control.

    Raises
    ------
    RuntimeError
        If gamma <= 0
    BlowUpError
        If a state becomes non-finite
    """
    _require_drag(cfg.gamma)
    integrator = Integrator(modes, p, cfg)
    xi = rng.standard_normal(modes.n_modes + 1)
    state, diff = pair.primary_state, pair.difference
    x, v, z, xb, vb, zb, cost, stopped, newly = _advance_pair(
        integrator, pair.lambda_ctrl, pair.kappa, np.asarray(state.x, dtype=float),
        np.asarray(state.v, dtype=float), state.z, np.asarray(diff.x, dtype=float),
        np.asarray(diff.v, dtype=float), diff.z, np.asarray(pair.girsanov_cost), np.asarray(pair.stopped), xi)
    time = pair.time + cfg.dt
    advanced = replace(pair, primary_state=State(float(x), float(v), z), difference=State(float(xb), float(vb), zb),
                       girsanov_cost=float(cost), stopped=bool(stopped), time=time,
                       stop_time=time if bool(newly) else pair.stop_time)
    if not (advanced.primary_state.is_finite() and advanced.difference.is_finite()):
        raise BlowUpError(1, time, [0])
    return advanced


def difference_ode_exact(xbar0: float, vbar0: float, zbar0: Sequence[float], modes: ModeSet, lambda_ctrl: float,
                         t: float, s: Optional[float] = None) -> DifferenceDiagnostics:
    """ Solve the controlled difference system in closed form.

    With :math:`A = 2\\bar x_0 + \\bar v_0/\\lambda` and :math:`B = -(\\bar x_0 + \\bar v_0/\\lambda)`,
    :math:`\\bar x(t) = A e^{-\\lambda t} + B e^{-2\\lambda t}`, :math:`\\bar v = \\bar x'` and every mode solves
    :math:`\\bar z_k' = -\\lambda_k \\bar z_k + \\sqrt{c_k}\\bar v`, which integrates to a sum of exponentials.

    Raises
    ------
    RuntimeError
        If t < 0 or lambda_ctrl does not exceed every relaxation rate
    """
    if not t >= 0:
        raise RuntimeError(f"Can't evaluate the difference at t={t}: t has to be >= 0")
    lam = check_lambda(modes, lambda_ctrl)
    s = modes.resolve_s(s)
    a_coef = 2 * xbar0 + vbar0 / lam
    b_coef = -(xbar0 + vbar0 / lam)
    e1, e2 = math.exp(-lam * t), math.exp(-2 * lam * t)
    xbar = a_coef * e1 + b_coef * e2
    vbar = -lam * a_coef * e1 - 2 * lam * b_coef * e2
    ek = np.exp(-modes.lam * t)
    zbar = (ek * np.asarray(zbar0, dtype=float)
            + modes.sqrt_c * (-lam * a_coef * (e1 - ek) / (modes.lam - lam)
                              - 2 * lam * b_coef * (e2 - ek) / (modes.lam - 2 * lam)))
    zbar_norm = math.sqrt(float(np.sum(modes.norm_weights(s) * zbar ** 2)))
    return DifferenceDiagnostics(xbar, vbar, zbar_norm, math.sqrt(xbar ** 2 + vbar ** 2 + zbar_norm ** 2), zbar)


def difference_envelope(xbar0: float, vbar0: float, lambda_ctrl: float) -> Tuple[float, float]:
    """ Return :math:`C_1 = 3|\\bar x_0| + 3|\\bar v_0|/\\lambda` and :math:`C_2 = 4\\lambda|\\bar x_0| + 4|\\bar v_0|`
    with :math:`|\\bar x(t)| \\leq C_1 e^{-\\lambda t}` and :math:`|\\bar v(t)| \\leq C_2 e^{-\\lambda t}`. """
    return (3 * abs(xbar0) + 3 * abs(vbar0) / lambda_ctrl,
            4 * lambda_ctrl * abs(xbar0) + 4 * abs(vbar0))


def _energy_functional(state: State, modes: ModeSet, p: Potential, m: float, gamma: float, s: float):
    """ Theta with its drift constant in regime (D), otherwise Psi with a2. """
    if admits_theta(modes, gamma):
        split_N, _ = select_split(modes, m, gamma, s)
        value = lyapunov_theta(state, modes, p, m, s, split_N)
        return float(value), theta_drift_constants(modes, m, gamma, s, split_N).a, "theta"
    return float(lyapunov_psi(state, modes, p, m, s)), psi_drift_constants(modes, m, gamma, s).a2, "psi"


@dataclass(frozen=True)
class CostBound:
    """ The analytic bound of the control cost and its ingredients.

    ``total = control_term + memory_term + kernel_term + force_term``; the automatic budget is twice the total.
    """
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float
    control_term: float
    memory_term: float
    kernel_term: float
    force_term: float
    total: float
    functional: str

    @property
    def kappa_auto(self) -> float:
        return 2 * self.total

    def to_dict(self) -> dict:
        result = dict(self.__dict__)
        result["kappa_auto"] = self.kappa_auto
        return result


def coupling_cost_bound(X0: State, Xbar0: State, modes: ModeSet, p: Potential, m: float, gamma: float,
                        lambda_ctrl: float, s: Optional[float] = None, tail_margin: float = 1.0) -> CostBound:
    """ Evaluate the bound of :math:`\\int_0^\\infty u_0^2 dt` on the event that the primary copy keeps its energy
    functional below its drift envelope plus `tail_margin`.

    Parameters
    ----------
    X0 :
        The initial state of the primary copy
    Xbar0 :
        The initial difference
    modes :
        The modes of the kernel
    p :
        The potential
    m, gamma :
        Mass and drag
    lambda_ctrl :
        The control rate
    s :
        The norm weight
    tail_margin :
        The excess R of the energy functional admitted by the event

    Returns
    -------
    CostBound
        The bound; outside regime (D) Theta and a are replaced by Psi and a2
    """
    _require_drag(gamma)
    lam = check_lambda(modes, lambda_ctrl)
    s = modes.resolve_s(s)
    weights = modes.norm_weights(s)
    c1, c2 = difference_envelope(float(Xbar0.x), float(Xbar0.v), lam)
    c3 = 2 * m ** 2 / gamma * ((3 * lam - gamma / m) ** 2 * c2 ** 2 + 4 * lam ** 4 * c1 ** 2)
    q = derivative_power(p)
    energy, drift_constant, functional = _energy_functional(X0, modes, p, m, gamma, s)
    c4 = (m * energy + 2 * q * m * drift_constant / lam + m * tail_margin) ** (2 * q)
    c5 = 4 * c1 ** 2 / gamma * (lipschitz_envelope(p, c1) ** 2 + c4)
    control_term = c3 / (2 * lam)
    memory_term = 4 * float(norm_minus_s(Xbar0, s)) ** 2 / gamma * float(np.sum(modes.c / (2 * modes.lam * weights)))
    kernel_term = 4 * c2 ** 2 / gamma * kernel_l2_norm(modes)
    force_term = c5 / lam
    total = control_term + memory_term + kernel_term + force_term
    bound = CostBound(c1, c2, c3, c4, c5, control_term, memory_term, kernel_term, force_term, total, functional)
    log.debug(f"Coupling cost bound: {bound.to_dict()}")
    return bound


def _couple_block(indices: Sequence[int], X0: State, Xt0: State, modes: ModeSet, p: Potential, cfg: SimConfig,
                  lambda_ctrl: float, kappa: float, record_steps: np.ndarray, s: float):
    streams = trajectory_streams(cfg.seed, indices)
    batch = len(streams)
    n_modes = modes.n_modes
    integrator = Integrator(modes, p, cfg)
    weights = modes.norm_weights(s)
    diff = X0 - Xt0
    x, v = np.full(batch, float(X0.x)), np.full(batch, float(X0.v))
    z = np.tile(X0.z, (batch, 1))
    xb, vb = np.full(batch, float(diff.x)), np.full(batch, float(diff.v))
    zb = np.tile(diff.z, (batch, 1))
    cost, stopped = np.zeros(batch), np.zeros(batch, dtype=bool)
    stop_time = np.full(batch, np.nan)
    n_records = len(record_steps)
    norms, costs, xbars = (np.empty((n_records, batch)) for _ in range(3))
    record_index = 0

    def record(step_index):
        nonlocal record_index
        while record_index < n_records and record_steps[record_index] == step_index:
            norms[record_index] = np.sqrt(np.square(xb) + np.square(vb) + np.sum(weights * np.square(zb), axis=1))
            costs[record_index] = cost
            xbars[record_index] = xb
            record_index += 1

    record(0)
    n_steps = cfg.n_steps
    chunk = max(1, NOISE_BUFFER_SIZE // (batch * (n_modes + 1)))
    done = 0
    while done < n_steps:
        block = min(chunk, n_steps - done)
        for xi in draw_noise(streams, block, n_modes):
            x, v, z, xb, vb, zb, cost, stopped, newly = _advance_pair(integrator, lambda_ctrl, kappa, x, v, z,
                                                                       xb, vb, zb, cost, stopped, xi)
            done += 1
            stop_time[newly] = done * cfg.dt
            finite = np.isfinite(x) & np.isfinite(v) & np.isfinite(xb) & np.isfinite(vb)
            if not np.all(finite):
                raise BlowUpError(done, done * cfg.dt, [indices[i] for i in np.flatnonzero(~finite)])
            record(done)
    final = np.sqrt(np.square(xb) + np.square(vb) + np.sum(weights * np.square(zb), axis=1))
    return (norms[:record_index], costs[:record_index], xbars[:record_index], final, cost, stopped, stop_time)


@dataclass
class CouplingReport:
    """ Outcome of a coupling experiment.

    Parameters
    ----------
    runs
        One row per run: ``run``, ``initial_norm``, ``final_norm``, ``ratio``, ``cost``, ``stopped``, ``stop_time``
    curves
        Long table ``run``, ``t``, ``norm``, ``cost``, ``xbar`` of the recorded contraction curves
    never_stopped_fraction
        The fraction of runs whose cost stayed below kappa
    confidence_interval
        The Wilson 95% interval of that fraction
    lambda_ctrl
        The control rate
    kappa
        The cost budget
    cost_bound
        The analytic cost bound
    regime
        The regime tag of the kernel
    """
    runs: DataFrame
    curves: DataFrame
    never_stopped_fraction: float
    confidence_interval: Tuple[float, float]
    lambda_ctrl: float
    kappa: float
    cost_bound: CostBound
    regime: RegimeTag

    def summary(self) -> dict:
        costs = self.runs["cost"]
        return {"n_runs": int(len(self.runs)),
                "never_stopped_fraction": self.never_stopped_fraction,
                "confidence_interval": list(self.confidence_interval),
                "lambda": self.lambda_ctrl,
                "kappa": self.kappa,
                "regime": str(self.regime),
                "cost": {"min": float(costs.min()), "median": float(costs.median()), "max": float(costs.max()),
                         "mean": float(costs.mean())},
                "max_ratio": float(self.runs["ratio"].max()),
                "cost_bound": self.cost_bound.to_dict()}


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    interval = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(interval.low), float(interval.high)


def run_coupling_experiment(X0: State, Xt0: State, modes: ModeSet, p: Potential, cfg: SimConfig,
                            lambda_ctrl: Optional[float] = None, kappa: Union[float, str, None] = "auto",
                            n_runs: int = 1, s: Optional[float] = None, tail_margin: float = 1.0,
                            record_stride: Optional[int] = None, cpu_count: int = 1) -> CouplingReport:
    """ Run `n_runs` coupled pairs from the same initial states, each driven by its own stream.

    Parameters
    ----------
    X0, Xt0 :
        The initial primary and shifted states
    modes :
        The modes of the kernel
    p :
        The potential
    cfg :
        The integrator settings, gamma has to be > 0
    lambda_ctrl :
        The control rate; by default :func:`default_lambda`
    kappa :
        The cost budget or ``"auto"`` for twice the analytic cost bound
    n_runs :
        The number of runs
    s :
        The norm weight
    tail_margin :
        The excess admitted by the cost bound
    record_stride :
        Record the contraction curves every `record_stride` steps; by default ``cfg.thin_stride``
    cpu_count :
        The number of worker processes

    Returns
    -------
    CouplingReport
        Per-run results and aggregates
    """
    cfg.validate()
    _require_drag(cfg.gamma)
    s = modes.resolve_s(s)
    lambda_ctrl = check_lambda(modes, default_lambda(modes) if lambda_ctrl is None else lambda_ctrl)
    regime = classify_regime(modes.spec).tag if modes.spec is not None else RegimeTag.UNCLASSIFIED
    if regime != RegimeTag.DIFFUSIVE:
        warnings.warn(f"Coupling outside regime (D) (regime: {regime}); the cost is reported without expectation")
    bound = coupling_cost_bound(X0, X0 - Xt0, modes, p, cfg.m, cfg.gamma, lambda_ctrl, s, tail_margin)
    if kappa is None or kappa == "auto":
        kappa = bound.kappa_auto
    kappa = float(kappa)
    if not kappa > 0:
        raise RuntimeError(f"Can't use cost budget kappa={kappa}: kappa has to be > 0")
    stride = cfg.thin_stride if record_stride is None else int(record_stride)
    record_steps = np.arange(0, cfg.n_steps + 1, stride)
    log.info(f"Couple {n_runs} runs with lambda={lambda_ctrl}, kappa={kappa}")

    parts = run_blocks(_couple_block, n_runs, (X0, Xt0, modes, p, cfg, lambda_ctrl, kappa, record_steps, s),
                       cpu_count)
    norms = np.concatenate([part[0] for part in parts], axis=1)
    costs = np.concatenate([part[1] for part in parts], axis=1)
    xbars = np.concatenate([part[2] for part in parts], axis=1)
    final, cost, stopped, stop_time = (np.concatenate([part[i] for part in parts]) for i in range(3, 7))

    initial_norm = float(norm_minus_s(X0 - Xt0, s))
    ratio = final / initial_norm if initial_norm > 0 else np.zeros_like(final)
    runs = DataFrame({"run": np.arange(n_runs), "initial_norm": np.full(n_runs, initial_norm),
                      "final_norm": final, "ratio": ratio, "cost": cost, "stopped": stopped,
                      "stop_time": stop_time})
    times = record_steps[:len(norms)] * cfg.dt
    curves = DataFrame({"run": np.repeat(np.arange(n_runs), len(times)),
                        "t": np.tile(times, n_runs),
                        "norm": norms.T.reshape(-1),
                        "cost": costs.T.reshape(-1),
                        "xbar": xbars.T.reshape(-1)})
    survivors = int(np.count_nonzero(~stopped))
    report = CouplingReport(runs, curves, survivors / n_runs, wilson_interval(survivors, n_runs), lambda_ctrl,
                            kappa, bound, regime)
    log.debug(f"Never stopped: {survivors}/{n_runs}")
    return report


@dataclass(frozen=True)
class TailDiagnostic:
    """ Exceedance frequencies of :math:`S = \\sup_t e^{-\\eta t}\\Phi(x(t))/m - E(X_0) - c/\\eta` where E is the
    energy functional and c its drift constant; `rate` is the fitted exponential decay rate of the frequencies. """
    table: DataFrame
    rate: float
    eta: float
    functional: str
    samples: np.ndarray = field(repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"rate": self.rate, "eta": self.eta, "functional": self.functional,
                "n_paths": int(len(self.samples))}


def exponential_tail_diagnostic(X0: State, modes: ModeSet, p: Potential, cfg: SimConfig, n_paths: int,
                                eta: float = 0.1, thresholds: Optional[Sequence[float]] = None,
                                s: Optional[float] = None) -> TailDiagnostic:
    """ Estimate how fast the probability of large excursions of the potential energy decays.

    The paths start at `X0` and use the streams ``0 .. n_paths - 1``. The rate is fitted by least squares to the
    logarithm of the positive exceedance frequencies; it is NaN if fewer than two are positive.
    """
    cfg.validate()
    if not eta > 0:
        raise RuntimeError(f"Can't use eta={eta}: eta has to be > 0")
    s = modes.resolve_s(s)
    energy, drift_constant, functional = _energy_functional(X0, modes, p, cfg.m, cfg.gamma, s)
    streams = trajectory_streams(cfg.seed, range(n_paths))
    running = np.full(n_paths, float(p.phi(X0.x)) / cfg.m)

    def track(step_index, x, v, z):
        np.maximum(running, np.exp(-eta * step_index * cfg.dt) * p.phi(x) / cfg.m, out=running)

    initial = State(np.full(n_paths, float(X0.x)), np.full(n_paths, float(X0.v)), np.tile(X0.z, (n_paths, 1)))
    propagate(initial, modes, p, cfg, streams, record_steps=np.zeros(1, dtype=int), mode_columns=[], s=s,
              on_step=track)
    samples = running - energy - drift_constant / eta
    if thresholds is None:
        thresholds = np.linspace(0.0, max(float(np.max(samples)), 1e-12), 20)
    thresholds = np.asarray(thresholds, dtype=float)
    exceedance = np.array([np.mean(samples > r) for r in thresholds])
    table = DataFrame({"r": thresholds, "exceedance": exceedance})
    positive = exceedance > 0
    rate = float("nan")
    if np.count_nonzero(positive) >= 2:
        regression = LinearRegression().fit(thresholds[positive].reshape(-1, 1), np.log(exceedance[positive]))
        rate = float(-regression.coef_[0])
    return TailDiagnostic(table, rate, eta, functional, samples)
