"""
The candidate invariant measure :math:`\\mu = \\mu_x \\times \\mu_v \\times \\prod_k \\nu`, the phase-space norm and
the Lyapunov functionals :math:`\\Psi` and :math:`\\Theta` together with their generator images.
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from numpy.random import Generator, SeedSequence, default_rng
from pandas import DataFrame
from scipy.special import zeta

from glebench import log
from glebench.config import ENVELOPE_MARGIN, MIN_ACCEPTANCE_RATE
from glebench.data import State
from glebench.enums import RegimeTag
from glebench.kernel import ModeSet, classify_regime
from glebench.potential import Potential, check_assumptions
from glebench.predicates import admits_theta


@dataclass
class GibbsSampler:
    """ Exact sampler of :math:`\\mu`.

    The position is drawn by rejection from the Gaussian envelope :math:`N(0, b/2)`: the growth assumption gives
    :math:`e^{-\\Phi(x)} \\leq e^{1 - x^2/b}`, so a proposal is accepted with probability
    :math:`\\exp(-\\Phi(x) - 1 + x^2/b)`. The velocity is :math:`N(0, 1/m)`, every mode :math:`N(0, 1)`.

    Parameters
    ----------
    potential
        The potential
    m
        The mass
    envelope_b
        The envelope constant b
    N
        The number of modes
    seed
        The seed of the sampler's own stream
    """
    potential: Potential
    m: float
    envelope_b: float
    N: int
    seed: int
    _rng: Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.envelope_b > 0:
            raise RuntimeError(f"Can't sample with envelope b={self.envelope_b}: b has to be > 0")
        self._rng = default_rng(SeedSequence(self.seed))

    @staticmethod
    def from_potential(potential: Potential, m: float, N: int, seed: int,
                       grid: Optional[np.ndarray] = None) -> 'GibbsSampler':
        """ Create a sampler whose envelope is ``ENVELOPE_MARGIN`` times the estimated growth constant.

        Raises
        ------
        RuntimeError
            If the potential does not satisfy the growth assumption
        """
        report = check_assumptions(potential, grid)
        if not (report.conforming and report.growth_ok):
            raise RuntimeError(f"Can't sample the invariant measure of {potential!r}: "
                               f"the growth assumption does not hold")
        return GibbsSampler(potential, m, ENVELOPE_MARGIN * report.b_estimate, N, seed)

    def _acceptance(self, x: np.ndarray) -> np.ndarray:
        log_ratio = -self.potential.phi(x) - 1.0 + x ** 2 / self.envelope_b
        if np.any(log_ratio > 1e-12):
            raise RuntimeError(f"Can't sample with envelope b={self.envelope_b}: it does not dominate "
                               f"exp(-Phi) for {self.potential!r}, increase b")
        return np.exp(np.minimum(log_ratio, 0.0))

    def sample_positions(self, n: int, rng: Optional[Generator] = None) -> np.ndarray:
        """ Draw `n` positions from :math:`e^{-\\Phi}/Z`.

        Raises
        ------
        RuntimeError
            If the acceptance rate falls below ``MIN_ACCEPTANCE_RATE``
        """
        rng = self._rng if rng is None else rng
        scale = math.sqrt(self.envelope_b / 2)
        accepted, proposed, n_accepted = [], 0, 0
        batch = max(64, n)
        while n_accepted < n:
            proposals = rng.normal(0.0, scale, batch)
            uniforms = rng.random(batch)
            keep = proposals[uniforms < self._acceptance(proposals)]
            proposed += batch
            n_accepted += len(keep)
            accepted.append(keep)
            rate = n_accepted / proposed
            if rate < MIN_ACCEPTANCE_RATE:
                raise RuntimeError(f"Can't sample positions: acceptance rate {rate:.2e} is below "
                                   f"{MIN_ACCEPTANCE_RATE}; increase the envelope constant b")
            batch = max(64, int(1.2 * (n - n_accepted) / max(rate, MIN_ACCEPTANCE_RATE)) + 1)
        return np.concatenate(accepted)[:n]

    def sample(self, n: int, rng: Optional[Generator] = None) -> State:
        """ Draw a batch of `n` states. """
        rng = self._rng if rng is None else rng
        x = self.sample_positions(n, rng)
        v = rng.standard_normal(n) / math.sqrt(self.m)
        z = rng.standard_normal((n, self.N))
        return State(x, v, z)

    def draw(self, rng: Generator) -> State:
        """ Draw one state from `rng`, one proposal at a time. """
        scale = math.sqrt(self.envelope_b / 2)
        max_attempts = int(10 / MIN_ACCEPTANCE_RATE)
        for _ in range(max_attempts):
            proposal = rng.normal(0.0, scale)
            if rng.random() < self._acceptance(np.asarray(proposal)):
                break
        else:
            raise RuntimeError(f"Can't sample a position: no acceptance in {max_attempts} proposals; "
                               f"increase the envelope constant b")
        v = rng.standard_normal() / math.sqrt(self.m)
        return State(float(proposal), float(v), rng.standard_normal(self.N))


def sample_mu(gs: GibbsSampler) -> State:
    """ Draw one exact sample of :math:`\\mu` from the sampler's stream. """
    return gs.sample(1)[0]


def sample_box(n: int, N: int, half_width: float, rng: Generator) -> State:
    """ Draw `n` states uniformly from the box :math:`[-h, h]^{N+2}`. """
    return State(rng.uniform(-half_width, half_width, n), rng.uniform(-half_width, half_width, n),
                 rng.uniform(-half_width, half_width, (n, N)))


def mode_weights(n_modes: int, s: float) -> np.ndarray:
    return np.arange(1, n_modes + 1, dtype=float) ** (-2.0 * s)


def norm_minus_s(state: State, s: float):
    """ Return :math:`\\|X\\|_{-s} = (x^2 + v^2 + \\sum_k k^{-2s} z_k^2)^{1/2}` for a state or a batch. """
    weights = mode_weights(state.n_modes, s)
    return np.sqrt(np.square(state.x) + np.square(state.v) + np.sum(weights * np.square(state.z), axis=-1))


def lyapunov_psi(state: State, modes: ModeSet, p: Potential, m: float, s: float):
    """ :math:`\\Psi(X) = \\Phi(x)/m + v^2/2 + \\frac12 \\sum_k k^{-2s} z_k^2` """
    weights = modes.norm_weights(s)
    return p.phi(state.x) / m + 0.5 * np.square(state.v) + 0.5 * np.sum(weights * np.square(state.z), axis=-1)


def _check_split(modes: ModeSet, split_N: int):
    if not 0 <= split_N <= modes.n_modes:
        raise RuntimeError(f"Can't split {modes.n_modes} modes at {split_N}: split_N has to be in [0, N]")


def lyapunov_theta(state: State, modes: ModeSet, p: Potential, m: float, s: float, split_N: int):
    """ :math:`\\Theta(X) = \\Phi(x)/m + v^2/2 + \\frac{1}{2m}\\sum_{k \\leq n} z_k^2
    + \\frac12 \\sum_{k > n} k^{-2s} z_k^2` with ``n = split_N``. """
    _check_split(modes, split_N)
    z2 = np.square(state.z)
    weights = modes.norm_weights(s)
    head = np.sum(z2[..., :split_N], axis=-1) / (2 * m)
    tail = 0.5 * np.sum(weights[split_N:] * z2[..., split_N:], axis=-1)
    return p.phi(state.x) / m + 0.5 * np.square(state.v) + head + tail


@dataclass(frozen=True)
class DriftConstants:
    """ Constants of :math:`\\mathcal{L}\\Psi \\leq a_1 \\Psi + a_2`.

    The full-sum values extend the sums to all k through the Hurwitz zeta function; `a1_full` is infinite when
    the defining series diverges.
    """
    a1: float
    a2: float
    a1_full: float
    a2_full: float


@dataclass(frozen=True)
class ThetaConstants:
    """ Constants of :math:`\\mathcal{L}\\Theta \\leq a` and the tail coefficient `a1_theta` for a split. """
    a: float
    a1_theta: float
    split_N: int
    a_full: float
    a1_theta_full: float


def _zeta_or_inf(exponent: float, start: int) -> float:
    return float(zeta(exponent, start)) if exponent > 1 else float("inf")


def psi_drift_constants(modes: ModeSet, m: float, gamma: float, s: float) -> DriftConstants:
    """ Return :math:`a_1 = \\max\\{1 + 1/m, \\frac1m \\sum c_k k^{2s} + \\sum c_k k^{-2s}\\}` and
    :math:`a_2 = \\gamma/m^2 + \\sum k^{-2s} \\lambda_k`, truncated at N and as full sums. """
    weights = modes.norm_weights(s)
    a1 = max(1 + 1 / m, float(np.sum(modes.c / weights) / m + np.sum(modes.c * weights)))
    a2 = gamma / m ** 2 + float(np.sum(weights * modes.lam))
    a1_full = a2_full = float("nan")
    if modes.spec is not None:
        p_exp, beta = modes.spec.decay_exponent, modes.spec.beta
        a1_full = max(1 + 1 / m, _zeta_or_inf(p_exp - 2 * s, 1) / m + _zeta_or_inf(p_exp + 2 * s, 1))
        a2_full = gamma / m ** 2 + _zeta_or_inf(beta + 2 * s, 1)
    return DriftConstants(a1, a2, a1_full, a2_full)


def generator_on_psi(state: State, modes: ModeSet, p: Potential, m: float, gamma: float, s: float):
    """ Evaluate the generator on :math:`\\Psi`:

    .. math::

        \\mathcal{L}\\Psi = -\\frac{\\gamma}{m} v^2 - \\sum_k \\lambda_k k^{-2s} z_k^2
        - \\frac1m \\sum_k \\sqrt{c_k} z_k v + \\sum_k \\sqrt{c_k} k^{-2s} z_k v + \\frac{\\gamma}{m^2}
        + \\sum_k k^{-2s} \\lambda_k

    The constants of the drift bound are returned by :func:`psi_drift_constants`.
    """
    weights = modes.norm_weights(s)
    v = np.asarray(state.v, dtype=float)
    quadratic = (-gamma / m * v ** 2
                 - np.sum(modes.lam * weights * np.square(state.z), axis=-1)
                 + np.sum((weights - 1 / m) * modes.sqrt_c * state.z, axis=-1) * v)
    return quadratic + (gamma / m ** 2 + float(np.sum(weights * modes.lam)))


def _require_diffusive(modes: ModeSet):
    if modes.spec is None:
        return
    regime = classify_regime(modes.spec)
    if regime.tag != RegimeTag.DIFFUSIVE:
        raise RuntimeError(f"Can't use the Theta functional in regime {regime.tag}: it requires condition (D)")


def theta_drift_constants(modes: ModeSet, m: float, gamma: float, s: float, split_N: int) -> ThetaConstants:
    """ Return :math:`a = \\gamma/m^2 + \\frac1m \\sum_{k \\leq n}\\lambda_k + \\sum_{k>n}\\lambda_k k^{-2s}` and
    :math:`a_1 = 1 - \\frac{1}{\\gamma m}\\sum_{k>n} \\frac{c_k}{k^{-2s}\\lambda_k}
    - \\frac{m}{\\gamma}\\sum_{k>n}\\frac{k^{-2s} c_k}{\\lambda_k}` for ``n = split_N``.

    Raises
    ------
    RuntimeError
        If gamma <= 0, the split is out of range or the kernel is not in regime (D)
    """
    if not gamma > 0:
        raise RuntimeError(f"Can't bound the Theta drift with gamma={gamma}: gamma has to be > 0")
    _check_split(modes, split_N)
    _require_diffusive(modes)
    weights = modes.norm_weights(s)
    tail = slice(split_N, None)
    a = gamma / m ** 2 + float(np.sum(modes.lam[:split_N])) / m + float(np.sum(modes.lam[tail] * weights[tail]))
    a1_theta = (1 - float(np.sum(modes.c[tail] / (weights[tail] * modes.lam[tail]))) / (gamma * m)
                - m / gamma * float(np.sum(weights[tail] * modes.c[tail] / modes.lam[tail])))
    a_full = a1_theta_full = float("nan")
    if modes.spec is not None:
        p_exp, beta = modes.spec.decay_exponent, modes.spec.beta
        start = split_N + 1
        a_full = gamma / m ** 2 + float(np.sum(modes.lam[:split_N])) / m + _zeta_or_inf(beta + 2 * s, start)
        a1_theta_full = (1 - _zeta_or_inf(p_exp - beta - 2 * s, start) / (gamma * m)
                         - m / gamma * _zeta_or_inf(p_exp - beta + 2 * s, start))
    return ThetaConstants(a, a1_theta, split_N, a_full, a1_theta_full)


def select_split(modes: ModeSet, m: float, gamma: float, s: float) -> Tuple[int, bool]:
    """ Return the smallest split ``n >= 1`` with positive tail coefficient and whether one exists.

    The search runs linearly upward from 1; the tail coefficient increases with the split.
    """
    for split_N in range(1, modes.n_modes + 1):
        if theta_drift_constants(modes, m, gamma, s, split_N).a1_theta > 0:
            return split_N, True
    log.debug(f"No admissible split among {modes.n_modes} modes")
    return modes.n_modes, False


def generator_on_theta(state: State, modes: ModeSet, p: Potential, m: float, gamma: float, s: float,
                       split_N: int):
    """ Evaluate the generator on :math:`\\Theta`:

    .. math::

        \\mathcal{L}\\Theta = -\\frac{\\gamma}{m} v^2 - \\frac1m \\sum_{k \\leq n}\\lambda_k z_k^2
        - \\sum_{k>n}\\lambda_k k^{-2s} z_k^2 + \\sum_{k>n}(k^{-2s} - \\tfrac1m)\\sqrt{c_k} z_k v + a

    At ``v = 0, z = 0`` the value is exactly a.
    """
    constants = theta_drift_constants(modes, m, gamma, s, split_N)
    weights = modes.norm_weights(s)
    v = np.asarray(state.v, dtype=float)
    z = state.z
    z2 = np.square(z)
    head = slice(None, split_N)
    tail = slice(split_N, None)
    quadratic = (-gamma / m * v ** 2
                 - np.sum(modes.lam[head] * z2[..., head], axis=-1) / m
                 - np.sum(modes.lam[tail] * weights[tail] * z2[..., tail], axis=-1)
                 + np.sum((weights[tail] - 1 / m) * modes.sqrt_c[tail] * z[..., tail], axis=-1) * v)
    return quadratic + constants.a


@dataclass(frozen=True)
class LyapunovReport:
    """ Lyapunov functionals of one state and the constants of their drift bounds. """
    psi: float
    theta: float
    gen_psi: float
    a1: float
    a2: float
    a: float
    theta_split_N: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def lyapunov_report(state: State, modes: ModeSet, p: Potential, m: float, gamma: float, s: float) -> LyapunovReport:
    """ Evaluate both functionals at a single state; the Theta split is found by :func:`select_split`. """
    constants = psi_drift_constants(modes, m, gamma, s)
    split_N, _ = select_split(modes, m, gamma, s)
    theta = theta_drift_constants(modes, m, gamma, s, split_N)
    return LyapunovReport(float(lyapunov_psi(state, modes, p, m, s)),
                          float(lyapunov_theta(state, modes, p, m, s, split_N)),
                          float(generator_on_psi(state, modes, p, m, gamma, s)),
                          constants.a1, constants.a2, theta.a, split_N)


@dataclass(frozen=True)
class DriftViolations:
    """ Number of states violating the drift bounds among `n_states`; `theta` is None outside regime (D). """
    n_states: int
    psi: int
    theta: Optional[int]
    max_psi_slack: float
    max_theta_slack: Optional[float]


def count_drift_violations(states: State, modes: ModeSet, p: Potential, m: float, gamma: float, s: float,
                           split_N: Optional[int] = None) -> DriftViolations:
    """ Count the states of a batch with :math:`\\mathcal{L}\\Psi > a_1\\Psi + a_2` or
    :math:`\\mathcal{L}\\Theta > a`.

    The slack is the largest value of the left minus the right side; it is negative when no state violates.
    """
    constants = psi_drift_constants(modes, m, gamma, s)
    psi_gap = generator_on_psi(states, modes, p, m, gamma, s) - (
            constants.a1 * lyapunov_psi(states, modes, p, m, s) + constants.a2)
    theta_count, theta_slack = None, None
    if admits_theta(modes, gamma):
        if split_N is None:
            split_N, _ = select_split(modes, m, gamma, s)
        a = theta_drift_constants(modes, m, gamma, s, split_N).a
        theta_gap = generator_on_theta(states, modes, p, m, gamma, s, split_N) - a
        theta_count, theta_slack = int(np.count_nonzero(theta_gap > 0)), float(np.max(theta_gap))
    return DriftViolations(len(np.atleast_1d(states.x)), int(np.count_nonzero(psi_gap > 0)), theta_count,
                           float(np.max(psi_gap)), theta_slack)


def moment_table(states: State, expected: dict, columns: dict) -> DataFrame:
    """ Compare sample means with their expected values.

    Parameters
    ----------
    states :
        A batch of states
    expected :
        Maps moment names to their expected values
    columns :
        Maps the same names to functions of the batch returning one summand per state

    Returns
    -------
    DataFrame
        Columns ``moment``, ``estimate``, ``expected``, ``stderr``, ``z_score``
    """
    rows = []
    for name, summand in columns.items():
        values = np.asarray(summand(states), dtype=float)
        estimate = float(np.mean(values))
        stderr = float(np.std(values, ddof=1) / math.sqrt(len(values)))
        target = float(expected[name])
        z_score = (estimate - target) / stderr if stderr > 0 else (0.0 if estimate == target else float("inf"))
        rows.append({"moment": name, "estimate": estimate, "expected": target, "stderr": stderr,
                     "z_score": z_score})
    return DataFrame(rows, columns=["moment", "estimate", "expected", "stderr", "z_score"])
