"""
Time integration of the truncated Markovian system

.. math::

    dx = v\\,dt, \\quad
    m\\,dv = (-\\gamma v - \\Phi'(x)\\theta_R(x) - \\sum_k \\sqrt{c_k} z_k)\\,dt + \\sqrt{2\\gamma}\\,dW_0, \\quad
    dz_k = (-\\lambda_k z_k + \\sqrt{c_k} v)\\,dt + \\sqrt{2\\lambda_k}\\,dW_k.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.random import Generator, SeedSequence, default_rng
from pandas import DataFrame

from glebench import log
from glebench.config import NOISE_BUFFER_SIZE
from glebench.data import State, Trajectory, mode_column_names
from glebench.enums import Scheme
from glebench.kernel import ModeSet
from glebench.potential import Potential
from glebench.streams import trajectory_stream, validate_seed, draw_noise


class BlowUpError(RuntimeError):
    """ Raised when the integrated state becomes non-finite.

    Parameters
    ----------
    step
        The index of the step producing the non-finite state
    time
        The time reached by that step
    trajectories
        The batch indices of the affected trajectories
    """

    def __init__(self, step: int, time: float, trajectories: Sequence[int]):
        self.step = step
        self.time = time
        self.trajectories = list(trajectories)
        super().__init__(f"Integration blew up at step {step} (t={time}) for trajectories {self.trajectories[:10]}; "
                         f"reduce dt")


@dataclass(frozen=True)
class SimConfig:
    """ Integrator settings.

    Parameters
    ----------
    m
        The mass
    gamma
        The instantaneous drag
    dt
        The step size
    t_final
        The end of the integration interval
    seed
        The master seed
    scheme
        The integration scheme
    cutoff_R
        If given the force is multiplied with the smooth cutoff :math:`\\theta_R`
    thin_stride
        Every `thin_stride`-th step is recorded
    thermal_noise
        If false all noise terms are switched off
    """
    m: float
    gamma: float
    dt: float
    t_final: float
    seed: int
    scheme: Scheme = Scheme.SPLITTING_EXACT_OU
    cutoff_R: Optional[float] = None
    thin_stride: int = 1
    thermal_noise: bool = True

    def validate(self):
        """ Check the settings.

        Raises
        ------
        RuntimeError
            If a setting is invalid or the Euler-Maruyama stability bound dt < m/gamma is violated
        """
        if not self.m > 0:
            raise RuntimeError(f"Can't use mass m={self.m}: m has to be > 0")
        if not self.gamma >= 0:
            raise RuntimeError(f"Can't use drag gamma={self.gamma}: gamma has to be >= 0")
        if not self.dt > 0:
            raise RuntimeError(f"Can't use dt={self.dt}: dt has to be > 0")
        if not self.dt < self.t_final:
            raise RuntimeError(f"Can't use dt={self.dt} with t_final={self.t_final}: dt has to be < t_final")
        if self.scheme == Scheme.EULER_MARUYAMA and self.gamma > 0 and not self.dt < self.m / self.gamma:
            raise RuntimeError(f"Can't use dt={self.dt} with Euler-Maruyama: dt has to be < m/gamma="
                               f"{self.m / self.gamma}")
        if self.cutoff_R is not None and not self.cutoff_R > 0:
            raise RuntimeError(f"Can't use cutoff_R={self.cutoff_R}: cutoff_R has to be > 0")
        if int(self.thin_stride) != self.thin_stride or self.thin_stride < 1:
            raise RuntimeError(f"Can't use thin_stride={self.thin_stride}: it has to be an integer >= 1")
        validate_seed(self.seed)

    @property
    def n_steps(self) -> int:
        """ The number of steps, floor(t_final/dt) up to rounding. """
        return max(1, int(math.floor(self.t_final / self.dt + 1e-9)))


def _smooth_step(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    positive = t > 0
    out[positive] = np.exp(-1.0 / t[positive])
    return out


def cutoff_theta(x, R: Optional[float]):
    """ Smooth cutoff equal to 1 on ``|x| <= R`` and 0 on ``|x| >= R + 1``; identically 1 if R is None. """
    if R is None:
        return np.ones_like(np.asarray(x, dtype=float))
    r = np.abs(np.asarray(x, dtype=float))
    inside = _smooth_step(R + 1 - r)
    outside = _smooth_step(r - R)
    return inside / (inside + outside)


def force(x, p: Potential, R: Optional[float] = None):
    """ Return :math:`\\Phi'(x)\\theta_R(x)`. """
    if R is None:
        return p.dphi(x)
    return p.dphi(x) * cutoff_theta(x, R)


def _check_dimensions(state: State, modes: ModeSet):
    if state.n_modes != modes.n_modes:
        raise RuntimeError(f"Can't combine a state with {state.n_modes} modes with a kernel of {modes.n_modes} modes")


def drift(state: State, modes: ModeSet, p: Potential, cfg: SimConfig) -> State:
    """ Evaluate the drift of the system.

    Returns
    -------
    State
        The increments ``(dx, dv, dz)`` per unit time
    """
    _check_dimensions(state, modes)
    memory = np.sum(modes.sqrt_c * state.z, axis=-1)
    dv = (-cfg.gamma * np.asarray(state.v) - force(state.x, p, cfg.cutoff_R) - memory) / cfg.m
    dz = -modes.lam * state.z + modes.sqrt_c * np.asarray(state.v)[..., None]
    return State(np.asarray(state.v, dtype=float).copy(), dv, dz)


def diffusion(modes: ModeSet, cfg: SimConfig) -> Tuple[float, np.ndarray]:
    """ Return the noise amplitudes :math:`(\\sqrt{2\\gamma}/m, \\sqrt{2\\lambda_k})`; the position has none. """
    if not cfg.thermal_noise:
        return 0.0, np.zeros(modes.n_modes)
    return math.sqrt(2 * cfg.gamma) / cfg.m, np.sqrt(2 * modes.lam)


class Integrator:
    """ One step of the chosen scheme for a batch of phase points.

    The coefficients of the exact Ornstein-Uhlenbeck transition are computed once per instance.
    """

    def __init__(self, modes: ModeSet, p: Potential, cfg: SimConfig):
        self.modes = modes
        self.p = p
        self.cfg = cfg
        self.sqrt_c = modes.sqrt_c
        self.sigma_v, self.sigma_z = diffusion(modes, cfg)
        dt = cfg.dt
        lam = modes.lam
        self.decay = np.exp(-lam * dt)
        positive = lam > 0
        self.gain = np.where(positive, -np.expm1(-lam * dt) / np.where(positive, lam, 1.0), dt)
        self.ou_std = np.sqrt(-np.expm1(-2 * lam * dt)) if cfg.thermal_noise else np.zeros_like(lam)
        self.sqrt_dt = math.sqrt(dt)

    def acceleration(self, x, v, z):
        return (-self.cfg.gamma * v - force(x, self.p, self.cfg.cutoff_R)
                - np.sum(self.sqrt_c * z, axis=-1)) / self.cfg.m

    def advance(self, x, v, z, xi: np.ndarray, shift=0.0):
        """ Advance ``(x, v, z)`` by one step driven by the normals `xi` of shape ``(..., N + 1)``.

        `shift` is an extra velocity increment added together with the noise.
        """
        dt = self.cfg.dt
        kick = self.sigma_v * self.sqrt_dt * xi[..., 0] + shift
        if self.cfg.scheme == Scheme.EULER_MARUYAMA:
            a = self.acceleration(x, v, z)
            x_new = x + v * dt
            v_new = v + a * dt + kick
            z_new = z + (-self.modes.lam * z + self.sqrt_c * np.asarray(v)[..., None]) * dt \
                + self.sigma_z * self.sqrt_dt * xi[..., 1:]
            return x_new, v_new, z_new
        h = 0.5 * dt
        v_half = v + h * self.acceleration(x, v, z) + kick
        x_new = x + dt * v_half
        z_new = z * self.decay + self.sqrt_c * np.asarray(v_half)[..., None] * self.gain + self.ou_std * xi[..., 1:]
        v_new = v_half + h * self.acceleration(x_new, v_half, z_new)
        return x_new, v_new, z_new

    def advance_difference(self, x, x_new, xb, vb, zb, shift=0.0):
        """ Advance the difference of two copies driven by the same normals.

        `x` and `x_new` are the positions of the first copy before and after the step, ``(xb, vb, zb)`` the
        difference ``first - second`` and `shift` the extra velocity increment of the second copy. No noise enters.
        """
        dt = self.cfg.dt
        R = self.cfg.cutoff_R

        def acceleration(x_first, xb_, vb_, zb_):
            delta = force(x_first, self.p, R) - force(x_first - xb_, self.p, R)
            return (-self.cfg.gamma * vb_ - delta - np.sum(self.sqrt_c * zb_, axis=-1)) / self.cfg.m

        if self.cfg.scheme == Scheme.EULER_MARUYAMA:
            xb_new = xb + vb * dt
            vb_new = vb + acceleration(x, xb, vb, zb) * dt - shift
            zb_new = zb + (-self.modes.lam * zb + self.sqrt_c * np.asarray(vb)[..., None]) * dt
            return xb_new, vb_new, zb_new
        h = 0.5 * dt
        vb_half = vb + h * acceleration(x, xb, vb, zb) - shift
        xb_new = xb + dt * vb_half
        zb_new = zb * self.decay + self.sqrt_c * np.asarray(vb_half)[..., None] * self.gain
        vb_new = vb_half + h * acceleration(x_new, xb_new, vb_half, zb_new)
        return xb_new, vb_new, zb_new


def _draw_initial(x0: float, v0: float, n_modes: int, rng: Generator) -> State:
    if n_modes < 1:
        raise RuntimeError(f"Can't initialise a state with {n_modes} modes: at least one mode is required")
    return State(float(x0), float(v0), rng.standard_normal(n_modes))


def init_state(x0: float, v0: float, mode_seed: int, N: int) -> State:
    """ Return the state ``(x0, v0, z)`` with i.i.d. standard normal modes drawn from the seeded stream.

    Raises
    ------
    RuntimeError
        If N < 1
    """
    return _draw_initial(x0, v0, N, default_rng(SeedSequence(validate_seed(mode_seed))))


def step(state: State, modes: ModeSet, p: Potential, cfg: SimConfig, rng: Optional[Generator] = None,
         noise: Optional[np.ndarray] = None) -> State:
    """ Advance a state by one step of ``cfg.scheme``.

    Parameters
    ----------
    state :
        The current state, single or batch
    modes :
        The modes of the kernel
    p :
        The potential
    cfg :
        The integrator settings
    rng :
        The stream the normals are drawn from, :math:`\\xi_0` first
    noise :
        Explicit normals of shape ``(..., N + 1)`` used instead of `rng`

    Returns
    -------
    State
        The advanced state

    Raises
    ------
    BlowUpError
        If the advanced state is not finite
    """
    _check_dimensions(state, modes)
    integrator = Integrator(modes, p, cfg)
    if noise is None:
        if rng is None:
            raise RuntimeError("Can't step without a random stream or explicit noise")
        noise = rng.standard_normal(state.z.shape[:-1] + (modes.n_modes + 1,))
    x, v, z = integrator.advance(np.asarray(state.x, dtype=float), np.asarray(state.v, dtype=float), state.z,
                                 np.asarray(noise, dtype=float))
    advanced = State(x if np.ndim(x) else float(x), v if np.ndim(v) else float(v), z)
    if not advanced.is_finite():
        raise BlowUpError(1, cfg.dt, [0])
    return advanced


def squared_norm(x, v, z, weights: np.ndarray):
    """ :math:`x^2 + v^2 + \\sum_k w_k z_k^2` for a single state or a batch. """
    return np.square(x) + np.square(v) + np.sum(weights * np.square(z), axis=-1)


@dataclass
class Propagation:
    """ The recorded output of :func:`propagate`.

    Parameters
    ----------
    times
        The recorded times
    x, v
        Recorded positions and velocities, shape ``(n_records, B)``
    z
        Recorded modes, shape ``(n_records, B, len(mode_columns))``
    mode_columns
        The 0-based indices of the recorded modes
    sup_norm
        Per trajectory :math:`\\sup_t \\|X(t)\\|_{-s}` over all steps
    final
        The state after the last step
    """
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    z: np.ndarray
    mode_columns: np.ndarray
    sup_norm: np.ndarray
    final: State = field(repr=False)


def propagate(initial: State, modes: ModeSet, p: Potential, cfg: SimConfig, streams: Sequence[Generator],
              record_steps: Optional[np.ndarray] = None, mode_columns: Optional[Sequence[int]] = None,
              s: Optional[float] = None, on_step: Optional[Callable] = None) -> Propagation:
    """ Integrate a batch of trajectories, each driven by its own stream.

    Parameters
    ----------
    initial :
        The batch of initial states, shape ``(B,)`` / ``(B, N)``
    modes :
        The modes of the kernel
    p :
        The potential
    cfg :
        The integrator settings
    streams :
        One random stream per trajectory
    record_steps :
        Sorted step indices to record; by default every ``cfg.thin_stride``-th step including step 0
    mode_columns :
        0-based indices of the modes to record; by default all modes
    s :
        The norm weight of the sup-norm diagnostic
    on_step :
        Called as ``on_step(step_index, x, v, z)`` after every step

    Returns
    -------
    Propagation
        The recorded values

    Raises
    ------
    BlowUpError
        If a state becomes non-finite
    """
    _check_dimensions(initial, modes)
    n_modes = modes.n_modes
    batch = len(streams)
    n_steps = cfg.n_steps
    if record_steps is None:
        record_steps = np.arange(0, n_steps + 1, cfg.thin_stride)
    record_steps = np.asarray(record_steps, dtype=int)
    columns = np.arange(n_modes) if mode_columns is None else np.asarray(mode_columns, dtype=int)
    weights = modes.norm_weights(modes.resolve_s(s))
    integrator = Integrator(modes, p, cfg)

    x = np.array(initial.x, dtype=float).reshape(batch)
    v = np.array(initial.v, dtype=float).reshape(batch)
    z = np.array(initial.z, dtype=float).reshape(batch, n_modes)
    n_records = len(record_steps)
    xs = np.empty((n_records, batch))
    vs = np.empty((n_records, batch))
    zs = np.empty((n_records, batch, len(columns)))
    record_index = 0

    def record(step_index):
        nonlocal record_index
        while record_index < n_records and record_steps[record_index] == step_index:
            xs[record_index] = x
            vs[record_index] = v
            zs[record_index] = z[:, columns]
            record_index += 1

    sup_norm = squared_norm(x, v, z, weights)
    record(0)
    chunk = max(1, NOISE_BUFFER_SIZE // (batch * (n_modes + 1)))
    done = 0
    while done < n_steps:
        block = min(chunk, n_steps - done)
        noise = draw_noise(streams, block, n_modes)
        for xi in noise:
            x, v, z = integrator.advance(x, v, z, xi)
            done += 1
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
                bad = np.flatnonzero(~(np.isfinite(x) & np.isfinite(v)))
                raise BlowUpError(done, done * cfg.dt, bad)
            sup_norm = np.maximum(sup_norm, squared_norm(x, v, z, weights))
            if on_step is not None:
                on_step(done, x, v, z)
            record(done)
    if not np.all(np.isfinite(z)):
        raise BlowUpError(done, done * cfg.dt, np.flatnonzero(~np.all(np.isfinite(z), axis=1)))
    times = record_steps[:record_index] * cfg.dt
    return Propagation(times, xs[:record_index], vs[:record_index], zs[:record_index], columns,
                       np.sqrt(sup_norm), State(x, v, z))


def simulate(x0: float, v0: float, modes: ModeSet, p: Potential, cfg: SimConfig, s: Optional[float] = None,
             initial: Optional[State] = None, record_modes: bool = True) -> Trajectory:
    """ Simulate one trajectory.

    The stream of the trajectory is the stream with index 0 under ``cfg.seed``. The modes start i.i.d. standard
    normal, drawn from that stream before the noise, unless `initial` is given.

    Parameters
    ----------
    x0, v0 :
        The initial position and velocity
    modes :
        The modes of the kernel
    p :
        The potential
    cfg :
        The integrator settings; every ``cfg.thin_stride``-th step is recorded
    s :
        The norm weight of the sup-norm diagnostic; by default the weight of the kernel parameters
    initial :
        A complete initial state replacing `x0`, `v0` and the drawn modes
    record_modes :
        If false only ``t, x, v`` are recorded

    Returns
    -------
    Trajectory
        The recorded path
    """
    cfg.validate()
    s = modes.resolve_s(s)
    rng = trajectory_stream(cfg.seed, 0)
    state = initial if initial is not None else _draw_initial(x0, v0, modes.n_modes, rng)
    log.debug(f"Simulate {cfg.n_steps} steps of {cfg.scheme} with seed {cfg.seed}")
    batch = State(np.array([state.x], dtype=float), np.array([state.v], dtype=float), state.z.reshape(1, -1))
    columns = None if record_modes else []
    result = propagate(batch, modes, p, cfg, [rng], mode_columns=columns, s=s)
    table = DataFrame({"t": result.times, "x": result.x[:, 0], "v": result.v[:, 0]})
    if record_modes:
        table = table.join(DataFrame(result.z[:, 0, :], columns=mode_column_names(modes.n_modes)))
    return Trajectory(table, cfg.seed, float(result.sup_norm[0]), s)
