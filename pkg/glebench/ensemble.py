"""
Ensembles of independent trajectories.

Trajectories are advanced in blocks of ``BLOCK_SIZE``; trajectory ``i`` always uses the stream with index ``i``
under the master seed, so the results do not depend on the number of worker processes.
"""
import math
import multiprocessing as mp
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from numpy.random import Generator

from glebench import log
from glebench.config import BLOCK_SIZE
from glebench.data import State
from glebench.dynamics import Propagation, SimConfig, propagate
from glebench.kernel import ModeSet
from glebench.measure import GibbsSampler
from glebench.potential import Potential
from glebench.streams import trajectory_streams


class InitialCondition(ABC):
    """ The law of the initial state of every trajectory of an ensemble. """

    @abstractmethod
    def draw(self, rng: Generator, n_modes: int, m: float) -> State:
        """ Draw one initial state from the trajectory's stream; draws happen before any step noise. """
        raise NotImplementedError()

    @abstractmethod
    def to_dict(self) -> dict:
        raise NotImplementedError()


@dataclass(frozen=True)
class FromPoint(InitialCondition):
    """ Start at a fixed position.

    A missing velocity is drawn from :math:`N(0, 1/m)`, missing modes i.i.d. standard normal.
    """
    x0: float
    v0: Optional[float] = None
    z0: Optional[Sequence[float]] = None

    def draw(self, rng: Generator, n_modes: int, m: float) -> State:
        v = self.v0 if self.v0 is not None else rng.standard_normal() / math.sqrt(m)
        if self.z0 is None:
            z = rng.standard_normal(n_modes)
        else:
            z = np.asarray(self.z0, dtype=float)
            if z.shape != (n_modes,):
                raise RuntimeError(f"Can't start from z0 with shape {z.shape}: {n_modes} modes are required")
        return State(float(self.x0), float(v), z)

    def to_dict(self) -> dict:
        return {"law": "point", "x0": self.x0, "v0": self.v0,
                "z0": None if self.z0 is None else [float(z) for z in self.z0]}


@dataclass(frozen=True)
class FromMu(InitialCondition):
    """ Start from exact samples of the invariant measure; with `quiescent_modes` all modes start at zero. """
    sampler: GibbsSampler
    quiescent_modes: bool = False

    def draw(self, rng: Generator, n_modes: int, m: float) -> State:
        state = self.sampler.draw(rng)
        if self.quiescent_modes:
            state.z = np.zeros(n_modes)
        return state

    def to_dict(self) -> dict:
        return {"law": "quiescent_modes" if self.quiescent_modes else "mu",
                "envelope_b": self.sampler.envelope_b}


def draw_initial_states(init: InitialCondition, streams: Sequence[Generator], n_modes: int, m: float) -> State:
    return State.stack([init.draw(rng, n_modes, m) for rng in streams])


def simulate_block(indices: Sequence[int], init: InitialCondition, modes: ModeSet, p: Potential, cfg: SimConfig,
                   record_steps: Optional[np.ndarray] = None, mode_columns: Optional[Sequence[int]] = None,
                   s: Optional[float] = None) -> Propagation:
    """ Draw the initial states of the trajectories `indices` and integrate them as one batch. """
    streams = trajectory_streams(cfg.seed, indices)
    initial = draw_initial_states(init, streams, modes.n_modes, cfg.m)
    return propagate(initial, modes, p, cfg, streams, record_steps, mode_columns, s)


def blocks(n_traj: int, block_size: int = BLOCK_SIZE) -> List[range]:
    return [range(start, min(start + block_size, n_traj)) for start in range(0, n_traj, block_size)]


def run_blocks(task: Callable, n_traj: int, args: tuple = (), cpu_count: int = 1,
               block_size: int = BLOCK_SIZE) -> list:
    """ Run ``task(indices, *args)`` for consecutive blocks of trajectory indices.

    If `cpu_count` is -1 then (number of cpus-1) are used to run the blocks in parallel; set to one 1 disable
    parallel execution.

    Returns
    -------
    list
        The results of the blocks in the order of their indices
    """
    if n_traj < 1:
        raise RuntimeError(f"Can't run an ensemble of {n_traj} trajectories: n_traj has to be >= 1")
    if cpu_count == -1:
        cpu_count = max(1, mp.cpu_count() - 1)
    jobs = blocks(n_traj, block_size)
    log.debug(f"#Trajectories: {n_traj}, #Blocks: {len(jobs)}, #CPUs: {cpu_count}")
    if cpu_count <= 1 or len(jobs) == 1:
        return [task(list(indices), *args) for indices in jobs]
    with mp.Pool(min(cpu_count, len(jobs))) as pool:
        pending = [pool.apply_async(task, args=(list(indices),) + tuple(args)) for indices in jobs]
        return [job.get() for job in pending]


def merge(parts: Sequence[Propagation]) -> Propagation:
    """ Concatenate block results along the trajectory axis. """
    first = parts[0]
    return Propagation(first.times,
                       np.concatenate([part.x for part in parts], axis=1),
                       np.concatenate([part.v for part in parts], axis=1),
                       np.concatenate([part.z for part in parts], axis=1),
                       first.mode_columns,
                       np.concatenate([part.sup_norm for part in parts]),
                       State(np.concatenate([part.final.x for part in parts]),
                             np.concatenate([part.final.v for part in parts]),
                             np.concatenate([part.final.z for part in parts])))


def run_ensemble(init: InitialCondition, n_traj: int, modes: ModeSet, p: Potential, cfg: SimConfig,
                 record_steps: Optional[np.ndarray] = None, mode_columns: Optional[Sequence[int]] = None,
                 s: Optional[float] = None, cpu_count: int = 1) -> Propagation:
    """ Integrate `n_traj` independent trajectories.

    Parameters
    ----------
    init :
        The initial law
    n_traj :
        The number of trajectories, at least 1
    modes :
        The modes of the kernel
    p :
        The potential
    cfg :
        The integrator settings
    record_steps :
        The step indices to record
    mode_columns :
        0-based indices of the modes to record
    s :
        The norm weight of the sup-norm diagnostic
    cpu_count :
        The number of worker processes, -1 for all but one

    Returns
    -------
    Propagation
        The recorded values of all trajectories in index order
    """
    cfg.validate()
    log.debug(f"Run ensemble of {n_traj} trajectories from {init.to_dict()['law']}")
    parts = run_blocks(simulate_block, n_traj, (init, modes, p, cfg, record_steps, mode_columns, s), cpu_count)
    return merge(parts)
