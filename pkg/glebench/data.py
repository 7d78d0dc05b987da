from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from pandas import DataFrame
from pandera import DataFrameSchema, Column, Check
from pandera.errors import SchemaErrors

ArrayLike = Union[float, np.ndarray]


@dataclass
class State:
    """ Represent a phase point :math:`X = (x, v, z_1, \\ldots, z_N)` of the truncated system.

    The fields may also hold a batch of phase points: then `x` and `v` are arrays of shape ``(B,)`` and `z` has
    shape ``(B, N)``.

    Parameters
    ----------
    x
        The position
    v
        The velocity
    z
        The auxiliary modes
    """
    x: ArrayLike
    v: ArrayLike
    z: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)

    @property
    def n_modes(self) -> int:
        return self.z.shape[-1]

    @property
    def batch_size(self) -> Optional[int]:
        """ The number of phase points of a batch, None for a single phase point. """
        return None if self.z.ndim == 1 else self.z.shape[0]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.z)))

    def copy(self) -> 'State':
        return State(np.copy(self.x), np.copy(self.v), self.z.copy())

    def __sub__(self, other: 'State') -> 'State':
        return State(np.subtract(self.x, other.x), np.subtract(self.v, other.v), self.z - other.z)

    def __getitem__(self, item: int) -> 'State':
        """ Return the phase point with index `item` of a batch. """
        return State(float(np.asarray(self.x)[item]), float(np.asarray(self.v)[item]), self.z[item].copy())

    @staticmethod
    def zeros(n_modes: int, batch_size: Optional[int] = None) -> 'State':
        if batch_size is None:
            return State(0.0, 0.0, np.zeros(n_modes))
        return State(np.zeros(batch_size), np.zeros(batch_size), np.zeros((batch_size, n_modes)))

    @staticmethod
    def stack(states: Sequence['State']) -> 'State':
        """ Combine single phase points into a batch. """
        return State(np.array([float(s.x) for s in states]), np.array([float(s.v) for s in states]),
                     np.stack([s.z for s in states]))


def mode_column_names(n_modes: int) -> List[str]:
    return [f"z{k}" for k in range(1, n_modes + 1)]


@dataclass
class Trajectory:
    """ Represent a sampled path of the system.

    The table has the columns ``t``, ``x``, ``v`` and, unless only the particle is recorded, ``z1`` .. ``zN``.

    Parameters
    ----------
    table
        The recorded path, one row per recorded time
    seed_used
        The master seed of the path's noise stream
    sup_norm
        :math:`\\sup_t \\|X(t)\\|_{-s}` over every integration step, not only the recorded ones
    s
        The norm weight used for `sup_norm`
    """
    table: DataFrame
    seed_used: int
    sup_norm: float = float("nan")
    s: float = float("nan")

    @property
    def times(self) -> np.ndarray:
        return self.table["t"].to_numpy()

    @property
    def mode_columns(self) -> List[str]:
        return [column for column in self.table.columns if column.startswith("z")]

    @property
    def states(self) -> List[State]:
        """ The recorded phase points; their modes are empty if only the particle was recorded. """
        z = self.table[self.mode_columns].to_numpy()
        return [State(float(x), float(v), z_row) for x, v, z_row in
                zip(self.table["x"].to_numpy(), self.table["v"].to_numpy(), z)]

    def __len__(self):
        return len(self.table)

    def validate(self):
        """ Check if the trajectory is valid.

        The following constraints are checked:

            * t is strictly increasing and finite
            * x, v and all recorded modes are finite

        Raises
        ------
        RuntimeError
            If the validation of the table fails; the pandera failure cases are chained
        """
        finite = Check(lambda column: np.isfinite(column), error="finite")
        columns = {"t": Column(float, [finite,
                                       Check(lambda t: bool((t.diff().iloc[1:] > 0).all()),
                                             error="strictly increasing")], required=True),
                   "x": Column(float, finite, required=True),
                   "v": Column(float, finite, required=True)}
        for column in self.mode_columns:
            columns[column] = Column(float, finite, required=True)
        schema = DataFrameSchema(columns, strict=True)
        try:
            schema.validate(self.table, lazy=True)
        except SchemaErrors as ex:
            raise RuntimeError(f"Can't validate trajectory with seed {self.seed_used}: "
                               f"{len(ex.failure_cases)} failed checks") from ex
