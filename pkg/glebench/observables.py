from abc import ABC, abstractmethod
from typing import List, Optional

import numpy as np

from glebench.potential import Potential
from glebench.targets import GibbsPositionLaw


class Observable(ABC):
    """ Represent a function f(x, v) whose time average is compared with its expectation under :math:`\\pi`."""

    @staticmethod
    @abstractmethod
    def evaluate(x: np.ndarray, v: np.ndarray, potential: Optional[Potential] = None) -> np.ndarray:
        return np.ones_like(x)

    @staticmethod
    @abstractmethod
    def expectation(potential: Potential, m: float, position_law: Optional[GibbsPositionLaw] = None) -> float:
        return 0.0

    @staticmethod
    @abstractmethod
    def name():
        return None


class One(Observable):
    @staticmethod
    def evaluate(x, v, potential=None):
        return np.ones_like(np.asarray(x, dtype=float))

    @staticmethod
    def expectation(potential, m, position_law=None) -> float:
        return 1.0

    @staticmethod
    def name():
        return "one"


class Position(Observable):
    @staticmethod
    def evaluate(x, v, potential=None):
        return np.asarray(x, dtype=float)

    @staticmethod
    def expectation(potential, m, position_law=None) -> float:
        """ Calculate :math:`E_\\pi[x]` by quadrature of the position marginal.

        Parameters
        ----------
        potential :
            The potential
        m :
            The mass
        position_law :
            A tabulated position marginal to reuse

        Returns
        -------
        float
            The expectation
        """
        law = position_law if position_law is not None else GibbsPositionLaw(potential)
        return law.moment(1)

    @staticmethod
    def name():
        return "x"


class PositionSquared(Observable):
    @staticmethod
    def evaluate(x, v, potential=None):
        return np.square(x)

    @staticmethod
    def expectation(potential, m, position_law=None) -> float:
        law = position_law if position_law is not None else GibbsPositionLaw(potential)
        return law.moment(2)

    @staticmethod
    def name():
        return "x2"


class Velocity(Observable):
    @staticmethod
    def evaluate(x, v, potential=None):
        return np.asarray(v, dtype=float)

    @staticmethod
    def expectation(potential, m, position_law=None) -> float:
        return 0.0

    @staticmethod
    def name():
        return "v"


class VelocitySquared(Observable):
    @staticmethod
    def evaluate(x, v, potential=None):
        return np.square(v)

    @staticmethod
    def expectation(potential, m, position_law=None) -> float:
        """ :math:`E_\\pi[v^2] = 1/m` """
        return 1.0 / m

    @staticmethod
    def name():
        return "v2"


class TotalEnergy(Observable):
    @staticmethod
    def evaluate(x, v, potential=None):
        """ Calculate :math:`\\Phi(x) + v^2/2`.

        Raises
        ------
        RuntimeError
            If no potential is given
        """
        if potential is None:
            raise RuntimeError("Can't evaluate the total energy without a potential")
        return potential.phi(x) + 0.5 * np.square(v)

    @staticmethod
    def expectation(potential, m, position_law=None) -> float:
        law = position_law if position_law is not None else GibbsPositionLaw(potential)
        mean_phi = law.expect(potential.phi)
        return mean_phi + 0.5 / m

    @staticmethod
    def name():
        return "energy"


OBSERVABLES = [One, Position, PositionSquared, Velocity, VelocitySquared, TotalEnergy]


def resolve_observable(name: str) -> type:
    """ Return the observable class with the given name.

    Raises
    ------
    RuntimeError
        If no observable has this name
    """
    for observable in OBSERVABLES:
        if observable.name() == name:
            return observable
    raise RuntimeError(f"Can't resolve observable for name '{name}'; known are {observable_names()}")


def observable_names() -> List[str]:
    return [observable.name() for observable in OBSERVABLES]
