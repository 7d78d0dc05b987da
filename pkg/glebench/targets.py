"""
Distributional targets of the marginal tests.

Densities without a closed-form CDF are normalized and integrated by adaptive quadrature with absolute tolerance
``QUADRATURE_TOLERANCE``.
"""
import math
from abc import ABC, abstractmethod
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.stats import norm

from glebench.config import QUADRATURE_TOLERANCE
from glebench.potential import Potential, check_assumptions


class TargetDistribution(ABC):
    """ Represent a one-dimensional target law. """

    @abstractmethod
    def cdf(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    @abstractmethod
    def pdf(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    @abstractmethod
    def moment(self, order: int) -> float:
        """ Return the raw moment of the given order. """
        raise NotImplementedError()

    @abstractmethod
    def name(self) -> str:
        raise NotImplementedError()

    def bin_probabilities(self, edges: np.ndarray) -> np.ndarray:
        """ Return the probability of every bin between consecutive `edges`. """
        return np.diff(self.cdf(np.asarray(edges, dtype=float)))


class GaussianTarget(TargetDistribution):
    def __init__(self, variance: float):
        if not variance > 0:
            raise RuntimeError(f"Can't build a Gaussian target with variance {variance}")
        self.variance = float(variance)
        self._law = norm(loc=0.0, scale=math.sqrt(self.variance))

    def cdf(self, x):
        return self._law.cdf(x)

    def pdf(self, x):
        return self._law.pdf(x)

    def moment(self, order: int) -> float:
        return float(self._law.moment(order))

    def name(self) -> str:
        return f"normal(0, {self.variance})"


class StandardNormal(GaussianTarget):
    def __init__(self):
        super().__init__(1.0)

    def name(self) -> str:
        return "standard_normal"


class VelocityLaw(GaussianTarget):
    """ The velocity marginal :math:`N(0, 1/m)`. """

    def __init__(self, m: float):
        super().__init__(1.0 / m)
        self.m = float(m)

    def name(self) -> str:
        return f"velocity(m={self.m})"


class CustomDensity(TargetDistribution):
    """ A law given by an unnormalized density.

    Parameters
    ----------
    density
        The unnormalized density, vectorized
    support
        The support; may be infinite
    table_range
        The finite interval on which the CDF is tabulated; it has to hold all but a negligible part of the mass
    n_nodes
        The number of CDF nodes
    """

    def __init__(self, density: Callable[[np.ndarray], np.ndarray], support: Tuple[float, float] = (-np.inf, np.inf),
                 table_range: Optional[Tuple[float, float]] = None, n_nodes: int = 2001, label: str = "custom"):
        self.density = density
        self.support = (float(support[0]), float(support[1]))
        if table_range is None:
            if not np.all(np.isfinite(self.support)):
                raise RuntimeError("Can't tabulate the CDF of a density with infinite support without a table range")
            table_range = self.support
        self.label = label
        self.normalization = self._integrate(lambda x: density(x), *self.support)
        if not self.normalization > 0 or not np.isfinite(self.normalization):
            raise RuntimeError(f"Can't normalize density '{label}': integral is {self.normalization}")
        self._nodes = np.linspace(table_range[0], table_range[1], n_nodes)
        pieces = [self._integrate(density, a, b) for a, b in zip(self._nodes[:-1], self._nodes[1:])]
        left = self._integrate(density, self.support[0], self._nodes[0]) if self.support[0] < self._nodes[0] else 0.0
        self._cumulative = np.concatenate([[left], left + np.cumsum(pieces)]) / self.normalization
        self._moments = {}

    @staticmethod
    def _integrate(function: Callable, a: float, b: float) -> float:
        value, _ = integrate.quad(lambda x: float(function(x)), a, b, epsabs=QUADRATURE_TOLERANCE, limit=200)
        return float(value)

    def pdf(self, x):
        return self.density(np.asarray(x, dtype=float)) / self.normalization

    def cdf(self, x):
        return np.interp(np.asarray(x, dtype=float), self._nodes, self._cumulative, left=0.0, right=1.0)

    def expect(self, function: Callable) -> float:
        """ Return the expectation of `function` under the law. """
        return self._integrate(lambda x: function(x) * self.density(x), *self.support) / self.normalization

    def moment(self, order: int) -> float:
        if order not in self._moments:
            self._moments[order] = self.expect(lambda x: x ** order)
        return self._moments[order]

    def name(self) -> str:
        return self.label


class GibbsPositionLaw(CustomDensity):
    """ The position marginal :math:`e^{-\\Phi(x)}/Z` of a confining potential. """

    def __init__(self, potential: Potential, n_nodes: int = 2001):
        self.potential = potential
        report = check_assumptions(potential)
        if not (report.conforming and report.growth_ok):
            raise RuntimeError(f"Can't normalize exp(-Phi) for {potential!r}: the growth assumption does not hold")
        # exp(-Phi) <= exp(1 - x^2/b) < 1e-18 beyond this width
        half_width = math.sqrt(43 * report.b_estimate)
        offset = float(np.min(potential.phi(np.linspace(-half_width, half_width, 2001))))
        super().__init__(lambda x: np.exp(-(potential.phi(x) - offset)), (-np.inf, np.inf),
                         (-half_width, half_width), n_nodes, label=f"gibbs({potential!r})")
