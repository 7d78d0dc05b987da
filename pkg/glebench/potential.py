"""
Confining potentials and sampled checks of their growth and derivative assumptions.

All built-in potentials are polynomials. The growth assumption asks for a constant ``b`` with
:math:`b(\\Phi(x)+1) \\geq x^2`, the derivative assumption for a function ``f`` bounded on bounded sets and a
power ``q`` with :math:`|\\Phi'(x)-\\Phi'(y)| \\leq |x-y|(f(x-y)+\\Phi(x)^q)`.
"""
import warnings
from abc import ABC
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numpy.polynomial import Polynomial

from glebench import log
from glebench.config import ASSUMPTION_GRID, GROWTH_TOLERANCE
from glebench.enums import PotentialKind

ArrayLike = Union[float, np.ndarray]


class Potential(ABC):
    """ Represent a polynomial potential :math:`\\Phi`.

    Subclasses only choose the coefficients; evaluation and derivatives are exact polynomial arithmetic.
    """
    kind: PotentialKind

    def __init__(self, coefficients: Sequence[float]):
        self._polynomial = Polynomial(np.asarray(coefficients, dtype=float))
        self._first = self._polynomial.deriv(1)
        self._second = self._polynomial.deriv(2)

    @property
    def coefficients(self) -> np.ndarray:
        """ The coefficients in ascending powers. """
        return self._polynomial.coef.copy()

    @property
    def degree(self) -> int:
        coef = np.trim_zeros(self._polynomial.coef, "b")
        return max(len(coef) - 1, 0)

    @property
    def conforming(self) -> bool:
        """ Whether the potential belongs to the confining family covered by the growth assumption. """
        return True

    def phi(self, x: ArrayLike) -> ArrayLike:
        return self._polynomial(x)

    def dphi(self, x: ArrayLike) -> ArrayLike:
        return self._first(x)

    def d2phi(self, x: ArrayLike) -> ArrayLike:
        return self._second(x)

    def to_dict(self) -> dict:
        """ Return the config form of the potential. """
        return {"type": str(self.kind)}

    def __repr__(self):
        params = ", ".join(f"{key}={value}" for key, value in self.to_dict().items() if key != "type")
        return f"{self.__class__.__name__}({params})"

    def __eq__(self, other):
        return isinstance(other, Potential) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self))


class Harmonic(Potential):
    """ :math:`\\Phi(x) = k x^2 / 2` """
    kind = PotentialKind.HARMONIC

    def __init__(self, k: float = 1.0):
        if not k > 0:
            raise RuntimeError(f"Can't build harmonic potential: spring constant k={k} has to be > 0")
        self.k = float(k)
        super().__init__([0.0, 0.0, self.k / 2])

    def to_dict(self) -> dict:
        return {"type": str(self.kind), "k": self.k}


class DoubleWell(Potential):
    """ :math:`\\Phi(x) = a (x^2 - b)^2` with wells at :math:`\\pm\\sqrt{b}`. """
    kind = PotentialKind.DOUBLE_WELL

    def __init__(self, a: float = 1.0, b: float = 1.0):
        if not a > 0:
            raise RuntimeError(f"Can't build double well: a={a} has to be > 0")
        self.a = float(a)
        self.b = float(b)
        super().__init__([self.a * self.b ** 2, 0.0, -2 * self.a * self.b, 0.0, self.a])

    def to_dict(self) -> dict:
        return {"type": str(self.kind), "a": self.a, "b": self.b}


class EvenPolynomial(Potential):
    """ A polynomial of even degree with positive leading coefficient.

    Parameters
    ----------
    coefficients
        The coefficients in ascending powers, ``[c0, c1, c2, ...]``
    """
    kind = PotentialKind.EVEN_POLYNOMIAL

    def __init__(self, coefficients: Sequence[float]):
        coef = np.trim_zeros(np.asarray(coefficients, dtype=float), "b")
        degree = len(coef) - 1
        if degree < 2 or degree % 2 != 0:
            raise RuntimeError(f"Can't build even polynomial: degree {degree} has to be even and >= 2")
        if not coef[-1] > 0:
            raise RuntimeError(f"Can't build even polynomial: leading coefficient {coef[-1]} has to be > 0")
        super().__init__(coef)

    def to_dict(self) -> dict:
        return {"type": str(self.kind), "coefficients": [float(c) for c in self.coefficients]}


class Zero(Potential):
    """ The free particle, :math:`\\Phi \\equiv 0`.

    It violates the growth assumption and is only meant for unconstrained MSD experiments.
    """
    kind = PotentialKind.ZERO

    def __init__(self):
        super().__init__([0.0])

    @property
    def conforming(self) -> bool:
        return False


POTENTIAL_PARAMETERS = {PotentialKind.HARMONIC: {"k"},
                        PotentialKind.DOUBLE_WELL: {"a", "b"},
                        PotentialKind.EVEN_POLYNOMIAL: {"coefficients"},
                        PotentialKind.ZERO: set()}


def build_potential(spec: Union[dict, Potential]) -> Potential:
    """ Build a potential from its config form.

    Supported forms::

        {type: harmonic, k: 1}
        {type: double_well, a: 1, b: 1}
        {type: even_polynomial, coefficients: [c0, c1, c2, ...]}
        {type: zero}

    Raises
    ------
    RuntimeError
        If the type is unknown or a parameter is missing or unexpected
    """
    if isinstance(spec, Potential):
        return spec
    spec = dict(spec)
    if "type" not in spec:
        raise RuntimeError("Can't build potential: 'type' is not specified")
    kind = PotentialKind.resolve(str(spec.pop("type")))
    allowed = POTENTIAL_PARAMETERS[kind]
    unknown = set(spec) - allowed
    if unknown:
        raise RuntimeError(f"Can't build potential '{kind}': unknown parameters {sorted(unknown)}")
    if kind == PotentialKind.HARMONIC:
        return Harmonic(**spec)
    if kind == PotentialKind.DOUBLE_WELL:
        return DoubleWell(**spec)
    if kind == PotentialKind.EVEN_POLYNOMIAL:
        if "coefficients" not in spec:
            raise RuntimeError("Can't build even polynomial: 'coefficients' is not specified")
        return EvenPolynomial(spec["coefficients"])
    return Zero()


def _finite(x: ArrayLike):
    if not np.all(np.isfinite(x)):
        raise RuntimeError(f"Can't evaluate potential at non-finite position {x}")


def eval_phi(p: Potential, x: ArrayLike) -> ArrayLike:
    """ Evaluate :math:`\\Phi(x)`; non-finite input is rejected with a :class:`RuntimeError`. """
    _finite(x)
    return p.phi(x)


def eval_dphi(p: Potential, x: ArrayLike) -> ArrayLike:
    """ Evaluate :math:`\\Phi'(x)`; non-finite input is rejected with a :class:`RuntimeError`. """
    _finite(x)
    return p.dphi(x)


@dataclass(frozen=True)
class AssumptionReport:
    """ Outcome of the sampled assumption checks.

    Parameters
    ----------
    b_estimate
        Maximum of :math:`x^2/(\\Phi(x)+1)` over the grid
    growth_ok
        Whether the ratio stays bounded, i.e. does not increase at the ends of the grid
    derivative_bound_ok
        Whether the derivative inequality holds with a finite, interior-attained f for the chosen q
    q
        The power of :math:`\\Phi(x)` used in the derivative inequality
    f_max
        The largest tabulated value of f on the sampled offsets
    conforming
        False for potentials outside the confining family (the zero potential)
    """
    b_estimate: float
    growth_ok: bool
    derivative_bound_ok: bool
    q: float
    f_max: float
    conforming: bool

    def to_dict(self) -> dict:
        return {"b_estimate": self.b_estimate, "growth_ok": self.growth_ok,
                "derivative_bound_ok": self.derivative_bound_ok, "q": self.q, "f_max": self.f_max,
                "conforming": self.conforming}


def default_grid() -> np.ndarray:
    half_width, n_points = ASSUMPTION_GRID
    return np.linspace(-half_width, half_width, n_points)


def derivative_power(p: Potential) -> float:
    """ The power q used for the derivative inequality: max(1/2, (d-2)/2) for degree d. """
    return max(0.5, (p.degree - 2) / 2)


def _excess(p: Potential, x: np.ndarray, r: float, q: float) -> np.ndarray:
    if r == 0:
        quotient = np.abs(p.d2phi(x))
    else:
        quotient = np.abs(p.dphi(x) - p.dphi(x - r)) / abs(r)
    return quotient - np.maximum(p.phi(x), 0.0) ** q


def _offset_profile(p: Potential, grid: np.ndarray, offsets: np.ndarray, q: float):
    half_width = np.max(np.abs(grid))
    outer = np.abs(grid) > 0.9 * half_width
    values, interior = [], True
    for r in offsets:
        excess = _excess(p, grid, float(r), q)
        values.append(max(float(np.max(excess)), 0.0))
        if np.max(excess[outer]) > max(np.max(excess[~outer]), 0.0) + 1e-9 * (1 + abs(np.max(excess))):
            interior = False
    return np.asarray(values), interior


def lipschitz_envelope(p: Potential, radius: float) -> float:
    """ Return :math:`\\sup_{|r| \\leq radius} f(r)` for the f used by :func:`check_assumptions`.

    f(r) is the largest amount by which the difference quotient of :math:`\\Phi'` at offset r exceeds
    :math:`\\Phi(x)^q` over a grid wide enough to contain its maximiser.
    """
    radius = abs(float(radius))
    half_width = max(ASSUMPTION_GRID[0], 4 * radius)
    grid = np.linspace(-half_width, half_width, ASSUMPTION_GRID[1])
    offsets = np.linspace(-radius, radius, 41) if radius > 0 else np.zeros(1)
    values, _ = _offset_profile(p, grid, offsets, derivative_power(p))
    return float(np.max(values))


def check_assumptions(p: Potential, grid: Optional[np.ndarray] = None) -> AssumptionReport:
    """ Check the growth and derivative assumptions of a potential on a grid.

    The growth constant is estimated as the grid maximum of :math:`x^2/(\\Phi(x)+1)`. Growth is accepted when
    the ratio increases by less than ``GROWTH_TOLERANCE`` over the outer tenth of the grid on both sides.
    The derivative inequality is sampled for offsets up to a quarter of the grid's half width, with q from
    :func:`derivative_power`; it is accepted when for every offset the excess is maximised inside the grid.

    Parameters
    ----------
    p :
        The potential
    grid :
        A finite grid symmetric about 0; by default ``ASSUMPTION_GRID``

    Returns
    -------
    AssumptionReport
        The report; the zero potential is flagged as non-conforming instead of raising
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if not np.all(np.isfinite(grid)) or not np.allclose(np.sort(grid), -np.sort(grid)[::-1]):
        raise RuntimeError("Can't check assumptions: the grid has to be finite and symmetric about 0")
    grid = np.sort(grid)
    half_width = float(np.max(np.abs(grid)))

    ratio = grid ** 2 / (p.phi(grid) + 1.0)
    b_estimate = float(np.max(ratio)) if np.all(ratio >= 0) else float("inf")
    growth_ok = bool(np.isfinite(b_estimate))
    for side in (grid >= 0.9 * half_width, grid <= -0.9 * half_width):
        band = np.abs(grid[side])
        inner, edge = ratio[side][np.argmin(band)], ratio[side][np.argmax(band)]
        if inner > 0 and edge / inner - 1 > GROWTH_TOLERANCE:
            growth_ok = False

    q = derivative_power(p)
    offsets = np.linspace(-half_width / 4, half_width / 4, 41)
    profile, interior = _offset_profile(p, grid, offsets, q)
    derivative_bound_ok = bool(interior and np.all(np.isfinite(profile)))

    if not p.conforming:
        warnings.warn(f"{p!r} violates the growth assumption; it is only admitted for unconstrained experiments")
    report = AssumptionReport(b_estimate, growth_ok, derivative_bound_ok, q, float(np.max(profile)), p.conforming)
    log.debug(f"Assumptions of {p!r}: {report}")
    return report
