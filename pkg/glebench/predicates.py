from glebench.enums import RegimeTag
from glebench.kernel import KernelSpec, ModeSet, classify_regime
from glebench.potential import Potential, check_assumptions


def is_confining(p: Potential) -> bool:
    """ Checks whether a potential satisfies the growth assumption.

    Parameters
    ----------
    p : Potential
        The potential to be checked

    Returns
    -------
    bool:
        The checking result
    """
    return p.conforming and check_assumptions(p).growth_ok


def is_diffusive(spec: KernelSpec) -> bool:
    """ Checks whether kernel parameters satisfy condition (D) with an admissible norm weight.

    Parameters
    ----------
    spec : KernelSpec
        The kernel parameters

    Returns
    -------
    bool:
        The checking result
    """
    regime = classify_regime(spec)
    return regime.tag == RegimeTag.DIFFUSIVE and regime.s_in_range


def admits_theta(modes: ModeSet, gamma: float) -> bool:
    """ Checks whether the Theta functional and its constant are defined for the modes and the drag.

    Unlike :func:`is_diffusive` the norm weight is not checked.
    """
    return modes.spec is not None and gamma > 0 and classify_regime(modes.spec).tag == RegimeTag.DIFFUSIVE
