from enum import Enum


class RegimeTag(Enum):
    """ Represent the parameter regimes of the memory kernel.

    Following values are supported:

        * DIFFUSIVE for alpha > 1 and beta > 1/(alpha-1)
        * CRITICAL for alpha = 1 and beta > 1
        * SUBDIFFUSIVE for 0 < alpha < 1 and beta > 1/alpha
        * UNCLASSIFIED for parameters satisfying none of the conditions
    """
    DIFFUSIVE = "diffusive"
    CRITICAL = "critical"
    SUBDIFFUSIVE = "subdiffusive"
    UNCLASSIFIED = "unclassified"

    @property
    def label(self) -> str:
        """ Short label of the condition: D, C, SD or '-'. """
        return {"diffusive": "D", "critical": "C", "subdiffusive": "SD"}.get(self.value, "-")

    @staticmethod
    def resolve(name: str) -> 'RegimeTag':
        """ Return the regime tag for a name or a short label (D, C, SD).

        Raises
        ------
        RuntimeError
            If the name can not be resolved
        """
        name = name.strip().lower()
        labels = {"d": RegimeTag.DIFFUSIVE, "c": RegimeTag.CRITICAL, "sd": RegimeTag.SUBDIFFUSIVE}
        if name in labels:
            return labels[name]
        try:
            return RegimeTag(name)
        except Exception:
            raise RuntimeError(f"Can't resolve regime for name '{name}'")

    def __str__(self):
        return self.value


class Scheme(Enum):
    """ Represent the time integration schemes.

    Following values are supported:

        * EULER_MARUYAMA: explicit Euler-Maruyama step for all components
        * SPLITTING_EXACT_OU: velocity kicks and position drift, exact Ornstein-Uhlenbeck transition for the modes
    """
    EULER_MARUYAMA = "euler_maruyama"
    SPLITTING_EXACT_OU = "splitting_exact_ou"

    @staticmethod
    def resolve(name: str) -> 'Scheme':
        """ Return the scheme for a name.

        The names ``em`` and ``splitting`` are accepted as abbreviations.

        Raises
        ------
        RuntimeError
            If the name can not be resolved
        """
        name = name.strip().lower().replace("-", "_")
        aliases = {"em": Scheme.EULER_MARUYAMA, "splitting": Scheme.SPLITTING_EXACT_OU}
        if name in aliases:
            return aliases[name]
        try:
            return Scheme(name)
        except Exception:
            raise RuntimeError(f"Can't resolve integration scheme for name '{name}'")

    def __str__(self):
        return self.value


class PotentialKind(Enum):
    """ Represent the built-in families of potentials. """
    HARMONIC = "harmonic"
    EVEN_POLYNOMIAL = "even_polynomial"
    DOUBLE_WELL = "double_well"
    ZERO = "zero"

    @staticmethod
    def resolve(name: str) -> 'PotentialKind':
        """ Return the potential kind for a name.

        Raises
        ------
        RuntimeError
            If the name can not be resolved
        """
        name = name.strip().lower().replace("-", "_")
        try:
            return PotentialKind(name)
        except Exception:
            raise RuntimeError(f"Can't resolve potential type for name '{name}'")

    def __str__(self):
        return self.value


class InitialLaw(Enum):
    """ Represent the initial laws of ensembles.

        * MU: exact samples of the invariant measure
        * QUIESCENT_MODES: position and velocity from the invariant measure, all modes set to zero
    """
    MU = "mu"
    QUIESCENT_MODES = "quiescent_modes"

    @staticmethod
    def resolve(name: str) -> 'InitialLaw':
        name = name.strip().lower().replace("-", "_")
        try:
            return InitialLaw(name)
        except Exception:
            raise RuntimeError(f"Can't resolve initial law for name '{name}'")

    def __str__(self):
        return self.value
