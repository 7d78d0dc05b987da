"""
Run configuration files.

A run configuration is a YAML document with the sections ``kernel``, ``physics``, ``integrator`` and
``experiment`` and the top-level keys ``seed``, ``output_dir``, ``enforce_regime`` and ``plots``::

    seed: 42
    kernel: {alpha: 1.5, beta: 3, n_modes: 50, s: 0.6}
    physics:
      m: 1
      gamma: 1
      potential: {type: harmonic, k: 1}
    integrator: {dt: 0.001, t_final: 10, scheme: splitting_exact_ou}
    experiment:
      coupling: {x0: 1, shifted_x0: 0, kappa: auto, n_runs: 10}

Unknown keys are errors. Missing optional keys are filled with their defaults, so that the emitted form of a
parsed configuration is complete.
"""
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Union

import yaml

from glebench import log
from glebench.config import DEFAULT_OUTPUT_PATH
from glebench.dynamics import SimConfig
from glebench.enums import InitialLaw, PotentialKind, RegimeTag, Scheme
from glebench.kernel import KernelSpec, classify_regime, regime_condition
from glebench.observables import observable_names
from glebench.potential import POTENTIAL_PARAMETERS, Potential, build_potential, check_assumptions
from glebench.streams import SEED_LIMIT

REQUIRED = object()


class ConfigError(RuntimeError):
    """ Raised for invalid run configurations.

    Parameters
    ----------
    kind
        One of ``syntax``, ``unknown_key``, ``missing_key``, ``type``, ``constraint``, ``regime``
    location
        The dotted path of the offending key
    message
        The diagnostic
    """

    def __init__(self, kind: str, location: str, message: str):
        self.kind = kind
        self.location = location
        super().__init__(f"{location or '<config>'}: {message}")

    def to_dict(self) -> dict:
        return {"error": "ConfigError", "kind": self.kind, "location": self.location, "message": str(self)}


@dataclass(frozen=True)
class Key:
    """ The schema of one configuration key.

    Parameters
    ----------
    kind
        ``float``, ``int``, ``bool``, ``str``, ``pair`` (two floats), ``floats``, ``strs`` or ``kappa``
        (a positive float or ``auto``)
    default
        The default value or :data:`REQUIRED`
    check
        A predicate of the converted value
    constraint
        The description of the predicate used in diagnostics
    nullable
        Whether null is accepted
    """
    kind: str
    default: Any = REQUIRED
    check: Optional[Callable[[Any], bool]] = None
    constraint: str = ""
    nullable: bool = False


def _positive(value) -> bool:
    return value > 0


KERNEL_SCHEMA = {"alpha": Key("float", check=_positive, constraint="alpha > 0"),
                 "beta": Key("float", check=_positive, constraint="beta > 0"),
                 "n_modes": Key("int", check=lambda n: n >= 1, constraint="n_modes >= 1"),
                 "s": Key("float", 0.6, lambda s: s > 0.5, "s > 1/2")}

PHYSICS_SCHEMA = {"m": Key("float", 1.0, _positive, "m > 0"),
                  "gamma": Key("float", 1.0, lambda g: g >= 0, "gamma >= 0")}

INTEGRATOR_SCHEMA = {"dt": Key("float", check=_positive, constraint="dt > 0"),
                     "t_final": Key("float", check=_positive, constraint="t_final > 0"),
                     "scheme": Key("str", str(Scheme.SPLITTING_EXACT_OU)),
                     "thin_stride": Key("int", 1, lambda n: n >= 1, "thin_stride >= 1"),
                     "cutoff_R": Key("float", None, _positive, "cutoff_R > 0", nullable=True),
                     "thermal_noise": Key("bool", True)}

_ordered_pair = (lambda w: 0 < w[0] < w[1], "0 < lower < upper")
_INITIAL_LAWS = [str(law) for law in InitialLaw]

EXPERIMENT_SCHEMA = {
    "kernel": {"t_min": Key("float", 0.01, _positive, "t_min > 0"),
               "t_max": Key("float", 1000.0, _positive, "t_max > 0"),
               "n_points": Key("int", 200, lambda n: n >= 2, "n_points >= 2"),
               "fit_window": Key("pair", None, *_ordered_pair, nullable=True),
               "fit_points": Key("int", 50, lambda n: n >= 10, "fit_points >= 10")},
    "simulate": {"x0": Key("float", 0.0),
                 "v0": Key("float", 0.0),
                 "record_modes": Key("bool", True)},
    "msd": {"n_traj": Key("int", 1000, lambda n: n >= 2, "n_traj >= 2"),
            "window": Key("pair", None, *_ordered_pair, nullable=True),
            "early_window": Key("pair", None, *_ordered_pair, nullable=True),
            "n_points": Key("int", 60, lambda n: n >= 2, "n_points >= 2")},
    "stationarity": {"x0": Key("float", 0.0),
                     "v0": Key("float", 0.0),
                     "bins": Key("int", 100, lambda n: n >= 1, "bins >= 1"),
                     "hist_range": Key("pair", [-3.0, 3.0], lambda r: r[0] < r[1], "lower < upper"),
                     "observables": Key("strs", ["x2", "v2"], lambda names: set(names) <= set(observable_names()),
                                        f"observables in {observable_names()}")},
    "invariance": {"n_traj": Key("int", 10000, lambda n: n >= 2, "n_traj >= 2"),
                   "checkpoints": Key("floats", [0.0, 1.0, 5.0], lambda ts: len(ts) > 0 and min(ts) >= 0,
                                      "non-empty, all >= 0"),
                   "initial_law": Key("str", str(InitialLaw.MU), lambda name: name in _INITIAL_LAWS,
                                      f"initial_law in {_INITIAL_LAWS}"),
                   "bins": Key("int", 100, lambda n: n >= 1, "bins >= 1"),
                   "hist_range": Key("pair", [-3.0, 3.0], lambda r: r[0] < r[1], "lower < upper")},
    "measure": {"n_samples": Key("int", 10000, lambda n: n >= 2, "n_samples >= 2"),
                "box_half_width": Key("float", 5.0, _positive, "box_half_width > 0"),
                "bins": Key("int", 100, lambda n: n >= 1, "bins >= 1"),
                "hist_range": Key("pair", [-3.0, 3.0], lambda r: r[0] < r[1], "lower < upper")},
    "coupling": {"x0": Key("float", 1.0),
                 "v0": Key("float", 0.0),
                 "shifted_x0": Key("float", 0.0),
                 "shifted_v0": Key("float", 0.0),
                 "lambda": Key("float", None, _positive, "lambda > 0", nullable=True),
                 "kappa": Key("kappa", "auto"),
                 "n_runs": Key("int", 1, lambda n: n >= 1, "n_runs >= 1"),
                 "tail_margin": Key("float", 1.0, _positive, "tail_margin > 0"),
                 "record_stride": Key("int", None, lambda n: n >= 1, "record_stride >= 1", nullable=True),
                 "eta": Key("float", 0.1, _positive, "eta > 0"),
                 "tail_paths": Key("int", 0, lambda n: n >= 0, "tail_paths >= 0")}}

POTENTIAL_VALUE_KINDS = {"k": "float", "a": "float", "b": "float", "coefficients": "floats"}


@dataclass(frozen=True)
class Physics:
    m: float
    gamma: float
    potential: Potential

    def to_dict(self) -> dict:
        return {"m": self.m, "gamma": self.gamma, "potential": self.potential.to_dict()}


@dataclass(frozen=True)
class IntegratorSettings:
    dt: float
    t_final: float
    scheme: Scheme
    thin_stride: int
    cutoff_R: Optional[float]
    thermal_noise: bool

    def to_dict(self) -> dict:
        return {"dt": self.dt, "t_final": self.t_final, "scheme": str(self.scheme), "thin_stride": self.thin_stride,
                "cutoff_R": self.cutoff_R, "thermal_noise": self.thermal_noise}


@dataclass
class RunConfig:
    """ A fully resolved run configuration.

    Parameters
    ----------
    kernel
        The kernel parameters
    physics
        Mass, drag and potential
    integrator
        The integrator settings
    experiment
        One resolved dictionary per subcommand
    seed
        The master seed
    output_dir
        The output directory
    enforce_regime
        Whether parameters outside the regimes (D), (C), (SD) are rejected
    plots
        Whether figures and plot scripts are written
    checks
        The regime classification and assumption report computed while parsing
    """
    kernel: KernelSpec
    physics: Physics
    integrator: IntegratorSettings
    experiment: dict
    seed: int
    output_dir: str
    enforce_regime: bool = False
    plots: bool = False
    checks: dict = field(default_factory=dict, compare=False)

    def sim_config(self, t_final: Optional[float] = None, thin_stride: Optional[int] = None) -> SimConfig:
        """ Return the integrator settings of the run as :class:`~glebench.dynamics.SimConfig`. """
        return SimConfig(self.physics.m, self.physics.gamma, self.integrator.dt,
                         self.integrator.t_final if t_final is None else t_final, self.seed,
                         self.integrator.scheme, self.integrator.cutoff_R,
                         self.integrator.thin_stride if thin_stride is None else thin_stride,
                         self.integrator.thermal_noise)

    def to_dict(self) -> dict:
        return {"seed": self.seed,
                "output_dir": self.output_dir,
                "enforce_regime": self.enforce_regime,
                "plots": self.plots,
                "kernel": {"alpha": self.kernel.alpha, "beta": self.kernel.beta, "n_modes": self.kernel.n_modes,
                           "s": self.kernel.s},
                "physics": self.physics.to_dict(),
                "integrator": self.integrator.to_dict(),
                "experiment": {name: dict(section) for name, section in self.experiment.items()}}


class RunConfigBuilder:
    """ This class builds :class:`RunConfigs <glebench.runconfig.RunConfig>` from parsed YAML documents.

    """

    @classmethod
    def build(cls, document: dict) -> RunConfig:
        """ Build a run configuration.

        Parameters
        ----------
        document :
            The parsed document

        Returns
        -------
        RunConfig
            The configuration with all defaults filled and all checks executed

        Raises
        ------
        ConfigError
            If a key is unknown or missing, has the wrong type or violates a constraint, or if the regime is
            enforced and the kernel parameters match no regime
        """
        if not isinstance(document, dict):
            raise ConfigError("type", "", "the configuration has to be a mapping")
        top_level = {"seed", "output_dir", "enforce_regime", "plots", "kernel", "physics", "integrator",
                     "experiment"}
        cls.reject_unknown_keys(document, top_level, "")
        if "seed" not in document:
            raise ConfigError("missing_key", "seed", "'seed' is not specified; seeds are mandatory")
        seed = cls.convert(document["seed"], Key("int", check=lambda n: 0 <= n < SEED_LIMIT,
                                                 constraint="0 <= seed < 2**64"), "seed")
        output_dir = cls.convert(document.get("output_dir", str(DEFAULT_OUTPUT_PATH)), Key("str"), "output_dir")
        enforce_regime = cls.convert(document.get("enforce_regime", False), Key("bool"), "enforce_regime")
        plots = cls.convert(document.get("plots", False), Key("bool"), "plots")

        kernel_values = cls.build_section(cls.section(document, "kernel"), KERNEL_SCHEMA, "kernel")
        kernel = KernelSpec(**kernel_values)
        physics = cls.build_physics(cls.section(document, "physics"))
        integrator = cls.build_integrator(cls.section(document, "integrator"))
        experiment = cls.build_experiment(document.get("experiment") or {})

        checks = cls.run_checks(kernel, physics, enforce_regime)
        return RunConfig(kernel, physics, integrator, experiment, seed, output_dir, enforce_regime, plots, checks)

    @classmethod
    def section(cls, document: dict, name: str) -> dict:
        if name not in document:
            raise ConfigError("missing_key", name, f"section '{name}' is not specified")
        section = document[name]
        if section is None:
            return {}
        if not isinstance(section, dict):
            raise ConfigError("type", name, f"section '{name}' has to be a mapping")
        return section

    @classmethod
    def reject_unknown_keys(cls, section: dict, allowed, location: str):
        unknown = sorted(set(section) - set(allowed))
        if unknown:
            where = f"{location}.{unknown[0]}" if location else str(unknown[0])
            raise ConfigError("unknown_key", where, f"unknown key '{unknown[0]}'; allowed keys are {sorted(allowed)}")

    @classmethod
    def convert(cls, value, key: Key, location: str):
        if value is None:
            if key.nullable:
                return None
            raise ConfigError("type", location, f"null is not allowed")
        converted = cls.convert_kind(value, key.kind, location)
        if key.check is not None and not key.check(converted):
            raise ConfigError("constraint", location, f"value {value!r} violates the constraint {key.constraint}")
        return converted

    @classmethod
    def convert_kind(cls, value, kind: str, location: str):
        def is_number(item):
            return isinstance(item, (int, float)) and not isinstance(item, bool)

        if kind == "float" and is_number(value):
            return float(value)
        if kind == "int" and isinstance(value, int) and not isinstance(value, bool):
            return int(value)
        if kind == "bool" and isinstance(value, bool):
            return value
        if kind == "str" and isinstance(value, str):
            return value
        if kind == "pair" and isinstance(value, list) and len(value) == 2 and all(is_number(v) for v in value):
            return [float(v) for v in value]
        if kind == "floats" and isinstance(value, list) and all(is_number(v) for v in value):
            return [float(v) for v in value]
        if kind == "strs" and isinstance(value, list) and all(isinstance(v, str) for v in value):
            return list(value)
        if kind == "kappa":
            if value == "auto":
                return value
            if is_number(value) and value > 0:
                return float(value)
            raise ConfigError("type", location, f"expected 'auto' or a positive number, got {value!r}")
        expected = {"pair": "a list of two numbers", "floats": "a list of numbers", "strs": "a list of strings"}
        raise ConfigError("type", location, f"expected {expected.get(kind, kind)}, got {value!r}")

    @classmethod
    def build_section(cls, section: dict, schema: dict, location: str) -> dict:
        cls.reject_unknown_keys(section, schema, location)
        values = {}
        for name, key in schema.items():
            where = f"{location}.{name}"
            if name not in section:
                if key.default is REQUIRED:
                    raise ConfigError("missing_key", where, f"'{name}' is not specified")
                values[name] = list(key.default) if isinstance(key.default, list) else key.default
                continue
            values[name] = cls.convert(section[name], key, where)
        return values

    @classmethod
    def build_physics(cls, section: dict) -> Physics:
        schema = dict(PHYSICS_SCHEMA)
        cls.reject_unknown_keys(section, list(schema) + ["potential"], "physics")
        values = cls.build_section({k: v for k, v in section.items() if k != "potential"}, schema, "physics")
        return Physics(values["m"], values["gamma"],
                       cls.build_potential(section.get("potential", {"type": "harmonic", "k": 1.0})))

    @classmethod
    def build_potential(cls, section) -> Potential:
        location = "physics.potential"
        if not isinstance(section, dict):
            raise ConfigError("type", location, "the potential has to be a mapping")
        if "type" not in section:
            raise ConfigError("missing_key", f"{location}.type", "'type' is not specified")
        try:
            kind = PotentialKind.resolve(cls.convert(section["type"], Key("str"), f"{location}.type"))
        except RuntimeError as error:
            if isinstance(error, ConfigError):
                raise
            raise ConfigError("constraint", f"{location}.type", str(error))
        allowed = POTENTIAL_PARAMETERS[kind]
        cls.reject_unknown_keys(section, list(allowed) + ["type"], location)
        parameters = {"type": str(kind)}
        for name in allowed:
            if name in section:
                parameters[name] = cls.convert(section[name], Key(POTENTIAL_VALUE_KINDS[name]), f"{location}.{name}")
        try:
            return build_potential(parameters)
        except RuntimeError as error:
            raise ConfigError("constraint", location, str(error))

    @classmethod
    def build_integrator(cls, section: dict) -> IntegratorSettings:
        values = cls.build_section(section, INTEGRATOR_SCHEMA, "integrator")
        try:
            scheme = Scheme.resolve(values["scheme"])
        except RuntimeError as error:
            raise ConfigError("constraint", "integrator.scheme", str(error))
        if not values["dt"] < values["t_final"]:
            raise ConfigError("constraint", "integrator.dt", f"dt={values['dt']} has to be < t_final")
        return IntegratorSettings(values["dt"], values["t_final"], scheme, values["thin_stride"], values["cutoff_R"],
                                  values["thermal_noise"])

    @classmethod
    def build_experiment(cls, section) -> dict:
        if not isinstance(section, dict):
            raise ConfigError("type", "experiment", "section 'experiment' has to be a mapping")
        cls.reject_unknown_keys(section, EXPERIMENT_SCHEMA, "experiment")
        experiment = {}
        for name, schema in EXPERIMENT_SCHEMA.items():
            subsection = section.get(name) or {}
            if not isinstance(subsection, dict):
                raise ConfigError("type", f"experiment.{name}", f"section '{name}' has to be a mapping")
            experiment[name] = cls.build_section(subsection, schema, f"experiment.{name}")
        return experiment

    @classmethod
    def run_checks(cls, kernel: KernelSpec, physics: Physics, enforce_regime: bool) -> dict:
        regime = classify_regime(kernel)
        if regime.tag == RegimeTag.UNCLASSIFIED:
            message = f"alpha={kernel.alpha}, beta={kernel.beta} match no regime: {regime_condition(kernel)}"
            if enforce_regime:
                raise ConfigError("regime", "kernel", message)
            warnings.warn(message)
        elif not regime.s_in_range:
            warnings.warn(f"s={kernel.s} lies outside the admissible range {regime.s_range} of regime {regime.tag}")
        assumptions = check_assumptions(physics.potential)
        log.debug(f"Regime: {regime.to_dict()}, assumptions: {assumptions.to_dict()}")
        return {"regime": regime.to_dict(), "assumptions": assumptions.to_dict()}


def parse_config(text: str) -> RunConfig:
    """ Parse and validate a YAML run configuration.

    Raises
    ------
    ConfigError
        If the text is not valid YAML or the configuration is invalid
    """
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as error:
        raise ConfigError("syntax", "", f"invalid YAML: {error}")
    return RunConfigBuilder.build(document if document is not None else {})


def emit_config(config: RunConfig) -> str:
    """ Return the complete YAML form of a configuration; ``parse_config(emit_config(c)) == c``. """
    return yaml.safe_dump(config.to_dict(), sort_keys=True, default_flow_style=False)


def load_config(path: Union[str, Path]) -> RunConfig:
    """ Load a run configuration from a file. """
    path = Path(path)
    if not path.exists():
        raise ConfigError("missing_key", "", f"configuration file {path} does not exist")
    log.info(f"Load configuration from {path}")
    with open(path, "r") as config_file:
        return parse_config(config_file.read())


def with_overrides(config: RunConfig, seed: Optional[int] = None, output_dir: Optional[str] = None,
                   coupling: Optional[dict] = None) -> RunConfig:
    """ Return a copy of the configuration with command-line overrides applied and validated. """
    document = config.to_dict()
    if seed is not None:
        document["seed"] = seed
    if output_dir is not None:
        document["output_dir"] = str(output_dir)
    for key, value in (coupling or {}).items():
        if value is not None:
            document["experiment"]["coupling"][key] = value
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return RunConfigBuilder.build(document)
