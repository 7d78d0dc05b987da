from pathlib import Path

import numpy as np
import pytest

from glebench.dynamics import SimConfig
from glebench.enums import Scheme
from glebench.kernel import KernelSpec, build_modes
from glebench.potential import DoubleWell, Harmonic, Zero
from glebench.runconfig import load_config


@pytest.fixture()
def config_path():
    return (Path(__file__) / "../resources/configs/").resolve()


@pytest.fixture()
def harmonic_config_path(config_path):
    return config_path / "harmonic.yaml"


@pytest.fixture()
def minimal_config_path(config_path):
    return config_path / "minimal.yaml"


@pytest.fixture()
def coupling_config_path(config_path):
    return config_path / "coupling.yaml"


@pytest.fixture()
def msd_config_path(config_path):
    return config_path / "msd.yaml"


@pytest.fixture()
def unknown_key_config_path(config_path):
    return config_path / "unknown-key.yaml"


@pytest.fixture()
def harmonic_config(harmonic_config_path):
    return load_config(harmonic_config_path)


@pytest.fixture()
def coupling_config(coupling_config_path):
    return load_config(coupling_config_path)


@pytest.fixture()
def msd_config(msd_config_path):
    return load_config(msd_config_path)


@pytest.fixture
def harmonic():
    return Harmonic(1.0)


@pytest.fixture
def double_well():
    return DoubleWell(1.0, 1.0)


@pytest.fixture
def zero_potential():
    return Zero()


@pytest.fixture
def diffusive_spec():
    return KernelSpec(alpha=1.5, beta=3.0, n_modes=50, s=0.6)


@pytest.fixture
def diffusive_modes(diffusive_spec):
    return build_modes(diffusive_spec)


@pytest.fixture
def contracting_modes():
    return build_modes(KernelSpec(alpha=3.0, beta=3.0, n_modes=50, s=0.6))


@pytest.fixture
def three_modes():
    return build_modes(KernelSpec(alpha=1.0, beta=2.0, n_modes=3, s=0.6))


@pytest.fixture
def sim_config():
    return SimConfig(m=1.0, gamma=1.0, dt=0.01, t_final=1.0, seed=42, scheme=Scheme.SPLITTING_EXACT_OU)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
