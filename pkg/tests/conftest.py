"""Shared fixtures for the seedevo test suite."""

from os.path import dirname, join as path_join

import pytest

from config import RunConfig
from environments import DECEPTIVE_LAYOUT_PATH, StubFactory, load_layout
from network import arch_for_environment
from util import read_text


REPO_ROOT = dirname(dirname(__file__))
CONFIGS_PATH = path_join(REPO_ROOT, 'configs')


@pytest.fixture
def stub_arch():
    """Default policy architecture for the 4-value, 3-action stubs."""
    return arch_for_environment(4, 3)


@pytest.fixture
def count0_env():
    return StubFactory('count0')


@pytest.fixture
def const_env():
    return StubFactory('const')


@pytest.fixture
def deceptive_world():
    return load_layout(read_text(DECEPTIVE_LAYOUT_PATH))


@pytest.fixture
def tiny_config():
    """Small, fast RunConfig; override fields per test."""
    def make(**changes):
        base = RunConfig(
            population_size=8,
            generations=3,
            truncation_size=3,
            mutation_power=0.1,
            archive_probability=0.5,
            max_frames=12,
            validation_episodes=2,
            improvement_generations=3,
            novelty_k=3,
            segment_length=4,
            elite_candidate_count=3,
            hidden_layers='dense:8',
        )
        return base.with_overrides(**changes)
    return make


@pytest.fixture
def minimal_cfg_path():
    return path_join(CONFIGS_PATH, 'minimal.cfg')


@pytest.fixture
def desk_cfg_path():
    return path_join(CONFIGS_PATH, 'desk.cfg')
