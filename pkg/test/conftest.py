"""Test configuration."""

import numpy as np
import pytest

from tpsr.envs.arena import VisionArena
from tpsr.envs.pomdp import three_state_pomdp, tiger_pomdp


@pytest.fixture()
def three_state():
    """The three-state, two-action test POMDP."""
    return three_state_pomdp()


@pytest.fixture()
def tiger():
    """The tiger problem."""
    return tiger_pomdp()


@pytest.fixture()
def arena():
    """The default arena."""
    return VisionArena()


@pytest.fixture()
def quiet_arena():
    """The default arena without motion noise."""
    return VisionArena(sigma_translation=0.0, sigma_rotation=0.0)


@pytest.fixture()
def rng():
    """A seeded random generator."""
    return np.random.default_rng(2024)
