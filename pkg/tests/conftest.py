"""Shared fixtures: the default grid and small channel ensembles."""

import numpy as np
import pytest

from trpclink import SystemConfig
from trpclink.channel import ChannelRealization, generate_ensemble


@pytest.fixture(scope="session")
def cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def cm1(cfg):
    return generate_ensemble("CM1", 20, 1, cfg)


@pytest.fixture(scope="session")
def cm2(cfg):
    return generate_ensemble("CM2", 20, 1, cfg)


@pytest.fixture
def single_tap(cfg):
    return ChannelRealization(np.array([0]), np.array([1.0]), cfg.t_c, model="CM1")
