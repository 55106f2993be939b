from __future__ import annotations

from pathlib import Path

import pytest

from hive.config import DATA_DIR, load_config
from hive.ckg import load_graph_files
from hive.pddl import load_domain_dir
from hive.pipeline import Engine


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def offline_cfg():
    return load_config(env={}, flags={})


@pytest.fixture(scope="session")
def bundled_graph(offline_cfg):
    return load_graph_files(offline_cfg.path("ckg.path"))


@pytest.fixture(scope="session")
def bundled_domains(offline_cfg):
    return load_domain_dir(offline_cfg.path("domains.path"))


@pytest.fixture(scope="session")
def engine(offline_cfg):
    return Engine.from_config(offline_cfg)
