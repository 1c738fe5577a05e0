"""Shared fixtures: tiny datasets and run configs kept fast enough for CI."""

from __future__ import annotations

import numpy as np
import pytest

from currmask.data import generate_dataset, make_env, write_dataset

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


@pytest.fixture(scope="session")
def point_mass_env():
    return make_env("point_mass_2d")


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory):
    """Train/val dataset pair on point_mass_2d, small enough for quick runs."""
    root = tmp_path_factory.mktemp("datasets")
    env = make_env("point_mass_2d")
    for name, episodes, seed in (("train", 12, 7), ("val", 8, 1007)):
        trajs, manifest = generate_dataset(env, episodes, 200, seed)
        write_dataset(root / name, trajs, manifest)
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def record_acceptance(criterion: str, passed: bool) -> None:
    _ACCEPTANCE_RESULTS.append((criterion, "PASS" if passed else "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for criterion, status in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{status}  {criterion}")
