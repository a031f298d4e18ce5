from __future__ import annotations

import pytest

from leotopo.shell import STARLINK_SHELL1, ShellConfig, generate_synthetic_shell
from leotopo.stable import build_stable_link_set


@pytest.fixture(scope="session")
def shell1():
    snap = generate_synthetic_shell(ShellConfig(**STARLINK_SHELL1), "shell1")
    return snap, build_stable_link_set(snap)


@pytest.fixture(scope="session")
def toy():
    snap = generate_synthetic_shell(ShellConfig(12, 12, 550.0, 53.0), "toy")
    return snap, build_stable_link_set(snap)


@pytest.fixture(scope="session")
def small():
    # 16 planes of 8 at 1500 km: plane spans up to 3 are stable, which gives
    # LSL and the optimiser real choices while staying fast
    snap = generate_synthetic_shell(ShellConfig(16, 8, 1500.0, 53.0), "small")
    return snap, build_stable_link_set(snap)
