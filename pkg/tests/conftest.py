import os
import stat

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# FFT sizes and training vary run to run; wall-clock deadlines just flake.
settings.register_profile(
    "suite",
    deadline=None,
    max_examples=30,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


STUB_OK = """#!/bin/sh
in="$1"; shift
while [ "$1" != "-o" ]; do shift; done
cp "$in" "$2"
"""

STUB_FAIL = """#!/bin/sh
echo "render blew up" >&2
exit 1
"""

STUB_SLEEP = """#!/bin/sh
sleep 5
"""

STUB_EMPTY = """#!/bin/sh
in="$1"; shift
while [ "$1" != "-o" ]; do shift; done
: > "$2"
"""


@pytest.fixture
def make_stub(tmp_path):
    """Writes an executable shell stub standing in for the notation binary."""

    def _make(script: str = STUB_OK, name: str = "mscore_stub"):
        path = tmp_path / name
        path.write_text(script)
        path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
        return path

    return _make


@pytest.fixture
def no_musescore(monkeypatch, tmp_path):
    """Environment where no notation binary can be resolved."""
    monkeypatch.delenv("MUSESCORE_PATH", raising=False)
    empty = tmp_path / "empty_path_dir"
    empty.mkdir(exist_ok=True)
    monkeypatch.setenv("PATH", str(empty))
