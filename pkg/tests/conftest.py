from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixtures import build_patient_dir  # noqa: E402


@pytest.fixture(scope="session")
def patient_dir(tmp_path_factory) -> Path:
    """Full patient directory: volume + 3 meshes + record + annotations + tf."""
    return build_patient_dir(tmp_path_factory.mktemp("patient") / "case")


@pytest.fixture()
def fresh_patient_dir(tmp_path) -> Path:
    return build_patient_dir(tmp_path / "case")
