from __future__ import annotations

import pytest

import figfixtures as fig


@pytest.fixture
def repo_repaired(tmp_path):
    """Stolen-device repository whose irp_sd chart is execution-clean."""
    return fig.write_repo(tmp_path / "repo", fig.stolen_device_docs("repaired"))


@pytest.fixture
def repo_as_drawn(tmp_path):
    """Same repository with the dead-ended chart exactly as drawn."""
    return fig.write_repo(tmp_path / "repo", fig.stolen_device_docs("as-drawn"))
