from __future__ import annotations

import pytest

from rigserve import rig


@pytest.fixture(scope="session")
def defs() -> rig.RigDefinition:
    return rig.load_default_rig()


@pytest.fixture(scope="session")
def default_doc() -> str:
    from importlib import resources

    return resources.files("rigserve.data").joinpath("default_rig.json").read_text("utf-8")
