from pathlib import Path

import pytest

ASSETS = Path(__file__).parent.parent / "src" / "irblock_bridge" / "assets"


@pytest.fixture(scope="session")
def assets():
    assert (ASSETS / "tiny_blob.pt").exists(), "run scripts/make_assets.py first"
    return ASSETS
