import json
from pathlib import Path

import pytest

from vsim.rng import Rng

VECTOR_DIR = Path(__file__).parent / "vectors"
DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def rng() -> Rng:
    return Rng.from_seed("pytest")


@pytest.fixture
def scenario(tmp_path):
    from scenario import build_scenario

    return build_scenario(tmp_path)


def load_vectors(name: str) -> list[dict]:
    with open(VECTOR_DIR / name) as fh:
        return json.load(fh)["cases"]
