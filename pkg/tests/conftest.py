from pathlib import Path

import pytest

from recsub.fuzz import corpus

DATA = Path(__file__).resolve().parents[1] / "src" / "recsub" / "data"


@pytest.fixture(scope="session")
def curated_path() -> Path:
    return DATA / "curated.rsq"


@pytest.fixture(scope="session")
def small_corpus():
    return list(corpus(7, 400, 12))
