import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import synth_corpus  # noqa: E402


@pytest.fixture(scope="session")
def small_corpus():
    """60 synthetic dialogues, mixed k and outcomes."""
    return synth_corpus(60, seed=7)


@pytest.fixture(scope="session")
def tokenizer_fixtures():
    import json

    path = Path(__file__).parent / "data" / "tokenizer_fixtures.json"
    return json.loads(path.read_text())["cases"]
