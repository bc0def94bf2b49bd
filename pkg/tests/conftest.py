from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"


@pytest.fixture(scope="session")
def replay_root() -> Path:
    return FIXTURES / "replay"


@pytest.fixture(scope="session")
def transcript_root() -> Path:
    return FIXTURES / "transcripts"
