import sys
from importlib import resources
from pathlib import Path

import pytest

from paraqa.stub_qa import start_background

FIXTURES = Path(str(resources.files("paraqa.data.fixtures")))

DEFINITION_SENTENCE = "Common ownership means a relationship between two companies."
LEXICON_SENTENCE = "Financial Institution needs to submit a suspicious activity report."
DEPENDENCY_SENTENCE = "Bank and insurance company need to submit a suspicious activity report."


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def stub_endpoint():
    server, url = start_background()
    yield url
    server.shutdown()
    server.server_close()


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
