from __future__ import annotations

import json
from pathlib import Path

import pytest

from consilium.backend import ScriptedBackend
from consilium.core import CodeSegment, VulnCategory

FIXTURES = Path(__file__).parent / "fixtures"

TESTER = "software tester"
DEVELOPER = "software developer"

WCSNCAT_CODE = """\
void sink(wchar_t *data)
{
    wchar_t dest[50] = L"";
    /* append data, leaving room for the terminator */
    wcsncat(dest, data, 50 - wcslen(dest) - 1);
    printWLine(dest);
}"""


def scripted(tester_replies, developer_replies=()):
    """Backend answering tester and developer requests from separate queues."""
    return ScriptedBackend([
        {"match": TESTER, "replies": list(tester_replies)},
        {"match": DEVELOPER, "replies": list(developer_replies)},
    ])


def load_fixture(name: str):
    with open(FIXTURES / name, encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture
def segment() -> CodeSegment:
    return CodeSegment("seg-1", "int main(void) {\n  char buf[8];\n  strcpy(buf, argv[1]);\n}", True, VulnCategory.FC)


@pytest.fixture
def wcsncat_segment() -> CodeSegment:
    return CodeSegment("CWE121-wcsncat-01", WCSNCAT_CODE, False, VulnCategory.FC)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
