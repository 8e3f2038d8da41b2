from pathlib import Path

import pytest

from chaintest import analyze, parse_facts

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
JACKSON = FIXTURES / "jacksonxml"

XML = "com.fasterxml.jackson.dataformat.xml.XmlFactory"
JSONF = "com.fasterxml.jackson.core.JsonFactory"
IA = "com.fasterxml.jackson.core.format.InputAccessor"
DETECTOR = "com.fasterxml.jackson.core.format.DataFormatDetector"

ACCEPTANCE_RESULTS = []


@pytest.fixture(scope="session")
def jackson_facts():
    return parse_facts((JACKSON / "facts.json").read_bytes())


@pytest.fixture(scope="session")
def jackson_analysis(jackson_facts):
    return analyze(jackson_facts, XML, "hasFormat", repo_root=JACKSON)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
