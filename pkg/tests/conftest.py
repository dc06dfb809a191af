import pytest

from modesplit.beam import BeamSpec
from modesplit.xsection import EllipseSection


@pytest.fixture
def circular_beam():
    """Circular 250 nm waist, 5 mm long, silica."""
    return BeamSpec(5e-3, EllipseSection.circle(250e-9))


@pytest.fixture
def elliptic_beam():
    return BeamSpec(5e-3, EllipseSection(250e-9, 248.5e-9))


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", []) if k == "criterion_line"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
