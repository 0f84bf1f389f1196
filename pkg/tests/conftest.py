import random

import pytest

from ctgroup.trace import AccessRecord, Op, Trace


def make_trace(pairs, label="test"):
    """Trace from (addr, size) pairs; timestamps count up from 1."""
    return Trace.from_records(
        [AccessRecord(i + 1, a, s, Op.READ) for i, (a, s) in enumerate(pairs)],
        source_label=label,
    )


def random_accesses(rng: random.Random, n=None, max_addr=40, max_size=16):
    n = rng.randint(1, 200) if n is None else n
    return [
        (rng.randrange(max_addr) * 4, rng.randint(1, max_size)) for _ in range(n)
    ]


@pytest.fixture
def rng():
    return random.Random(1234)


# Acceptance verdicts collected by tests/test_acceptance.py. Printed via a
# terminal-summary hook because pytest's fd-level capture swallows writes
# made during the tests themselves, even through sys.__stdout__.
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)
