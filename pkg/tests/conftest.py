import math

import pytest

ACCEPTANCE_LINES: list[str] = []


def sieve_reference(n: int) -> bytearray:
    """Plain Eratosthenes table, independent of cforge.arith."""
    table = bytearray([1]) * (n + 1)
    table[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(n) + 1):
        if table[p]:
            table[p * p :: p] = bytearray(len(range(p * p, n + 1, p)))
    return table


@pytest.fixture(scope="session")
def prime_table():
    return sieve_reference(10**6)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
