import dataclasses
import math

from hypothesis import given, settings
from hypothesis import strategies as st

from cforge.admissibility import (
    LinearForm,
    forms_from_pairs,
    is_admissible,
    root_count,
    vandermonde_check,
    zed_check,
)
from cforge.arith import primes_up_to
from cforge.construction import construct

PRIMES_50 = primes_up_to(50)


def scan_roots(forms, p):
    return sum(1 for n in range(p) if math.prod(f(n) for f in forms) % p == 0)


X = LinearForm


def test_root_count_examples():
    assert scan_roots([X(1, 0), X(1, 1)], 2) == 2
    assert root_count([X(1, 0), X(1, 1)], 2) == 2
    assert root_count([X(1, 1), X(1, 3)], 2) == 1
    assert root_count([X(2, 1)], 2) == 0
    assert root_count([X(2, 4)], 2) == 2


forms_strategy = st.lists(
    st.tuples(st.integers(-100, 100), st.integers(-100, 100)), min_size=1, max_size=6
).map(forms_from_pairs)


@settings(max_examples=400)
@given(forms_strategy)
def test_root_count_matches_scan(forms):
    for p in PRIMES_50:
        assert root_count(forms, p) == scan_roots(forms, p)


def test_is_admissible_examples():
    r = is_admissible([X(1, 0), X(1, 1)])
    assert not r.admissible and r.witness == 2
    r = is_admissible([X(1, 1), X(1, 3)])
    assert r.admissible and r.witness is None
    assert dict(r.per_prime_counts)[2] == 1


def test_report_invariants():
    r = is_admissible([X(6, 1), X(6, 5), X(3, 2)])
    assert all(0 <= n <= p for p, n in r.per_prime_counts)
    assert r.admissible == (r.witness is None)


def test_vandermonde_examples():
    assert vandermonde_check([X(1, 1), X(2, 2)]) == (False, (0, 1))
    assert vandermonde_check([X(1, 1), X(1, 2)]) == (True, None)
    assert vandermonde_check([X(0, 1)])[0] is False


def test_constructed_spec_forms():
    spec = construct(3, 4, 2)
    forms = list(spec.forms)
    r = is_admissible(forms, spec.prime_divisors_ABq)
    assert r.ok
    assert is_admissible(forms).admissible  # factoring the g's independently
    ok, _ = vandermonde_check(forms)
    assert ok
    for i, zi in enumerate(spec.Z):
        for j, zj in enumerate(spec.Z):
            det = forms[i].g * forms[j].h - forms[j].g * forms[i].h
            assert det == spec.step * (zi - zj)


def test_zed_check():
    spec = construct(7, 12, 2)
    assert zed_check(spec)
    bad = zed_check(dataclasses.replace(spec, e=spec.e + 1))
    assert not bad
    z, p, guard = bad.failures[0]
    assert (z * (spec.e + 1) + 1) % p == 0
    assert guard


def test_zed_check_trivial_q_and_A():
    spec = construct(5, 1, 1)
    assert spec.A == 1 and spec.q == 1
    assert spec.prime_divisors_A == [] and spec.prime_divisors_q == []
    # e + 1 happens to keep every z*e + 1 a unit here; find the first shift that does not
    assert zed_check(dataclasses.replace(spec, e=spec.e + 1))
    shift = next(t for t in range(1, 100) if not zed_check(dataclasses.replace(spec, e=spec.e + t)))
    bad = zed_check(dataclasses.replace(spec, e=spec.e + shift))
    assert {guard for _, _, guard in bad.failures} == {"Korselt congruences on e mod b_j, c, d"}
