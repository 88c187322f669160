import dataclasses
import math
import random
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cforge.admissibility import LinearForm, is_admissible
from cforge.arith import INFINITY, is_probable_prime
from cforge.construction import (
    TupleSpec,
    _build_at_offset,
    build_tuple_spec,
    composite_clashes,
    construct,
    decompose,
    e_base_system,
    select_bcd,
    verify_spec,
)
from cforge.errors import NotCoprime


def modulus_split_holds(a, q):
    dec = decompose(a, q)
    assert dec.q_sharp * dec.q_flat == q
    assert math.gcd(dec.q_sharp, dec.q_flat) == 1
    assert (a - 1) % dec.q_flat == 0
    assert (dec.a_hat - 1) % dec.q_flat == 0
    assert (a * dec.a_hat - 1) % q == 0
    assert 1 <= dec.a_hat <= q
    for pd in dec.sharp_primes:
        assert math.gcd(pd.n_p * pd.n_hat_p, pd.p) == 1
        assert pd.beta == pd.beta_hat


def test_decompose_examples():
    dec = decompose(3, 4)
    assert (dec.q_sharp, dec.q_flat, dec.a_hat) == (4, 1, 3)
    (pd,) = dec.per_prime
    assert (pd.p, pd.alpha, pd.beta, pd.n_p, pd.n_hat_p) == (2, 2, 1, 1, 1)

    dec = decompose(1, 12)
    assert (dec.q_sharp, dec.q_flat) == (1, 12)
    assert all(pd.beta == INFINITY for pd in dec.per_prime)

    dec = decompose(5, 1)
    assert (dec.q_sharp, dec.q_flat, dec.per_prime) == (1, 1, ())


def test_decompose_rejects_non_coprime():
    with pytest.raises(NotCoprime):
        decompose(2, 4)


def test_modulus_split_exhaustive_small():
    for q in range(1, 301):
        for a in range(1, 301):
            if math.gcd(a, q) == 1:
                modulus_split_holds(a, q)


@settings(max_examples=2000)
@given(st.integers(1, 10**4), st.integers(1, 10**4))
def test_modulus_split_random_up_to_ten_thousand(a, q):
    if math.gcd(a, q) == 1:
        modulus_split_holds(a, q)


def test_e_base_system_examples():
    assert e_base_system(decompose(3, 4), 1).constraints == ((2, 4),)
    assert set(e_base_system(decompose(1, 3), 2).constraints) == {(0, 3), (0, 2)}
    assert e_base_system(decompose(5, 1), 1).constraints == ()


def test_select_bcd_examples():
    assert select_bcd(decompose(3, 4), 1, 1) == (5, 7, 11)
    assert select_bcd(decompose(5, 1), 1, 1) == (2, 3, 5)
    assert select_bcd(decompose(1, 2), 1, 1) == (3, 5, 7)
    assert select_bcd(decompose(3, 4), 1, 1, offset=1) == (7, 11, 13)


def test_select_bcd_distinct_classes():
    dec = decompose(2, 5)  # n_5 = 1, n_hat_5 = 2 (a_hat = 3)
    b, c, d = select_bcd(dec, 1, 1)
    assert b < c and len({b, c, d}) == 3
    assert all(x > 5 and is_probable_prime(x) for x in (b, c, d))
    # beta_5 = 0 so e = 1 mod 5: then be+1 = a and de+1 = a^-1 mod 5
    assert (b * 1 + 1 - 2) % 5 == 0 and (c + 1 - 2) % 5 == 0 and (d + 1 - 3) % 5 == 0


def _brute_e(b_list, c, d, base_pairs, limit):
    for e in range(1, limit + 1):
        if all(e % m == r for r, m in base_pairs) and all(
            (c * d * e + c + d) % bj == 0 and (bj * d * e + bj + d) % c == 0 and (bj * c * e + bj + c) % d == 0
            for bj in b_list
        ):
            return e
    return None


def test_build_tuple_spec_5_1_1():
    spec = construct(5, 1, 1)
    assert spec.A == 1 and (spec.b, spec.c, spec.d) == (2, 3, 5)
    assert spec.b_list == (17,)
    assert spec.B == 255
    assert spec.e == _brute_e((17,), 3, 5, [], 255)
    assert spec.e_modulus == 255


def test_build_tuple_spec_1_2_1():
    spec = construct(1, 2, 1)
    assert spec.A == 1 and (spec.b, spec.c, spec.d) == (3, 5, 7)
    assert spec.b_list == (3 + 35 * 2,) == (73,)
    assert spec.B == 73 * 5 * 7
    assert spec.e == _brute_e((73,), 5, 7, [(0, 2)], spec.step)


def test_e_is_least_solution_of_full_system():
    for a, q, k in [(3, 4, 1), (7, 12, 1), (1, 1, 2), (2, 5, 1)]:
        spec = construct(a, q, k)
        base = e_base_system(spec.decomposition, spec.A).constraints
        assert spec.e == _brute_e(spec.b_list, spec.c, spec.d, base, spec.step)


def test_determinant_identity():
    spec = construct(3, 4, 3)
    for (z1, f1), (z2, f2) in combinations(zip(spec.Z, spec.forms), 2):
        assert f1.g * f2.h - f2.g * f1.h == spec.A * spec.B * spec.q * (z1 - z2)


ALL_SMALL = [(a, q, k) for q in range(1, 31) for a in range(1, q + 1) if math.gcd(a, q) == 1 for k in (1, 2, 3)]


@pytest.mark.parametrize("a,q,k", random.Random(3).sample(ALL_SMALL, 60))
def test_congruences_individually(a, q, k):
    spec = construct(a, q, k)
    e, dec = spec.e, spec.decomposition
    for pd in dec.sharp_primes:
        assert e % pd.p**pd.alpha == pd.p**pd.beta
    assert e % dec.q_flat == 0
    assert e % spec.A == 0
    for bj in spec.b_list:
        assert (spec.c * spec.d * e + spec.c + spec.d) % bj == 0
        assert (bj * spec.d * e + bj + spec.d) % spec.c == 0
        assert (bj * spec.c * e + bj + spec.c) % spec.d == 0
    for pd in dec.per_prime:
        pe = pd.p**pd.alpha
        assert (spec.b * e + 1 - a) % pe == 0
        assert (spec.c * e + 1 - a) % pe == 0
        assert (spec.d * e + 1 - dec.a_hat) % pe == 0
    assert ((spec.b * e + 1) * (spec.c * e + 1) * (spec.d * e + 1) - a) % q == 0
    assert all(math.gcd(x, y) == 1 for x, y in combinations(spec.Z, 2))
    assert math.gcd(spec.B, q) == 1
    assert all(x > q * spec.A for x in (spec.b, spec.c, spec.d))


@settings(max_examples=300)
@given(st.integers(1, 500), st.data())
def test_residue_product_from_prime_power_congruences(q, data):
    a = data.draw(st.integers(1, q).filter(lambda x: math.gcd(x, q) == 1))
    a_hat = pow(a, -1, q) if q > 1 else 1
    # any x, y, z meeting the per-prime-power congruences (x, y = a; z = a^-1)
    x = a + q * data.draw(st.integers(0, 10**6))
    y = a + q * data.draw(st.integers(0, 10**6))
    z = a_hat + q * data.draw(st.integers(0, 10**6))
    assert (x * y * z - a) % q == 0


def test_determinism():
    s1, s2 = construct(7, 12, 3), construct(7, 12, 3)
    assert s1 == s2
    assert s1.digest() == s2.digest()


def test_round_trip_serialization():
    spec = construct(1, 12, 2)
    again = TupleSpec.from_dict(spec.to_dict())
    assert again == spec
    assert again.digest() == spec.digest()
    assert verify_spec(again).passed


def test_composite_b_j_clash_is_avoided():
    dec = decompose(1, 1)
    naive = _build_at_offset(dec, 3, 0)
    assert (naive.b, naive.c, naive.d) == (7, 11, 13)
    assert naive.b_list[2] == 2581 == 29 * 89
    assert (naive.b_list[1], 29) in composite_clashes(naive.b_list, naive.e)
    # the clash is a genuine fixed prime divisor
    report = is_admissible(list(naive.forms))
    assert not report.admissible and report.witness == 29
    assert not verify_spec(naive).passed

    spec = build_tuple_spec(dec, 3)
    assert spec.offset == 1
    assert verify_spec(spec).passed


def test_verify_spec_all_pass():
    cert = verify_spec(construct(3, 4, 1))
    assert cert.passed
    assert cert["admissible"].passed and cert["vandermonde"].passed


def test_verify_spec_detects_perturbed_e():
    spec = construct(5, 1, 1)
    cert = verify_spec(dataclasses.replace(spec, e=spec.e + 1))
    assert not cert.passed
    assert not cert["cde + c + d = 0 mod b_j [j=1]"].passed


def test_verify_spec_detects_proportional_forms():
    spec = construct(5, 1, 1)
    cert = verify_spec(dataclasses.replace(spec, forms=(LinearForm(1, 1), LinearForm(2, 2))))
    assert not cert["vandermonde"].passed
