"""Hypothesis checks for tuples of linear forms g*X + h.

A tuple is admissible when no prime p divides the product of the forms at
every integer. Only two kinds of prime can fail: p <= number of forms, and p
dividing some leading coefficient. Every other prime sees at most one root
per form, hence fewer than p roots in total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .arith import factorize, primes_up_to


@dataclass(frozen=True)
class LinearForm:
    g: int
    h: int

    def __call__(self, x: int) -> int:
        return self.g * x + self.h

    def __str__(self) -> str:
        return f"{self.g}X + {self.h}"


def forms_from_pairs(pairs: Iterable[tuple[int, int]]) -> list[LinearForm]:
    return [LinearForm(g, h) for g, h in pairs]


def form_roots(form: LinearForm, p: int) -> set[int] | None:
    """Residues n mod p with form(n) = 0 mod p. ``None`` stands for all of them."""
    if form.g % p:
        return {-form.h * pow(form.g, -1, p) % p}
    if form.h % p == 0:
        return None
    return set()


def root_count(forms: Sequence[LinearForm], p: int) -> int:
    roots: set[int] = set()
    for form in forms:
        r = form_roots(form, p)
        if r is None:
            return p
        roots |= r
    return len(roots)


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    witness: int | None
    per_prime_counts: tuple[tuple[int, int], ...]
    vandermonde_ok: bool
    vandermonde_witness: tuple[int, int] | None

    @property
    def ok(self) -> bool:
        return self.admissible and self.vandermonde_ok


def critical_primes(forms: Sequence[LinearForm], g_primes: Iterable[int] | None = None) -> list[int]:
    """Primes at which a fixed prime divisor could occur.

    ``g_primes`` may list the prime divisors of the leading coefficients when
    they are known; otherwise each g is factored (which may raise
    ``FactorizationTooHard``).
    """
    ps = set(primes_up_to(len(forms)))
    if g_primes is None:
        for f in forms:
            ps.update(factorize(abs(f.g)).primes if f.g else ())
    else:
        ps.update(g_primes)
    return sorted(ps)


def vandermonde_check(forms: Sequence[LinearForm]) -> tuple[bool, tuple[int, int] | None]:
    """All g > 0 and every pairwise determinant g_i h_j - g_j h_i nonzero."""
    for i, f in enumerate(forms):
        if f.g <= 0:
            return False, (i, i)
    for i in range(len(forms)):
        for j in range(i + 1, len(forms)):
            if forms[i].g * forms[j].h - forms[j].g * forms[i].h == 0:
                return False, (i, j)
    return True, None


def is_admissible(forms: Sequence[LinearForm], g_primes: Iterable[int] | None = None) -> AdmissibilityReport:
    if any(f.g <= 0 for f in forms):
        raise ValueError("leading coefficients must be positive")
    counts = []
    witness = None
    for p in critical_primes(forms, g_primes):
        n = root_count(forms, p)
        counts.append((p, n))
        if n == p and witness is None:
            witness = p
    v_ok, v_witness = vandermonde_check(forms)
    return AdmissibilityReport(witness is None, witness, tuple(counts), v_ok, v_witness)


@dataclass(frozen=True)
class ZedReport:
    ok: bool
    failures: tuple[tuple[int, int, str], ...] = field(default=())

    def __bool__(self) -> bool:
        return self.ok


def zed_check(spec) -> ZedReport:
    """z*e + 1 is a unit modulo every prime p | ABq, for each z in the tuple.

    Each failure is reported as ``(z, p, guard)`` where ``guard`` names the
    construction step that was supposed to rule it out.
    """
    zs = spec.Z
    guards: dict[int, str] = {}
    for p in spec.prime_divisors_A:
        guards.setdefault(p, "e = 0 mod A")
    for p in spec.prime_divisors_B:
        guards.setdefault(p, "Korselt congruences on e mod b_j, c, d")
    for p in spec.prime_divisors_q:
        guards[p] = "be+1, ce+1, de+1 = a, a, a^-1 mod p^alpha"
    failures = []
    for p in sorted(guards):
        for z in zs:
            if (z * spec.e + 1) % p == 0:
                failures.append((z, p, guards[p]))
    return ZedReport(not failures, tuple(failures))

