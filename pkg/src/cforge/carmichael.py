"""Korselt verification, the Carmichael function, and three-prime constructions.

A triple (b, c, d) of pairwise coprime positive integers together with an
``e`` satisfying

    cde + c + d = 0 (mod b),  bde + b + d = 0 (mod c),  bce + b + c = 0 (mod d)

turns every ``n = e (mod bcd)`` for which bn+1, cn+1, dn+1 are distinct primes
into a Carmichael number (bn+1)(cn+1)(dn+1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arith import CongruenceSystem, Factorization, crt_combine, factorize, is_prime, mod_inv
from .errors import (
    AlignmentViolation,
    FormNotPrime,
    HypothesisViolation,
    InternalInconsistency,
    NotDistinct,
)

COND_COPRIME = "b, c, d pairwise coprime"
COND_MOD_B = "cde + c + d = 0 mod b"
COND_MOD_C = "bde + b + d = 0 mod c"
COND_MOD_D = "bce + b + c = 0 mod d"


def carmichael_lambda(f: Factorization) -> int:
    """Exponent of the unit group modulo ``f.base``."""
    if math.prod(p**e for p, e in f.factors) != f.base:
        raise ValueError(f"incomplete factorization of {f.base}")
    parts = []
    for p, e in f.factors:
        if p == 2:
            parts.append(1 if e == 1 else 2 if e == 2 else 2 ** (e - 2))
        else:
            parts.append(p ** (e - 1) * (p - 1))
    return math.lcm(*parts) if parts else 1


@dataclass(frozen=True)
class CarmichaelVerdict:
    n: int
    is_carmichael: bool
    reason: str
    factorization: Factorization | None = None

    def __bool__(self) -> bool:
        return self.is_carmichael


def is_carmichael(n: int, f: Factorization | None = None) -> CarmichaelVerdict:
    """Korselt's criterion, cross-checked against lambda(n) | n - 1.

    Supplied factors are validated (product and primality) before use.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if f is None:
        f = factorize(n)
    elif f.base != n or not f.is_complete():
        raise ValueError(f"supplied factors do not factor {n} into primes")
    if n == 1:
        return CarmichaelVerdict(n, False, "1 is not composite", f)
    if len(f.factors) == 1 and f.factors[0][1] == 1:
        return CarmichaelVerdict(n, False, "prime, not composite", f)
    squarefree = all(e == 1 for _, e in f.factors)
    bad = [p for p, _ in f.factors if (n - 1) % (p - 1)]
    korselt = squarefree and not bad
    via_lambda = squarefree and (n - 1) % carmichael_lambda(f) == 0
    if korselt != via_lambda:
        raise InternalInconsistency(f"Korselt and lambda disagree on {n}")
    if not squarefree:
        sq = next(p for p, e in f.factors if e > 1)
        return CarmichaelVerdict(n, False, f"not squarefree ({sq}^2 divides n)", f)
    if bad:
        reason = "; ".join(f"{p - 1} does not divide {n - 1} (p={p})" for p in bad)
        return CarmichaelVerdict(n, False, reason, f)
    return CarmichaelVerdict(n, True, "composite, squarefree, p-1 | n-1 for all p | n", f)


def scan_carmichael(limit: int) -> list[int]:
    """All Carmichael numbers <= limit, via a smallest-prime-factor table."""
    if limit < 561:
        return []
    spf = np.zeros(limit + 1, dtype=np.int64)
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
    spf_list = spf.tolist()
    found = []
    # Carmichael numbers are odd.
    for n in range(3, limit + 1, 2):
        p = spf_list[n]
        if p == 0:
            continue
        m, ok = n, True
        while m > 1:
            p = spf_list[m] or m
            m //= p
            if m % p == 0 or (n - 1) % (p - 1):
                ok = False
                break
        if ok:
            found.append(n)
    return found


def check_lemma_hypotheses(b: int, c: int, d: int, e: int) -> tuple[bool, list[str]]:
    violated = []
    if math.gcd(b, c) != 1 or math.gcd(b, d) != 1 or math.gcd(c, d) != 1:
        violated.append(COND_COPRIME)
    if (c * d * e + c + d) % b:
        violated.append(COND_MOD_B)
    if (b * d * e + b + d) % c:
        violated.append(COND_MOD_C)
    if (b * c * e + b + c) % d:
        violated.append(COND_MOD_D)
    return not violated, violated


def lemma_constraints(b: int, c: int, d: int) -> CongruenceSystem:
    """The three Korselt-type conditions rewritten as congruences on e."""
    pairs = []
    for mod, x, y in ((b, c, d), (c, b, d), (d, b, c)):
        if mod > 1:
            pairs.append((-(x + y) * mod_inv(x * y, mod), mod))
    return CongruenceSystem.of(pairs)


def solve_lemma_congruences(b: int, c: int, d: int) -> tuple[int, int]:
    """Least e0 >= 1 and the modulus bcd describing all admissible e."""
    if math.gcd(b, c) != 1 or math.gcd(b, d) != 1 or math.gcd(c, d) != 1:
        raise HypothesisViolation(f"({b}, {c}, {d}) not pairwise coprime")
    r, M = crt_combine(lemma_constraints(b, c, d))
    if M != b * c * d:
        raise InternalInconsistency(f"modulus {M} != bcd for ({b}, {c}, {d})")
    return (r or M), M


@dataclass(frozen=True)
class LemmaInstance:
    b: int
    c: int
    d: int
    e: int
    n: int

    @property
    def aligned(self) -> bool:
        return (self.n - self.e) % (self.b * self.c * self.d) == 0


@dataclass(frozen=True)
class CarmichaelTriple:
    r: int
    s: int
    t: int
    N: int
    lambda_N: int
    provenance: LemmaInstance | None = None

    @property
    def factorization(self) -> Factorization:
        return Factorization.from_primes((self.r, self.s, self.t))


def build_triple(inst: LemmaInstance, rounds: int = 32) -> CarmichaelTriple:
    """r = bn+1, s = cn+1, t = dn+1 and the Carmichael number N = rst.

    The Korselt property is re-verified on the result.
    """
    ok, violated = check_lemma_hypotheses(inst.b, inst.c, inst.d, inst.e)
    if not ok:
        raise HypothesisViolation(", ".join(violated))
    if not inst.aligned:
        raise AlignmentViolation(f"n = {inst.n} is not = e = {inst.e} mod bcd")
    r, s, t = (z * inst.n + 1 for z in (inst.b, inst.c, inst.d))
    for name, value in (("r", r), ("s", s), ("t", t)):
        if not is_prime(value, rounds).is_prime:
            raise FormNotPrime(name, value)
    if len({r, s, t}) < 3:
        raise NotDistinct(f"r, s, t = {r}, {s}, {t}")
    N = r * s * t
    f = Factorization.from_primes((r, s, t))
    lam = carmichael_lambda(f)
    if lam != math.lcm(inst.b * inst.n, inst.c * inst.n, inst.d * inst.n):
        raise InternalInconsistency(f"lambda({N}) = {lam} != lcm(bn, cn, dn)")
    verdict = is_carmichael(N, f)
    if not verdict:
        raise InternalInconsistency(f"{N} failed Korselt: {verdict.reason}")
    return CarmichaelTriple(r, s, t, N, lam, inst)
