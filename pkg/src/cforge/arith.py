"""Exact integer arithmetic: valuations, inverses, CRT, primality, factoring.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import FactorizationTooHard, Inconsistent, NotInvertible, NotPrimeError

INFINITY = math.inf
"""Valuation of zero. Compares greater than every integer."""

# Below this bound `is_prime` answers by trial division.
TRIAL_DIVISION_LIMIT = 1 << 20
# Strong pseudoprime tests to the first 12 prime bases are exact below 3.3e24,
# so in particular for every 64-bit integer.
DETERMINISTIC_LIMIT = 1 << 64
DEFAULT_EXTRA_ROUNDS = 32

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97)


# ---------------------------------------------------------------- primes


def primes_up_to(n: int) -> list[int]:
    """All primes p <= n, ascending."""
    if n < 2:
        return []
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    sieve[4::2] = False
    for p in range(3, math.isqrt(n) + 1, 2):
        if sieve[p]:
            sieve[p * p :: 2 * p] = False
    return np.flatnonzero(sieve).tolist()


def _strong_probable_prime(n: int, a: int, d: int, s: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def _split_even(m: int) -> tuple[int, int]:
    s = (m & -m).bit_length() - 1
    return m >> s, s


def jacobi(a: int, n: int) -> int:
    if n <= 0 or n % 2 == 0:
        raise ValueError("jacobi symbol needs an odd positive modulus")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def _strong_lucas_probable_prime(n: int) -> bool:
    """Strong Lucas test with Selfridge's parameter choice (method A)."""
    r = math.isqrt(n)
    if r * r == n:
        return False
    D = 5
    while True:
        j = jacobi(D, n)
        if j == -1:
            break
        if j == 0 and abs(D) != n:
            return False
        D = -D - 2 if D > 0 else -D + 2
    P, Q = 1, (1 - D) // 4
    d, s = _split_even(n + 1)

    def half(x: int) -> int:
        if x & 1:
            x += n
        return (x >> 1) % n

    U, V, Qk = 1, P, Q % n
    for bit in bin(d)[3:]:
        U, V = U * V % n, (V * V - 2 * Qk) % n
        Qk = Qk * Qk % n
        if bit == "1":
            U, V = half(P * U + V), half(D * U + P * V)
            Qk = Qk * Q % n
    if U == 0 or V == 0:
        return True
    for _ in range(s - 1):
        V = (V * V - 2 * Qk) % n
        if V == 0:
            return True
        Qk = Qk * Qk % n
    return False


def is_probable_prime(n: int) -> bool:
    """Fast boolean primality check used on hot paths.

    Exact below 2**64; above, a Baillie-PSW test (no known counterexample).
    """
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    if n < 97 * 97:
        return True
    d, s = _split_even(n - 1)
    if n < DETERMINISTIC_LIMIT:
        return all(_strong_probable_prime(n, a, d, s) for a in _MR_BASES)
    return _strong_probable_prime(n, 2, d, s) and _strong_lucas_probable_prime(n)


@dataclass(frozen=True)
class PrimalityEvidence:
    n: int
    verdict: str  # "prime" | "composite" | "probable_prime"
    method: str  # "trial_division" | "deterministic_mr" | "bpsw_plus_rounds"
    rounds: int = 0

    @property
    def is_prime(self) -> bool:
        return self.verdict != "composite"

    def to_dict(self) -> dict:
        return {"n": str(self.n), "verdict": self.verdict, "method": self.method, "rounds": self.rounds}

    @classmethod
    def from_dict(cls, data: dict) -> "PrimalityEvidence":
        return cls(int(data["n"]), data["verdict"], data["method"], int(data["rounds"]))


def _trial_division_is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    for p in range(3, math.isqrt(n) + 1, 2):
        if n % p == 0:
            return False
    return True


def is_prime(n: int, rounds: int = DEFAULT_EXTRA_ROUNDS, salt: str = "") -> PrimalityEvidence:
    """Primality test that reports how far its answer can be trusted.

    ``prime`` is only returned when the method is exact for the size of n.
    Above 2**64 a positive answer is ``probable_prime``: strong base-2 test,
    strong Lucas test, then ``rounds`` Miller-Rabin rounds with bases drawn
    from a generator seeded by ``n`` and ``salt`` (so evidence reproduces).
    """
    if n < 0:
        raise ValueError("is_prime needs n >= 0")
    if n < TRIAL_DIVISION_LIMIT:
        ok = _trial_division_is_prime(n)
        return PrimalityEvidence(n, "prime" if ok else "composite", "trial_division")
    if n < DETERMINISTIC_LIMIT:
        ok = is_probable_prime(n)
        return PrimalityEvidence(n, "prime" if ok else "composite", "deterministic_mr", len(_MR_BASES))
    if not is_probable_prime(n):
        return PrimalityEvidence(n, "composite", "bpsw_plus_rounds", 0)
    rng = random.Random(f"{n}:{salt}")
    d, s = _split_even(n - 1)
    for i in range(rounds):
        if not _strong_probable_prime(n, rng.randrange(2, n - 1), d, s):
            return PrimalityEvidence(n, "composite", "bpsw_plus_rounds", i + 1)
    return PrimalityEvidence(n, "probable_prime", "bpsw_plus_rounds", rounds)


# ------------------------------------------------------------ valuations


def padic_val(p: int, x: int) -> int | float:
    """p-adic valuation of x; ``INFINITY`` for x = 0."""
    if not is_probable_prime(p):
        raise NotPrimeError(f"padic_val needs a prime, got {p}")
    if x == 0:
        return INFINITY
    v = 0
    x = abs(x)
    while x % p == 0:
        x //= p
        v += 1
    return v


def mod_inv(a: int, m: int) -> int:
    if m < 2:
        raise ValueError("modulus must be >= 2")
    if math.gcd(a, m) != 1:
        raise NotInvertible(a, m)
    return pow(a, -1, m)


# ------------------------------------------------------------------- CRT


@dataclass(frozen=True)
class CongruenceSystem:
    """Ordered list of constraints x = residue (mod modulus)."""

    constraints: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        normalized = []
        for r, m in self.constraints:
            if m < 1:
                raise ValueError(f"modulus must be >= 1, got {m}")
            normalized.append((r % m, m))
        object.__setattr__(self, "constraints", tuple(normalized))

    @classmethod
    def of(cls, pairs: Iterable[tuple[int, int]]) -> "CongruenceSystem":
        return cls(tuple(pairs))

    def extended(self, pairs: Iterable[tuple[int, int]]) -> "CongruenceSystem":
        return CongruenceSystem(self.constraints + tuple(pairs))

    def satisfied_by(self, x: int) -> bool:
        return all(x % m == r for r, m in self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)


def crt_combine(system: CongruenceSystem | Iterable[tuple[int, int]]) -> tuple[int, int]:
    """Solve a system with arbitrary (not necessarily coprime) moduli.

    Returns ``(r, M)`` with ``M`` the lcm of the moduli and ``0 <= r < M`` such
    that the solutions are exactly ``x = r (mod M)``. Raises ``Inconsistent``.
    """
    if not isinstance(system, CongruenceSystem):
        system = CongruenceSystem.of(system)
    r, M = 0, 1
    for r2, m2 in system:
        g = math.gcd(M, m2)
        if (r2 - r) % g:
            raise Inconsistent(f"x = {r} mod {M} contradicts x = {r2} mod {m2}")
        m2g = m2 // g
        if m2g > 1:
            t = (r2 - r) // g * pow(M // g, -1, m2g) % m2g
        else:
            t = 0
        r += M * t
        M *= m2g
        r %= M
    return r, M


# ---------------------------------------------------------- factorization


@dataclass(frozen=True)
class Factorization:
    base: int
    factors: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "factors", tuple(sorted(self.factors)))

    @classmethod
    def from_primes(cls, primes: Iterable[int]) -> "Factorization":
        counts: dict[int, int] = {}
        for p in primes:
            counts[p] = counts.get(p, 0) + 1
        base = math.prod(p**e for p, e in counts.items())
        return cls(base, tuple(counts.items()))

    @property
    def primes(self) -> list[int]:
        return [p for p, _ in self.factors]

    def as_dict(self) -> dict[int, int]:
        return dict(self.factors)

    def is_complete(self) -> bool:
        return math.prod(p**e for p, e in self.factors) == self.base and all(
            e >= 1 and is_probable_prime(p) for p, e in self.factors
        )

    def exponent(self, p: int) -> int:
        return self.as_dict().get(p, 0)


_TRIAL_BOUND = 10_000
_TRIAL_PRIMES = primes_up_to(_TRIAL_BOUND)


def _pollard_brent(n: int, budget: int, seed: int) -> tuple[int | None, int]:
    """One Brent-rho attempt. Returns (factor or None, iterations used)."""
    rng = random.Random(seed)
    y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
    g = r = q = 1
    used = 0
    x = ys = y
    while g == 1:
        x = y
        for _ in range(r):
            y = (y * y + c) % n
        k = 0
        while k < r and g == 1:
            ys = y
            for _ in range(min(m, r - k)):
                y = (y * y + c) % n
                q = q * abs(x - y) % n
            g = math.gcd(q, n)
            k += m
        used += r
        r *= 2
        if used > budget:
            return None, used
    if g == n:
        g = 1
        while g == 1:
            ys = (ys * ys + c) % n
            g = math.gcd(abs(x - ys), n)
    return (g if g != n else None), used


def factorize(n: int, effort: int = 2_000_000) -> Factorization:
    """Complete prime factorization of n >= 1.

    Trial division by primes below 10**4, then Brent's variant of Pollard rho.
    ``effort`` caps the total number of rho iterations; past it
    ``FactorizationTooHard`` is raised. Practical up to ~40 digits with
    two large factors, much further when only one cofactor is large.
    """
    if n < 1:
        raise ValueError("factorize needs n >= 1")
    counts: dict[int, int] = {}
    m = n
    for p in _TRIAL_PRIMES:
        if p * p > m:
            break
        while m % p == 0:
            m //= p
            counts[p] = counts.get(p, 0) + 1
    stack = [m] if m > 1 else []
    spent = 0
    attempt = 0
    while stack:
        x = stack.pop()
        if is_probable_prime(x):
            counts[x] = counts.get(x, 0) + 1
            continue
        r = math.isqrt(x)
        if r * r == x:
            stack += [r, r]
            continue
        factor = None
        while factor is None:
            if spent > effort:
                raise FactorizationTooHard(f"could not split {x} within {effort} rho iterations")
            factor, used = _pollard_brent(x, effort - spent, seed=attempt)
            spent += used
            attempt += 1
        stack += [factor, x // factor]
    return Factorization(n, tuple(counts.items()))


def prime_divisors(n: int) -> list[int]:
    return factorize(abs(n)).primes if n else []


# ------------------------------------------------------------- primorial


def primorial_A(k: int, q: int) -> int:
    """Product of the primes p <= k that do not divide q."""
    return math.prod(p for p in primes_up_to(k) if q % p)


def lcm_all(values: Sequence[int]) -> int:
    return math.lcm(*values) if values else 1
