"""Build the congruence data and linear-form tuple for a residue class a mod q.

Pipeline: ``decompose`` splits q by how deeply a - 1 is divisible by each
prime; ``select_bcd`` picks three primes; ``build_tuple_spec`` fixes the
progression b_j = b + A*c*d*q*j, solves for e, and writes down the k + 2 forms
F_z(X) = z*(e + A*B*q*X) + 1 for z in (b_1, ..., b_k, c, d).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import combinations

from .admissibility import LinearForm, is_admissible, vandermonde_check, zed_check
from .arith import (
    INFINITY,
    CongruenceSystem,
    crt_combine,
    factorize,
    is_probable_prime,
    mod_inv,
    padic_val,
    primes_up_to,
    primorial_A,
)
from .carmichael import lemma_constraints
from .errors import InternalInconsistency, NotCoprime, SelectionExhausted

SELECTION_CEILING = 10_000_000


@dataclass(frozen=True)
class PrimeData:
    p: int
    alpha: int
    beta: int | float
    beta_hat: int | float
    n_p: int | None = None
    n_hat_p: int | None = None

    @property
    def sharp(self) -> bool:
        return self.beta < self.alpha


@dataclass(frozen=True)
class ModulusDecomposition:
    a: int
    q: int
    a_hat: int
    per_prime: tuple[PrimeData, ...]
    q_sharp: int
    q_flat: int

    @property
    def sharp_primes(self) -> list[PrimeData]:
        return [pd for pd in self.per_prime if pd.sharp]


def decompose(a: int, q: int) -> ModulusDecomposition:
    if a < 1 or q < 1:
        raise ValueError("a and q must be positive")
    if math.gcd(a, q) != 1:
        raise NotCoprime(a, q)
    a_hat = pow(a, -1, q) if q > 1 else 1
    per_prime = []
    q_sharp = q_flat = 1
    for p, alpha in factorize(q).factors:
        beta = padic_val(p, a - 1)
        beta_hat = padic_val(p, a_hat - 1)
        if beta < alpha:
            if beta_hat != beta:
                raise InternalInconsistency(f"v_{p}(a-1) = {beta} but v_{p}(a^-1 - 1) = {beta_hat}")
            pb = p**beta
            pd = PrimeData(p, alpha, beta, beta_hat, (a - 1) // pb, (a_hat - 1) // pb)
            q_sharp *= p**alpha
        else:
            pd = PrimeData(p, alpha, beta, beta_hat)
            q_flat *= p**alpha
        per_prime.append(pd)
    return ModulusDecomposition(a, q, a_hat, tuple(per_prime), q_sharp, q_flat)


def e_base_system(dec: ModulusDecomposition, A: int) -> CongruenceSystem:
    """e = p^beta mod p^alpha (p | q_sharp), e = 0 mod q_flat, e = 0 mod A."""
    pairs = [(pd.p**pd.beta, pd.p**pd.alpha) for pd in dec.sharp_primes]
    if dec.q_flat > 1:
        pairs.append((0, dec.q_flat))
    if A > 1:
        pairs.append((0, A))
    return CongruenceSystem.of(pairs)


def _primes_in_class(residue: int, modulus: int, above: int):
    x = above + 1 + (residue - above - 1) % modulus
    for _ in range(SELECTION_CEILING):
        if is_probable_prime(x):
            yield x
        x += modulus
    raise SelectionExhausted(f"no further primes = {residue} mod {modulus} within the search ceiling")


def bcd_classes(dec: ModulusDecomposition, e_residue: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Residue classes (for b and c, for d) modulo prod p^(alpha - beta)."""
    b_pairs, d_pairs = [], []
    for pd in dec.sharp_primes:
        mod = pd.p ** (pd.alpha - pd.beta)
        e_p = e_residue // pd.p**pd.beta
        if mod == 1:
            continue
        inv = mod_inv(e_p, mod)
        b_pairs.append((pd.n_p * inv, mod))
        d_pairs.append((pd.n_hat_p * inv, mod))
    return crt_combine(b_pairs), crt_combine(d_pairs)


def select_bcd(dec: ModulusDecomposition, A: int, k: int, offset: int = 0) -> tuple[int, int, int]:
    """Smallest suitable primes above q*A, skipping ``offset`` in each class.

    b and c are the first two primes in their class; d is the first prime in
    its own class other than b and c. When both classes coincide this gives
    b < c < d.
    """
    e0, _ = crt_combine(e_base_system(dec, A))
    (rb, mb), (rd, md) = bcd_classes(dec, e0)
    bound = dec.q * A
    gen = _primes_in_class(rb, mb, bound)
    for _ in range(offset):
        next(gen)
    b, c = next(gen), next(gen)
    skipped = 0
    for d in _primes_in_class(rd, md, bound):
        if d in (b, c):
            continue
        if skipped == offset:
            return b, c, d
        skipped += 1
    raise SelectionExhausted("unreachable")


@dataclass(frozen=True)
class TupleSpec:
    k: int
    a: int
    q: int
    A: int
    b: int
    c: int
    d: int
    b_list: tuple[int, ...]
    B: int
    e: int
    e_modulus: int
    forms: tuple[LinearForm, ...]
    decomposition: ModulusDecomposition
    offset: int = 0
    b_list_factors: tuple[tuple[int, ...], ...] = field(default=(), compare=False)

    @property
    def Z(self) -> tuple[int, ...]:
        return (*self.b_list, self.c, self.d)

    @property
    def step(self) -> int:
        """A*B*q: the increment of the Korselt parameter n per unit of m."""
        return self.A * self.B * self.q

    @property
    def prime_divisors_A(self) -> list[int]:
        return [p for p in primes_up_to(self.k) if self.A % p == 0]

    @property
    def prime_divisors_q(self) -> list[int]:
        return [pd.p for pd in self.decomposition.per_prime]

    @property
    def prime_divisors_B(self) -> list[int]:
        ps = {self.c, self.d}
        for fs in self.b_list_factors or tuple(tuple(factorize(bj).primes) for bj in self.b_list):
            ps.update(fs)
        return sorted(ps)

    @property
    def prime_divisors_ABq(self) -> list[int]:
        return sorted(set(self.prime_divisors_A) | set(self.prime_divisors_B) | set(self.prime_divisors_q))

    def n_at(self, m: int) -> int:
        return self.e + self.step * m

    def to_dict(self) -> dict:
        s = str
        return {
            "a": s(self.a),
            "q": s(self.q),
            "k": self.k,
            "offset": self.offset,
            "a_hat": s(self.decomposition.a_hat),
            "q_sharp": s(self.decomposition.q_sharp),
            "q_flat": s(self.decomposition.q_flat),
            "per_prime": [
                {
                    "p": s(pd.p),
                    "alpha": pd.alpha,
                    "beta": "inf" if pd.beta == INFINITY else pd.beta,
                    "beta_hat": "inf" if pd.beta_hat == INFINITY else pd.beta_hat,
                    "n_p": None if pd.n_p is None else s(pd.n_p),
                    "n_hat_p": None if pd.n_hat_p is None else s(pd.n_hat_p),
                }
                for pd in self.decomposition.per_prime
            ],
            "A": s(self.A),
            "b": s(self.b),
            "c": s(self.c),
            "d": s(self.d),
            "b_list": [s(x) for x in self.b_list],
            "B": s(self.B),
            "e": s(self.e),
            "e_modulus": s(self.e_modulus),
            "forms": [{"g": s(f.g), "h": s(f.h)} for f in self.forms],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TupleSpec":
        def val(x):
            return INFINITY if x == "inf" else int(x)

        per_prime = tuple(
            PrimeData(
                int(r["p"]),
                int(r["alpha"]),
                val(r["beta"]),
                val(r["beta_hat"]),
                None if r["n_p"] is None else int(r["n_p"]),
                None if r["n_hat_p"] is None else int(r["n_hat_p"]),
            )
            for r in data["per_prime"]
        )
        dec = ModulusDecomposition(
            int(data["a"]), int(data["q"]), int(data["a_hat"]), per_prime, int(data["q_sharp"]), int(data["q_flat"])
        )
        return cls(
            k=int(data["k"]),
            a=int(data["a"]),
            q=int(data["q"]),
            A=int(data["A"]),
            b=int(data["b"]),
            c=int(data["c"]),
            d=int(data["d"]),
            b_list=tuple(int(x) for x in data["b_list"]),
            B=int(data["B"]),
            e=int(data["e"]),
            e_modulus=int(data["e_modulus"]),
            forms=tuple(LinearForm(int(f["g"]), int(f["h"])) for f in data["forms"]),
            decomposition=dec,
            offset=int(data.get("offset", 0)),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def progression_constraints(b_list, c: int, d: int) -> CongruenceSystem:
    """Korselt-type congruences on e for every (b_j, c, d).

    Modulo c and d the condition only depends on b_j through b_j mod c and
    b_j mod d, which are the same for every j; this is checked, not assumed.
    """
    pairs = []
    mod_c, mod_d = set(), set()
    for bj in b_list:
        (rb, _), (rc, _), (rd, _) = lemma_constraints(bj, c, d)
        pairs.append((rb, bj))
        mod_c.add(rc)
        mod_d.add(rd)
    if len(mod_c) != 1 or len(mod_d) != 1:
        raise InternalInconsistency(f"constraints mod c or d depend on j: {mod_c}, {mod_d}")
    pairs += [(mod_c.pop(), c), (mod_d.pop(), d)]
    return CongruenceSystem.of(pairs)


MAX_AUTO_OFFSET = 1000


def composite_clashes(b_list, e: int) -> list[tuple[int, int]]:
    """Pairs (b_i, p) with p a prime factor of another b_j and p | b_i e + 1.

    The Korselt congruences pin e mod each b_j, so they only protect the forms
    z*e + 1 at primes p | b_j for z in {b_j, c, d}. When b_j is composite,
    some other b_i may still have b_i e + 1 = 0 mod p, which makes p a fixed
    divisor of the tuple.
    """
    clashes = []
    for j, bj in enumerate(b_list):
        if is_probable_prime(bj):
            continue
        for p in factorize(bj).primes:
            clashes += [(bi, p) for i, bi in enumerate(b_list) if i != j and (bi * e + 1) % p == 0]
    return clashes


def _build_at_offset(dec: ModulusDecomposition, k: int, offset: int) -> TupleSpec:
    q = dec.q
    A = primorial_A(k, q)
    b, c, d = select_bcd(dec, A, k, offset)
    b_list = tuple(b + A * c * d * q * j for j in range(1, k + 1))
    B = math.prod(b_list) * c * d
    system = e_base_system(dec, A).extended(progression_constraints(b_list, c, d))
    r, M = crt_combine(system)
    e = r or M
    step = A * B * q
    forms = tuple(LinearForm(z * step, z * e + 1) for z in (*b_list, c, d))
    return TupleSpec(
        k, dec.a, q, A, b, c, d, b_list, B, e, M, forms, dec, offset,
        b_list_factors=tuple(tuple(factorize(bj).primes) for bj in b_list),
    )


def build_tuple_spec(dec: ModulusDecomposition, k: int, offset: int = 0) -> TupleSpec:
    """Construct the tuple for ``dec`` and progression length ``k``.

    Starts from the ``offset``-th choice of (b, c, d) and moves to the next
    one while a composite b_j would give the tuple a fixed prime divisor.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    for off in range(offset, offset + MAX_AUTO_OFFSET):
        spec = _build_at_offset(dec, k, off)
        if not composite_clashes(spec.b_list, spec.e):
            _assert_postconditions(spec)
            return spec
    raise SelectionExhausted(f"no clash-free (b, c, d) within offsets {offset}..{offset + MAX_AUTO_OFFSET - 1}")


def construct(a: int, q: int, k: int, offset: int = 0) -> TupleSpec:
    return build_tuple_spec(decompose(a, q), k, offset)


def _assert_postconditions(spec: TupleSpec) -> None:
    zs = spec.Z
    if any(math.gcd(x, y) != 1 for x, y in combinations(zs, 2)):
        raise InternalInconsistency("b_1..b_k, c, d not pairwise coprime")
    if math.gcd(spec.B, spec.q) != 1:
        raise InternalInconsistency("gcd(B, q) != 1")
    for p, pe in ((pd.p, pd.p**pd.alpha) for pd in spec.decomposition.per_prime):
        if not _ball_holds(spec, pe):
            raise InternalInconsistency(f"be+1, ce+1, de+1 residues wrong mod {pe}")
    if not _product_residue_holds(spec):
        raise InternalInconsistency("(be+1)(ce+1)(de+1) != a mod q")
    zed = zed_check(spec)
    if not zed:
        raise InternalInconsistency(f"z*e+1 divisible by a prime of ABq: {zed.failures}")


def _ball_holds(spec: TupleSpec, pe: int) -> bool:
    e, a, a_hat = spec.e, spec.a, spec.decomposition.a_hat
    return (
        (spec.b * e + 1 - a) % pe == 0
        and (spec.c * e + 1 - a) % pe == 0
        and (spec.d * e + 1 - a_hat) % pe == 0
        and all((bj * e + 1 - a) % pe == 0 for bj in spec.b_list)
    )


def _product_residue_holds(spec: TupleSpec) -> bool:
    e = spec.e
    return ((spec.b * e + 1) * (spec.c * e + 1) * (spec.d * e + 1) - spec.a) % spec.q == 0


# ------------------------------------------------------------ verification


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass(frozen=True)
class StaticCertificate:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def verify_spec(spec: TupleSpec) -> StaticCertificate:
    """Re-check every property of a spec from its stored integers."""
    checks: list[CheckResult] = []

    def check(name: str, ok: bool, detail: str = "") -> None:
        checks.append(CheckResult(name, bool(ok), "" if ok else detail))

    dec = spec.decomposition
    a, q, e = spec.a, spec.q, spec.e
    check("coprime_a_q", math.gcd(a, q) == 1, f"gcd({a}, {q}) != 1")
    check("a_hat_inverse", (a * dec.a_hat - 1) % q == 0, f"{a} * {dec.a_hat} != 1 mod {q}")
    split_ok = (
        dec.q_sharp * dec.q_flat == q
        and math.gcd(dec.q_sharp, dec.q_flat) == 1
        and (a - 1) % dec.q_flat == 0
        and (dec.a_hat - 1) % dec.q_flat == 0
    )
    check("modulus_split", split_ok, f"q_sharp={dec.q_sharp}, q_flat={dec.q_flat}")
    routing = all(
        pd.alpha == padic_val(pd.p, q)
        and pd.beta == padic_val(pd.p, a - 1)
        and (pd.sharp == (pd.beta < pd.alpha))
        for pd in dec.per_prime
    ) and math.prod(pd.p**pd.alpha for pd in dec.per_prime) == q
    check("valuations", routing, "stored valuations disagree with a, q")
    units = all(
        pd.n_p * pd.p**pd.beta == a - 1
        and pd.n_hat_p * pd.p**pd.beta == dec.a_hat - 1
        and (pd.n_p * pd.n_hat_p) % pd.p != 0
        for pd in dec.sharp_primes
    )
    check("n_p_units", units, "n_p or n_hat_p wrong or divisible by p")

    check("A_primorial", spec.A == primorial_A(spec.k, q), f"A = {spec.A}")
    bcd = (spec.b, spec.c, spec.d)
    check(
        "bcd_distinct_primes_above_qA",
        len(set(bcd)) == 3 and all(is_probable_prime(x) and x > q * spec.A for x in bcd),
        f"(b, c, d) = {bcd}",
    )
    bcd_cong = True
    for pd in dec.sharp_primes:
        mod = pd.p ** (pd.alpha - pd.beta)
        e_p = e // pd.p**pd.beta
        bcd_cong &= (spec.b * e_p - pd.n_p) % mod == 0
        bcd_cong &= (spec.c * e_p - pd.n_p) % mod == 0
        bcd_cong &= (spec.d * e_p - pd.n_hat_p) % mod == 0
    check("bcd_congruences", bcd_cong, "b e_p, c e_p, d e_p residues wrong")
    progression = len(spec.b_list) == spec.k and all(
        bj == spec.b + spec.A * spec.c * spec.d * q * j for j, bj in enumerate(spec.b_list, 1)
    )
    check("b_j_progression", progression, "b_j != b + A c d q j")
    check("B_product", spec.B == math.prod(spec.b_list) * spec.c * spec.d, f"B = {spec.B}")
    zs = spec.Z
    bad_pairs = [(x, y) for x, y in combinations(zs, 2) if math.gcd(x, y) != 1]
    check("pairwise_coprime", not bad_pairs, f"not coprime: {bad_pairs[:3]}")
    check("gcd_B_q", math.gcd(spec.B, q) == 1, f"gcd(B, q) = {math.gcd(spec.B, q)}")

    # congruences on e, one at a time
    check("e_positive", e >= 1, f"e = {e}")
    for pd in dec.sharp_primes:
        pb, pa = pd.p**pd.beta, pd.p**pd.alpha
        check(f"e = p^beta mod p^alpha [p={pd.p}]", (e - pb) % pa == 0, f"e mod {pa} = {e % pa}")
    check("e = 0 mod q_flat", e % dec.q_flat == 0, f"e mod {dec.q_flat} = {e % dec.q_flat}")
    check("e = 0 mod A", e % spec.A == 0, f"e mod {spec.A} = {e % spec.A}")
    c, d = spec.c, spec.d
    for j, bj in enumerate(spec.b_list, 1):
        check(f"cde + c + d = 0 mod b_j [j={j}]", (c * d * e + c + d) % bj == 0, f"b_{j} = {bj}")
        check(f"b_j de + b_j + d = 0 mod c [j={j}]", (bj * d * e + bj + d) % c == 0, f"c = {c}")
        check(f"b_j ce + b_j + c = 0 mod d [j={j}]", (bj * c * e + bj + c) % d == 0, f"d = {d}")

    for pd in dec.per_prime:
        pe = pd.p**pd.alpha
        check(f"be+1 = ce+1 = a, de+1 = a^-1 mod p^alpha [p={pd.p}]", _ball_holds(spec, pe), f"mod {pe}")
    check("product_residue", _product_residue_holds(spec), "(be+1)(ce+1)(de+1) != a mod q")

    step = spec.A * spec.B * q
    expected = tuple(LinearForm(z * step, z * e + 1) for z in zs)
    forms_ok = spec.forms == expected
    check("forms", forms_ok, "forms differ from z(e + ABqX) + 1")

    zed = zed_check(spec)
    check("ze+1_units_mod_ABq", zed.ok, f"failures (z, p, guard): {list(zed.failures[:3])}")

    forms = list(spec.forms)
    g_primes = spec.prime_divisors_ABq if forms_ok else None
    report = is_admissible(forms, g_primes) if all(f.g > 0 for f in forms) else None
    check(
        "admissible",
        report is not None and report.admissible,
        f"fixed prime divisor {report.witness if report else 'n/a (g <= 0)'}",
    )
    v_ok, v_wit = vandermonde_check(forms)
    check("vandermonde", v_ok, f"zero determinant for forms {v_wit}")
    identity = all(
        f1.g * f2.h - f2.g * f1.h == step * (z1 - z2)
        for (z1, f1), (z2, f2) in combinations(zip(zs, forms), 2)
    ) and len(forms) == len(zs)
    check("determinant_identity", identity, "g1 h2 - g2 h1 != ABq (z1 - z2)")
    return StaticCertificate(tuple(checks))
