"""Search for m at which every form of a tuple is prime, and certify the hit.

The m-axis is cut into contiguous chunks. Each chunk is presieved by small
primes (one residue class per form and prime) and the survivors are tested in
increasing order. Chunks may finish out of order across workers, but a hit is
only accepted once every lower chunk is known to be empty, so the answer is
the smallest m in range regardless of chunking or worker count.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import logging
import os
import tempfile
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .admissibility import LinearForm, is_admissible
from .arith import PrimalityEvidence, is_prime, is_probable_prime, primes_up_to
from .carmichael import LemmaInstance, build_triple, is_carmichael
from .construction import CheckResult, TupleSpec, verify_spec
from .errors import CertificateCheckFailed, CheckpointMismatch, LemmaError, PresieveUnsound, SpecNotVerified

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "cforge-checkpoint"
CHECKPOINT_VERSION = 1

Target = Union[TupleSpec, Sequence[LinearForm]]


@dataclass(frozen=True)
class SearchConfig:
    m_start: int = 0
    m_limit: int = 10**7
    presieve_bound: int = 10**5
    extra_mr_rounds: int = 32
    chunk_size: int = 1 << 18
    worker_count: int = 1
    checkpoint_path: str | None = None
    checkpoint_every: int = 64  # chunks
    time_limit: float | None = None  # seconds
    presieve_enabled: bool = True
    strict: bool = False

    def __post_init__(self) -> None:
        if self.m_start < 0:
            raise ValueError("m_start must be >= 0")
        if self.m_start > self.m_limit:
            raise ValueError("m_start must not exceed m_limit")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if self.presieve_bound < 2:
            raise ValueError("presieve_bound must be >= 2")
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["m_start"], d["m_limit"] = str(self.m_start), str(self.m_limit)
        return d


@dataclass
class SearchStats:
    scanned: int = 0
    survivors: int = 0
    chunks: int = 0

    def add(self, other: "SearchStats") -> None:
        self.scanned += other.scanned
        self.survivors += other.survivors
        self.chunks += other.chunks


@dataclass(frozen=True)
class SearchHit:
    m: int
    values: tuple[int, ...]
    evidence: tuple[PrimalityEvidence, ...]
    stats: SearchStats


@dataclass(frozen=True)
class Exhausted:
    next_m: int
    m_limit: int
    reason: str  # "m_limit" | "time_limit"
    stats: SearchStats
    checkpoint_path: str | None = None


# ---------------------------------------------------------------- presieve


def _pairs(forms: Sequence[LinearForm]) -> tuple[tuple[int, int], ...]:
    return tuple((f.g, f.h) for f in forms)


@lru_cache(maxsize=8)
def _sieve_plan(pairs: tuple[tuple[int, int], ...], bound: int) -> tuple[list[int], list[tuple[int, ...]]]:
    """For every prime p <= bound: the roots mod p of the forms with p not | g."""
    plan_primes, plan_roots = [], []
    for p in primes_up_to(bound):
        roots = {-h * pow(g, -1, p) % p for g, h in pairs if g % p}
        plan_primes.append(p)
        plan_roots.append(tuple(sorted(roots)))
    return plan_primes, plan_roots


def presieve(forms: Sequence[LinearForm], m0: int, m1: int, bound: int) -> np.ndarray:
    """Values m in [m0, m1) where no form has a prime factor p <= bound, p not | g.

    Requires every form value on the range to exceed ``bound`` so that a
    form equal to a small prime is never discarded.
    """
    if m1 <= m0:
        return np.empty(0, dtype=np.int64)
    low = min(f(m0) for f in forms)
    if low <= bound:
        raise PresieveUnsound(f"form value {low} at m={m0} does not exceed the sieve bound {bound}")
    return m0 + np.flatnonzero(_sieve_mask(_pairs(forms), m0, m1 - m0, bound))


def _sieve_mask(pairs, m0: int, length: int, bound: int) -> np.ndarray:
    keep = np.ones(length, dtype=bool)
    plan_primes, plan_roots = _sieve_plan(pairs, max(bound, 2))
    stop = bisect.bisect_right(plan_primes, bound)
    for p, roots in zip(plan_primes[:stop], plan_roots[:stop]):
        for r in roots:
            keep[(r - m0) % p :: p] = False
    return keep


def _scan_chunk(pairs, m0: int, m1: int, bound: int, use_presieve: bool) -> tuple[int | None, SearchStats]:
    """Smallest m in [m0, m1) with all forms prime, or None."""
    stats = SearchStats(scanned=m1 - m0, chunks=1)
    if use_presieve:
        # values grow with m (g > 0); keep the sieve below the smallest value
        safe = min(bound, min(g * m0 + h for g, h in pairs) - 1)
    else:
        safe = 1
    if safe >= 2:
        candidates = (m0 + np.flatnonzero(_sieve_mask(pairs, m0, m1 - m0, safe))).tolist()
    else:
        candidates = range(m0, m1)
    stats.survivors = len(candidates)
    for m in candidates:
        values = [g * m + h for g, h in pairs]
        if any(v < 2 for v in values):
            continue
        # cheap Fermat pass on all forms before full tests
        if all(v < 4 or pow(2, v - 1, v) == 1 for v in values) and all(is_probable_prime(v) for v in values):
            return m, stats
    return None, stats


# -------------------------------------------------------------- checkpoints


def target_hash(target: Target) -> str:
    if isinstance(target, TupleSpec):
        return target.digest()
    blob = json.dumps([[str(g), str(h)] for g, h in _pairs(target)])
    return hashlib.sha256(blob.encode()).hexdigest()


def write_checkpoint(path: str | os.PathLike, target: Target, next_m: int, config: SearchConfig, stats: SearchStats) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec_hash": target_hash(target),
        "next_m": str(next_m),
        "config": config.to_dict(),
        "stats": asdict(stats),
    }
    if isinstance(target, TupleSpec):
        doc["spec"] = target.to_dict()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def read_checkpoint(path: str | os.PathLike) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointMismatch(f"{path} is not a version {CHECKPOINT_VERSION} checkpoint")
    return doc


def resume_point(path: str | os.PathLike, target: Target) -> int:
    doc = read_checkpoint(path)
    if doc["spec_hash"] != target_hash(target):
        raise CheckpointMismatch(f"{path} was written for a different spec")
    return int(doc["next_m"])


# ------------------------------------------------------------------ search


def _require_verified(target: Target) -> list[LinearForm]:
    if isinstance(target, TupleSpec):
        cert = verify_spec(target)
        if not cert.passed:
            names = ", ".join(c.name for c in cert.failures())
            raise SpecNotVerified(f"static checks failed: {names}")
        return list(target.forms)
    forms = list(target)
    if not forms or any(f.g <= 0 for f in forms):
        raise SpecNotVerified("forms need positive leading coefficients")
    report = is_admissible(forms)
    if not report.ok:
        raise SpecNotVerified(f"not admissible (p={report.witness}) or Vandermonde fails ({report.vandermonde_witness})")
    return forms


def _chunks(config: SearchConfig):
    m = config.m_start
    while m < config.m_limit:
        yield m, min(m + config.chunk_size, config.m_limit)
        m += config.chunk_size


def find_simultaneous_prime(target: Target, config: SearchConfig = SearchConfig()) -> SearchHit | Exhausted:
    """Smallest m in [m_start, m_limit) with every form prime at m."""
    forms = _require_verified(target)
    pairs = _pairs(forms)
    bound = config.presieve_bound
    stats = SearchStats()
    started = time.monotonic()
    hit: int | None = None
    frontier = config.m_start

    def checkpoint(next_m: int) -> None:
        if config.checkpoint_path:
            write_checkpoint(config.checkpoint_path, target, next_m, config, stats)

    def out_of_time() -> bool:
        return config.time_limit is not None and time.monotonic() - started > config.time_limit

    chunks = list(_chunks(config)) if config.worker_count > 1 else _chunks(config)
    timed_out = False
    if config.worker_count == 1:
        for i, (m0, m1) in enumerate(chunks):
            if out_of_time():
                timed_out = True
                break
            found, st = _scan_chunk(pairs, m0, m1, bound, config.presieve_enabled)
            stats.add(st)
            frontier = m1
            if found is not None:
                hit = found
                break
            if (i + 1) % config.checkpoint_every == 0:
                checkpoint(frontier)
    else:
        hit, frontier, timed_out = _parallel_scan(pairs, chunks, config, stats, checkpoint, out_of_time)

    if hit is None:
        checkpoint(frontier)
        return Exhausted(frontier, config.m_limit, "time_limit" if timed_out else "m_limit", stats, config.checkpoint_path)
    values = tuple(g * hit + h for g, h in pairs)
    evidence = tuple(_evidence(v, config) for v in values)
    if not all(ev.is_prime for ev in evidence):
        raise CertificateCheckFailed(f"m={hit}: extra Miller-Rabin rounds rejected a BPSW probable prime")
    log.info("hit at m=%d after %d candidates (%d survivors)", hit, stats.scanned, stats.survivors)
    return SearchHit(hit, values, evidence, stats)


def _evidence(v: int, config: SearchConfig) -> PrimalityEvidence:
    if config.strict:
        return is_prime(v, rounds=2 * config.extra_mr_rounds, salt="strict")
    return is_prime(v, rounds=config.extra_mr_rounds)


def _parallel_scan(pairs, chunks, config, stats, checkpoint, out_of_time):
    results: dict[int, tuple[int | None, SearchStats]] = {}
    pending = {}
    next_index = 0
    frontier_index = 0
    since_checkpoint = 0
    window = 2 * config.worker_count
    with ProcessPoolExecutor(max_workers=config.worker_count) as pool:
        try:
            while frontier_index < len(chunks):
                best = min((i for i, (f, _) in results.items() if f is not None), default=None)
                while len(pending) < window and next_index < len(chunks) and (best is None or next_index < best):
                    m0, m1 = chunks[next_index]
                    fut = pool.submit(_scan_chunk, pairs, m0, m1, config.presieve_bound, config.presieve_enabled)
                    pending[fut] = next_index
                    next_index += 1
                if frontier_index in results:
                    found, st = results.pop(frontier_index)
                    stats.add(st)
                    frontier_index += 1
                    if found is not None:
                        return found, chunks[frontier_index - 1][1], False
                    since_checkpoint += 1
                    if since_checkpoint >= config.checkpoint_every:
                        checkpoint(chunks[frontier_index][0] if frontier_index < len(chunks) else config.m_limit)
                        since_checkpoint = 0
                    continue
                if out_of_time():
                    return None, chunks[frontier_index][0], True
                done, _ = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    results[pending.pop(fut)] = fut.result()
        finally:
            for fut in pending:
                fut.cancel()
    return None, config.m_limit, False


# ------------------------------------------------------------- certificates


@dataclass(frozen=True)
class ProgressionCertificate:
    spec: TupleSpec
    m: int
    n: int
    r: tuple[int, ...]
    s: int
    t: int
    evidence: tuple[PrimalityEvidence, ...]
    carmichael_numbers: tuple[int, ...]
    common_difference: int
    residue_check: bool
    korselt_checks: tuple[bool, ...]
    checks: tuple[CheckResult, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "m": str(self.m),
            "n": str(self.n),
            "r": [str(x) for x in self.r],
            "s": str(self.s),
            "t": str(self.t),
            "evidence": [ev.to_dict() for ev in self.evidence],
            "carmichael_numbers": [str(x) for x in self.carmichael_numbers],
            "factorizations": [[str(r), str(self.s), str(self.t)] for r in self.r],
            "common_difference": str(self.common_difference),
            "residue_check": self.residue_check,
            "korselt_checks": list(self.korselt_checks),
            "checks": [c.to_dict() for c in self.checks],
        }

    @classmethod
    def from_dict(cls, data: dict, spec: TupleSpec) -> "ProgressionCertificate":
        return cls(
            spec=spec,
            m=int(data["m"]),
            n=int(data["n"]),
            r=tuple(int(x) for x in data["r"]),
            s=int(data["s"]),
            t=int(data["t"]),
            evidence=tuple(PrimalityEvidence.from_dict(ev) for ev in data["evidence"]),
            carmichael_numbers=tuple(int(x) for x in data["carmichael_numbers"]),
            common_difference=int(data["common_difference"]),
            residue_check=bool(data["residue_check"]),
            korselt_checks=tuple(bool(x) for x in data["korselt_checks"]),
            checks=tuple(CheckResult(c["name"], c["passed"], c.get("detail", "")) for c in data.get("checks", [])),
        )


def certificate_checks(spec: TupleSpec, m: int, rounds: int = 32, salt: str = "") -> tuple[dict, list[CheckResult]]:
    """Recompute everything a certificate claims from ``spec`` and ``m`` alone."""
    checks: list[CheckResult] = []

    def check(name: str, ok: bool, detail: str = "") -> None:
        checks.append(CheckResult(name, bool(ok), "" if ok else detail))

    n = spec.n_at(m)
    c, d, q = spec.c, spec.d, spec.q
    r = tuple(bj * n + 1 for bj in spec.b_list)
    s, t = c * n + 1, d * n + 1
    evidence = tuple(is_prime(v, rounds, salt) for v in (*r, s, t))
    check("all_forms_prime", all(ev.is_prime for ev in evidence), "a form value is composite")
    check(
        "forms_match_spec",
        tuple(f(m) for f in spec.forms) == (*r, s, t),
        "F_z(m) != z*n + 1",
    )
    numbers, korselt = [], []
    for j, bj in enumerate(spec.b_list, 1):
        check(f"aligned_mod_bjcd [j={j}]", (n - spec.e) % (bj * c * d) == 0, "n != e mod b_j c d")
        try:
            triple = build_triple(LemmaInstance(bj, c, d, spec.e, n), rounds)
        except LemmaError as exc:
            check(f"lemma_triple [j={j}]", False, str(exc))
            N = r[j - 1] * s * t
            korselt.append(False)
        else:
            check(f"lemma_triple [j={j}]", True)
            N = triple.N
            korselt.append(bool(is_carmichael(N, triple.factorization)))
        numbers.append(N)
        check(f"korselt [j={j}]", korselt[-1], f"N_{j} = {N} fails Korselt")
    residue_ok = all((N - spec.a) % q == 0 for N in numbers)
    check("residue_class", residue_ok, f"some N_j != {spec.a} mod {q}")
    diff = spec.A * c * d * q * n * s * t
    diffs_ok = all(numbers[j + 1] - numbers[j] == diff for j in range(len(numbers) - 1))
    check("constant_difference", diffs_ok, f"N_(j+1) - N_j != {diff}")
    check("increasing", all(x < y for x, y in zip(numbers, numbers[1:])), "N_j not increasing")
    facts = dict(
        n=n, r=r, s=s, t=t, evidence=evidence, numbers=tuple(numbers), diff=diff,
        residue_ok=residue_ok, korselt=tuple(korselt),
    )
    return facts, checks


def build_certificate(spec: TupleSpec, m: int, rounds: int = 32, salt: str = "") -> ProgressionCertificate:
    facts, checks = certificate_checks(spec, m, rounds, salt)
    failed = [c for c in checks if not c.passed]
    if failed:
        raise CertificateCheckFailed("; ".join(f"{c.name}: {c.detail}" for c in failed))
    return ProgressionCertificate(
        spec, m, facts["n"], facts["r"], facts["s"], facts["t"], facts["evidence"], facts["numbers"],
        facts["diff"], facts["residue_ok"], facts["korselt"], tuple(checks),
    )


def validate_certificate(cert: ProgressionCertificate, rounds: int = 32) -> list[CheckResult]:
    """Independent re-validation; also compares every stored claim."""
    facts, checks = certificate_checks(cert.spec, cert.m, rounds)
    static = verify_spec(cert.spec)
    checks.insert(0, CheckResult("static_spec_checks", static.passed, ", ".join(c.name for c in static.failures())))
    stored = {
        "n": (cert.n, facts["n"]),
        "r": (cert.r, facts["r"]),
        "s": (cert.s, facts["s"]),
        "t": (cert.t, facts["t"]),
        "carmichael_numbers": (cert.carmichael_numbers, facts["numbers"]),
        "common_difference": (cert.common_difference, facts["diff"]),
        "residue_check": (cert.residue_check, facts["residue_ok"]),
        "korselt_checks": (cert.korselt_checks, facts["korselt"]),
    }
    for name, (claimed, actual) in stored.items():
        checks.append(CheckResult(f"stored_{name}", claimed == actual, f"claimed {claimed}, recomputed {actual}"))
    ev_ok = len(cert.evidence) == len(facts["evidence"]) and all(
        ev.n == v and ev.is_prime for ev, v in zip(cert.evidence, (*facts["r"], facts["s"], facts["t"]))
    )
    checks.append(CheckResult("stored_evidence", ev_ok, "evidence does not match the form values"))
    return [CheckResult(c.name, c.passed, "" if c.passed else c.detail) for c in checks]


def search_progression(spec: TupleSpec, config: SearchConfig = SearchConfig()) -> ProgressionCertificate | Exhausted:
    result = find_simultaneous_prime(spec, config)
    if isinstance(result, Exhausted):
        return result
    if config.strict:
        return build_certificate(spec, result.m, 2 * config.extra_mr_rounds, salt="strict")
    return build_certificate(spec, result.m, config.extra_mr_rounds)
