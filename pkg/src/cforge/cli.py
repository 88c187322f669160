"""Command-line driver.

Exit codes: 0 success, 2 usage error, 3 internal check failure,
4 certificate invalid, 10 search budget exhausted (resumable).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import random
import sys
import time
from pathlib import Path

from .arith import Factorization, crt_combine, is_probable_prime
from .carmichael import LemmaInstance, build_triple, is_carmichael, scan_carmichael, solve_lemma_congruences
from .construction import TupleSpec, construct, verify_spec
from .errors import CforgeError, CheckpointMismatch, FactorizationTooHard, NotCoprime
from .records import certificate_from_record, dumps, load_record, run_record, write_csv
from .search import Exhausted, SearchConfig, read_checkpoint, search_progression, validate_certificate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INTERNAL = 3
EXIT_INVALID = 4
EXIT_EXHAUSTED = 10

SCAN_LIMIT = 10**7
ENV_PREFIX = "CFORGE_"

log = logging.getLogger("cforge")


class UsageError(Exception):
    pass


def _int(text: str) -> int:
    # accept 10**7 / 1e7 style budgets as well as plain integers
    text = str(text).strip().replace("_", "")
    if "**" in text:
        base, exp = text.split("**")
        return int(base) ** int(exp)
    if "e" in text.lower():
        mant, exp = text.lower().split("e")
        return int(mant) * 10 ** int(exp)
    return int(text)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


# name -> (parser, default)
SETTINGS = {
    "m_start": (_int, 0),
    "m_limit": (_int, 10**7),
    "presieve_bound": (_int, 10**5),
    "extra_mr_rounds": (_int, 32),
    "chunk_size": (_int, 1 << 18),
    "worker_count": (_int, 1),
    "checkpoint_path": (str, None),
    "checkpoint_every": (_int, 64),
    "time_limit": (float, None),
    "presieve_enabled": (_bool, True),
    "strict": (_bool, False),
    "offset": (_int, 0),
}


def read_config_file(path: str | os.PathLike) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_").lower()
            if key not in SETTINGS:
                raise UsageError(f"{path}:{lineno}: unknown setting {key!r}")
            values[key] = value
    return values


def resolve_settings(args: argparse.Namespace, environ=None) -> dict:
    """Flags override CFORGE_* environment variables, which override the config file."""
    environ = os.environ if environ is None else environ
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for key, (parse, default) in SETTINGS.items():
        flag = getattr(args, key, None)
        env = environ.get(ENV_PREFIX + key.upper())
        try:
            if flag is not None:
                resolved[key] = parse(flag)
            elif env is not None:
                resolved[key] = parse(env)
            elif key in file_values:
                resolved[key] = parse(file_values[key])
            else:
                resolved[key] = default
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {exc}") from None
    return resolved


def _emit(record: dict) -> None:
    sys.stdout.write(dumps(record))
    sys.stdout.flush()


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _check_inputs(a: int, q: int, k: int) -> None:
    if a < 1 or q < 1:
        raise UsageError("a and q must be positive")
    if k < 1:
        raise UsageError("k must be >= 1")
    if math.gcd(a, q) != 1:
        raise UsageError(f"a and q not coprime (gcd({a}, {q}) = {math.gcd(a, q)})")


def _inputs(args) -> dict:
    return {"a": str(args.a), "q": str(args.q), "k": args.k}


def cmd_construct(args) -> int:
    _check_inputs(args.a, args.q, args.k)
    settings = resolve_settings(args)
    spec = construct(args.a, args.q, args.k, settings["offset"])
    static = verify_spec(spec)
    _emit(run_record("construct", _inputs(args), {"offset": settings["offset"]}, spec, static))
    _say(f"A={spec.A} (b, c, d)=({spec.b}, {spec.c}, {spec.d}) b_j={list(spec.b_list)} e={spec.e}")
    _say(f"static checks: {'all pass' if static.passed else 'FAILED ' + str([c.name for c in static.failures()])}")
    return EXIT_OK if static.passed else EXIT_INTERNAL


def _default_checkpoint(spec: TupleSpec) -> str:
    return f"cforge-{spec.a}-{spec.q}-{spec.k}-{spec.digest()[:12]}.checkpoint.json"


def cmd_search(args) -> int:
    _check_inputs(args.a, args.q, args.k)
    settings = resolve_settings(args)
    t0 = time.monotonic()
    spec = construct(args.a, args.q, args.k, settings["offset"])
    static = verify_spec(spec)
    t_construct = time.monotonic() - t0
    if not static.passed:
        _say(f"static checks failed: {[c.name for c in static.failures()]}")
        return EXIT_INTERNAL
    if args.resume:
        doc = read_checkpoint(args.resume)
        if doc["spec_hash"] != spec.digest():
            raise CheckpointMismatch(f"{args.resume} was written for a different spec")
        settings["m_start"] = int(doc["next_m"])
        settings["checkpoint_path"] = settings["checkpoint_path"] or str(args.resume)
        _say(f"resuming at m={settings['m_start']}")
    if settings["checkpoint_path"] is None:
        settings["checkpoint_path"] = _default_checkpoint(spec)
    config = SearchConfig(**{k: v for k, v in settings.items() if k != "offset"})
    outcome = search_progression(spec, config)
    timings = None
    if args.timings:
        timings = {"construct_s": round(t_construct, 3), "total_s": round(time.monotonic() - t0, 3)}
    resolved = config.to_dict() | {"offset": settings["offset"]}
    record = run_record("search", _inputs(args), resolved, spec, static, outcome, timings)
    if args.output:
        Path(args.output).write_text(dumps(record))
    _emit(record)
    if isinstance(outcome, Exhausted):
        _say(f"budget exhausted ({outcome.reason}) at m={outcome.next_m}; checkpoint: {outcome.checkpoint_path}")
        return EXIT_EXHAUSTED
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            write_csv(outcome, fh)
    _say(f"m={outcome.m}, n={outcome.n}")
    for j, (r, N) in enumerate(zip(outcome.r, outcome.carmichael_numbers), 1):
        _say(f"N_{j} = {r} * {outcome.s} * {outcome.t} = {N}")
    _say(f"common difference {outcome.common_difference}; all N_j = {spec.a} mod {spec.q}: {outcome.residue_check}")
    return EXIT_OK


def cmd_verify(args) -> int:
    target = args.target
    if os.path.exists(target):
        try:
            with open(target) as fh:
                record = load_record(fh)
            spec, cert = certificate_from_record(record)
        except (KeyError, ValueError, TypeError, AttributeError, CforgeError) as exc:
            _emit({"kind": "record", "valid": False, "error": str(exc)})
            _say(f"record does not parse as a certificate: {exc}")
            return EXIT_INVALID
        if cert is None:
            static = verify_spec(spec)
            if record.get("spec_hash") not in (None, spec.digest()):
                static_ok = False
            else:
                static_ok = static.passed
            report = {"kind": "record", "certificate": False, "valid": static_ok, "checks": static.to_dict()["checks"]}
            _emit(report)
            return EXIT_OK if static_ok else EXIT_INVALID
        checks = validate_certificate(cert, args.rounds)
        hash_ok = record.get("spec_hash") == spec.digest()
        valid = hash_ok and all(c.passed for c in checks)
        _emit({
            "kind": "record",
            "certificate": True,
            "valid": valid,
            "spec_hash_ok": hash_ok,
            "checks": [c.to_dict() for c in checks],
        })
        _say("certificate valid" if valid else "certificate INVALID")
        return EXIT_OK if valid else EXIT_INVALID
    try:
        n = _int(target)
    except ValueError:
        raise UsageError(f"{target!r} is neither an integer nor a record file") from None
    if n < 1:
        raise UsageError("n must be >= 1")
    f = None
    if args.factors:
        primes = [_int(x) for x in args.factors.split(",") if x.strip()]
        f = Factorization.from_primes(primes)
        if f.base != n or not f.is_complete():
            raise UsageError(f"factors {primes} are not a prime factorization of {n}")
    verdict = is_carmichael(n, f)
    factors = [p for p, e in verdict.factorization.factors for _ in range(e)]
    _emit({
        "kind": "integer",
        "n": str(n),
        "is_carmichael": verdict.is_carmichael,
        "reason": verdict.reason,
        "factors": [str(p) for p in factors],
    })
    _say(f"{n}: {'Carmichael' if verdict else 'not Carmichael'} ({verdict.reason}); factors {'*'.join(map(str, factors))}")
    return EXIT_OK


def cmd_scan(args) -> int:
    limit = _int(args.limit)
    if limit > SCAN_LIMIT and not args.force:
        raise UsageError(f"limit {limit} exceeds {SCAN_LIMIT}; pass --force")
    found = scan_carmichael(limit)
    _emit({"limit": str(limit), "count": len(found), "carmichael_numbers": [str(n) for n in found]})
    _say(f"{len(found)} Carmichael numbers <= {limit}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    """Randomized spot checks of the core invariants (seeded)."""
    rng = random.Random(args.seed)
    results = {}

    ok = True
    for _ in range(200):
        moduli = [rng.randrange(1, 10**6) for _ in range(rng.randrange(1, 4))]
        x = rng.randrange(0, 10**12)
        r, M = crt_combine([(x % m, m) for m in moduli])
        ok &= r == x % M and all((r - x) % m == 0 for m in moduli)
    results["crt_round_trip"] = ok

    ok = True
    for _ in range(20):
        while True:
            b, c, d = rng.sample(range(1, 51), 3)
            if math.gcd(b, c) == math.gcd(b, d) == math.gcd(c, d) == 1:
                break
        e, M = solve_lemma_congruences(b, c, d)
        for j in range(200):
            n = e + M * j
            if all(is_probable_prime(z * n + 1) for z in (b, c, d)):
                ok &= bool(build_triple(LemmaInstance(b, c, d, e, n)).N)
    results["lemma_soundness_sample"] = ok

    known = [561, 1105, 1729, 2465, 2821, 6601, 8911]
    results["korselt_scan_10000"] = scan_carmichael(10_000) == known

    ok = True
    for _ in range(30):
        q = rng.randrange(1, 31)
        a = rng.choice([x for x in range(1, q + 1) if math.gcd(x, q) == 1])
        ok &= verify_spec(construct(a, q, rng.randrange(1, 4))).passed
    results["static_spec_checks"] = ok

    for name, passed in results.items():
        _say(f"{'PASS' if passed else 'FAIL'}  {name}")
    _emit({"seed": args.seed, "results": results})
    return EXIT_OK if all(results.values()) else EXIT_INTERNAL


def _add_setting_flags(p: argparse.ArgumentParser, search: bool) -> None:
    p.add_argument("--config", help="key=value settings file (lowest precedence)")
    p.add_argument("--offset", help="skip this many (b, c, d) candidates per residue class")
    if not search:
        return
    p.add_argument("--m-start", dest="m_start")
    p.add_argument("--m-limit", dest="m_limit")
    p.add_argument("--presieve-bound", dest="presieve_bound")
    p.add_argument("--extra-rounds", dest="extra_mr_rounds")
    p.add_argument("--chunk-size", dest="chunk_size")
    p.add_argument("--workers", dest="worker_count")
    p.add_argument("--checkpoint", dest="checkpoint_path")
    p.add_argument("--checkpoint-every", dest="checkpoint_every")
    p.add_argument("--time-limit", dest="time_limit", help="seconds")
    p.add_argument("--no-presieve", dest="presieve_enabled", action="store_const", const="false")
    p.add_argument("--strict", action="store_const", const="true")
    p.add_argument("--resume", help="checkpoint file to resume from")
    p.add_argument("--csv", help="also write the progression table as CSV")
    p.add_argument("--output", "-o", help="also write the run record to this file")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings in the record")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cforge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    commands = (
        ("construct", cmd_construct, "build and statically verify a tuple spec"),
        ("search", cmd_search, "search for m and emit a progression certificate"),
    )
    for name, fn, text in commands:
        p = sub.add_parser(name, help=text)
        p.add_argument("--a", type=int, required=True)
        p.add_argument("--q", type=int, required=True)
        p.add_argument("--k", type=int, required=True)
        _add_setting_flags(p, search=name == "search")
        p.set_defaults(func=fn)

    p = sub.add_parser("verify", help="Korselt check of an integer, or re-validation of a run record")
    p.add_argument("target", help="integer or path to a JSON run record")
    p.add_argument("--factors", help="comma-separated prime factors of the integer")
    p.add_argument("--rounds", type=int, default=32)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scan", help="list all Carmichael numbers up to a limit")
    p.add_argument("limit")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("selftest", help="seeded randomized checks of the core invariants")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, NotCoprime, CheckpointMismatch, FactorizationTooHard) as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except (ValueError, json.JSONDecodeError, KeyError) as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except CforgeError as exc:
        _say(f"internal check failure: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
