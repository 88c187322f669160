"""JSON run records: what the CLI emits and what `verify` reads back."""

from __future__ import annotations

import csv
import json
from collections import Counter
from typing import IO

from . import __version__
from .construction import StaticCertificate, TupleSpec
from .search import Exhausted, ProgressionCertificate

SCHEMA_VERSION = 1


def evidence_summary(cert: ProgressionCertificate | None) -> dict:
    if cert is None:
        return {}
    return {
        "verdicts": dict(sorted(Counter(ev.verdict for ev in cert.evidence).items())),
        "methods": dict(sorted(Counter(ev.method for ev in cert.evidence).items())),
        "max_rounds": max(ev.rounds for ev in cert.evidence),
    }


def run_record(
    command: str,
    inputs: dict,
    config: dict,
    spec: TupleSpec,
    static: StaticCertificate,
    outcome: ProgressionCertificate | Exhausted | None = None,
    timings: dict | None = None,
) -> dict:
    record = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "inputs": inputs,
        "config": config,
        "spec_hash": spec.digest(),
        "spec": spec.to_dict(),
        "static_checks": static.to_dict(),
    }
    if outcome is None:
        record["outcome"] = {"status": "spec_only"}
    elif isinstance(outcome, Exhausted):
        record["outcome"] = {
            "status": "exhausted",
            "reason": outcome.reason,
            "next_m": str(outcome.next_m),
            "m_limit": str(outcome.m_limit),
            "checkpoint_path": outcome.checkpoint_path,
            "stats": vars(outcome.stats),
        }
    else:
        record["outcome"] = {"status": "certificate", "certificate": outcome.to_dict()}
        record["evidence_summary"] = evidence_summary(outcome)
    if timings is not None:
        record["timings"] = timings
    return record


def dumps(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def load_record(fh: IO[str]) -> dict:
    record = json.load(fh)
    if record.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {record.get('schema_version')!r}")
    return record


def certificate_from_record(record: dict) -> tuple[TupleSpec, ProgressionCertificate | None]:
    spec = TupleSpec.from_dict(record["spec"])
    outcome = record.get("outcome", {})
    if outcome.get("status") != "certificate":
        return spec, None
    return spec, ProgressionCertificate.from_dict(outcome["certificate"], spec)


def write_csv(cert: ProgressionCertificate, fh: IO[str]) -> None:
    w = csv.writer(fh)
    w.writerow(["j", "b_j", "r_j", "s", "t", "N_j", "N_j mod q"])
    for j, (bj, r, N) in enumerate(zip(cert.spec.b_list, cert.r, cert.carmichael_numbers), 1):
        w.writerow([j, bj, r, cert.s, cert.t, N, N % cert.spec.q])
