import json
import math
from pathlib import Path

import pytest

from cforge.cli import main, read_checkpoint
from cforge.construction import construct

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for key in ("OFFSET", "M_LIMIT", "CHUNK_SIZE", "WORKER_COUNT", "STRICT"):
        monkeypatch.delenv("CFORGE_" + key, raising=False)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def test_construct_3_4_1(capsys):
    code, rec, _ = run(capsys, "construct", "--a", 3, "--q", 4, "--k", 1)
    assert code == 0
    spec = rec["spec"]
    assert (spec["b"], spec["c"], spec["d"]) == ("5", "7", "11")
    assert rec["static_checks"]["passed"] is True
    assert rec["outcome"] == {"status": "spec_only"}
    assert rec["schema_version"] == 1


def test_construct_1_1_2(capsys):
    code, rec, _ = run(capsys, "construct", "--a", 1, "--q", 1, "--k", 2)
    assert code == 0 and rec["spec"]["A"] == "2"


@pytest.mark.parametrize(
    "argv",
    [
        ["construct", "--a", 2, "--q", 4, "--k", 1],
        ["construct", "--a", 1, "--q", 3, "--k", 0],
        ["construct", "--a", 1],
        ["search", "--a", 6, "--q", 9, "--k", 1],
        ["verify", "banana"],
        ["nonsense"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    assert main([str(a) for a in argv]) == 2


def test_not_coprime_message(capsys):
    _, _, err = run(capsys, "construct", "--a", 2, "--q", 4, "--k", 1)
    assert "a and q not coprime" in err


def test_settings_precedence(capsys, tmp_path, monkeypatch):
    specs = {o: construct(3, 4, 1, o) for o in (0, 1, 2)}
    assert len({(s.b, s.c, s.d) for s in specs.values()}) == 3
    cfg = tmp_path / "cforge.conf"
    cfg.write_text("# lowest precedence\noffset = 1\n")

    def chosen(*extra):
        code, rec, _ = run(capsys, "construct", "--a", 3, "--q", 4, "--k", 1, "--config", cfg, *extra)
        assert code == 0
        return int(rec["spec"]["offset"]), rec["spec"]["b"]

    assert chosen() == (1, str(specs[1].b))
    monkeypatch.setenv("CFORGE_OFFSET", "2")
    assert chosen() == (2, str(specs[2].b))
    assert chosen("--offset", 0) == (0, str(specs[0].b))


def test_config_file_rejects_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "bad.conf"
    cfg.write_text("colour = blue\n")
    assert main(["construct", "--a", "3", "--q", "4", "--k", "1", "--config", str(cfg)]) == 2


@pytest.mark.parametrize("a,q", [(1, 2), (3, 4)])
def test_search_k1(capsys, tmp_path, a, q):
    out = tmp_path / "rec.json"
    code, rec, err = run(capsys, "search", "--a", a, "--q", q, "--k", 1, "--m-limit", "10**6", "-o", out)
    assert code == 0
    cert = rec["outcome"]["certificate"]
    (N,) = map(int, cert["carmichael_numbers"])
    r, s, t = int(cert["r"][0]), int(cert["s"]), int(cert["t"])
    assert N == r * s * t and len({r, s, t}) == 3 and N % q == a % q
    # Korselt from the definition, using only the record's factors
    assert all((N - 1) % (p - 1) == 0 for p in (r, s, t))
    assert "N_1 = " in err
    # round trip: the file written with -o re-validates
    assert json.loads(out.read_text()) == rec
    code, report, _ = run(capsys, "verify", out)
    assert code == 0 and report["valid"] is True


def test_tampered_record_exits_4(capsys, tmp_path):
    out = tmp_path / "rec.json"
    assert main(["search", "--a", "1", "--q", "2", "--k", "1", "--m-limit", "10**6", "-o", str(out)]) == 0
    capsys.readouterr()
    rec = json.loads(out.read_text())

    forged = json.loads(json.dumps(rec))
    N = int(forged["outcome"]["certificate"]["carmichael_numbers"][0])
    forged["outcome"]["certificate"]["carmichael_numbers"][0] = str(N + 2)
    bad = tmp_path / "forged.json"
    bad.write_text(json.dumps(forged))
    code, report, _ = run(capsys, "verify", bad)
    assert code == 4 and report["valid"] is False

    forged = json.loads(json.dumps(rec))
    forged["outcome"]["certificate"]["m"] = str(int(forged["outcome"]["certificate"]["m"]) + 1)
    bad.write_text(json.dumps(forged))
    assert run(capsys, "verify", bad)[0] == 4

    forged = json.loads(json.dumps(rec))
    forged["spec"]["e"] = str(int(forged["spec"]["e"]) + 1)
    bad.write_text(json.dumps(forged))
    assert run(capsys, "verify", bad)[0] == 4

    bad.write_text("{ not json")
    assert run(capsys, "verify", bad)[0] == 4


def test_exhaustion_and_resume(capsys, tmp_path):
    ck = tmp_path / "k3.ckpt"
    base = ["search", "--a", 1, "--q", 1, "--k", 3, "--chunk-size", 4096, "--checkpoint", ck]
    code, rec, err = run(capsys, *base, "--m-limit", 30000)
    assert code == 10
    assert rec["outcome"]["status"] == "exhausted"
    assert rec["outcome"]["next_m"] == "30000"
    assert "checkpoint" in err
    assert read_checkpoint(ck)["next_m"] == "30000"

    code, rec, err = run(capsys, *base, "--m-limit", 10**6, "--resume", ck)
    assert code == 0
    assert "resuming at m=30000" in err
    cert = rec["outcome"]["certificate"]
    Ns = [int(x) for x in cert["carmichael_numbers"]]
    assert len(Ns) == 3 and Ns[1] - Ns[0] == Ns[2] - Ns[1] == int(cert["common_difference"])
    assert int(cert["m"]) >= 30000


def test_resume_against_other_spec_refused(capsys, tmp_path):
    ck = tmp_path / "x.ckpt"
    assert main(["search", "--a", "1", "--q", "1", "--k", "3", "--m-limit", "5000",
                 "--chunk-size", "1000", "--checkpoint", str(ck)]) == 10
    assert main(["search", "--a", "1", "--q", "2", "--k", "1", "--resume", str(ck)]) == 2


def test_verify_integers(capsys):
    code, rep, _ = run(capsys, "verify", 1729)
    assert code == 0 and rep["is_carmichael"] and rep["factors"] == ["7", "13", "19"]
    code, rep, _ = run(capsys, "verify", 1105, "--factors", "5,13,17")
    assert code == 0 and rep["is_carmichael"]
    assert 1727 == 11 * 157 and 1726 % 156 != 0
    code, rep, _ = run(capsys, "verify", 1727)
    assert code == 0 and not rep["is_carmichael"] and "156 does not divide 1726" in rep["reason"]


def test_verify_rejects_wrong_factors(capsys):
    assert main(["verify", "1105", "--factors", "5,221"]) == 2


def test_scan(capsys):
    assert run(capsys, "scan", 2000)[1]["carmichael_numbers"] == ["561", "1105", "1729"]
    assert run(capsys, "scan", 500)[1]["carmichael_numbers"] == []
    assert run(capsys, "scan", 100000)[1]["count"] == 16
    assert main(["scan", "1e8"]) == 2


def test_records_bit_exact(capsys, tmp_path):
    argv = ["search", "--a", "7", "--q", "12", "--k", "1", "--m-limit", "10**6", "--checkpoint", "c.json"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv + ["--workers", "2", "--chunk-size", "64"]) == 0
    second = capsys.readouterr().out
    strip = lambda s: {k: v for k, v in json.loads(s).items() if k != "config"}
    assert strip(first) == strip(second)
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_golden_5_1_1(capsys):
    golden = (GOLDEN / "search_5_1_1.json").read_text()
    assert main(["search", "--a", "5", "--q", "1", "--k", "1", "--m-limit", "1000000", "--checkpoint", "golden.ckpt"]) == 0
    assert capsys.readouterr().out == golden
    N = int(json.loads(golden)["outcome"]["certificate"]["carmichael_numbers"][0])
    # definition check: x^N = x mod N at prime x, plus squarefree composite
    assert N == 421 * 701 * 2381
    assert all(pow(x, N, N) == x for x in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29))
    assert math.gcd(N, 421 * 701 * 2381) == N


def test_csv_export(capsys, tmp_path):
    csv_path = tmp_path / "prog.csv"
    assert main(["search", "--a", "3", "--q", "4", "--k", "1", "--m-limit", "10**6", "--csv", str(csv_path)]) == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("j,b_j,r_j")
    assert lines[1].endswith(",3")


def test_selftest(capsys):
    code, rep, _ = run(capsys, "selftest", "--seed", 5)
    assert code == 0 and all(rep["results"].values())
