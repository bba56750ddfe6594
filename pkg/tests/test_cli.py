import json
from fractions import Fraction

import pytest

from hiergap.cli import EXIT_OK, EXIT_USAGE, EXIT_VERIFICATION, main
from hiergap.services.ensemble_service import ensemble_service
from hiergap.utils.serialization import load_graph


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("HIERGAP_LOG_LEVEL", "WARNING")
    return tmp_path


def _write_code(path, n, d_v, d_c, checks):
    path.write_text(json.dumps({"n": n, "d_v": d_v, "d_c": d_c, "checks": [list(c) for c in checks]}))
    return str(path)


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


# ---------------------------------------------------------------------------
# sample and predicates
# ---------------------------------------------------------------------------

def test_sample_writes_alist_and_metadata(workdir, capsys):
    out = workdir / "codes" / "code.alist"
    code = main(["sample", "--n", "30", "--dv", "3", "--dc", "5", "--seed", "1",
                 "--out", str(out), "--report-degrees"])
    assert code == EXIT_OK
    payload = _stdout_json(capsys)
    assert payload["m"] == 18
    assert "degrees" in payload
    assert (workdir / "codes" / "code.json").exists()
    assert load_graph(out).checks == ensemble_service.sample_ldpc(30, 3, 5, 1).checks


def test_sample_rejects_indivisible_degrees():
    assert main(["sample", "--n", "10", "--dv", "3", "--dc", "4", "--out", "x.alist"]) == EXIT_USAGE


def test_predicates_table(capsys):
    assert main(["predicates", "--hierarchy", "sa", "--dc", "5"]) == EXIT_OK
    payload = _stdout_json(capsys)
    assert payload["q"] == 2
    assert payload["certified"] is True


def test_predicates_lasserre_needs_matching_degree():
    assert main(["predicates", "--hierarchy", "lasserre", "--dc", "7"]) == EXIT_USAGE
    assert main(["predicates"]) == EXIT_USAGE


def test_feasibility_oracle_prints_certificate(capsys):
    assert main(["predicates", "--feasibility", "4", "3", "odd"]) == EXIT_OK
    payload = _stdout_json(capsys)
    assert payload["feasible"] is False
    assert payload["certificate"]["multipliers"]


def test_unknown_command_is_usage_error():
    assert main(["decode-everything"]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# decoding and construction
# ---------------------------------------------------------------------------

def test_lp_decode_on_toy_code(workdir, toy_code, capsys):
    path = _write_code(workdir / "toy.json", 6, 3, 3, toy_code.checks)
    assert main(["lp-decode", "--code", path, "--received", "110000"]) == EXIT_OK
    payload = _stdout_json(capsys)
    assert payload["integral"] is False
    assert Fraction(payload["value"]) <= Fraction(1, 4)


def test_malformed_alist_is_usage_error(workdir):
    bad = workdir / "bad.alist"
    bad.write_text("3 2\n1 1\n")
    assert main(["lp-decode", "--code", str(bad), "--received", "000"]) == EXIT_USAGE


def test_bad_received_word_is_usage_error(workdir, toy_code):
    path = _write_code(workdir / "toy.json", 6, 3, 3, toy_code.checks)
    assert main(["lp-decode", "--code", path, "--received", "11x000"]) == EXIT_USAGE


def test_construct_needs_a_word(workdir):
    path = _write_code(workdir / "split.json", 10, 1, 5, [range(5), range(5, 10)])
    assert main(["construct", "--code", path, "--hierarchy", "sa", "--rounds", "2", "--out", "run"]) == EXIT_USAGE


def test_sherali_adams_construct_then_verify(workdir):
    path = _write_code(workdir / "split.json", 10, 1, 5, [range(5), range(5, 10)])
    code = main(["construct", "--code", path, "--received", "1000000000", "--hierarchy", "sa",
                 "--rounds", "2", "--brute-force", "--out", "run"])
    assert code == EXIT_OK
    gap = json.loads((workdir / "run" / "gap_report.json").read_text())
    assert gap["value_normalized"] == "1/2"
    assert gap["integral_optimum"] == 1
    assert gap["verified"] is True
    assert main(["verify", "--solution", "run/solution.json"]) == EXIT_OK


def test_tampered_family_fails_verification(workdir):
    path = _write_code(workdir / "split.json", 10, 1, 5, [range(5), range(5, 10)])
    main(["construct", "--code", path, "--received", "1000000000", "--hierarchy", "sa",
          "--rounds", "2", "--out", "run"])
    stored = json.loads((workdir / "run" / "solution.json").read_text())
    for row in stored["solution"]["entries"]:
        if row["S"] == [0]:
            row["prob"] = "3/4" if row["alpha"] == [0] else "1/4"
    (workdir / "run" / "solution.json").write_text(json.dumps(stored))
    assert main(["verify", "--solution", "run/solution.json"]) == EXIT_VERIFICATION


def test_lasserre_construct_then_verify(workdir):
    path = _write_code(workdir / "split9.json", 18, 1, 9, [range(9), range(9, 18)])
    code = main(["construct", "--code", path, "--received", "1" + "0" * 17, "--hierarchy", "lasserre",
                 "--rounds", "1", "--seed", "4", "--out", "run"])
    assert code == EXIT_OK
    stored = json.loads((workdir / "run" / "solution.json").read_text())
    assert stored["kind"] == "moment_matrix"
    assert main(["verify", "--solution", "run/solution.json"]) == EXIT_OK


def test_verify_rejects_unknown_files(workdir):
    (workdir / "junk.json").write_text(json.dumps({"hello": 1}))
    assert main(["verify", "--solution", "junk.json"]) == EXIT_USAGE
    assert main(["verify", "--solution", "missing.json"]) == EXIT_USAGE


def test_hvc_run_reports(capsys):
    code = main(["hvc", "--n", "8", "--k", "3", "--beta", "1", "--epsilon", "1/2", "--seed", "2"])
    assert code in (EXIT_OK, EXIT_VERIFICATION)
    payload = _stdout_json(capsys)
    assert payload["n"] == 8
    assert payload["edges"] == 8
    assert payload["integral_optimum"] is not None
