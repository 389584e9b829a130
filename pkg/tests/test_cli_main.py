import json

import pandas as pd
import pytest

import scripts.dofcalc as dofcalc
from scripts.errors import DecodeFailure


def test_dof_table_writes_reference_values(tmp_path, capsys):
    code = dofcalc.main(["dof-table", "--k", "3,5,10,20", "--out", str(tmp_path)])
    assert code == dofcalc.EXIT_OK
    rows = json.loads((tmp_path / "dof_table.json").read_text(encoding="utf-8"))
    assert [row["dof"] for row in rows] == ["15/11", "315/193", "92378/43191", "156/59"]
    assert [row["decimal"] for row in rows] == [1.364, 1.632, 2.139, 2.644]
    assert rows[0]["misobc_upper"] == "18/11"
    assert (tmp_path / "dof_table.md").exists()
    assert "15/11" in capsys.readouterr().out


def test_dof_table_reads_config_when_k_missing(tmp_path, monkeypatch):
    config = tmp_path / "k_values.txt"
    config.write_text("# comment\n3\n\n5\n", encoding="utf-8")
    monkeypatch.setattr(dofcalc, "K_VALUES_PATH", str(config))
    assert dofcalc.main(["dof-table", "--out", str(tmp_path), "--format", "csv"]) == dofcalc.EXIT_OK
    df = pd.read_csv(tmp_path / "dof_table.csv")
    assert list(df["K"]) == [3, 5]


def test_dof_table_flags_reference_mismatch(tmp_path, monkeypatch):
    monkeypatch.setitem(dofcalc.REFERENCE_DOF, 3, dofcalc.Fraction(3, 2))
    assert dofcalc.main(["dof-table", "--k", "3", "--out", str(tmp_path)]) == dofcalc.EXIT_INVARIANT


def test_dof_table_checks_miso_upper_bounds(tmp_path, monkeypatch, capsys):
    monkeypatch.setitem(dofcalc.REFERENCE_MISO, 5, dofcalc.Fraction(2))
    assert dofcalc.main(["dof-table", "--k", "3,5", "--out", str(tmp_path)]) == dofcalc.EXIT_INVARIANT
    err = capsys.readouterr().err
    assert "K=5 misobc_upper: got 300/137" in err
    assert "K=3" not in err


def test_hops_reports_bounds(tmp_path, capsys):
    code = dofcalc.main(["hops", "--k", "3", "--l", "3", "--out", str(tmp_path)])
    assert code == dofcalc.EXIT_OK
    df = pd.read_csv(tmp_path / "hop_durations.csv")
    assert list(df["exact"]) == ["53/90", "23/45", "11/15"]
    out = capsys.readouterr().out
    assert "interior bound T(k) <= T(1) + T(K): ok" in out
    assert "endpoint dominance: true" in out


def test_hops_accepts_q(tmp_path):
    assert dofcalc.main(["hops", "--k", "5", "--q", "3", "--out", str(tmp_path)]) == dofcalc.EXIT_OK
    assert len(pd.read_csv(tmp_path / "hop_durations.csv")) == 5


@pytest.mark.parametrize(
    "argv",
    [
        ["hops", "--k", "3", "--l", "3", "--q", "2"],
        ["hops", "--l", "3"],
        ["hops", "--k", "3"],
        ["hops", "--k", "3", "--l", "4"],
        ["hops", "--k", "3,x", "--l", "3"],
        ["dof-table", "--k", "2"],
        ["simulate", "x3", "--trials", "0"],
        ["simulate", "x3", "--n1", "-5"],
    ],
)
def test_usage_errors_exit_64(argv, tmp_path):
    assert dofcalc.main(argv + ["--out", str(tmp_path)]) == dofcalc.EXIT_USAGE


def test_parser_errors_exit_64(capsys):
    with pytest.raises(SystemExit) as excinfo:
        dofcalc.main(["simulate", "ring"])
    assert excinfo.value.code == dofcalc.EXIT_USAGE
    with pytest.raises(SystemExit) as excinfo:
        dofcalc.main([])
    assert excinfo.value.code == dofcalc.EXIT_USAGE


def test_simulate_two_hop_rounds_n1(tmp_path, capsys):
    code = dofcalc.main(["simulate", "two-hop", "--n1", "30", "--seed", "2", "--out", str(tmp_path)])
    assert code == dofcalc.EXIT_OK
    assert "N1 rounded to 36" in capsys.readouterr().err
    summary = pd.read_csv(tmp_path / "simulation_summary.csv")
    assert list(summary["n1"]) == [36]
    assert bool(summary.loc[0, "counts_match"])
    transcript = json.loads((tmp_path / "transcript.json").read_text(encoding="utf-8"))
    assert transcript["variant"] == "two-hop-phase1"
    assert transcript["hop_totals"] == [14, 9]
    assert len(transcript["slots"][0]["tx"][0]) == 2


def test_simulate_x3_trials(tmp_path):
    code = dofcalc.main(["simulate", "x3", "--trials", "2", "--seed", "4", "--out", str(tmp_path)])
    assert code == dofcalc.EXIT_OK
    summary = pd.read_csv(tmp_path / "simulation_summary.csv")
    assert list(summary["seed"]) == [4, 5]
    assert list(summary["measured_dof"]) == ["4/5", "4/5"]
    assert list(summary["accounting_dof"]) == ["15/11", "15/11"]
    assert list(summary["hop_totals"]) == ["138 144 270", "138 144 270"]
    assert summary["counts_match"].all()
    assert (summary["error"] < 1e-8).all()


def test_simulate_decode_failure_exits_3(tmp_path, monkeypatch, capsys):
    def failing(n1, seed, tol):
        raise DecodeFailure("D2", 0.5, f"seed {seed}")

    monkeypatch.setitem(dofcalc.SIMULATORS, "x3", failing)
    assert dofcalc.main(["simulate", "x3", "--out", str(tmp_path)]) == dofcalc.EXIT_DECODE
    assert "decode failed at D2" in capsys.readouterr().err
    assert not (tmp_path / "transcript.json").exists()


def test_verify_gamma_and_two_hop(tmp_path):
    assert dofcalc.main(["verify", "gamma-vs-sum", "--out", str(tmp_path)]) == dofcalc.EXIT_OK
    payload = json.loads((tmp_path / "verify_gamma_vs_sum.json").read_text(encoding="utf-8"))
    assert payload["passed"] is True
    assert payload["counterexamples"] == []
    assert dofcalc.main(["verify", "two-hop", "--out", str(tmp_path)]) == dofcalc.EXIT_OK
    payload = json.loads((tmp_path / "verify_two_hop.json").read_text(encoding="utf-8"))
    assert all(check["passed"] for check in payload["checks"])


def test_verify_psin_rank(tmp_path):
    assert dofcalc.main(["verify", "psin-rank", "--trials", "20", "--out", str(tmp_path)]) == dofcalc.EXIT_OK
    payload = json.loads((tmp_path / "verify_psin_rank.json").read_text(encoding="utf-8"))
    assert [check["detail"] for check in payload["checks"]] == ["20/20", "20/20"]


def test_verify_appendix_b_csv(tmp_path):
    code = dofcalc.main(["verify", "appendix-b", "--format", "csv", "--out", str(tmp_path)])
    assert code == dofcalc.EXIT_OK
    df = pd.read_csv(tmp_path / "verify_appendix_b.csv")
    assert df["passed"].all()
    assert "endpoint dominance K=100 L=3" in list(df["name"])


def test_verify_failure_exits_2(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(dofcalc, "GAMMA_TOLERANCE", 0.0)
    assert dofcalc.main(["verify", "gamma-vs-sum", "--out", str(tmp_path)]) == dofcalc.EXIT_INVARIANT
    assert "counterexample" in capsys.readouterr().err


def test_scaling(tmp_path, capsys):
    assert dofcalc.main(["scaling", "--k", "10,100", "--out", str(tmp_path)]) == dofcalc.EXIT_OK
    df = pd.read_csv(tmp_path / "scaling.csv")
    assert list(df["K"]) == [10, 100]
    assert "ratio nondecreasing: true" in capsys.readouterr().out


def test_verify_causality_passes(tmp_path):
    assert dofcalc.main(["verify", "causality", "--out", str(tmp_path)]) == dofcalc.EXIT_OK
    payload = json.loads((tmp_path / "verify_causality.json").read_text(encoding="utf-8"))
    assert [check["passed"] for check in payload["checks"]] == [True, True]


def test_verify_causality_records_failing_seed(tmp_path, monkeypatch, capsys):
    def failing(n1, seed, tol):
        raise DecodeFailure(None, float("inf"), "no usable draw")

    monkeypatch.setattr(dofcalc, "run_x3", failing)
    code = dofcalc.main(["verify", "causality", "--seed", "4", "--out", str(tmp_path)])
    assert code == dofcalc.EXIT_INVARIANT
    err = capsys.readouterr().err
    assert "counterexample" in err
    assert '"seed": 4' in err
    payload = json.loads((tmp_path / "verify_causality.json").read_text(encoding="utf-8"))
    assert payload["passed"] is False
    assert payload["counterexamples"][0]["seed"] == 4
    assert "no usable draw" in payload["counterexamples"][0]["error"]
