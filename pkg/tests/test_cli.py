import json

import pytest

from postmatch import cli


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    return code


def csv_rows(path):
    lines = path.read_text().splitlines()
    return lines[0], lines[1].split(","), [dict(zip(lines[1].split(","), r.split(","))) for r in lines[2:]]


def test_simulate_rows_and_summary(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert run(["simulate", "--channel", "bsc", "--p", 0.2, "--n", 50, 100, "--decoder", "variable",
                "--delta", 0.01, "--trials", 4, "--seed", 7, "--out", out]) == 0
    head, cols, rows = csv_rows(out)
    assert head == '# schema=1 command=simulate seed=7 channel={"kind":"bsc","p":0.2}'
    assert cols == list(cli.TRIAL_COLUMNS)
    assert len(rows) == 8
    assert [(r["trial"], r["n"]) for r in rows] == [(str(t), str(n)) for t in range(4) for n in (50, 100)]
    for r in rows:
        assert float(r["lo"]) < float(r["hi"]) and r["hit"] in ("0", "1") and r["error"] == ""
    text = capsys.readouterr().out
    assert text.count("[summary]") == 2 and "wilson_hi:" in text


def test_uniform_zero_delta_all_hits(tmp_path):
    out = tmp_path / "u.csv"
    assert run(["simulate", "--channel", "uniform", "--n", 300, "--decoder", "variable", "--delta", 0,
                "--trials", 10, "--out", out]) == 0
    _, _, rows = csv_rows(out)
    assert all(r["hit"] == "1" for r in rows)


def test_threads_do_not_change_output(tmp_path):
    outs = []
    for k in (1, 3):
        out = tmp_path / f"t{k}.csv"
        assert run(["simulate", "--channel", "awgn", "--snr", 3, "--n", 10, 16, "--decoder", "fixed",
                    "--rate", 0.9, "--trials", 7, "--seed", 5, "--threads", k, "--out", out]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_sweep_one_row_per_cell(tmp_path):
    out = tmp_path / "w.csv"
    assert run(["sweep", "--channel", "bsc", "--p", 0.2, "--n", 40, 80, "--decoder", "fixed",
                "--rate", 0.1, 0.2, "--trials", 5, "--out", out]) == 0
    _, cols, rows = csv_rows(out)
    assert cols == list(cli.SWEEP_COLUMNS)
    assert [(r["n"], r["target"]) for r in rows] == [("40", "0.1"), ("40", "0.2"), ("80", "0.1"), ("80", "0.2")]
    for r in rows:
        assert float(r["wilson_lo"]) <= float(r["p_e"]) <= float(r["wilson_hi"])
        assert int(r["trials"]) == 5


def test_timing_column_is_opt_in(tmp_path):
    out = tmp_path / "t.csv"
    assert run(["simulate", "--channel", "bsc", "--p", 0.2, "--n", 20, "--decoder", "variable",
                "--delta", 0.1, "--out", out, "--timing"]) == 0
    _, cols, rows = csv_rows(out)
    assert cols[-1] == "elapsed" and float(rows[0]["elapsed"]) >= 0


def test_analyze_report(tmp_path, capsys):
    out = tmp_path / "a.txt"
    assert run(["analyze", "--channel", "bsc", "--p", 0.2, "--out", out]) == 0
    text = out.read_text()
    assert "[threshold]" in text and "kind: r_dagger" in text and "flags: nonpositive" in text
    assert "[dmc_property_check]" in text and "[fixed_point_scan]" in text
    assert text == capsys.readouterr().out


def test_analyze_separable_not_catalogued_is_reported(tmp_path, capsys):
    assert run(["analyze", "--channel", "awgn", "--snr", 3, "--analyses", "r_star_separable",
                "--shapings", "inverse_sqrt"]) == 0
    assert "not_separable: no catalogued factorization" in capsys.readouterr().out


def test_mismatch_command(tmp_path, capsys):
    out = tmp_path / "m.csv"
    assert run(["mismatch", "--channel", "awgn", "--snr", 3, "--true-channel", "laplace", "--true-var", 1,
                "--n", 200, "--trials", 2, "--burn-in", 500, "--chains", 512, "--out", out]) == 0
    _, cols, rows = csv_rows(out)
    assert cols == list(cli.MISMATCH_COLUMNS) and len(rows) == 2
    text = capsys.readouterr().out
    kv = dict(line.split(": ", 1) for line in text.splitlines() if ": " in line)
    assert abs(float(kv["empirical_snr"]) - 3) < 0.3
    assert float(kv["penalty_bits"]) > 0
    assert (tmp_path / "m.csv.report").read_text().startswith("[mismatch]")


@pytest.mark.parametrize("argv", [
    ["simulate", "--channel", "bsc", "--p", 0.2, "--n", 10, "--delta", 0.1, "--trials", 0, "--out", "x.csv"],
    ["simulate", "--channel", "bsc", "--p", 0.2, "--n", 10, "--delta", 0.1],
    ["simulate", "--channel", "bsc", "--p", 0.2, "--delta", 0.1, "--out", "x.csv"],
    ["simulate", "--channel", "bsc", "--p", 0.2, "--n", 10, "--decoder", "rollback", "--delta", 0, "--out", "x.csv"],
    ["simulate", "--channel", "bsc", "--p", 0.2, "--n", 10, "--decoder", "fixed", "--out", "x.csv"],
    ["simulate", "--channel", "bsc", "--snr", 3, "--n", 10, "--delta", 0.1, "--out", "x.csv"],
    ["simulate", "--channel", "bsc", "--p", 1.5, "--n", 10, "--delta", 0.1, "--out", "x.csv"],
    ["mismatch", "--channel", "awgn", "--snr", 3, "--n", 10, "--out", "x.csv"],
    ["simulate", "--bogus"],
])
def test_validation_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(argv) == 2
    assert not (tmp_path / "x.csv").exists()


def test_json_config_with_overrides(tmp_path):
    cfg = {"channel": {"kind": "bsc", "p": 0.2}, "n": [30], "decoder": "variable", "delta": [0.1],
           "trials": 2, "seed": 3}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "o.csv"
    assert run(["simulate", "--config", path, "--trials", 3, "--p", 0.1, "--out", out]) == 0
    head, _, rows = csv_rows(out)
    assert '"p":0.1' in head and "seed=3" in head
    assert len(rows) == 3


def test_json_config_unknown_key(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"channel": {"kind": "bsc", "p": 0.2}, "n": [30], "colour": 1}))
    assert run(["simulate", "--config", path, "--out", tmp_path / "o.csv"]) == 2
    path.write_text(json.dumps({"channel": {"kind": "bsc", "p": 0.2, "q": 1}, "n": [30]}))
    assert run(["simulate", "--config", path, "--out", tmp_path / "o.csv"]) == 2


def test_failed_trials_are_recorded(tmp_path):
    # fixed-rate decoding beyond the session resolution fails per trial, not globally
    out = tmp_path / "f.csv"
    assert run(["simulate", "--channel", "bsc", "--p", 0.2, "--n", 400, "--decoder", "fixed",
                "--rate", 0.9, "--precision", 128, "--trials", 2, "--out", out]) == 0
    _, _, rows = csv_rows(out)
    assert all(r["hit"] == "0" and r["error"] for r in rows)


def test_read_csv_round_trip(tmp_path):
    out = tmp_path / "s.csv"
    assert run(["simulate", "--channel", "bsc", "--p", 0.2, "--n", 20, "--delta", 0.1, "--trials", 2,
                "--out", out]) == 0
    rows = cli.read_csv(out)
    assert len(rows) == 2 and list(rows[0]) == list(cli.TRIAL_COLUMNS)
    assert rows[0]["trial"] == "0" and rows[1]["trial"] == "1"
