import csv

import pytest

from gemoran.cli import main


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["simulate", "--model", "graph", "--N", "20", "--t-end", "0.5", "--replicates", "3",
                 "--seed", "1", "--out", str(out)]) == 0
    rows = read(out)
    assert len(rows) == 6 and list(rows[0]) == ["replicate", "t", "Z", "rho2", "rho3", "gap2", "events_so_far"]
    assert len(read(tmp_path / "r.sidecar.csv")) == 3


def test_simulate_with_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("model = jump\nN = 10\nt_grid = 0, 0.1\nreplicates = 2\ninit.kind = delta\ninit.value = 1\n")
    out = tmp_path / "r.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert read(out)[0]["Z"] == "1.0"


def test_generator_check(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["generator-check", "--N", "4", "--states", "5", "--identity", "G_rho2", "--out", str(out)]) == 0
    rows = read(out)
    assert len(rows) == 5 and all(r["abs_diff"] == "0" for r in rows)
    assert main(["generator-check", "--N", "4", "--states", "5", "--identity", "G_rho1cubed", "--out", str(out)]) == 1
    assert main(["generator-check", "--N", "4", "--identity", "nope", "--out", str(out)]) == 2


def test_feller_sample(tmp_path):
    out = tmp_path / "f.csv"
    assert main(["feller-sample", "--z", "2", "--t", "0.5", "--n", "100", "--out", str(out)]) == 0
    assert len(read(out)) == 100
    assert main(["feller-sample", "--z", "2", "--t", "0.5", "--n", "10", "--mu", "1", "--out", str(out)]) == 0
    assert main(["feller-sample", "--z", "2", "--t", "0", "--n", "10", "--out", str(out)]) == 2


def test_compare_and_report(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"model = both\nN = 20\nreplicates = 20\nfeller_samples = 200\nout_dir = {tmp_path / 'o'}\n")
    assert main(["compare", "--config", str(cfg)]) == 0
    stats = {r["stat"] for r in read(tmp_path / "o" / "report.csv")}
    assert "cross_KS_p_Z" in stats
    out = tmp_path / "rep.csv"
    assert main(["report", str(tmp_path / "o" / "raw_jump_N20.csv"), "--out", str(out)]) == 0
    assert {r["stat"] for r in read(out)} == {"Z", "rho2", "rho3", "gap2", "events_so_far"}


def test_usage_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("N = 10\nnot a pair\n")
    assert main(["compare", "--config", str(bad)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])
    assert exc.value.code == 2
    assert main(["accept", "--criteria", "11"]) == 2


def test_accept_subset(tmp_path, capsys):
    out = tmp_path / "v.csv"
    assert main(["accept", "--criteria", "7", "--out", str(out)]) == 0
    assert read(out)[0]["passed"] == "1"
    assert "criterion  7 [PASS]" in capsys.readouterr().out
