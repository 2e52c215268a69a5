import json
from pathlib import Path

from click.testing import CliRunner

from micropillar.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def run(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


def test_scan_csv_and_json(tmp_path):
    out = tmp_path / "s.csv"
    r = run("scan", "--n-top", "9,13", "--out", str(out))
    assert r.exit_code == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert len(lines) == 3 and lines[1].startswith("13/35.5")
    r = run("scan", "--n-top", "9", "--format", "json", "--rank", "bandwidth")
    assert json.loads(r.output)["rows"][0]["n_top"] == 9.0


def test_scan_from_config_file(tmp_path):
    cfg = tmp_path / "p.cfg"
    cfg.write_text("lambda_um = 1.3\nm_range = 5\nn_top = 11\nn_bottom = 35.5\nbackground = bcb\n")
    r = run("scan", "--config", str(cfg))
    assert r.exit_code == 0 and ",bcb," in r.output


def test_config_errors_exit_nonzero(tmp_path):
    assert run("scan", "--m-range", "abc").exit_code != 0
    assert run("scan", "--background", "water").exit_code != 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("flavour = vanilla\n")
    assert run("scan", "--config", str(bad)).exit_code != 0


def test_per_design_failure_keeps_exit_zero():
    r = CliRunner().invoke(main, ["scan", "--n-top", "0", "--n-bottom", "0"])
    assert r.exit_code == 0
    assert "no resonance" in r.output


def test_evaluate():
    r = run("evaluate", "--n-top", "13", "--d-cavity", "1.8748")
    assert r.exit_code == 0 and "13/35.5@1.875um" in r.output
    assert run("evaluate").exit_code != 0  # three designs by default


def test_ingest_and_validate(tmp_path):
    out = tmp_path / "i.csv"
    r = run("ingest", str(FIXTURES / "pilot_b.csv"), "--n-top", "7", "--m-range", "6", "--out", str(out))
    assert r.exit_code == 0
    assert ",ingested,ok," in out.read_text()
    assert run("validate", str(out)).exit_code == 0
    assert run("validate", str(FIXTURES / "pilot_a.csv")).exit_code == 0
    broken = tmp_path / "broken.csv"
    text = out.read_text().splitlines()
    header = [l for l in text if not l.startswith("#")][0].split(",")
    row = [l for l in text if not l.startswith("#")][1].split(",")
    row[header.index("xi")] = "0.5"
    broken.write_text(",".join(header) + "\n" + ",".join(row) + "\n")
    assert run("validate", str(broken)).exit_code == 1
    neg = tmp_path / "neg.csv"
    neg.write_text("lambda_um,gamma_top,gamma_bottom,gamma_side\n1.0,1,-1,1\n")
    assert CliRunner().invoke(main, ["ingest", str(neg)]).exit_code != 0


def test_figure(tmp_path):
    out = tmp_path / "f.csv"
    r = run("figure", "fig1c", "--out", str(out))
    assert r.exit_code == 0 and out.read_text().startswith("d_cavity_um,")
    assert CliRunner().invoke(main, ["figure", "fig7", "--out", str(out)]).exit_code != 0
