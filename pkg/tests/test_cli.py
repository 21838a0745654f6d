import csv
import json

import pytest

from cachedof.cli import main


def _csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# cachedof ")
    return list(csv.DictReader(lines[1:]))


def _bounds(rows):
    return {r["name"]: r for r in rows if r["kind"] == "bound"}


def test_region_example(tmp_path):
    assert main(["region", "--k", "3", "--m", "5", "--n", "3", "--out", str(tmp_path)]) == 0
    pts = (tmp_path / "corner_points.csv").read_text().splitlines()
    body = {",".join(line.split(",")[2:]) for line in pts[1:]}
    for p in ("3,0,0,0,0,1.5,0", "0,1.5,0,0,1.5,1.5,0", "0,0,0,1.5,1.5,1.5,0"):
        assert p in body
    checks = _csv(tmp_path / "checks.csv")
    assert all(r["passed"] == "true" for r in checks)
    inner = _csv(tmp_path / "inner_bound.csv")
    assert {r["region"] for r in inner} == {"D1", "D2"}
    assert any(r["active_when"] != "always" for r in inner)


def test_region_lowm_count(tmp_path):
    main(["region", "--k", "3", "--m", "2", "--n", "3", "--out", str(tmp_path)])
    assert len((tmp_path / "corner_points.csv").read_text().splitlines()) == 1 + 7


def test_region_k2_support_check(tmp_path):
    main(["region", "--k", "2", "--m", "3", "--n", "2", "--out", str(tmp_path)])
    checks = {r["check"]: r for r in _csv(tmp_path / "checks.csv")}
    assert checks["inner and outer support functions agree"]["passed"] == "true"


def test_region_stdout(capsys):
    main(["region", "--k", "2", "--m", "5", "--n", "2"])
    assert capsys.readouterr().out.startswith("point,source,")


def test_ndt_default_fixture(tmp_path):
    out = tmp_path / "ndt.csv"
    main(["ndt", "--out", str(out)])
    b = _bounds(_csv(out))
    assert float(b["tau_a"]["value"]) == pytest.approx(7 / 30)
    assert b["tau_a"]["exact"] == "7/30"
    assert float(b["tau_l"]["value"]) == pytest.approx(0.21)
    assert b["rho"]["exact"] == "10/9"


def test_ndt_generated_centralized(tmp_path):
    out = tmp_path / "ndt.csv"
    main(["ndt", "--generate", "centralized", "--mu", "1/3", "--m", "2", "--n", "1", "--out", str(out)])
    assert _bounds(_csv(out))["tau_a"]["exact"] == "2/3"


def test_ndt_zero_lengths(tmp_path):
    out = tmp_path / "ndt.csv"
    main(["ndt", "--lengths", "0,0,0,0,0,0,0", "--out", str(out)])
    assert float(_bounds(_csv(out))["tau_a"]["value"]) == 0


def test_ndt_jsonl_and_fixture_generation(tmp_path):
    table = tmp_path / "cache.txt"
    table.write_text("{} {1} {2} {1,2}\n1/2 1/4 1/4 0\n1/2 1/4 1/4 0\n")
    out = tmp_path / "ndt.jsonl"
    main(["ndt", "--k", "2", "--m", "3", "--n", "2", "--l", "2", "--fixture", str(table),
          "--generate", "centralized", "--format", "jsonl", "--out", str(out)])
    lines = [json.loads(x) for x in out.read_text().splitlines()]
    assert lines[0]["schema"] == "ndt/1"
    f = {r["name"]: r["value"] for r in lines if r.get("kind") == "f"}
    assert f == {"{1}": 0.5, "{2}": 0.5, "{1,2}": 0.25}


def test_ndt_malformed_lengths(capsys):
    with pytest.raises(SystemExit) as info:
        main(["ndt", "--lengths", "0.1,abc,0"])
    assert info.value.code == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["ndt", "--lengths", "0.1,0.2"])


def test_sweep_is_deterministic(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        main(["sweep", "--k", "3", "--m", "2", "--n", "1", "--mugrid", "0,0.4,0.8", "--draws", "10",
              "--out", str(out)])
        outs.append(out.read_text().splitlines())
    assert outs[0][1:] == outs[1][1:]
    rows = list(csv.DictReader(outs[0][1:]))
    assert len(rows) == 9 and "std" in rows[0]
    for mu in ("0", "0.4", "0.8"):
        row = {r["scheme"]: float(r["mean"]) for r in rows if r["mu"] == mu}
        assert row["proposed"] <= min(row["time-sharing"], row["group-by-group"]) + 1e-12


def test_sweep_rejects_bad_grid():
    with pytest.raises(SystemExit):
        main(["sweep", "--mugrid", "0,1.5"])


def test_simulate_summary(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    main(["simulate", "--draws", "4", "--pgrid", "10,50", "--out", str(out)])
    rows = _csv(out)
    assert {"scheme", "P_dB", "phase", "group", "rate", "T_k", "NDT_sim", "NDT_asym", "draws"} <= set(rows[0])
    summary = json.loads((tmp_path / "sim.csv.summary.json").read_text())
    assert set(summary) >= {"crossover", "mean_proposed", "mean_time_sharing"}
    assert isinstance(summary["crossover"], bool)


def test_example1(capsys):
    main(["example1"])
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()[1:]))
    padded = {r["name"]: r["exact"] for r in rows if r["kind"] == "zero_padded_f"}
    assert padded["{1,2,3}"] == "0.15"
    assert _bounds(rows)["tau_time_sharing"]["exact"] == "0.35"


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# example\nk = 2\nm = 3\nn = 2\nlengths = 0.5, 0.5, 0\n")
    out = tmp_path / "ndt.csv"
    main(["ndt", "--config", str(cfg), "--out", str(out)])
    assert _bounds(_csv(out))["tau_a"]["exact"] == "1/3"
    # explicit flags win over the file
    main(["ndt", "--config", str(cfg), "--m", "2", "--out", str(out)])
    assert _bounds(_csv(out))["tau_a"]["exact"] == "0.5"


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(SystemExit):
        main(["ndt", "--config", str(cfg)])
