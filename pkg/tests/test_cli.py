import json

import pytest

from pullgeom import __version__
from pullgeom.cli import main
from pullgeom.experiments import EXPERIMENTS

REQUIRED = {
    "sp2-biinvariant", "hopf-fatness", "aflat-kernel", "flat-rigidity", "fiber-geodesy",
    "degenerate", "radial-projection", "stability-probe", "graph-metric-agreement",
}


def _report(tmp_path, stem):
    return json.loads((tmp_path / f"{stem}.json").read_text())


def test_catalog(capsys):
    assert main(["list", "--json"]) == 0
    catalog = json.loads(capsys.readouterr().out)
    names = {c["name"] for c in catalog}
    assert REQUIRED <= names
    assert all(c["anchor"] and c["claim"] for c in catalog)
    fg = next(c for c in catalog if c["name"] == "fiber-geodesy")
    assert set(fg["maps"]) == {"sp2", "wilhelm", "rigas", "cayley", "susp8", "kervaire"}
    assert main(["list"]) == 0
    assert "anchor:" in capsys.readouterr().out


def test_sp2_biinvariant_report(tmp_path):
    assert main(["verify", "sp2-biinvariant", "--seed", "7", "--samples", "10",
                 "--out", str(tmp_path)]) == 0
    r = _report(tmp_path, "sp2-biinvariant-seed7")
    assert r["schema"] == 1 and r["seed"] == 7 and r["version"] == __version__
    assert r["measures"]["isometry_residual"] < 1e-5
    assert r["verdict"] == "pass"
    assert set(r) >= {"experiment", "map", "params", "samples", "measures", "verdict",
                      "thresholds"}
    assert "wall_clock_s" not in r


def test_fail_verdict_exits_zero(tmp_path):
    code = main(["fiber-geodesy", "--map", "rigas", "--k", "2", "--which", "meridian",
                 "--samples", "20", "--out", str(tmp_path)])
    assert code == 0
    r = _report(tmp_path, "fiber-geodesy-rigasmeridian-seed0")
    assert r["verdict"] == "fail"
    assert r["thresholds"] == {"pass_tol": 1e-4, "fail_floor": 1e-2}


def test_degenerate_writes_trace(tmp_path):
    code = main(["degenerate", "--map", "cayley", "--n", "2", "--theta-start", "3.0",
                 "--theta-end", "3.14", "--steps", "2", "--samples", "20",
                 "--out", str(tmp_path)])
    assert code == 0
    csv = (tmp_path / "degenerate-cayley2-seed0.trace.csv").read_text().splitlines()
    assert csv[0].split(",")[:4] == ["theta", "max_b", "max_b_sq", "bound"]
    assert len(csv) == 3


def test_unknown_names_rejected(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["no-such-experiment"])
    assert e.value.code == 2
    with pytest.raises(SystemExit):
        main(["fiber-geodesy", "--map", "nope", "--out", str(tmp_path)])
    with pytest.raises(SystemExit):
        main(["fiber-geodesy", "--map", "sp2", "--which", "meridian", "--out", str(tmp_path)])
    assert not list(tmp_path.iterdir())


def test_config_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"samples": 3, "seed": 5}))
    out = tmp_path / "out"
    monkeypatch.setenv("PULLGEOM_OUT", str(out))
    assert main(["sp2-biinvariant", "--config", str(cfg), "--seed", "2"]) == 0
    r = _report(out, "sp2-biinvariant-seed2")
    assert r["params"]["samples"] == 3 and r["seed"] == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(SystemExit):
        main(["sp2-biinvariant", "--config", str(bad)])


def test_experiment_error_is_reported(tmp_path):
    code = main(["fiber-geodesy", "--map", "sp2", "--target", "2,0,0,0,0", "--samples", "3",
                 "--out", str(tmp_path)])
    assert code == 1
    r = _report(tmp_path, "fiber-geodesy-sp2-seed0")
    assert r["verdict"] == "error" and r["error"]["type"]


def test_csv_and_timing(tmp_path):
    assert main(["stability-probe", "--deltas", "0.1", "--format", "csv", "--timing",
                 "--out", str(tmp_path)]) == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["stability-probe-seed0.deltas.csv"]


def test_byte_identical_reruns(tmp_path):
    args = ["fiber-geodesy", "--map", "cayley", "--n", "2", "--samples", "15", "--format", "both"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_every_experiment_has_defaults():
    for exp in EXPERIMENTS.values():
        assert callable(exp.run) and isinstance(exp.defaults, dict)
