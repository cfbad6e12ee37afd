import csv
import json
import subprocess
import sys

import pytest

from sharpint import __version__
from sharpint.cli import ConfigError, ExperimentConfig, main, sweep


def write(tmp_path, name, d):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_config_round_trip_and_hash():
    cfg = ExperimentConfig.from_dict({"experiment": "instanton", "h": 0.03125})
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again.to_dict() == cfg.to_dict() and again.hash == cfg.hash
    assert cfg.replace(outdir="elsewhere").hash == cfg.hash
    assert cfg.replace(h=1 / 64).hash != cfg.hash
    assert ExperimentConfig.from_dict({"experiment": "instanton", "h": 0.03125}).hash == cfg.hash


@pytest.mark.parametrize("raw, msg", [
    ({"experiment": "instanton", "bogus": 1}, "unknown config keys"),
    ({"h": 0.1}, "missing required key"),
    ({"experiment": "instanton", "nt": 2.5}, "integer"),
    ({"experiment": "instanton", "corrected": 1}, "true or false"),
    ({"experiment": "instanton", "eps_values": []}, "non-empty"),
    ({"experiment": "nope"}, "must be one of"),
])
def test_config_validation(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict(raw)


def test_run_writes_outputs_and_is_reproducible(tmp_path):
    cfg = write(tmp_path, "c.json", {"experiment": "instanton"})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--outdir", str(a)]) == 0
    assert main(["run", "--config", cfg, "--outdir", str(b)]) == 0
    for name in ("manifest.json", "results.csv", "summary.txt", "profile.csv"):
        assert (a / name).exists()
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    assert (a / "profile.csv").read_bytes() == (b / "profile.csv").read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    h = ExperimentConfig.from_file(cfg).hash
    assert man["config_hash"] == h and man["status"] == "ok" and "created" in man
    assert ExperimentConfig.from_dict(man["config"]).hash == h
    rows = read_rows(a / "results.csv")
    assert all(r["config_hash"] == h and r["version"] == __version__ for r in rows)


def test_config_errors_exit_2(tmp_path):
    bad = write(tmp_path, "bad.json", {"experiment": "instanton", "bogus": 1})
    assert main(["run", "--config", bad, "--outdir", str(tmp_path / "o1")]) == 2
    rec = json.loads((tmp_path / "o1" / "error.json").read_text())
    assert rec["exit_code"] == 2 and "bogus" in rec["message"]
    cold = write(tmp_path, "cold.json", {"experiment": "instanton", "beta": 0.5})
    assert main(["run", "--config", cold, "--outdir", str(tmp_path / "o2")]) == 2
    rec = json.loads((tmp_path / "o2" / "error.json").read_text())
    assert "no spontaneous magnetization" in rec["message"]
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["run", "--config", str(tmp_path / "broken.json"), "--outdir", str(tmp_path / "o3")]) == 2


def test_numerical_failure_exits_3(tmp_path):
    cfg = write(tmp_path, "c.json", {"experiment": "front-speed", "front_dt": 50.0})
    assert main(["run", "--config", cfg, "--outdir", str(tmp_path / "o")]) == 3
    rec = json.loads((tmp_path / "o" / "error.json").read_text())
    assert rec["error"] == "DynamicsError" and "CFL" in rec["message"]


def test_sweep_ratio_columns(tmp_path):
    cfg = write(tmp_path, "c.json", {"experiment": "coefficients", "model": "gk"})
    out = tmp_path / "s"
    assert main(["sweep", "--config", cfg, "--param", "gk_h", "--values", "0.125,0.0625,0.03125",
                 "--outdir", str(out)]) == 0
    rows = read_rows(out / "results.csv")
    assert [float(r["gk_h"]) for r in rows] == [0.125, 0.0625, 0.03125]
    for k in ("ratio_tau", "diffratio_tau", "ratio_mu", "diffratio_mu"):
        assert k in rows[0]
    assert rows[0]["ratio_tau"] == "nan" and rows[1]["diffratio_tau"] == "nan"
    # second-order grid: differences shrink by 4 per halving
    assert 3.5 < float(rows[2]["diffratio_tau"]) < 4.5
    for v in ("0.125", "0.0625", "0.03125"):
        assert (out / "runs" / f"gk_h={float(v):g}" / "manifest.json").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["sweep"]["param"] == "gk_h"


def test_sweep_rejects_empty_and_unknown(tmp_path):
    cfg = write(tmp_path, "c.json", {"experiment": "coefficients", "model": "gk"})
    for vals in ("", "[]"):
        assert main(["sweep", "--config", cfg, "--param", "gk_h", "--values", vals,
                     "--outdir", str(tmp_path / "o")]) == 2
    assert main(["sweep", "--config", cfg, "--param", "beta", "--values", "2,3",
                 "--outdir", str(tmp_path / "o")]) == 2
    with pytest.raises(ConfigError, match="empty"):
        sweep(ExperimentConfig.from_file(cfg), "gk_h", [], str(tmp_path / "o"))


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "c.json", {"experiment": "instanton", "bogus": 0})
    r = subprocess.run([sys.executable, "-m", "sharpint", "run", "--config", cfg, "--outdir", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 2 and json.loads(r.stderr)["status"] == "error"
    r = subprocess.run([sys.executable, "-m", "sharpint", "schema"], capture_output=True, text=True)
    assert r.returncode == 0 and "experiment" in r.stdout
