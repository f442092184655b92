import json
import os
import subprocess
import sys

import numpy as np
import pytest

from surfns.cli import ConfigError, load_config, main
from surfns.solver import PRESETS


def test_load_config_preset_and_overrides():
    cfg = load_config(preset="paper-case1", overrides={"level": 2, "T": 0.5})
    assert cfg.benchmark == "moving_sphere"
    assert cfg.scheme == "lmm_dir" and cfg.k_lambda == 2 and cfg.k_g == 2
    assert cfg.level == 2 and cfg.T == 0.5 and cfg.mu == 0.5


def test_load_config_json(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"benchmark": "oscillating_sphere", "level": 0, "T": 0.25, "mu": 0.02}))
    cfg = load_config(str(p))
    assert cfg.benchmark == "oscillating_sphere"


def test_load_config_rejects_unknown_keys(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"levels": 3}))
    with pytest.raises(ConfigError, match="unknown config keys"):
        load_config(str(p))


def test_malformed_config_exit_code(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    rc = main(["run", "--config", str(p), "--out", str(tmp_path / "out")])
    assert rc == 2


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError, match="unknown preset"):
        load_config(preset="paper-case9")


def test_run_zero_data_and_summary(tmp_path):
    out = tmp_path / "missing" / "out"  # missing directories are created
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"benchmark": "moving_sphere", "level": 0, "T": 0.25,
                             "dt": 0.125, "data": "zero"}))
    rc = main(["run", "--config", str(p), "--out", str(out)])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["errors"]["e_u_ah"] == 0.0
    # config echo reproduces the inputs
    assert summary["config"]["benchmark"] == "moving_sphere"
    assert summary["config"]["level"] == 0
    assert summary["config"]["data"] == "zero"
    assert (out / "steps.csv").exists() and (out / "errors.csv").exists()


def test_sweep_single_level_no_eoc(tmp_path):
    rc = main(["sweep", "--preset", "paper-case1", "--levels", "0", "--T", "0.25", "--out", str(tmp_path)])
    assert rc == 0
    conv = (tmp_path / "convergence.csv").read_text().strip().split("\n")
    assert len(conv) == 2  # header + one level
    assert (tmp_path / "eoc.csv").read_text().strip() == ""


def test_sweep_noncontiguous_rejected(tmp_path):
    rc = main(["sweep", "--preset", "paper-case1", "--levels", "0,2", "--out", str(tmp_path)])
    assert rc == 2


def test_sweep_determinism(tmp_path):
    # identical config => identical CSV bytes, modulo the walltime column
    args = ["sweep", "--preset", "paper-case1", "--levels", "0,1", "--T", "0.25"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])

    def strip_walltime(path):
        rows = [line.split(",") for line in path.read_text().strip().split("\n")]
        drop = rows[0].index("walltime_s")
        return [",".join(r[:drop] + r[drop + 1:]) for r in rows]

    assert strip_walltime(tmp_path / "a/convergence.csv") == strip_walltime(tmp_path / "b/convergence.csv")
    assert (tmp_path / "a/eoc.csv").read_bytes() == (tmp_path / "b/eoc.csv").read_bytes()


def test_geom_report_cli(capsys):
    rc = main(["geom-report", "--kg", "1", "--levels", "1,2"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "normal orders" in out


def test_presets_encode_paper_values():
    c1 = PRESETS["paper-case1"]
    assert (c1["k_u"], c1["k_lambda"], c1["k_g"]) == (2, 2, 2)
    assert c1["mu"] == 0.5 and c1["dt0"] == 0.5 and c1["T"] == 2.0
    c2 = PRESETS["paper-case2"]
    assert (c2["k_lambda"], c2["k_g"]) == (1, 3)
    osc = PRESETS["paper-osc"]
    assert osc["benchmark"] == "oscillating_sphere" and osc["mu"] == 2e-2 and osc["T"] == 1.0
    assert PRESETS["paper-osc-pm"]["scheme"] == "pm"


def test_console_entrypoint():
    proc = subprocess.run([sys.executable, "-m", "surfns.cli", "geom-report", "--kg", "1", "--levels", "1,2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
