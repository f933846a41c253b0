import json

import numpy as np
import pytest

from bihj.cli import main

SIGMA0 = np.sqrt(0.5)


@pytest.fixture
def config_path(tmp_path):
    doc = {
        "hbar": 1.0, "mass": 1.0,
        "potential": {"kind": "free"},
        "grid": {"x_min": -10.0, "x_max": 10.0, "n_points": 256},
        "initial_state": {"kind": "gaussian", "sigma0": SIGMA0},
        "time": {"dt_solver": 0.002, "dt_fields": 0.01, "t_final": 0.1},
        "labels": {"count": 41, "span": {"kind": "explicit", "lo": -2.0, "hi": 2.0}},
        "mode": "reference_driven",
        "solver": "analytic",
        "composition_case": "i",
        "thresholds": {"rho_min_factor": 1e-12, "rho_ref": 1.0},
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    return path


def test_oracle_prints_table(capsys):
    assert main(["oracle"]) == 0
    out = capsys.readouterr().out
    assert "free gaussian at rest" in out


def test_simulate_writes_outputs(tmp_path, config_path, capsys):
    code = main(["simulate", "--config", str(config_path), "--out", str(tmp_path / "run")])
    assert code == 0
    assert (tmp_path / "run" / "manifest.json").exists()
    assert (tmp_path / "run" / "fields.csv").exists()


def test_compose_case_flag(tmp_path, config_path):
    code = main(["compose", "--config", str(config_path), "--case", "converse",
                 "--out", str(tmp_path / "run")])
    assert code == 0
    first = (tmp_path / "run" / "composition.csv").read_text().splitlines()[1]
    assert first.startswith("converse,")


def test_figure_requires_id(config_path):
    with pytest.raises(SystemExit):
        main(["figure", "--config", str(config_path)])


def test_invalid_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"grid": {"x_min": 0.0, "x_max": 1.0, "n_points": 8},
                               "initial_state": {"kind": "gaussian", "sigma0": SIGMA0},
                               "time": {"dt_solver": 1e-3, "dt_fields": 1e-3,
                                        "t_final": 0.01}}))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_mode_override(tmp_path, config_path):
    code = main(["simulate", "--config", str(config_path), "--mode", "autonomous",
                 "--out", str(tmp_path / "run")])
    assert code == 0
    assert (tmp_path / "run" / "crossmap.csv").exists()
