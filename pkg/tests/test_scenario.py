import filecmp
import json

import numpy as np
import pytest

from bihj.errors import ConfigurationError
from bihj.scenario import (
    load_config,
    parse_config,
    run_compose,
    run_figure,
    run_oracle_table,
    run_reconstruct,
    run_simulate,
    write_csv,
)

SIGMA0 = np.sqrt(0.5)


def small_doc(**overrides):
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
    doc.update(overrides)
    return doc


class TestConfig:
    def test_all_violations_reported_at_once(self):
        doc = small_doc(
            hbar=-1.0,
            grid={"x_min": 5.0, "x_max": -5.0, "n_points": 8},
            mode="sideways",
        )
        with pytest.raises(ConfigurationError) as err:
            parse_config(doc)
        text = str(err.value)
        for fragment in ("hbar", "x_min < x_max", "n_points", "mode"):
            assert fragment in text

    def test_n_points_floor(self):
        with pytest.raises(ConfigurationError, match="n_points"):
            parse_config(small_doc(grid={"x_min": -10.0, "x_max": 10.0, "n_points": 8}))

    def test_dt_relationship_enforced(self):
        with pytest.raises(ConfigurationError, match="dt_fields"):
            parse_config(small_doc(time={"dt_solver": 0.01, "dt_fields": 0.005,
                                         "t_final": 0.1}))
        with pytest.raises(ConfigurationError, match="integer multiple"):
            parse_config(small_doc(time={"dt_solver": 0.003, "dt_fields": 0.01,
                                         "t_final": 0.1}))

    def test_analytic_solver_needs_gaussian_at_rest(self):
        doc = small_doc(initial_state={"kind": "two_gaussian", "sigma0": SIGMA0,
                                       "separation": 2.0})
        with pytest.raises(ConfigurationError, match="analytic"):
            parse_config(doc)

    def test_round_trip_idempotent(self):
        cfg = parse_config(small_doc())
        echoed = parse_config(cfg.echo)
        assert echoed.echo == cfg.echo

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(small_doc()))
        cfg = load_config(path)
        assert cfg.grid.n_points == 256


class TestOutputs:
    def test_simulate_emits_declared_schemas(self, tmp_path):
        cfg = parse_config(small_doc())
        manifest, bundle = run_simulate(cfg, tmp_path)
        assert set(manifest["files"]) == {"reference_fields.csv", "fields.csv",
                                          "trajectories.csv", "timings.json"}
        heads = {
            "reference_fields.csv": "time,x,re_psi,im_psi",
            "fields.csv": "time,x,rho,S,S_plus,S_minus,v_plus,v_minus,Q_plus,Q_minus,valid",
            "trajectories.csv": "congruence_id,label_index,q0,time,q,qdot,J,chi",
        }
        for name, head in heads.items():
            assert (tmp_path / name).read_text().splitlines()[0] == head
        listed = json.loads((tmp_path / "manifest.json").read_text())
        assert set(listed["files"]) == set(manifest["files"])

    def test_autonomous_simulate_emits_crossmap(self, tmp_path):
        cfg = parse_config(small_doc(
            mode="autonomous",
            time={"dt_solver": 0.001, "dt_fields": 0.01, "t_final": 0.05}))
        manifest, _ = run_simulate(cfg, tmp_path)
        assert "crossmap.csv" in manifest["files"]
        head = (tmp_path / "crossmap.csv").read_text().splitlines()[0]
        assert head == "time,q_plus0,q_minus0"

    def test_compose_emits_composition_and_sources(self, tmp_path):
        cfg = parse_config(small_doc())
        manifest, bundle = run_compose(cfg, tmp_path)
        assert (tmp_path / "composition.csv").read_text().splitlines()[0] == \
            "case_id,q_C0,time,Q_B,q_C,J_B,J_C,residual"
        assert (tmp_path / "sources.csv").read_text().splitlines()[0] == \
            "congruence_id,q0,time,c,rho_ratio"
        assert bundle.all_passed

    def test_reconstruct_schema_and_check(self, tmp_path):
        cfg = parse_config(small_doc())
        manifest, bundle = run_reconstruct(cfg, tmp_path)
        head = (tmp_path / "reconstruction.csv").read_text().splitlines()[0]
        assert head == ("x,t,re_psi_bihj,im_psi_bihj,re_psi_polar,im_psi_polar,"
                        "re_psi_ref,im_psi_ref,abs_err_bihj,abs_err_polar")
        assert bundle.all_passed

    def test_figures(self, tmp_path):
        cfg = parse_config(small_doc())
        run_figure(cfg, tmp_path / "f2", "fig2")
        assert (tmp_path / "f2" / "fig2.csv").read_text().splitlines()[0] == \
            "series,q0,time,value"
        run_figure(cfg, tmp_path / "f3", "fig3")
        lines = (tmp_path / "f3" / "fig3.csv").read_text().splitlines()
        assert lines[0] == "case_id,series,q0,time,value"
        kinds = {line.split(",")[1] for line in lines[1:]}
        assert kinds == {"qA_family", "QB", "qC"}

    def test_oracle_table_mentions_values(self):
        cfg = parse_config(small_doc())
        text = run_oracle_table(cfg)
        assert "0.644794" in text  # plus path at (1, 1)
        assert "2.193280" in text  # label generator, first case

    def test_repeated_runs_are_byte_identical(self, tmp_path):
        cfg = parse_config(small_doc(solver="crank_nicolson"))
        m1, _ = run_simulate(cfg, tmp_path / "a")
        m2, _ = run_simulate(cfg, tmp_path / "b")
        for name, digest in m1["files"].items():
            if name == "timings.json":
                continue
            assert digest == m2["files"][name]
            assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)

    def test_csv_floats_carry_17_significant_digits(self, tmp_path):
        write_csv(tmp_path / "t.csv", ["a"], [np.array([1.0 / 3.0])])
        assert tmp_path.joinpath("t.csv").read_text() == "a\n0.33333333333333331\n"

    def test_empty_bundle_emits_manifest_only(self, tmp_path):
        from bihj.scenario import RunBundle
        cfg = parse_config(small_doc())
        bundle = RunBundle("simulate", cfg, tmp_path)
        manifest = bundle.finish()
        names = {p.name for p in tmp_path.iterdir()}
        assert names == {"manifest.json", "timings.json"}
        assert manifest["checks"] == []
