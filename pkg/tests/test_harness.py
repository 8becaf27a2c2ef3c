import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from reinforced_mems.exceptions import ConfigError
from reinforced_mems.harness import export_report, load_config, run_delta_sweep, verify_inequalities
from reinforced_mems.harness.cli import main
from reinforced_mems.harness.report import AUDIT_HEADER, SWEEP_HEADER, audit_csv_text, sweep_csv_text

SMALL = {
    "device": {"nx": 12, "nz_free": 6, "nz_layer": 6},
    "comparison_grid": {"nx": 24, "nz": 12},
    "audit": {"samples": 3, "seed": 7},
}


@pytest.fixture(scope="module")
def small_sweep():
    return run_delta_sweep(SMALL)


@pytest.fixture
def config_file(tmp_path):
    def write(data, name="cfg.json"):
        p = tmp_path / name
        p.write_text(json.dumps(data))
        return p

    return write


class TestConfig:
    def test_defaults(self):
        cfg = load_config({})
        assert cfg.V == 3.0 and cfg.family == "default"
        assert cfg.w_range == (-0.5, 1.0)
        assert cfg.device.delta_list == (0.2, 0.1, 0.05)
        assert cfg.comparison_grid == (96, 48)
        assert cfg.audit_samples == 50

    @pytest.mark.parametrize(
        "data",
        [
            {"bogus": 1},
            {"device": {"Lx": 1.0}},
            {"optimizer": {"tol": 1e-3}},
            {"sigma": {"kind": "constant", "value": 2.0, "extra": 1}},
            {"sigma": {"kind": "quadratic"}},
            {"sigma": {"kind": "affine", "c0": 1.0}},
            {"family": "unknown"},
            {"V": "three"},
            {"device": {"nx": 4.5}},
            {"device": {"delta_list": [0.2, 1.5]}},
            {"w_range": [-1.0, 0.5]},
            {"comparison_grid": {"nx": 1}},
            {"audit": {"samples": -1}},
            {"record_wall_time": "yes"},
            {"optimizer": {"backtrack_factor": 2.0}},
            [],
        ],
    )
    def test_rejects(self, data):
        with pytest.raises(ConfigError):
            load_config(data)

    def test_file_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_hash_depends_on_resolved_values_only(self):
        assert load_config({}).config_hash() == load_config({"V": 3.0, "family": "default"}).config_hash()
        assert load_config({}).config_hash() != load_config({"V": 2.0}).config_hash()

    def test_affine_sigma(self):
        cfg = load_config({"sigma": {"kind": "affine", "c0": 2.0, "cx": 0.1, "cz": 0.0}})
        assert cfg.sigma()(0.5, -1.5) == pytest.approx(2.05)


class TestSweep:
    def test_cardinality_and_order(self, small_sweep):
        assert [r.delta for r in small_sweep.rows] == [0.2, 0.1, 0.05]
        assert small_sweep.reduced.delta is None

    def test_energy_signs(self, small_sweep):
        for r in small_sweep.rows + [small_sweep.reduced]:
            assert r.e_total <= r.e_at_zero <= 0
            assert r.converged and not r.touched

    def test_comparison_height(self, small_sweep):
        rows = small_sweep.rows + [small_sweep.reduced]
        top = max(float(np.max(r.deflection(np.linspace(-1, 1, 241)))) for r in rows)
        assert small_sweep.M == pytest.approx(1.0 + top)

    def test_force_bound_on_minimizers(self, small_sweep):
        for r in small_sweep.rows:
            assert r.force_min >= -small_sweep.validation["K"] ** 2 - 1e-9

    def test_zero_voltage(self):
        rep = run_delta_sweep({**SMALL, "V": 0.0})
        for r in rep.rows:
            assert r.err_u_h2 == 0.0 and r.err_e == 0.0 and r.err_psi == 0.0
            assert np.all(r.deflection.values == 0)
        text = sweep_csv_text(rep)
        for line in list(csv.DictReader(io.StringIO(text))):
            assert float(line["err_u_h2"]) == float(line["err_e"]) == float(line["err_psi"]) == 0.0

    def test_multistart_records_basins(self):
        rep = run_delta_sweep({**SMALL, "device": {**SMALL["device"], "delta_list": [0.1]}, "optimizer": {"multistart": 2}})
        assert len(rep.rows) == 1
        assert 1 <= len(rep.rows[0].basins) <= 3
        assert rep.rows[0].e_total == pytest.approx(min(rep.rows[0].basins), abs=1e-9)


class TestReport:
    def test_csv_layout(self, small_sweep):
        text = sweep_csv_text(small_sweep)
        lines = text.split("\n")
        assert lines[0] == ",".join(SWEEP_HEADER)
        assert text.endswith("\n") and "\r" not in text
        data = list(csv.reader(io.StringIO(text)))[1:]
        assert len(data) == 4
        assert data[-1][0] == "0"  # reduced sentinel row
        assert all(row[-1] == "" for row in data)  # no wall times unless requested
        # 17 significant digits round-trip exactly
        assert float(data[0][1]) == small_sweep.rows[0].e_mech

    def test_export(self, small_sweep, tmp_path):
        audit = verify_inequalities(SMALL, n_samples=1)
        files = export_report(tmp_path, small_sweep, audit)
        assert sorted(p.name for p in files) == ["audit.csv", "config_echo.json", "sweep.csv", "sweep.json"]
        doc = json.loads((tmp_path / "sweep.json").read_text())
        assert len(doc["rows"]) == 3 and doc["reduced"]["delta"] is None
        snap = doc["rows"][0]["deflection"]
        assert set(snap) >= {"nodes", "values", "slopes"}
        echo = json.loads((tmp_path / "config_echo.json").read_text())
        assert echo["config_hash"] == small_sweep.config_hash
        assert (tmp_path / "audit.csv").read_text().split("\n")[0] == ",".join(AUDIT_HEADER)

    def test_wall_time_opt_in(self):
        rep = run_delta_sweep({**SMALL, "V": 0.0, "record_wall_time": True})
        data = list(csv.reader(io.StringIO(sweep_csv_text(rep))))[1:]
        assert all(row[-1] != "" for row in data)


class TestAudit:
    def test_all_pass(self):
        rep = verify_inequalities(SMALL)
        assert rep.passed, [(r.name, r.sample, r.lhs, r.rhs) for r in rep.failures()]
        names = {r.name for r in rep.rows}
        assert names == {"poincare", "interpolation", "lift_bound", "coercivity", "force_bound"}
        # 3 canonical + 3 random samples, plus the closed-form cosine row
        assert len(rep.by_name("poincare")) == 7

    def test_cosine_row(self):
        row = verify_inequalities(SMALL, n_samples=0).by_name("poincare")[0]
        assert row.lhs == pytest.approx(1.0) and row.rhs == pytest.approx(2 * np.pi)

    def test_zero_profile_rows_are_trivial(self):
        rep = verify_inequalities(SMALL, n_samples=0)
        for r in rep.rows:
            if r.sample.startswith("zero") and r.name in ("poincare", "interpolation"):
                assert r.lhs == 0.0

    def test_bump_interpolation_example(self):
        rep = verify_inequalities({**SMALL, "device": {"nx": 64, "nz_free": 4, "nz_layer": 4}}, n_samples=0)
        # bump_up is (1 - x^2)^2 scaled by 0.95 * min(-w_min, w_max) = 0.475; both sides scale by its square
        s2 = 0.475**2
        row = [r for r in rep.by_name("interpolation") if r.sample == "bump_up"][0]
        assert row.lhs / s2 == pytest.approx(256 / 105, rel=1e-3)
        assert row.rhs / s2 == pytest.approx(4.561, rel=1e-3)

    def test_no_stretching_skips_coercivity(self):
        rep = verify_inequalities({**SMALL, "device": {**SMALL["device"], "a": 0.0}}, n_samples=0)
        assert not rep.by_name("coercivity") and rep.skipped

    def test_audit_csv_margin(self):
        rep = verify_inequalities(SMALL, n_samples=0)
        rows = list(csv.DictReader(io.StringIO(audit_csv_text(rep))))
        assert all(r["pass"] == "1" for r in rows)
        assert float(rows[0]["margin"]) == pytest.approx(float(rows[0]["rhs"]) - float(rows[0]["lhs"]))


class TestCli:
    def test_sweep_and_determinism(self, config_file, tmp_path, capsys):
        cfg = config_file({**SMALL, "device": {**SMALL["device"], "delta_list": [0.2, 0.1]}})
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
        for name in ("sweep.csv", "audit.csv", "sweep.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_audit_command(self, config_file, tmp_path):
        cfg = config_file(SMALL)
        assert main(["audit", "--config", str(cfg), "--samples", "2", "--seed", "3", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "audit.csv").exists() and not (tmp_path / "sweep.csv").exists()

    def test_config_error_exit_code(self, config_file, tmp_path, capsys):
        cfg = config_file({"unknown": 1})
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "unknown" in capsys.readouterr().err

    def test_bad_log_level(self, config_file, tmp_path, monkeypatch):
        monkeypatch.setenv("MEMS_LOG", "loud")
        assert main(["audit", "--config", str(config_file(SMALL)), "--out", str(tmp_path)]) == 2

    def test_solve_json_and_csv(self, config_file, tmp_path):
        cfg = config_file(SMALL)
        x = np.linspace(-1, 1, 13)
        vals = 0.2 * (1 - x**2) ** 2
        slopes = 0.2 * (-4 * x * (1 - x**2))
        vals[[0, -1]] = slopes[[0, -1]] = 0.0
        (tmp_path / "u.json").write_text(json.dumps({"nodes": x.tolist(), "values": vals.tolist(), "slopes": slopes.tolist()}))
        (tmp_path / "u.csv").write_text("x,value,slope\n" + "".join(f"{a!r},{b!r},{c!r}\n" for a, b, c in zip(x.tolist(), vals.tolist(), slopes.tolist())))
        outs = []
        for src, model in (("u.json", "delta:0.1"), ("u.csv", "delta:0.1"), ("u.json", "reduced")):
            out = tmp_path / f"{src}.{model}.csv"
            assert main(["solve", "--config", str(cfg), "--model", model, "--deflection", str(tmp_path / src), "--out", str(out)]) == 0
            outs.append(out.read_text())
        assert outs[0] == outs[1]
        rows = list(csv.DictReader(io.StringIO(outs[2])))
        assert len(rows) == 25 * 13
        inside = [r for r in rows if r["inside"] == "1"]
        assert inside and all(r["psi"] != "" for r in inside)

    def test_solve_invalid_model(self, config_file, tmp_path):
        (tmp_path / "u.json").write_text(json.dumps({"nodes": [-1, 0, 1], "values": [0, 0, 0], "slopes": [0, 0, 0]}))
        rc = main(["solve", "--config", str(config_file(SMALL)), "--model", "delta:2", "--deflection", str(tmp_path / "u.json")])
        assert rc == 2

    def test_solve_touchdown_is_numerical_failure(self, config_file, tmp_path):
        x = [-1, -0.5, 0, 0.5, 1]
        (tmp_path / "u.json").write_text(json.dumps({"nodes": x, "values": [0, -0.5, -0.99999, -0.5, 0], "slopes": [0] * 5}))
        rc = main(["solve", "--config", str(config_file(SMALL)), "--model", "reduced", "--deflection", str(tmp_path / "u.json")])
        assert rc == 3

    def test_console_script_entry(self, config_file, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "reinforced_mems.harness.cli", "sweep", "--config", str(config_file({"nope": 0})), "--out", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 2
