import csv
import json
from pathlib import Path

import pytest

from fkup.cli import main
from fkup.harness import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    ExperimentError,
    _minimize_row,
    fit_order,
    make_row,
    run_experiment,
    run_gap_order,
    run_sweep_epsilon,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_cfg(tmp_path, **data):
    data.setdefault("output_dir", str(tmp_path / "out"))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return path


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    err = capsys.readouterr().err.strip()
    return code, (json.loads(err) if err else None)


GAP = {"experiment": "gap-order", "parameter_grid": [0.2, 0.1, 0.05, 0.025]}


class TestConfig:
    def test_roundtrip(self):
        cfg = ExperimentConfig.load(CONFIGS / "recovery-multi.json")
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg

    @pytest.mark.parametrize(
        "data,match",
        [
            ({"experiment": "nope"}, "unknown experiment"),
            ({"experiment": "gap-order"}, "nonempty"),
            ({"experiment": "gap-order", "parameter_grid": [0.1, 0.2]}, "decreasing"),
            ({"experiment": "sweep-delta", "parameter_grid": [0.1], "window_halfwidth": 4}, "at least 5"),
            ({"experiment": "profile", "colour": "red"}, "unknown config keys"),
            ({"experiment": "minimize", "parameter_grid": [0.1], "boundary": [1, 1]}, "differ"),
            ({"parameter_grid": [0.1]}, "experiment"),
            ({"experiment": "profile", "potential": {"sigma": -1}}, "sigma"),
        ],
    )
    def test_rejected(self, data, match):
        with pytest.raises(ConfigError, match=match):
            ExperimentConfig.from_dict(data)

    def test_gridless_experiments(self):
        assert ExperimentConfig.from_dict({"experiment": "validate-potential"}).parameter_grid == ()


class TestRows:
    def test_relative_error(self):
        row = make_row((0.1,), 1.1, 1.0, {}, {})
        assert row["relative_error"] == pytest.approx(0.1)

    def test_fit_order(self):
        assert fit_order([0.4, 0.2, 0.1], [1.6, 0.4, 0.1]) == pytest.approx(2.0)


class TestGapOrder:
    def test_order(self, tmp_path):
        res = run_gap_order(ExperimentConfig.from_dict(GAP))
        assert 1.8 <= res.fitted_order <= 2.2
        assert res.passed
        prov = res.rows[0]["provenance"]
        assert set(prov) == {"config_hash", "potential_hash", "code_version"}

    def test_constant_profile_is_degenerate(self):
        cfg = ExperimentConfig.from_dict({**GAP, "test_profile": "constant"})
        with pytest.raises(ExperimentError, match="degenerate") as info:
            run_gap_order(cfg)
        assert all(r["energy"] <= 1e-8 for r in info.value.result.rows)

    def test_window_insensitive(self):
        a = run_gap_order(ExperimentConfig.from_dict({**GAP, "window_halfwidth": 20}))
        b = run_gap_order(ExperimentConfig.from_dict({**GAP, "window_halfwidth": 40}))
        for ra, rb in zip(a.rows, b.rows):
            assert abs(ra["energy"] - rb["energy"]) < 0.01 * ra["energy"]

    def test_grid_must_halve(self):
        with pytest.raises(ConfigError):
            run_gap_order(ExperimentConfig.from_dict({**GAP, "parameter_grid": [0.3, 0.1, 0.05, 0.025]}))


class TestSweeps:
    def test_sweep_epsilon_unit(self, pot):
        cfg = ExperimentConfig.from_dict(
            {"experiment": "sweep-epsilon", "parameter_grid": [[0.1, 0.05], [0.05, 0.05], [0.02, 0.05]]}
        )
        res = run_sweep_epsilon(cfg)
        assert res.rows[-1]["relative_error"] <= 0.03
        assert res.passed

    def test_eps_one_matches_meso(self):
        cfg = ExperimentConfig.from_dict({"experiment": "minimize", "parameter_grid": [[0.1]]})
        meso, _ = _minimize_row((cfg, (0.1,)))
        two, _ = _minimize_row((cfg, (1.0, 0.1)))
        assert two["energy"] == pytest.approx(meso["energy"], abs=1e-10)

    def test_sweep_delta(self):
        cfg = ExperimentConfig.load(CONFIGS / "sweep-delta.json")
        res = run_experiment(cfg)
        assert res.passed, res.checks
        assert res.rows[-1]["relative_error"] <= 0.01
        for r in res.rows:
            d = r["diagnostics"]
            assert d["continuum_energy"] >= d["var_lower_bound"]

    def test_sweep_delta_needs_unit_boundary(self):
        cfg = ExperimentConfig.from_dict({"experiment": "sweep-delta", "parameter_grid": [0.1], "boundary": [0, 2]})
        with pytest.raises(ConfigError):
            run_experiment(cfg)

    def test_recovery_unit(self):
        res = run_experiment(ExperimentConfig.load(CONFIGS / "recovery.json"))
        assert res.passed, res.checks
        assert res.rows[-1]["relative_error"] <= 0.02

    def test_recovery_construction_error_flagged(self):
        cfg = ExperimentConfig.from_dict({"experiment": "recovery", "parameter_grid": [[0.1, 2.0]]})
        res = run_experiment(cfg)
        assert res.rows[0]["diagnostics"]["converged"] is False
        assert not res.passed


class TestCLI:
    def test_gap_order_check(self, tmp_path, capsys):
        path = write_cfg(tmp_path, **GAP)
        code, err = run_cli(capsys, "gap-order", "--config", path, "--check")
        assert code == 0 and err is None
        out = tmp_path / "out"
        summary = json.loads((out / "summary.json").read_text())
        assert summary["passed"] and 1.8 <= summary["fitted_order"] <= 2.2
        raw = (out / "results.csv").read_bytes()
        assert b"\r" not in raw
        rows = list(csv.reader(raw.decode().splitlines()))
        assert rows[0] == CSV_COLUMNS and len(rows) == 5

    def test_missing_config(self, tmp_path, capsys):
        code, err = run_cli(capsys, "gap-order", "--config", tmp_path / "absent.json")
        assert code == 1
        assert err["error"] == "config" and "absent.json" in err["message"]

    def test_bad_json(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        assert run_cli(capsys, "profile", "--config", path)[0] == 1

    def test_experiment_mismatch(self, tmp_path, capsys):
        path = write_cfg(tmp_path, **GAP)
        assert run_cli(capsys, "profile", "--config", path)[0] == 1

    def test_degenerate_potential(self, tmp_path, capsys):
        path = write_cfg(tmp_path, experiment="validate-potential", potential={"standoff": 1.0, "sigma": 0.5})
        code, err = run_cli(capsys, "validate-potential", "--config", path)
        assert code == 2
        assert "degenerate well" in err["message"]
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["passed"] is False

    def test_degenerate_gap_fit(self, tmp_path, capsys):
        path = write_cfg(tmp_path, **GAP, test_profile="constant")
        code, err = run_cli(capsys, "gap-order", "--config", path)
        assert code == 2 and "degenerate" in err["message"]

    def test_check_failure(self, tmp_path, capsys):
        # a single coarse row cannot meet the 1% threshold
        path = write_cfg(tmp_path, experiment="minimize", parameter_grid=[[1.0]], window_halfwidth=10)
        assert run_cli(capsys, "minimize", "--config", path)[0] == 0
        code, err = run_cli(capsys, "minimize", "--config", path, "--check")
        assert code == 3 and err["error"] == "check"

    def test_out_override(self, tmp_path, capsys):
        path = write_cfg(tmp_path, experiment="profile")
        assert run_cli(capsys, "profile", "--config", path, "--out", tmp_path / "elsewhere")[0] == 0
        assert (tmp_path / "elsewhere" / "profile.csv").exists()

    def test_deterministic_and_jobs(self, tmp_path, capsys):
        path = write_cfg(tmp_path, **GAP)
        outs = []
        for k, jobs in enumerate((1, 1, 2)):
            out = tmp_path / f"run{k}"
            assert run_cli(capsys, "gap-order", "--config", path, "--out", out, "--jobs", jobs)[0] == 0
            outs.append((out / "results.csv").read_bytes())
        assert outs[0] == outs[1] == outs[2]

    @pytest.mark.parametrize("name", ["validate-potential", "profile", "gap-order", "sweep-delta", "recovery"])
    def test_shipped_configs(self, tmp_path, capsys, name):
        code, err = run_cli(capsys, name, "--config", CONFIGS / f"{name}.json", "--out", tmp_path, "--check")
        assert code == 0, err
