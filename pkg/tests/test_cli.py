"""End-to-end CLI behavior: verbs, outputs, exit codes, determinism."""

import json

import pytest

from singletsim import cli, report
from singletsim.config import ExperimentConfig, dump_config


def _run(*argv):
    return cli.main(list(argv))


class TestFig2:
    def test_emits_all_traces(self, tmp_path):
        assert _run("--out", str(tmp_path), "fig2") == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert names == {"fig2_mixed.csv", "fig2_init2.csv", "fig2_alpha50.csv",
                         "fig2_alpha75.csv", "fig2_alpha100.csv", "fig2_exact.csv"}

    def test_plot_format_adds_figure(self, tmp_path):
        assert _run("--out", str(tmp_path), "--format", "both", "fig2") == 0
        assert (tmp_path / "fig2.svg").exists()

    def test_final_rows(self, tmp_path):
        assert _run("--out", str(tmp_path), "fig2") == 0
        _, rows, _ = report.read_table(tmp_path / "fig2_mixed.csv")
        assert float(rows[-1][1]) == pytest.approx(6.0 / 19.0, abs=1e-6)
        assert float(rows[0][1]) == pytest.approx(2.0, abs=1e-9)
        _, rows, _ = report.read_table(tmp_path / "fig2_alpha50.csv")
        assert float(rows[-1][1]) == pytest.approx(0.7370, abs=5e-4)
        _, rows, _ = report.read_table(tmp_path / "fig2_exact.csv")
        assert float(rows[-1][1]) == pytest.approx(0.5, abs=1e-3)

    def test_exact_trace_schema_matches(self, tmp_path):
        assert _run("--out", str(tmp_path), "fig2") == 0
        cols_a, _, _ = report.read_table(tmp_path / "fig2_exact.csv")
        cols_b, _, _ = report.read_table(tmp_path / "fig2_mixed.csv")
        assert cols_a == cols_b == list(cli.TRAJECTORY_COLUMNS)


class TestSweep:
    def test_alpha_sweep_values(self, tmp_path):
        assert _run("--out", str(tmp_path), "sweep", "--param", "alpha",
                    "--values", "50", "75", "100", "inf") == 0
        _, rows, _ = report.read_table(tmp_path / "sweep.csv")
        finals = [float(r[1]) for r in rows]
        assert finals[0] == pytest.approx(0.737, abs=0.005)
        assert finals[1] == pytest.approx(0.609, abs=0.005)
        assert finals[2] == pytest.approx(0.540, abs=0.005)
        assert finals[3] == pytest.approx(6.0 / 19.0, abs=1e-6)

    def test_j_sweep_uses_matching_q(self, tmp_path):
        assert _run("--out", str(tmp_path), "sweep", "--param", "j",
                    "--values", "0.5", "1") == 0
        _, rows, _ = report.read_table(tmp_path / "sweep.csv")
        assert float(rows[0][1]) == pytest.approx(0.3, abs=1e-9)
        assert float(rows[1][1]) == pytest.approx(6.0 / 19.0, abs=1e-9)

    def test_unknown_param_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as err:
            _run("sweep", "--param", "temperature", "--values", "1")
        assert err.value.code == 2


class TestPostselectTable:
    def test_default_ratios(self, tmp_path):
        assert _run("--out", str(tmp_path), "postselect-table") == 0
        cols, rows, _ = report.read_table(tmp_path / "postselect.csv")
        assert cols == ["threshold_ratio", "q", "mu", "q_cubed"]
        assert float(rows[0][1]) == pytest.approx(0.502, abs=1e-3)
        assert float(rows[0][2]) == pytest.approx(0.144, abs=1e-3)
        assert float(rows[1][1]) == pytest.approx(0.750, abs=1e-3)

    def test_infinite_ratio(self, tmp_path):
        assert _run("--out", str(tmp_path), "postselect-table", "--ratios", "inf") == 0
        _, rows, _ = report.read_table(tmp_path / "postselect.csv")
        assert rows[0][1:] == ["1", "1", "1"]

    def test_nonpositive_ratio_rejected(self, tmp_path):
        assert _run("--out", str(tmp_path), "postselect-table", "--ratios", "-1") == 2


class TestValidateVerb:
    def test_quick_suite_passes(self, tmp_path, capsys):
        assert _run("--out", str(tmp_path), "validate", "--quick") == 0
        out = capsys.readouterr().out
        assert "checks passed" in out
        assert "FAIL" not in out
        cols, rows, _ = report.read_table(tmp_path / "validate.csv")
        assert cols == ["check", "passed", "observed", "expected", "detail"]
        assert all(r[1] == "true" for r in rows)

    def test_perturbed_q_fails_endpoints(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"pulse": {"q_factor": 1.0}}), encoding="utf-8")
        code = _run("--config", str(cfg), "--out", str(tmp_path), "validate", "--quick")
        assert code == 1
        out = capsys.readouterr().out
        assert "FAIL alpha50-endpoint-value" in out
        assert "margin" in out


class TestConfigHandling:
    def test_config_file_drives_run(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        data = {"schedule": {"grid_points": 4}, "loss": {"alphas": []}}
        cfg.write_text(json.dumps(data), encoding="utf-8")
        assert _run("--config", str(cfg), "--out", str(tmp_path / "o"), "fig2") == 0
        names = {p.name for p in (tmp_path / "o").iterdir()}
        assert names == {"fig2_mixed.csv", "fig2_init2.csv", "fig2_exact.csv"}
        _, rows, _ = report.read_table(tmp_path / "o" / "fig2_mixed.csv")
        assert len(rows) == 3 * 3 + 1

    def test_unknown_key_is_usage_error(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"detuning": 5}', encoding="utf-8")
        assert _run("--config", str(cfg), "--out", str(tmp_path), "fig2") == 2

    def test_missing_config_is_io_error(self, tmp_path):
        assert _run("--config", str(tmp_path / "nope.json"), "fig2") == 3

    def test_unwritable_output_is_io_error(self):
        assert _run("--out", "/proc/version/sub", "postselect-table") == 3

    def test_global_flags_accepted_before_or_after_verb(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert _run("--out", str(a), "postselect-table") == 0
        assert _run("postselect-table", "--out", str(b)) == 0
        assert (a / "postselect.csv").read_bytes() == (b / "postselect.csv").read_bytes()

    def test_seed_override_lands_in_header(self, tmp_path):
        assert _run("--out", str(tmp_path), "--seed", "777", "postselect-table") == 0
        _, _, comments = report.read_table(tmp_path / "postselect.csv")
        assert any('"seed": 777' in c for c in comments)

    def test_dump_config_is_valid_input(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        dump_config(ExperimentConfig(seed=31), str(cfg))
        assert _run("--config", str(cfg), "--out", str(tmp_path), "postselect-table") == 0


class TestExactCompare:
    def test_grid_table(self, tmp_path):
        assert _run("--out", str(tmp_path), "exact-compare") == 0
        cols, rows, comments = report.read_table(tmp_path / "exact_compare.csv")
        assert cols[:4] == ["mode", "n_atoms", "s0_levels", "kappa"]
        assert len(rows) == 2 * 3 * 3 * 3
        assert any("mean rel_err" in c for c in comments)
        # aggregate agreement improves with the light dimension
        means = {}
        for lv in ("21", "41", "81"):
            errs = [float(r[6]) for r in rows if r[0] == "mixed" and r[2] == lv]
            means[lv] = sum(errs) / len(errs)
        assert means["21"] > means["41"] > means["81"]
        assert means["81"] <= 0.25
