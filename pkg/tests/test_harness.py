"""Experiment-runner tests: configs, fits, reports, and CLI plumbing.

Oracles: hand-built power-law tables for the constant fit, graph heights
with known sup norms for the closeness check, and byte-comparison of
repeated runs for the reproducibility contract.
"""

import csv
import json

import numpy as np
import pytest

from wulff_lab.cli import main as cli_main
from wulff_lab.errors import ConfigError, PreconditionError
from wulff_lab.grids import make_grid
from wulff_lab.harness import (
    EXPERIMENT_IDS,
    ExperimentConfig,
    c1_closeness_check,
    export_wulff_obj,
    fit_constant,
    run_experiment,
    write_records_csv,
)
from wulff_lab.integrand import QuadraticForm, build_wulff
from wulff_lab.surface import WulffGraphChart, build_surface, nodal_mode_field

M2 = [[1.0, 0.3], [0.3, 2.0]]


@pytest.fixture(scope="module")
def wulff1():
    return build_wulff(QuadraticForm(np.asarray(M2)), make_grid(1, 128))


class TestExperimentConfig:
    def test_ids_are_normalized(self):
        cfg = ExperimentConfig(experiment="main-estimate")
        assert cfg.experiment == "main_estimate"
        assert cfg.experiment in EXPERIMENT_IDS

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="frobnicate")

    def test_bad_dimension_and_exponent(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="rigidity", n=3)
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="rigidity", p=1.0)
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="rigidity", p=float("inf"))

    def test_resolution_ladder_must_increase(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="rigidity", resolutions=(16, 16))
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="rigidity", resolutions=(32, 16))
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="rigidity", resolutions=())
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="rigidity", resolutions=(2, 8))

    def test_amplitude_ladder_must_decrease(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="expansion", eps_ladder=(0.1, 0.1))
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="expansion", eps_ladder=(0.05, 0.1))
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="expansion", eps_ladder=(0.1, -0.05))

    def test_mode_axes_must_fit_ambient_dimension(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(
                experiment="expansion",
                n=1,
                modes=({"k": 2, "amp": 1.0, "axes": (0, 2)},),
            )

    def test_integrand_must_be_dict(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="rigidity", integrand="constant_one")

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "rigidity", "typo": 1})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"n": 2})

    def test_from_dict_accepts_hyphenated_keys(self):
        cfg = ExperimentConfig.from_dict(
            {
                "experiment": "main-estimate",
                "eps-ladder": [0.1, 0.05],
                "out-dir": None,
            }
        )
        assert cfg.eps_ladder == (0.1, 0.05)

    def test_json_roundtrip(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="kernel",
            integrand={"family": "quadratic_form", "M": M2},
            n=1,
            resolutions=(32, 48, 64),
            seed=11,
        )
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg.to_dict()), encoding="utf-8")
        loaded = ExperimentConfig.from_json(path)
        assert loaded == cfg

    def test_from_json_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(bad)

    def test_rng_is_named_and_reproducible(self):
        cfg = ExperimentConfig(experiment="rigidity", seed=42)
        assert cfg.rng_name() == "PCG64(seed=42)"
        a = cfg.rng().standard_normal(5)
        b = cfg.rng().standard_normal(5)
        assert np.array_equal(a, b)


class TestFitConstant:
    def test_linear_table(self):
        records = [{"x": float(x), "y": 2.0 * x} for x in (1, 2, 4, 8)]
        fit = fit_constant(records, "x", "y")
        assert abs(fit.c_hat - 2.0) < 1e-12
        assert abs(fit.slope - 1.0) < 1e-12
        assert abs(fit.r_squared - 1.0) < 1e-12
        assert fit.skipped == 0

    def test_power_law_slope(self):
        records = [{"x": x, "y": 3.0 * x**2} for x in (0.1, 0.2, 0.4, 0.8)]
        fit = fit_constant(records, "x", "y")
        assert abs(fit.slope - 2.0) < 1e-10
        # y/x maximized at the largest x for a superlinear law
        assert abs(fit.c_hat - 3.0 * 0.8) < 1e-12

    def test_zero_rows_are_skipped(self):
        records = [{"x": 0.0, "y": 1.0}, {"x": 1.0, "y": 0.0}]
        records += [{"x": float(x), "y": 5.0 * x} for x in (1, 2, 4)]
        fit = fit_constant(records, "x", "y")
        assert fit.skipped == 2
        assert abs(fit.c_hat - 5.0) < 1e-12

    def test_needs_three_usable_records(self):
        records = [{"x": 1.0, "y": 1.0}, {"x": 2.0, "y": 2.0}]
        with pytest.raises(ConfigError):
            fit_constant(records, "x", "y")


class TestC1Closeness:
    def test_shape_itself_is_flat(self, wulff1):
        surf = build_surface(WulffGraphChart(wulff1, 0.0))
        sup_u, sup_grad = c1_closeness_check(surf, wulff1, 1e-3)
        assert sup_u < 1e-9
        assert sup_grad < 1e-7

    def test_graph_height_is_recovered(self, wulff1):
        mode = nodal_mode_field(wulff1.grid, [{"k": 3, "amp": 1.0}])
        u = 0.01 * mode / np.max(np.abs(mode))
        surf = build_surface(WulffGraphChart(wulff1, u))
        sup_u, sup_grad = c1_closeness_check(surf, wulff1, 0.02)
        assert abs(sup_u - 0.01) < 1e-6
        assert 0.0 < sup_grad < 1.0

    def test_leaving_the_tube_is_a_precondition_error(self, wulff1):
        mode = nodal_mode_field(wulff1.grid, [{"k": 3, "amp": 1.0}])
        u = 0.01 * mode / np.max(np.abs(mode))
        surf = build_surface(WulffGraphChart(wulff1, u))
        with pytest.raises(PreconditionError):
            c1_closeness_check(surf, wulff1, 0.005)

    def test_bad_tube_radius(self, wulff1):
        surf = build_surface(WulffGraphChart(wulff1, 0.0))
        with pytest.raises(ConfigError):
            c1_closeness_check(surf, wulff1, 0.0)


@pytest.fixture(scope="module")
def report_config():
    return ExperimentConfig(
        experiment="rigidity",
        integrand={"family": "quadratic_form", "M": M2},
        n=1,
        resolutions=(32, 48, 64),
        seed=3,
    )


class TestReports:
    def test_files_and_determinism(self, report_config, tmp_path):
        config = report_config
        first = run_experiment(config, out_dir=tmp_path / "a")
        second = run_experiment(config, out_dir=tmp_path / "b")
        assert first.passed and second.passed
        csv_a = (tmp_path / "a" / "rigidity.csv").read_bytes()
        csv_b = (tmp_path / "b" / "rigidity.csv").read_bytes()
        assert csv_a == csv_b
        svg_a = (tmp_path / "a" / "rigidity.svg").read_bytes()
        svg_b = (tmp_path / "b" / "rigidity.svg").read_bytes()
        assert svg_a == svg_b
        summary = (tmp_path / "a" / "rigidity_summary.txt").read_text()
        assert summary.splitlines() == first.summary_lines()
        assert all(
            line.startswith(("PASS ", "FAIL ")) for line in summary.splitlines()
        )

    def test_csv_layout(self, report_config, tmp_path):
        result = run_experiment(report_config, out_dir=tmp_path)
        text = (tmp_path / "rigidity.csv").read_text(encoding="utf-8")
        head = text.splitlines()
        assert head[0] == "# wulff-lab experiment table"
        assert head[1].startswith("# config: {")
        assert head[2] == "# rng: PCG64(seed=3)"
        assert head[3].startswith("# norms: ")
        body = [line for line in head if not line.startswith("#")]
        rows = list(csv.reader(body))
        assert rows[0] == sorted(rows[0])
        assert len(rows) - 1 == len(result.records)
        # fixed-width floats, no locale or repr drift
        dev_col = rows[0].index("max_identity_deviation")
        for row in rows[1:]:
            float(row[dev_col])
            assert "e" in row[dev_col]

    def test_config_out_dir_is_used(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="kernel",
            integrand={"family": "quadratic_form", "M": M2},
            n=1,
            resolutions=(48,),
            out_dir=str(tmp_path / "from_config"),
        )
        result = run_experiment(cfg)
        assert result.csv_path is not None
        assert (tmp_path / "from_config" / "kernel.csv").exists()

    def test_write_records_handles_ragged_records(self, tmp_path):
        cfg = ExperimentConfig(experiment="rigidity")
        records = [{"a": 1, "b": True}, {"a": 2.5, "c": "tag"}]
        path = tmp_path / "ragged.csv"
        write_records_csv(path, cfg, records)
        body = [
            line
            for line in path.read_text().splitlines()
            if not line.startswith("#")
        ]
        rows = list(csv.reader(body))
        assert rows[0] == ["a", "b", "c"]
        assert ["1", "true", ""] in rows
        assert ["2.500000000000e+00", "", "tag"] in rows


class TestExportObj:
    def test_curve_polyline(self, wulff1, tmp_path):
        path = tmp_path / "curve.obj"
        export_wulff_obj(wulff1, path)
        lines = path.read_text().splitlines()
        verts = [line for line in lines if line.startswith("v ")]
        loops = [line for line in lines if line.startswith("l ")]
        assert len(verts) == wulff1.grid.shape[0]
        assert len(loops) == 1
        assert loops[0].split()[-1] == "1"

    def test_surface_mesh_is_closed(self, tmp_path):
        W = build_wulff(QuadraticForm(np.diag([1.0, 2.0, 3.0])), make_grid(2, 12))
        path = tmp_path / "surface.obj"
        export_wulff_obj(W, path)
        lines = path.read_text().splitlines()
        verts = [line for line in lines if line.startswith("v ")]
        faces = [line for line in lines if line.startswith("f ")]
        nlat, nlon = W.grid.shape
        assert len(verts) == nlat * nlon + 2
        assert len(faces) == 2 * nlon + (nlat - 1) * nlon
        ids = {int(tok) for face in faces for tok in face.split()[1:]}
        assert min(ids) == 1
        assert max(ids) == len(verts)


class TestRunnerSmoke:
    def test_expansion_record_shape(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="expansion",
            integrand={"family": "quadratic_form", "M": M2},
            n=1,
            resolutions=(96,),
            eps_ladder=(0.08, 0.04, 0.02),
        )
        result = run_experiment(cfg, out_dir=tmp_path)
        checks = {r["check"] for r in result.records}
        assert len(checks) == 7
        assert len(result.records) == 7 * 3
        assert all(
            a.passed
            for a in result.assertions
            if a.name.endswith("calibrated-bound")
        )

    def test_oscillation_needs_two_resolutions(self):
        cfg = ExperimentConfig(
            experiment="oscillation",
            integrand={"family": "quadratic_form", "M": M2},
            n=1,
            resolutions=(64,),
        )
        with pytest.raises(ConfigError):
            run_experiment(cfg)

    def test_linearization_translation_branch_only_when_isotropic(self):
        iso = ExperimentConfig(
            experiment="linearization",
            integrand={"family": "constant_one"},
            n=1,
            resolutions=(96,),
            eps_ladder=(0.1, 0.05, 0.025),
        )
        aniso = ExperimentConfig(
            experiment="linearization",
            integrand={"family": "quadratic_form", "M": M2},
            n=1,
            resolutions=(96,),
            eps_ladder=(0.1, 0.05, 0.025),
        )
        res_iso = run_experiment(iso)
        res_aniso = run_experiment(aniso)
        assert any(r["kind"] == "translation" for r in res_iso.records)
        assert not any(r["kind"] == "translation" for r in res_aniso.records)
        assert res_iso.passed and res_aniso.passed


class TestCli:
    def _write_config(self, tmp_path, **overrides):
        data = {
            "experiment": "rigidity",
            "integrand": {"family": "quadratic_form", "M": M2},
            "n": 1,
            "resolutions": [32, 48, 64],
        }
        data.update(overrides)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    def test_run_passing(self, tmp_path, capsys):
        cfg = self._write_config(tmp_path)
        code = cli_main(["run", "--config", str(cfg), "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "PASS rigidity/max-deviation-at-finest" in out
        assert (tmp_path / "rigidity.csv").exists()
        assert (tmp_path / "rigidity.svg").exists()
        assert (tmp_path / "rigidity_summary.txt").exists()

    def test_run_failing_experiment(self, tmp_path, capsys):
        # a single coarse surface grid cannot reach the 1e-4 threshold
        cfg = self._write_config(
            tmp_path,
            n=2,
            resolutions=[8],
            integrand={"family": "quadratic_form", "M": [[1, 0, 0], [0, 2, 0], [0, 0, 3]]},
        )
        code = cli_main(["run", "--config", str(cfg), "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 1
        assert "FAIL rigidity/max-deviation-at-finest" in out

    def test_run_config_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken", encoding="utf-8")
        assert cli_main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2
        missing = tmp_path / "missing.json"
        assert (
            cli_main(["run", "--config", str(missing), "--out", str(tmp_path)]) == 2
        )
        unknown = self._write_config(tmp_path, experiment="nonsense")
        assert (
            cli_main(["run", "--config", str(unknown), "--out", str(tmp_path)]) == 2
        )
        assert "configuration error" in capsys.readouterr().err

    def test_wulff_subcommand_with_export(self, tmp_path, capsys):
        spec = tmp_path / "integrand.json"
        spec.write_text(json.dumps({"family": "quadratic_form", "M": M2}))
        code = cli_main(
            [
                "wulff",
                "--integrand",
                str(spec),
                "--res",
                "64",
                "--n",
                "1",
                "--export",
                "obj",
                "--out",
                str(tmp_path),
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "perimeter:" in out
        assert "gauge residual:" in out
        assert (tmp_path / "wulff.obj").exists()

    def test_spectrum_subcommand(self, tmp_path, capsys):
        spec = tmp_path / "integrand.json"
        spec.write_text(json.dumps({"family": "constant_one"}))
        code = cli_main(
            [
                "spectrum",
                "--integrand",
                str(spec),
                "--res",
                "64",
                "--n",
                "1",
                "--degree",
                "4",
                "--out",
                str(tmp_path),
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        table = (tmp_path / "spectrum.csv").read_text().splitlines()
        assert table[0] == "index,eigenvalue"
        assert len(table) - 1 == len(out.splitlines()) - 1
        values = [float(line.split(",")[1]) for line in table[1:]]
        assert values == sorted(values, reverse=True)
        # translations sit in the kernel of the second variation
        assert any(abs(v) < 1e-8 for v in values)
