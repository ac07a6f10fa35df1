import json

import numpy as np
import pytest

import qmoments as qm
from qmoments import UsageError, read_long_csv
from qmoments.cli import (
    ExperimentConfig,
    build_parser,
    diff_report,
    main,
    parse_config,
    run_experiment,
)


def tiny_model_file(tmp_path, horizon=4.0):
    from qmoments.systems import RetrialParams
    from qmoments.schedule import TimeSchedule

    params = RetrialParams(
        servers=TimeSchedule.constant(3),
        arrival=TimeSchedule.alternating(2, 4, 2.0, horizon),
        service=TimeSchedule.constant(1.0),
        retrial_rate=TimeSchedule.constant(0.5),
        abandon=TimeSchedule.constant(2.0),
        leave_prob=TimeSchedule.constant(0.5),
    )
    model = qm.build_retrial(params, horizon)
    path = tmp_path / "tiny.json"
    qm.save_model(model, path)
    return str(path)


def parse_run(argv):
    parser = build_parser()
    return parse_config(parser.parse_args(["run", *argv]))


class TestParsing:
    def test_preset_invocation(self):
        cfg = parse_run(
            [
                "--preset", "7",
                "--methods", "adjusted,measure-zero,simulate",
                "--reps", "5000",
                "--seed", "42",
                "--out", "outdir",
            ]
        )
        assert cfg.preset == 7 and cfg.model_path is None
        assert cfg.methods == ["adjusted", "measure-zero", "simulate"]
        assert cfg.reps == 5000 and cfg.seed == 42
        assert cfg.dt == 0.01 and cfg.quad_order == 32

    def test_dt_override(self):
        cfg = parse_run(
            ["--preset", "7", "--methods", "fluid", "--out", "o", "--dt", "0.005"]
        )
        assert cfg.dt == 0.005

    def test_missing_methods_is_usage_error(self):
        with pytest.raises(UsageError, match="methods"):
            parse_run(["--preset", "7", "--out", "o"])

    def test_unknown_method_named_in_error(self):
        with pytest.raises(UsageError, match="montecarlo"):
            parse_run(["--preset", "7", "--methods", "montecarlo", "--out", "o"])

    def test_preset_and_model_mutually_exclusive(self):
        with pytest.raises(UsageError, match="preset"):
            parse_run(
                ["--preset", "1", "--model", "m.json", "--methods", "fluid", "--out", "o"]
            )

    def test_exact_requires_caps(self):
        with pytest.raises(UsageError, match="caps"):
            parse_run(["--preset", "1", "--methods", "exact", "--out", "o"])

    def test_grid_parsing(self):
        cfg = parse_run(
            ["--preset", "1", "--methods", "fluid", "--out", "o", "--grid", "6:15:1"]
        )
        np.testing.assert_allclose(cfg.grid, np.arange(6.0, 16.0))

    def test_config_file_with_flag_override(self, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(
            json.dumps({"preset": 2, "methods": "fluid,adjusted", "out": "fromfile", "reps": 10})
        )
        parser = build_parser()
        args = parser.parse_args(
            ["run", "--config", str(config), "--reps", "25"]
        )
        cfg = parse_config(args)
        assert cfg.preset == 2
        assert cfg.methods == ["fluid", "adjusted"]
        assert cfg.out_dir == "fromfile"
        assert cfg.reps == 25  # flag wins over file

    def test_missing_model_file_is_usage_error(self, tmp_path):
        code = main(
            [
                "run",
                "--model", str(tmp_path / "nope.json"),
                "--methods", "fluid",
                "--out", str(tmp_path / "o"),
            ]
        )
        assert code == 2


class TestRunAndReport:
    def test_end_to_end_run_produces_all_outputs(self, tmp_path):
        model_path = tiny_model_file(tmp_path)
        out = tmp_path / "run"
        code = main(
            [
                "run",
                "--model", model_path,
                "--methods", "fluid,adjusted,measure-zero,simulate,exact",
                "--reps", "60",
                "--seed", "3",
                "--grid", "0:4:1",
                "--caps", "12,12",
                "--out", str(out),
            ]
        )
        assert code == 0
        for name in (
            "fluid.csv",
            "adjusted.csv",
            "measure-zero.csv",
            "simulate.csv",
            "exact.csv",
            "combined.csv",
            "run.json",
        ):
            assert (out / name).exists()
        results = {r.method: r for r in read_long_csv(out / "combined.csv")}
        assert set(results) == {"fluid", "adjusted", "measure-zero", "simulate", "exact"}
        assert results["simulate"].count == 60

        report_code = main(["report", "--in", str(out)])
        assert report_code == 0
        report_lines = (out / "diff_report.csv").read_text().splitlines()
        assert report_lines[0] == "experiment,method,stat,t,value,simulation,difference"
        assert len(report_lines) > 1

    def test_single_replication_omits_covariance(self, tmp_path):
        model_path = tiny_model_file(tmp_path)
        out = tmp_path / "run1"
        code = main(
            [
                "run",
                "--model", model_path,
                "--methods", "simulate",
                "--reps", "1",
                "--grid", "0:4:2",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert "cov_" not in (out / "simulate.csv").read_text()

    def test_repeated_runs_are_byte_identical(self, tmp_path):
        model_path = tiny_model_file(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        argv = [
            "run",
            "--model", model_path,
            "--methods", "adjusted,simulate",
            "--reps", "40",
            "--seed", "9",
            "--grid", "0:4:1",
        ]
        assert main([*argv, "--out", str(out_a)]) == 0
        assert main([*argv, "--out", str(out_b)]) == 0
        assert (out_a / "combined.csv").read_bytes() == (out_b / "combined.csv").read_bytes()

    def test_divergent_method_exits_3_but_writes_others(self, tmp_path):
        model = qm.NetworkModel(
            1,
            (
                qm.Transition(
                    (1,),
                    qm.RateTerm(qm.TimeSchedule.constant(100.0), qm.Linear((1.0,))),
                ),
            ),
            (1,),
            10.0,
        )
        path = tmp_path / "explode.json"
        qm.save_model(model, path)
        out = tmp_path / "run"
        code = main(
            [
                "run",
                "--model", str(path),
                "--methods", "fluid,simulate",
                "--reps", "2",
                "--grid", "0:0.1:0.1",
                "--out", str(out),
            ]
        )
        assert code == 3
        manifest = json.loads((out / "run.json").read_text())
        assert "fluid" in manifest["errors"]

    def test_report_without_simulation_is_usage_error(self, tmp_path):
        model_path = tiny_model_file(tmp_path)
        out = tmp_path / "runf"
        main(
            [
                "run", "--model", model_path, "--methods", "fluid",
                "--grid", "0:4:1", "--out", str(out),
            ]
        )
        assert main(["report", "--in", str(out)]) == 2


class TestDiffReport:
    def _results(self, tmp_path):
        model_path = tiny_model_file(tmp_path)
        cfg = ExperimentConfig(
            methods=["adjusted", "measure-zero", "simulate"],
            out_dir=str(tmp_path / "rr"),
            model_path=model_path,
            reps=50,
            seed=5,
            grid=np.arange(0.0, 5.0),
        )
        results, errors = run_experiment(cfg)
        assert not errors
        return results

    def test_method_against_itself_is_zero(self, tmp_path):
        results = self._results(tmp_path)
        doctored = {"simulate": results["simulate"], "adjusted": results["simulate"]}
        report = diff_report(doctored)
        assert all(row[6] == 0.0 for row in report.rows)

    def test_swapping_reference_negates_differences(self, tmp_path):
        results = self._results(tmp_path)
        forward = diff_report(
            {"simulate": results["simulate"], "adjusted": results["adjusted"]}
        )
        backward = diff_report(
            {"simulate": results["adjusted"], "adjusted": results["simulate"]}
        )
        for row_f, row_b in zip(forward.rows, backward.rows):
            assert row_f[6] == pytest.approx(-row_b[6], abs=1e-12)

    def test_grid_mismatch_rejected(self, tmp_path):
        results = self._results(tmp_path)
        short = qm.MomentTrajectory(
            "adjusted",
            results["adjusted"].times[:-1],
            results["adjusted"].means[:-1],
            results["adjusted"].covs[:-1],
        )
        with pytest.raises(UsageError):
            diff_report({"simulate": results["simulate"], "adjusted": short})

    def test_row_count_covers_all_statistics(self, tmp_path):
        results = self._results(tmp_path)
        report = diff_report(results)
        # 2 methods x 5 grid points x (2 means + 3 covariance entries)
        assert len(report.rows) == 2 * 5 * 5
