import json
import math

import numpy as np
import pytest

from mom_robust.errors import ConfigError, IoError, ParseError
from mom_robust.harness import cli
from mom_robust.harness.config import Command, load_config, parse_config
from mom_robust.harness.experiments import (
    run_break_experiment,
    run_calibrate,
    run_coverage,
    run_learning,
)
from mom_robust.harness.io import Table, read_csv_dataset, read_results, write_results


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


class TestConfig:
    def test_defaults(self):
        c = parse_config({}, "break-mean")
        assert c.command is Command.BREAK_MEAN
        assert c.n_grid == [1000] and c.runs == 100 and c.mapping == "Harmonic"

    def test_command_spellings(self):
        for name in ("BreakVariance", "break-variance", "break_variance", "BREAKVARIANCE"):
            assert Command.parse(name) is Command.BREAK_VARIANCE
        with pytest.raises(ConfigError):
            Command.parse("break-everything")

    @pytest.mark.parametrize(
        "bad",
        [
            {"n_grid": []},
            {"n_grid": [100, 50]},
            {"n_grid": [0]},
            {"runs": 0},
            {"mapping": "Cubic"},
            {"seed": -1},
            {"colour": "blue"},
            {"params": [1, 2]},
        ],
    )
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            parse_config(bad, "break-mean")

    def test_command_conflict(self):
        with pytest.raises(ConfigError):
            parse_config({"command": "Coverage"}, "break-mean")

    def test_malformed_json_reports_position(self, tmp_path):
        path = write(tmp_path, "c.json", '{\n  "runs": 3,\n  "seed": }')
        with pytest.raises(ParseError) as info:
            load_config(path, "break-mean")
        assert info.value.line == 3

    def test_round_trip(self):
        c = parse_config({"n_grid": [50, 100], "runs": 4, "seed": 9, "params": {"trim": 0.2}}, "break-mean")
        assert parse_config(c.to_dict()) == c


class TestIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        t = Table(("a", "b", "c"))
        for _ in range(20):
            t.append((int(rng.integers(100)), float(rng.normal() * 10.0 ** int(rng.integers(-8, 8))), "x"))
        t.append((1, math.nan, None))
        t.append((2, math.inf, "y"))
        path = tmp_path / "t.csv"
        write_results(str(path), t)
        back = read_results(str(path))
        assert tuple(back.columns) == t.columns
        for r, s in zip(t.rows[:20], back.rows):
            assert r[0] == s[0] and r[2] == s[2]
            np.testing.assert_allclose(s[1], r[1], rtol=1e-12)
        assert math.isnan(back.rows[20][1]) and back.rows[20][2] is None
        assert back.rows[21][1] == math.inf

    def test_lf_and_dot_decimal(self, tmp_path):
        t = Table(("x",), [(0.5,), (1e-20,)])
        text = write_results(None, t)
        assert text == "x\n0.5\n1e-20\n"

    def test_dataset(self, tmp_path):
        path = write(tmp_path, "d.csv", "f1,f2,label\n1,2,0\n3,4.5,1\n-1,0,2\n")
        ds = read_csv_dataset(path)
        assert (ds.n, ds.p) == (3, 2)
        np.testing.assert_array_equal(ds.labels, [0, 1, 2])

    def test_dataset_bad_cell(self, tmp_path):
        path = write(tmp_path, "d.csv", "f1,f2,label\n1,2,0\n3,abc,1\n")
        with pytest.raises(ParseError) as info:
            read_csv_dataset(path)
        assert info.value.line == 3 and info.value.column == "f2"

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            read_csv_dataset(str(tmp_path / "absent.csv"))


class TestBreak:
    def test_variance_target(self):
        c = parse_config({"n_grid": [400], "runs": 3}, "break-variance")
        res = run_break_experiment(c)
        assert set(res.table.column("theta")) == {1 / 12}
        assert res.table.column("estimator") == ["u_stat", "mou"]

    def test_rows_self_describing(self):
        c = parse_config({"n_grid": [100, 400], "runs": 2}, "break-mean")
        t = run_break_experiment(c).table
        assert t.columns[:5] == ("n", "estimator", "theta", "mean_abs_error", "std_err")
        mom = t.where(estimator="mom")
        assert [r[t.columns.index("K")] for r in mom] == [34, 73]
        assert [r[t.columns.index("epsilon")] for r in mom] == [0.1, 0.05]

    def test_mann_whitney_breakdown_annotated(self):
        spec = {"inlier_dist": "Gaussian", "outlier_rule": {"kind": "DiracAt", "value": 9}, "outlier_fraction": 0.3}
        c = parse_config({"n_grid": [100], "runs": 1, "contamination": spec}, "mann-whitney")
        with pytest.raises(Exception) as info:
            run_break_experiment(c)
        assert "MannWhitney n=100" in str(info.value)


class TestCoverage:
    def test_gaussian_subgaussian_level(self):
        spec = {"inlier_dist": "Gaussian", "outlier_rule": "DiracAt", "outlier_fraction": 0.0}
        spec["outlier_rule"] = {"kind": "DiracAt", "value": 0.0}
        c = parse_config(
            {"n_grid": [100], "runs": 1000, "contamination": spec,
             "params": {"path": "subgaussian", "deltas": [math.exp(-5)]}},
            "coverage",
        )
        t = run_coverage(c).table
        (row,) = t.rows
        rate = row[t.columns.index("failure_rate")]
        d = math.exp(-5)
        assert rate <= d + 3 * math.sqrt(d * (1 - d) / 1000)

    def test_impossible_delta_is_error_row(self, tmp_path):
        cfg = write(tmp_path, "c.json", {"n_grid": [100], "runs": 5, "params": {"deltas": [0.9]}})
        out = tmp_path / "cov.csv"
        code = cli.main(["coverage", "--config", cfg, "--out", str(out)])
        assert code == cli.EXIT_NUMERIC
        t = read_results(str(out))
        (row,) = t.rows
        status = row[t.columns.index("status")]
        assert status.startswith("DeltaOutOfRange") and "exp(" in status
        assert row[t.columns.index("failures")] is None


class TestLearning:
    def test_zero_epochs_equal_cells(self):
        c = parse_config({"n_grid": [40], "runs": 2, "params": {"T": 0, "n_test": 30}}, "learn-ranking")
        risks = run_learning(c).table.column("mean_test_risk")
        assert len(set(risks)) == 1

    def test_contaminated_gd_is_worst(self):
        c = parse_config({"n_grid": [200], "runs": 8, "params": {"record_every": 300}}, "learn-ranking")
        t = run_learning(c).table
        risks = dict(zip(zip(t.column("setting"), t.column("method")), t.column("mean_test_risk")))
        assert max(risks, key=risks.get) == ("contaminated", "GD")

    @pytest.mark.slow
    def test_sane_columns_close(self):
        c = parse_config(
            {"n_grid": [200], "runs": 20, "params": {"T": 1000, "record_every": 1000}}, "learn-ranking"
        )
        t = run_learning(c).table
        gd, mou = t.where(setting="sane", method="GD")[0], t.where(setting="sane", method="MoU-GD")[0]
        i = t.columns.index("mean_test_risk")
        assert abs(mou[i] - gd[i]) <= 0.10 * gd[i]

    def test_metric_runs_from_csv(self, tmp_path):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(90, 3))
        y = (X[:, 0] > 0).astype(int)
        lines = ["a,b,c,label"] + [",".join(map(repr, r.tolist())) + f",{v}" for r, v in zip(X, y)]
        path = write(tmp_path, "d.csv", "\n".join(lines) + "\n")
        c = parse_config(
            {"n_grid": [60], "runs": 1, "params": {"dataset": path, "T": 5, "test_fraction": 0.25}},
            "learn-metric",
        )
        res = run_learning(c)
        assert len(res.table.rows) == 4
        assert len(res.traces) == 4

    def test_unknown_param(self):
        c = parse_config({"params": {"learning_rate": 1}}, "learn-ranking")
        with pytest.raises(ConfigError):
            run_learning(c)


class TestCalibrate:
    def test_table(self):
        c = parse_config({"n_grid": [300], "params": {"epsilons": [0.0, 0.1]}}, "calibrate")
        t = run_calibrate(c).table
        assert t.column("K_subgaussian") == [1, 100]
        assert t.column("beta")[1] == pytest.approx(5.0)


class TestCLI:
    def test_byte_identical_outputs(self, tmp_path):
        cfg = write(tmp_path, "c.json", {"n_grid": [500], "runs": 1, "seed": 3})
        outs = []
        for i in range(2):
            out = tmp_path / f"r{i}.csv"
            assert cli.main(["break-mean", "--config", cfg, "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        meta = json.loads((tmp_path / "r0.meta.json").read_text())
        assert meta["config"]["seed"] == 3

    def test_seed_override(self, tmp_path):
        cfg = write(tmp_path, "c.json", {"n_grid": [500], "runs": 2, "seed": 3})
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        cli.main(["break-mean", "--config", cfg, "--out", str(a)])
        cli.main(["break-mean", "--config", cfg, "--seed", "4", "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()

    def test_stdout(self, capsys):
        assert cli.main(["calibrate"]) == 0
        assert capsys.readouterr().out.startswith("n,epsilon,mapping")

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"runs": 0})
        assert cli.main(["break-mean", "--config", cfg]) == cli.EXIT_CONFIG
        assert cli.main(["break-mean", "--config", str(tmp_path / "none.json")]) == cli.EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_numeric_error_exit(self, tmp_path):
        spec = {"inlier_dist": "Gaussian", "outlier_rule": {"kind": "DiracAt", "value": 1}, "outlier_fraction": 0.3}
        cfg = write(tmp_path, "c.json", {"n_grid": [100], "runs": 1, "contamination": spec})
        assert cli.main(["mann-whitney", "--config", cfg]) == cli.EXIT_NUMERIC

    def test_traces_written(self, tmp_path):
        cfg = write(tmp_path, "c.json", {"n_grid": [30], "runs": 1, "params": {"T": 4, "n_test": 20}})
        out = tmp_path / "lr.csv"
        assert cli.main(["learn-ranking", "--config", cfg, "--out", str(out)]) == 0
        trace = read_results(str(tmp_path / "lr.trace.n30.contaminated.MoU-GD.csv"))
        assert trace.column("epoch") == [4]
