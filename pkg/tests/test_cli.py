import json

import numpy as np
import pandas as pd
import pytest
import yaml
from numpy.testing import assert_array_equal

from Differential_Network.main import EXIT_DATA, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, main
from utils.data_processing import dense_from_edges, load_csv
from utils.data_read_write import BENCH_COLUMNS, PATH_COLUMNS, RunMetadata, read_metadata
from utils.errors import InvalidArgumentError
from utils.initialization import load_configs


def run(command, tmp_path, out, *args):
    return main([command, "--log-dir", str(tmp_path / "logs"), "--out-dir", str(out), *args])


@pytest.fixture
def simulated(tmp_path):
    out = tmp_path / "sim"
    code = run("simulate", tmp_path, out, "--p", "12", "--n1", "40", "--n2", "40", "--seed", "7")
    assert code == EXIT_OK
    return out


class TestSimulate:
    def test_outputs(self, simulated):
        x, names = load_csv(simulated / "x.csv")
        assert x.shape == (40, 12)
        assert names == [f"V{k}" for k in range(1, 13)]

        truth = pd.read_csv(simulated / "truth.csv")
        assert truth[["i", "j"]].values.tolist() == [[1, 2], [2, 2]]
        assert truth["value"].tolist() == [-1.0, 2.0]

        meta = json.loads((simulated / "meta.json").read_text(encoding="utf-8"))
        assert meta["seed"] == 7
        assert set(meta["extra"]["output_checksums"]) == {"x.csv", "y.csv", "truth.csv"}

    def test_deterministic(self, tmp_path, simulated):
        again = tmp_path / "again"
        assert run("simulate", tmp_path, again, "--p", "12", "--n1", "40", "--n2", "40", "--seed", "7") == EXIT_OK
        for name in ("x.csv", "y.csv", "truth.csv"):
            assert (again / name).read_bytes() == (simulated / name).read_bytes()

    def test_p_too_small(self, tmp_path):
        assert run("simulate", tmp_path, tmp_path / "o", "--p", "1") == EXIT_USAGE


class TestEstimate:
    def data_args(self, simulated):
        return ["--x", str(simulated / "x.csv"), "--y", str(simulated / "y.csv")]

    def test_lambda_max_gives_empty_estimate(self, tmp_path, simulated):
        first = tmp_path / "first"
        assert run("estimate", tmp_path, first, *self.data_args(simulated)) == EXIT_OK
        lambda_max = read_metadata(first / "meta.json").lambda_max
        assert lambda_max > 0

        out = tmp_path / "at_max"
        code = run("estimate", tmp_path, out, *self.data_args(simulated), "--lambda", repr(lambda_max))
        assert code == EXIT_OK
        delta, _ = load_csv(out / "delta.csv", has_header=False)
        assert_array_equal(delta, np.zeros((12, 12)))
        assert pd.read_csv(out / "edges.csv").empty

    def test_identical_inputs(self, tmp_path, simulated):
        x = str(simulated / "x.csv")
        out = tmp_path / "same"
        assert run("estimate", tmp_path, out, "--x", x, "--y", x) == EXIT_OK
        delta, _ = load_csv(out / "delta.csv", has_header=False)
        assert not delta.any()
        meta = read_metadata(out / "meta.json")
        assert meta.lambda_max == 0.0
        assert meta.converged

    def test_edges_match_dense_estimate(self, tmp_path, simulated):
        out = tmp_path / "est"
        code = run("estimate", tmp_path, out, *self.data_args(simulated), "--loss", "asym", "--tol", "1e-8")
        assert code == EXIT_OK
        delta, _ = load_csv(out / "delta.csv", has_header=False)
        edges = pd.read_csv(out / "edges.csv")
        symmetric = np.array_equal(delta, delta.T)
        assert_array_equal(dense_from_edges(edges, 12, symmetric=symmetric), delta)

        meta = read_metadata(out / "meta.json")
        assert meta.solver == "fista"
        assert meta.loss_kind == "asym"
        assert meta.lipschitz_used > 0
        assert set(meta.input_checksums) == {"x.csv", "y.csv"}

    def test_fista_and_admm_agree(self, tmp_path, simulated):
        # ADMM 原始可行性阈值收紧后两者目标函数值应一致
        main_config, utils_config = load_configs()
        main_config["solver"]["admm"]["primal_tol"] = 1e-8
        config_dir = tmp_path / "configs"
        config_dir.mkdir()
        (config_dir / "main_config.yaml").write_text(yaml.safe_dump(main_config), encoding="utf-8")
        (config_dir / "utils_config.yaml").write_text(yaml.safe_dump(utils_config), encoding="utf-8")

        objectives = {}
        for solver in ("fista", "admm"):
            out = tmp_path / solver
            code = run(
                "estimate", tmp_path, out, *self.data_args(simulated),
                "--config-dir", str(config_dir), "--loss", "asym", "--solver", solver,
                "--tol", "1e-10", "--max-iter", "50000",
            )
            assert code == EXIT_OK
            objectives[solver] = read_metadata(out / "meta.json").objective
        assert objectives["fista"] == pytest.approx(objectives["admm"], rel=1e-4, abs=1e-6)

    def test_default_loss_writes_upper_triangle(self, tmp_path):
        sim = tmp_path / "sim30"
        assert run("simulate", tmp_path, sim, "--p", "30", "--n1", "60", "--n2", "60", "--seed", "3") == EXIT_OK
        out = tmp_path / "sym"
        code = run("estimate", tmp_path, out, "--x", str(sim / "x.csv"), "--y", str(sim / "y.csv"), "--lambda", "0.05")
        assert code == EXIT_OK
        delta, _ = load_csv(out / "delta.csv", has_header=False)
        assert_array_equal(delta, delta.T)
        edges = pd.read_csv(out / "edges.csv")
        assert not edges.empty
        assert (edges["i"] <= edges["j"]).all()
        assert_array_equal(dense_from_edges(edges, 30, symmetric=True), delta)

        path_out = tmp_path / "sym_path"
        code = run("path", tmp_path, path_out, "--x", str(sim / "x.csv"), "--y", str(sim / "y.csv"), "--nlambda", "5")
        assert code == EXIT_OK
        frame = pd.read_csv(path_out / "path.csv")
        assert (frame["i"] <= frame["j"]).all()

    def test_non_binary_label_is_data_error(self, tmp_path, simulated):
        x_lines = (simulated / "x.csv").read_text(encoding="utf-8").splitlines()
        rows = [x_lines[0] + ",group"] + [f"{line},{'abc'[k % 3]}" for k, line in enumerate(x_lines[1:])]
        data = tmp_path / "three.csv"
        data.write_text("\n".join(rows) + "\n", encoding="utf-8")
        assert run("estimate", tmp_path, tmp_path / "o", "--data", str(data), "--label", "group") == EXIT_DATA

    def test_not_converged_still_writes(self, tmp_path, simulated):
        out = tmp_path / "short"
        first = tmp_path / "first"
        assert run("estimate", tmp_path, first, *self.data_args(simulated)) == EXIT_OK
        lam = 0.1 * read_metadata(first / "meta.json").lambda_max
        code = run("estimate", tmp_path, out, *self.data_args(simulated), "--lambda", repr(lam), "--max-iter", "1")
        assert code == EXIT_NOT_CONVERGED
        meta = read_metadata(out / "meta.json")
        assert meta.converged is False
        assert meta.iterations == 1
        assert (out / "delta.csv").exists()

    def test_labeled_input(self, tmp_path, simulated):
        x_lines = (simulated / "x.csv").read_text(encoding="utf-8").splitlines()
        y_lines = (simulated / "y.csv").read_text(encoding="utf-8").splitlines()
        rows = [x_lines[0] + ",group"] + [line + ",a" for line in x_lines[1:]] + [line + ",b" for line in y_lines[1:]]
        data = tmp_path / "labeled.csv"
        data.write_text("\n".join(rows) + "\n", encoding="utf-8")

        out_split = tmp_path / "split"
        out_labeled = tmp_path / "labeled"
        assert run("estimate", tmp_path, out_split, *self.data_args(simulated), "--lambda", "0.05") == EXIT_OK
        assert run("estimate", tmp_path, out_labeled, "--data", str(data), "--label", "group",
                   "--lambda", "0.05") == EXIT_OK
        assert (out_split / "delta.csv").read_bytes() == (out_labeled / "delta.csv").read_bytes()


class TestPath:
    def test_single_lambda_is_lambda_max(self, tmp_path, simulated):
        out = tmp_path / "path1"
        code = run("path", tmp_path, out, "--x", str(simulated / "x.csv"), "--y", str(simulated / "y.csv"),
                   "--nlambda", "1")
        assert code == EXIT_OK
        meta = read_metadata(out / "meta.json")
        assert meta.grid["values"] == [meta.lambda_max]

        frame = pd.read_csv(out / "path.csv")
        assert list(frame.columns) == PATH_COLUMNS
        assert frame[["i", "j", "value"]].values.tolist() == [[0, 0, 0.0]]

    def test_path_grid_and_meta(self, tmp_path, simulated):
        out = tmp_path / "path5"
        code = run("path", tmp_path, out, "--x", str(simulated / "x.csv"), "--y", str(simulated / "y.csv"),
                   "--nlambda", "5", "--lambda-min-ratio", "0.3")
        assert code == EXIT_OK
        meta = read_metadata(out / "meta.json")
        values = meta.grid["values"]
        assert len(values) == 5 and len(meta.per_lambda) == 5
        assert values[0] == meta.lambda_max
        assert values[-1] == pytest.approx(0.3 * meta.lambda_max, rel=1e-12)
        assert np.all(np.diff(values) < 0)
        assert meta.iterations == sum(entry["iterations"] for entry in meta.per_lambda)

        frame = pd.read_csv(out / "path.csv")
        assert frame["lambda"].unique().tolist() == pytest.approx(values)

    @pytest.mark.slow
    def test_default_path_on_sparse_case(self, tmp_path):
        sim = tmp_path / "sim100"
        assert run("simulate", tmp_path, sim, "--p", "100", "--seed", "2019") == EXIT_OK
        out = tmp_path / "path50"
        assert run("path", tmp_path, out, "--x", str(sim / "x.csv"), "--y", str(sim / "y.csv")) == EXIT_OK

        meta = read_metadata(out / "meta.json")
        values = meta.grid["values"]
        assert len(values) == 50
        assert values[0] == meta.lambda_max
        assert values[-1] == pytest.approx(0.5 * meta.lambda_max, rel=1e-12)

        frame = pd.read_csv(out / "path.csv", float_precision="round_trip")
        assert frame["lambda"].unique().tolist() == values
        assert (frame["i"] <= frame["j"]).all()
        edges = frame[frame["i"] > 0]
        counts = [int((edges["lambda"] == lam).sum()) for lam in values]
        assert counts[0] == 0
        assert counts[-1] >= 1
        # 与路径模块相同的口径：λ 递减时边数基本不减
        drops = sum(1 for a, b in zip(counts, counts[1:]) if b < a)
        assert drops <= 3

    def test_identical_inputs_rejected(self, tmp_path, simulated):
        x = str(simulated / "x.csv")
        assert run("path", tmp_path, tmp_path / "o", "--x", x, "--y", x) == EXIT_DATA


class TestExitCodes:
    def test_unknown_flag(self, tmp_path):
        assert main(["estimate", "--bogus"]) == EXIT_USAGE

    def test_missing_inputs(self, tmp_path):
        assert run("estimate", tmp_path, tmp_path / "o") == EXIT_USAGE

    def test_missing_file(self, tmp_path):
        missing = str(tmp_path / "nope.csv")
        assert run("estimate", tmp_path, tmp_path / "o", "--x", missing, "--y", missing) == EXIT_DATA

    def test_malformed_file(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n3\n", encoding="utf-8")
        assert run("estimate", tmp_path, tmp_path / "o", "--x", str(bad), "--y", str(bad)) == EXIT_DATA

    def test_negative_lambda(self, tmp_path, simulated):
        code = run("estimate", tmp_path, tmp_path / "o", "--x", str(simulated / "x.csv"),
                   "--y", str(simulated / "y.csv"), "--lambda", "-1")
        assert code == EXIT_USAGE

    def test_admm_rejects_sym_loss(self, tmp_path, simulated):
        code = run("estimate", tmp_path, tmp_path / "o", "--x", str(simulated / "x.csv"),
                   "--y", str(simulated / "y.csv"), "--solver", "admm", "--loss", "sym")
        assert code == EXIT_USAGE


class TestBench:
    def test_rows(self, tmp_path):
        out = tmp_path / "bench"
        code = run("bench", tmp_path, out, "--p", "10", "--reps", "2", "--n1", "30", "--n2", "30",
                   "--nlambda", "3", "--solver", "fista", "admm", "--mode", "lowrank", "dense")
        assert code == EXIT_OK
        frame = pd.read_csv(out / "bench.csv")
        assert list(frame.columns) == BENCH_COLUMNS
        # 每次重复：fista 两种模式 + admm 一次
        assert len(frame) == 6
        assert set(frame.loc[frame["solver"] == "admm", "mode"]) == {"dense"}
        assert (frame["seconds"] > 0).all()
        assert (frame["iterations_total"] >= 1).all()

        # 同一数据上两种梯度模式的迭代次数一致
        fista = frame[frame["solver"] == "fista"].pivot(index="rep", columns="mode", values="iterations_total")
        assert (fista["lowrank"] - fista["dense"]).abs().max() <= 2

    @pytest.mark.slow
    def test_lowrank_faster_when_p_exceeds_n(self, tmp_path):
        out = tmp_path / "bench"
        code = run("bench", tmp_path, out, "--p", "400", "--reps", "3", "--n1", "100", "--n2", "100",
                   "--solver", "fista", "--mode", "lowrank", "dense")
        assert code == EXIT_OK
        frame = pd.read_csv(out / "bench.csv")
        seconds = frame.groupby("mode")["seconds"].median()
        assert seconds["lowrank"] < seconds["dense"]


class TestRunMetadata:
    def test_round_trip(self, tmp_path):
        meta = RunMetadata(command="estimate", loss_kind="sym", lambda_=0.25, iterations=np.int64(12),
                           objective=np.float64(-1.5), converged=True)
        path = meta.write(tmp_path / "meta.json")
        raw = json.loads(path.read_text(encoding="utf-8"))
        assert raw["lambda"] == 0.25 and "lambda_" not in raw
        assert read_metadata(path) == RunMetadata(command="estimate", loss_kind="sym", lambda_=0.25,
                                                  iterations=12, objective=-1.5, converged=True)

    def test_rejects_non_finite(self, tmp_path):
        meta = RunMetadata(command="path", per_lambda=[{"objective": float("nan")}])
        with pytest.raises(InvalidArgumentError):
            meta.write(tmp_path / "meta.json")
