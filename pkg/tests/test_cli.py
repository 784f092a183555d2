# -*- coding: utf-8 -*-

""" Tests for modjoint.cli. """

import io
import json

import pandas as pd
import pytest
from click.testing import CliRunner

from modjoint import __version__ as modjoint_version
from modjoint import cli
from modjoint.costs import ALPHA_TABLE_COLUMNS

from .fixtures import fixture_file

BASE_CFG = {
    "n_exclusive": 2,
    "n_shared": 1,
    "n_clusters": 2,
    "n_intervals": 3,
    "period_s": 600.0,
    "horizon_s": 1800.0,
    "seed": 7,
}


class CLIHelper:
    def __init__(self, tmp_path):
        self._tmp_path = tmp_path

    def cfg(self, config_name="modjoint.yml", **kw):
        d = {
            "network_nodes": fixture_file("nodes.csv"),
            "network_edges": fixture_file("edges.csv"),
            "demand": fixture_file("demand.csv"),
        }
        d.update(BASE_CFG)
        d.update(kw)
        cfg_file = self._tmp_path / config_name
        cfg_file.write_text(json.dumps(d))
        return str(cfg_file)

    def path(self, name):
        return str(self._tmp_path / name)

    def invoke(self, args, output=None, exit_code=0, cfg=None):
        if cfg is None:
            cfg = {}
        runner = CliRunner()
        result = runner.invoke(
            cli.modjoint,
            ["--cfg", self.cfg(**cfg), "--log-level", "ERROR"] + args,
            catch_exceptions=False,
        )
        assert result.exit_code == exit_code, result.output
        if output is not None:
            assert result.output.splitlines() == output
        return result

    def invoke_json(self, args, cfg=None):
        return json.loads(self.invoke(args, cfg=cfg).output)


@pytest.fixture
def cli_helper(tmp_path):
    return CLIHelper(tmp_path)


class TestModJoint:
    def test_version(self):
        result = CliRunner().invoke(cli.modjoint, ["--version"])
        assert result.exit_code == 0
        assert result.output == "modjoint, version {}\n".format(modjoint_version)

    def test_help(self, cli_helper):
        result = cli_helper.invoke(["--help"])
        assert "Joint pricing and dispatch" in result.output
        for command in ("simulate", "price-quote", "batch-quote", "validate"):
            assert command in result.output

    def test_bad_config_value(self, cli_helper):
        result = cli_helper.invoke(["validate"], exit_code=1, cfg={"n_clusters": "x"})
        assert result.output.startswith("Error: ")


class TestSimulate:
    def test_simulate(self, cli_helper):
        data = cli_helper.invoke_json(["simulate", "--policy", "bpd"])
        assert set(data) == {"manifest", "report"}
        assert data["manifest"]["seed"] == 7
        assert "wall_clock" not in data["manifest"]
        report = data["report"]
        assert report["policy"] == "bpd"
        assert report["requests_total"] == 4
        assert (
            report["served"] + report["lost"] + report["declined"]
            == report["requests_total"]
        )

    def test_seed_override(self, cli_helper):
        data = cli_helper.invoke_json(
            ["simulate", "--seed", "3", "--record-wall-clock"]
        )
        assert data["manifest"]["seed"] == 3
        assert data["manifest"]["config"]["seed"] == 3
        assert data["manifest"]["wall_clock"]["seconds"] >= 0.0

    def test_demand_override(self, cli_helper, tmp_path):
        demand = tmp_path / "one.csv"
        demand.write_text("request_time_s,origin_node,dest_node\n0.0,0,4\n")
        data = cli_helper.invoke_json(["simulate", "--demand", str(demand)])
        assert data["report"]["requests_total"] == 1

    def test_outputs(self, cli_helper, tmp_path):
        series = cli_helper.path("series.csv")
        ilp = cli_helper.path("ilp.json")
        graphs = tmp_path / "graphs"
        cli_helper.invoke(
            [
                "simulate",
                "--policy",
                "batch-static",
                "--series-out",
                series,
                "--dump-graphs",
                str(graphs),
                "--dump-ilp",
                ilp,
            ]
        )
        df = pd.read_csv(series)
        assert list(df.columns) == cli.SERIES_COLUMNS
        assert df["requests"].sum() == 4
        assert (graphs / "rv_graph.csv").exists()
        assert (graphs / "esv_graph.csv").exists()
        with open(ilp) as f:
            batches = json.load(f)
        assert batches and batches[0]["batch"] == 0

    def test_alpha_out(self, cli_helper):
        alpha = cli_helper.path("alpha.csv")
        cli_helper.invoke(["simulate", "--policy", "bpd", "--alpha-out", alpha])
        df = pd.read_csv(alpha)
        assert list(df.columns) == ALPHA_TABLE_COLUMNS
        data = cli_helper.invoke_json(["validate"], cfg={"alpha_table": alpha})
        assert data["alpha_cells"] == len(df.groupby(["o_cluster", "d_cluster"]))

    def test_unknown_policy(self, cli_helper):
        cli_helper.invoke(["simulate", "--policy", "surge"], exit_code=2)


class TestPriceQuote:
    def quote(self, cli_helper, args, **kw):
        result = cli_helper.invoke(["price-quote"] + args, **kw)
        return pd.read_csv(io.StringIO(result.output))

    def test_both(self, cli_helper):
        df = self.quote(cli_helper, ["--ce", "1", "--cs", "1"])
        assert list(df.columns) == ["p_e", "p_s", "expected_profit"]
        assert len(df) == 1
        row = df.iloc[0]
        assert row["p_e"] == pytest.approx(row["p_s"])
        assert row["p_e"] > 1.0
        assert row["expected_profit"] > 0.0

    def test_equal_markups(self, cli_helper):
        df = self.quote(
            cli_helper,
            ["--ue", "0.5", "--us", "0.2", "--uo", "-0.3", "--ce", "6", "--cs", "4"],
        )
        row = df.iloc[0]
        assert row["p_e"] - row["p_s"] == pytest.approx(2.0)

    def test_beta_p(self, cli_helper):
        steep = self.quote(cli_helper, ["--ce", "1", "--cs", "1", "--beta-p", "-2"])
        flat = self.quote(cli_helper, ["--ce", "1", "--cs", "1", "--beta-p", "-0.1"])
        assert steep.iloc[0]["p_e"] < flat.iloc[0]["p_e"]

    def test_positive_beta_p(self, cli_helper):
        cli_helper.invoke(
            ["price-quote", "--ce", "1", "--cs", "1", "--beta-p", "0.5"], exit_code=2
        )

    def test_exclusive_only(self, cli_helper):
        df = self.quote(cli_helper, ["--ce", "2", "--cs", "1", "--offer", "exclusive"])
        row = df.iloc[0]
        assert pd.isna(row["p_s"])
        assert row["p_e"] > 2.0
        assert row["expected_profit"] > 0.0

    def test_missing_cost(self, cli_helper):
        cli_helper.invoke(["price-quote", "--ce", "1"], exit_code=2)


class TestBatchQuote:
    ARGS = [
        "batch-quote",
        "--c-1e",
        "1.0",
        "--c-2e",
        "1.0",
        "--c-1s",
        "0.8",
        "--c-2s",
        "0.8",
        "--c-ss",
        "1.2",
    ]

    def test_quote(self, cli_helper):
        data = cli_helper.invoke_json(self.ARGS)
        assert set(data["prices"]) == {"p_1s", "p_1e", "p_2s", "p_2e"}
        assert set(data["probabilities"]) == {"P_1s", "P_1e", "P_2s", "P_2e"}
        assert data["method"] in ("newton", "grid", "bounded")
        assert isinstance(data["certificate"], bool)
        assert data["expected_profit"] > 0.0

    def test_grid_agrees(self, cli_helper):
        newton = cli_helper.invoke_json(self.ARGS)
        grid = cli_helper.invoke_json(self.ARGS + ["--grid"])
        assert grid["method"] != "newton"
        assert newton["expected_profit"] >= grid["expected_profit"] - 1e-3


class TestExperiments:
    def test_calibrate_multiplier(self, cli_helper):
        data = cli_helper.invoke_json(
            ["calibrate-multiplier", "--candidates", "1.0,2.0"]
        )
        assert data["chosen"] in (1.0, 2.0)
        assert len(data["candidates"]) == 2

    def test_bad_candidates(self, cli_helper):
        cli_helper.invoke(
            ["calibrate-multiplier", "--candidates", "1.0,fast"], exit_code=2
        )

    def test_sweep_retrospective(self, cli_helper):
        data = cli_helper.invoke_json(
            ["sweep-retrospective", "--grid", "0.0,0.5", "--policy", "spd"]
        )
        assert list(data["argmax"]) == ["spd"]
        assert len(data["profits"]) == 2

    def test_cost_converge(self, cli_helper):
        table = cli_helper.path("table.csv")
        data = cli_helper.invoke_json(
            [
                "cost-converge",
                "--days",
                "2",
                "--policy",
                "spd",
                "--same-demand",
                "--table-out",
                table,
                "--alpha-out",
                cli_helper.path("alpha.csv"),
            ]
        )
        assert len(data["mad"]) == 1
        assert list(pd.read_csv(cli_helper.path("alpha.csv")).columns) == (
            ALPHA_TABLE_COLUMNS
        )
        assert len(data["profits"]) == 2
        with open(table) as f:
            assert f.readline().strip()

    def test_cost_converge_one_day(self, cli_helper):
        cli_helper.invoke(["cost-converge", "--days", "1"], exit_code=2)


class TestInputs:
    def test_validate(self, cli_helper):
        data = cli_helper.invoke_json(["validate"])
        assert data == {"nodes": 5, "edges": 10, "requests": 4, "valid": True}

    def test_validate_bad_demand(self, cli_helper):
        cli_helper.invoke(
            ["validate", "--demand", fixture_file("demand-unknown-node.csv")],
            output=["Error: line 3: unknown node 9"],
            exit_code=1,
        )

    def test_gen_network(self, cli_helper):
        nodes, edges = cli_helper.path("nodes.csv"), cli_helper.path("edges.csv")
        data = cli_helper.invoke_json(
            ["gen-network", nodes, edges], cfg={"grid_rows": 3, "grid_cols": 3}
        )
        assert data == {"nodes": 9, "edges": 24}
        data = cli_helper.invoke_json(
            ["validate"],
            cfg={"network_nodes": nodes, "network_edges": edges, "demand": None},
        )
        assert data == {"nodes": 9, "edges": 24, "valid": True}

    def test_gen_demand(self, cli_helper):
        out = cli_helper.path("demand.csv")
        data = cli_helper.invoke_json(
            ["gen-demand", out, "--seed", "1", "--requests-per-day", "2000"]
        )
        assert data["out"] == out
        assert len(pd.read_csv(out)) == data["requests"]
        again = cli_helper.invoke_json(
            ["gen-demand", out, "--seed", "1", "--requests-per-day", "2000"]
        )
        assert again["requests"] == data["requests"]
