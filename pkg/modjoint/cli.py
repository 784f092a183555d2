# -*- coding: utf-8 -*-

""" CLI for the joint pricing and dispatch simulator. """

import math
import pathlib
import time

import click
import pandas as pd

from . import __version__ as modjoint_version
from .bpd_pricing import (
    BatchPricingInstance,
    brute_force_batch,
    concavity_certificate,
    optimize_batch_prices,
)
from .choice import ChoiceParams, Mode
from .cli_utils import (
    ModJointGroup,
    RunManifest,
    click_echo_json,
    configure_logging,
    parse_floats,
    write_json,
)
from .config import RunConfig
from .costs import (
    ExpectedCostTable,
    SteadyStateModel,
    load_alpha_table,
    load_theta_table,
    save_alpha_table,
)
from .demand import generate_demand, load_demand, write_demand_csv
from .errors import ParameterError
from .experiments import (
    DEFAULT_MULTIPLIERS,
    calibrate_price_multiplier,
    run_cost_convergence,
    sweep_retrospective_multiplier,
)
from .matching import ESV_COLUMNS, RV_COLUMNS, write_rows
from .network import grid_network, kmeans_cluster
from .simulator import (
    SERIES_COLUMNS,
    Policy,
    RandomStreams,
    load_network,
    run_simulation,
)
from .spd_pricing import SpdInstance, spd_optimal_prices, spd_single_quote

POLICIES = [p.value for p in Policy]
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]
QUOTE_COLUMNS = ["p_e", "p_s", "expected_profit"]

# alias pass_obj for readability
pass_cfg = click.pass_obj


def _absolute(path):
    return None if path is None else str(pathlib.Path(path).resolve())


@click.group(cls=ModJointGroup)
@click.option(
    "--cfg",
    default=None,
    help="Run configuration file. Default: $MODJOINT_CONFIG, else built-in defaults.",
)
@click.option(
    "--log-level",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    default="WARNING",
    help="Level of the log messages written to stderr. Default: WARNING.",
)
@click.version_option(version=modjoint_version)
@click.pass_context
def modjoint(ctx, cfg, log_level):
    """ Joint pricing and dispatch of exclusive and shared rides.

        Simulates sequential and batched dynamic pricing against a static
        fare benchmark on a road network.
    """
    configure_logging(log_level)
    ctx.obj = RunConfig.load(cfg)


@modjoint.command("simulate")
@click.option(
    "--policy", type=click.Choice(POLICIES), default="spd", help="Default: spd."
)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option(
    "--demand",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Demand CSV overriding the config.",
)
@click.option(
    "--series-out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write the per-period time series to this CSV file.",
)
@click.option(
    "--dump-graphs",
    type=click.Path(file_okay=False),
    default=None,
    help="Write the RV and ESV graphs of every batch to this directory.",
)
@click.option(
    "--dump-ilp",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write the assignment program of every batch to this JSON file.",
)
@click.option(
    "--alpha-out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write the estimated joining probabilities to this CSV file.",
)
@click.option(
    "--record-wall-clock",
    is_flag=True,
    help="Add the elapsed wall-clock time to the manifest.",
)
@pass_cfg
def simulate(
    cfg,
    policy,
    seed,
    demand,
    series_out,
    dump_graphs,
    dump_ilp,
    alpha_out,
    record_wall_clock,
):
    """ Simulate one policy and print the report.
    """
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if demand is not None:
        overrides["demand"] = _absolute(demand)
    cfg = cfg.with_overrides(**overrides)
    started = time.monotonic()
    report = run_simulation(
        cfg, policy, record_debug=bool(dump_graphs or dump_ilp)
    )
    wall_clock = None
    if record_wall_clock:
        wall_clock = {"seconds": time.monotonic() - started}
    if series_out is not None:
        write_rows(
            [[row[c] for c in SERIES_COLUMNS] for row in report.series],
            SERIES_COLUMNS,
            series_out,
        )
    if dump_graphs is not None:
        out = pathlib.Path(dump_graphs)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(report.debug.rv, RV_COLUMNS, out / "rv_graph.csv")
        write_rows(report.debug.esv, ESV_COLUMNS, out / "esv_graph.csv")
    if dump_ilp is not None:
        write_json(report.debug.ilp, dump_ilp)
    if alpha_out is not None:
        save_alpha_table(report.alpha, alpha_out)
    click_echo_json(
        {
            "manifest": RunManifest.for_config(cfg, wall_clock=wall_clock).to_dict(),
            "report": report.to_dict(),
        }
    )


@modjoint.command("price-quote")
@click.option("--ue", type=float, default=0.0, help="Exclusive non-price utility.")
@click.option("--us", type=float, default=0.0, help="Shared non-price utility.")
@click.option("--uo", type=float, default=0.0, help="Outside option utility.")
@click.option("--ce", type=float, required=True, help="Exclusive cost.")
@click.option("--cs", type=float, required=True, help="Shared cost.")
@click.option(
    "--beta-p",
    type=float,
    default=None,
    help="Price coefficient. Default: the config's, scaled by its multiplier.",
)
@click.option(
    "--offer",
    type=click.Choice(["both", "exclusive", "shared"]),
    default="both",
    help="The services offered. Default: both.",
)
@pass_cfg
def price_quote(cfg, ue, us, uo, ce, cs, beta_p, offer):
    """ Price a single request and print p_e, p_s and the expected profit as
        CSV. A service not offered has an empty price.
    """
    if beta_p is None:
        beta_p = ChoiceParams.from_config(cfg).effective_beta_p
    try:
        inst = SpdInstance(
            u_e_assign=ue, u_s_assign=us, u_o=uo, c_e=ce, c_s=cs, beta_p=beta_p
        )
    except ParameterError as err:
        raise click.UsageError(str(err))
    if offer == "both":
        quote = spd_optimal_prices(inst, cfg.price_floor)
    elif offer == "exclusive":
        quote = spd_single_quote(inst, Mode.EXCLUSIVE, cfg.price_floor)
    else:
        quote = spd_single_quote(inst, Mode.SHARED, cfg.price_floor)
    row = pd.DataFrame(
        [(quote.p_e, quote.p_s, quote.expected_profit)], columns=QUOTE_COLUMNS
    )
    click.echo(row.to_csv(index=False), nl=False)


@modjoint.command("batch-quote")
@click.option("--c-1e", type=float, required=True)
@click.option("--c-2e", type=float, required=True)
@click.option("--c-1s", type=float, required=True)
@click.option("--c-2s", type=float, required=True)
@click.option("--c-ss", type=float, required=True, help="Pooled cost.")
@click.option("--d-1e", type=float, default=0.0)
@click.option("--d-1s", type=float, default=0.0)
@click.option("--d-2e", type=float, default=0.0)
@click.option("--d-2s", type=float, default=0.0)
@click.option("--u-o1", type=float, default=0.0, help="Outside utility, request 1.")
@click.option("--u-o2", type=float, default=0.0, help="Outside utility, request 2.")
@click.option(
    "--grid", is_flag=True, help="Enumerate P_1s instead of solving by Newton."
)
@pass_cfg
def batch_quote(
    cfg, c_1e, c_2e, c_1s, c_2s, c_ss, d_1e, d_1s, d_2e, d_2s, u_o1, u_o2, grid
):
    """ Price a two-request matching.
    """
    params = ChoiceParams.from_config(cfg)
    inst = BatchPricingInstance(
        c_1e=c_1e,
        c_2e=c_2e,
        c_1s=c_1s,
        c_2s=c_2s,
        c_ss=c_ss,
        d_1s=d_1s,
        d_1e=d_1e,
        d_2s=d_2s,
        d_2e=d_2e,
        D_1=math.exp(u_o1),
        D_2=math.exp(u_o2),
        beta_p=params.effective_beta_p,
    )
    if grid:
        quote = brute_force_batch(inst, cfg.brute_force_step, cfg.price_floor)
    else:
        quote = optimize_batch_prices(inst, cfg.brute_force_step, cfg.price_floor)
    click_echo_json(
        {
            "prices": dict(zip(["p_1s", "p_1e", "p_2s", "p_2e"], quote.prices)),
            "probabilities": dict(
                zip(["P_1s", "P_1e", "P_2s", "P_2e"], quote.probabilities.tolist())
            ),
            "expected_profit": quote.expected_profit,
            "method": quote.method,
            "certificate": concavity_certificate(inst),
        }
    )


@modjoint.command("calibrate-multiplier")
@click.option(
    "--candidates",
    callback=parse_floats,
    default=",".join(str(m) for m in DEFAULT_MULTIPLIERS),
    help="Comma separated multipliers. Default: 1.2,1.4,1.6,1.8,2.0.",
)
@click.option(
    "--policy",
    type=click.Choice(["spd", "bpd"]),
    default="spd",
    help="Default: spd.",
)
@pass_cfg
def calibrate_multiplier(cfg, candidates, policy):
    """ Choose the price multiplier matching the static mean price.
    """
    result = calibrate_price_multiplier(cfg, candidates, policy=policy)
    click_echo_json(result.to_dict())


@modjoint.command("sweep-retrospective")
@click.option(
    "--grid",
    callback=parse_floats,
    default=None,
    help="Comma separated multipliers. Default: 0.0 to 1.0 in steps of 0.1.",
)
@click.option(
    "--policy",
    "policies",
    type=click.Choice(["spd", "bpd"]),
    multiple=True,
    help="Policies to sweep (repeatable). Default: spd and bpd.",
)
@pass_cfg
def sweep_retrospective(cfg, grid, policies):
    """ Profit against the retrospective cost multiplier.
    """
    policies = policies or ("spd", "bpd")
    result = sweep_retrospective_multiplier(cfg, grid=grid, policies=policies)
    click_echo_json(result.to_dict())


@modjoint.command("cost-converge")
@click.option("--days", type=click.IntRange(min=2), default=7, help="Default: 7.")
@click.option(
    "--same-demand", is_flag=True, help="Repeat the same demand every day."
)
@click.option(
    "--policy", type=click.Choice(POLICIES), default="bpd", help="Default: bpd."
)
@click.option(
    "--table-out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write the learned cost table to this CSV file.",
)
@click.option(
    "--alpha-out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write the learned joining probabilities to this CSV file.",
)
@pass_cfg
def cost_converge(cfg, days, same_demand, policy, table_out, alpha_out):
    """ Learn the expected shared cost table over simulated days.
    """
    result = run_cost_convergence(
        cfg, days, vary_demand=not same_demand, policy=policy
    )
    if table_out is not None:
        result.table.to_csv(table_out)
    if alpha_out is not None:
        save_alpha_table(result.alpha, alpha_out)
    click_echo_json(result.to_dict())


@modjoint.command("gen-demand")
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option(
    "--requests-per-day",
    type=click.IntRange(min=0),
    default=None,
    help="Override synthetic_requests_per_day.",
)
@pass_cfg
def gen_demand(cfg, out, seed, requests_per_day):
    """ Write a synthetic demand CSV for the configured network.
    """
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if requests_per_day is not None:
        overrides["synthetic_requests_per_day"] = requests_per_day
    cfg = cfg.with_overrides(**overrides)
    net = load_network(cfg)
    clusters = kmeans_cluster(net, min(cfg.n_clusters, len(net.nodes)), seed=cfg.seed)
    records = generate_demand(
        net,
        clusters,
        cfg.synthetic_requests_per_day,
        cfg.horizon_s,
        RandomStreams(cfg.seed).stream("demand"),
        hotspot_cluster=cfg.synthetic_hotspot_cluster,
        hotspot_weight=cfg.synthetic_hotspot_weight,
        interval_s=cfg.period_s,
    )
    write_demand_csv(records, out)
    click_echo_json({"requests": len(records), "out": out})


@modjoint.command("gen-network")
@click.argument("nodes_out", type=click.Path(dir_okay=False))
@click.argument("edges_out", type=click.Path(dir_okay=False))
@pass_cfg
def gen_network(cfg, nodes_out, edges_out):
    """ Write the configured grid network as node and edge CSV files.
    """
    net = grid_network(
        cfg.grid_rows, cfg.grid_cols, cfg.grid_spacing_m, cfg.grid_speed_mps
    )
    net.to_csv(nodes_out, edges_out)
    click_echo_json({"nodes": len(net.nodes), "edges": net.edge_count})


@modjoint.command("validate")
@click.option(
    "--demand",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Demand CSV overriding the config.",
)
@pass_cfg
def validate(cfg, demand):
    """ Check the network, demand and table files of a configuration.
    """
    if demand is not None:
        cfg = cfg.with_overrides(demand=_absolute(demand))
    net = load_network(cfg)
    net.check_strongly_connected(net.nodes)
    result = {"nodes": len(net.nodes), "edges": net.edge_count}
    if cfg.demand is not None:
        requests = load_demand(
            cfg.path("demand"), net, cfg.max_wait_s, cfg.max_delay_s
        )
        result["requests"] = len(requests)
    K = min(cfg.n_clusters, len(net.nodes))
    if cfg.cost_table is not None:
        ExpectedCostTable.from_csv(cfg.path("cost_table"), K)
    if cfg.steady_state_table is not None:
        SteadyStateModel.from_csv(
            cfg.path("steady_state_table"), K, cfg.n_intervals, cfg.period_s
        )
    if cfg.theta_table is not None:
        result["theta_cells"] = len(load_theta_table(cfg.path("theta_table")))
    if cfg.alpha_table is not None:
        result["alpha_cells"] = len(load_alpha_table(cfg.path("alpha_table")))
    result["valid"] = True
    click_echo_json(result)
