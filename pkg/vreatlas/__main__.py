"""
VreAtlas CLI: onshore wind and solar resource assessment on gridded regional data.

Usage:

    # Write a synthetic study area and its config.yaml:
    python -m vreatlas sample [--output-dir DIR] [--seed N] [--rows N] [--cols N]

    # Pipeline stages (all read --config or the discovered config.yaml):
    python -m vreatlas ingest
    python -m vreatlas exclude
    python -m vreatlas potential pv-ground|pv-roof|wind [--scenario ID]
    python -m vreatlas scenario
    python -m vreatlas overlap

    # Economics and reporting:
    python -m vreatlas lcoe --tech pv_ground|pv_roof|wind [--flh H ...] [--sites CSV]
    python -m vreatlas plot CURVE_CSV [--svg PATH] [--title TEXT]

    # Planning statistics and validation:
    python -m vreatlas fit logit|probit|ols [--planning CSV] [--technology wind|pv_ground]
        [--levels 1,2,3,4] [--min_votes N] [--landuse_shares CSV]
    python -m vreatlas link-la [--planning CSV] [--postcodes CSV] [--la_table CSV]
    python -m vreatlas validate [--own_results CSV] [--external_results CSV] [--factor F]

Notes:
- Options left unset on the command line are taken from config.yaml, then from defaults.
- Exit codes: 0 success, 1 configuration error, 2 data error (error_report.json is written).
- VRE_ATLAS_THREADS caps the number of worker threads.
"""

import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import pandas as pd

from vreatlas.Economics import PRESETS, full_load_hours, lcoe, site_lcoe
from vreatlas.Errors import ConfigError, DataError, UnreadableInputError
from vreatlas.HelperFunctions import load_config, parse_code_list, setup_logging, write_csv_file
from vreatlas.Ingest import read_la_table, read_planning_records, read_planning_table, read_postcode_lookup, read_region_values, read_table
from vreatlas.PlotCurves import emit_plot
from vreatlas.Regions import DEVIATION_COLUMNS, REJECT_COLUMNS, link_records, validation_compare
from vreatlas.Sample import make_sample
from vreatlas.Statistics import ModelSpec, aggregate_landuse, describe_shares, fit_deviation, fit_logit, fit_probit, fit_report
from vreatlas.VreAtlas import (
    exclude_stage,
    ingest_stage,
    load_run_config,
    overlap_stage,
    potential_stage,
    run_scenario,
    write_cost_curve,
    write_error_report,
)

DEFAULT_OUTPUT_DIR = "ResultsVreAtlas"
SAMPLE_DIR = "vreatlas_sample"
# Config keys holding file paths, resolved against the config file's directory
PATH_KEYS = ("planning", "postcodes", "own_results", "external_results", "landuse_shares", "la_table")

def run_sample(args, config: Dict[str, Any]) -> int:
    config_path = make_sample(args.output_dir or SAMPLE_DIR, seed=args.seed, n_rows=args.rows, n_cols=args.cols)
    print(f"Sample written; run it with: python -m vreatlas scenario --config {config_path}")
    return 0

def run_ingest(args, config: Dict[str, Any]) -> int:
    path = ingest_stage(load_run_config(config, args.output_dir))
    print(f"Layer summary: {path}")
    return 0

def run_exclude(args, config: Dict[str, Any]) -> int:
    path = exclude_stage(load_run_config(config, args.output_dir))
    print(f"Mask areas: {path}")
    return 0

def run_potential(args, config: Dict[str, Any]) -> int:
    path, twh = potential_stage(load_run_config(config, args.output_dir), args.technology, args.scenario)
    print(f"Technical potential ({args.technology}, scenario {args.scenario}): {twh:.4f} TWh/yr -> {path}")
    return 0

def run_full(args, config: Dict[str, Any]) -> int:
    cfg = load_run_config(config, args.output_dir)
    code = run_scenario(cfg)
    if code == 0:
        print(f"Results written to: {cfg.output_dir}")
    else:
        print(f"Run failed; see {os.path.join(cfg.output_dir, 'error_report.json')}")
    return code

def run_overlap(args, config: Dict[str, Any]) -> int:
    path, selected = overlap_stage(load_run_config(config, args.output_dir))
    print(f"Overlap table: {path}")
    print(f"Selected regions: {', '.join(selected) if selected else 'none'}")
    return 0

def run_lcoe(args, config: Dict[str, Any]) -> int:
    params = PRESETS[args.tech]
    update = {k: v for k, v in (("lifetime", args.lifetime), ("interest", args.interest)) if v is not None}
    params = params.model_copy(update=update)
    if not args.flh and not args.sites:
        raise ConfigError("lcoe needs --flh values or a --sites table")
    for hours in args.flh or []:
        print(f"{args.tech}: {hours:g} full-load hours -> {float(lcoe(params, hours)):.4f} GBP/kWh")
    if args.sites:
        sites = read_table(args.sites, ["cell_id", "energy_kWh", "capacity_kW"])
        sites["flh"] = full_load_hours(sites["energy_kWh"].to_numpy(dtype=float), sites["capacity_kW"].to_numpy(dtype=float))
        sites["lcoe"] = site_lcoe(params, sites["energy_kWh"].to_numpy(dtype=float), sites["capacity_kW"].to_numpy(dtype=float))
        output_dir = _output_dir(args, config)
        table_path = write_csv_file(output_dir, sites, ["cell_id", "energy_kWh", "capacity_kW", "flh", "lcoe"], f"lcoe_{args.tech}.csv")
        curve_path = write_cost_curve(output_dir, f"cost_curve_{args.tech}", sites, "energy_kWh")
        print(f"Site LCOE: {table_path}\nCost curve: {curve_path}")
    return 0

def run_plot(args, config: Dict[str, Any]) -> int:
    svg = emit_plot(args.curve, args.svg, args.title)
    print(f"Plot saved to: {svg}")
    return 0

def _fit_planning(args, output_dir: str) -> None:
    if not args.planning:
        raise ConfigError("fit needs a planning table (--planning or 'planning' in config.yaml)")
    records = read_planning_records(args.planning)
    fit = fit_logit if args.model == "logit" else fit_probit
    try:
        levels = sorted(parse_code_list(args.levels))
    except ValueError as e:
        raise ConfigError(f"--levels must be a comma list of 1..4: {e}") from e
    results = []
    for level in levels:
        spec = ModelSpec(level=level, technology=args.technology, min_votes=args.min_votes)
        result = fit(records, spec)
        results.append(result)
        table = result.table()
        write_csv_file(output_dir, table, list(table.columns), f"fit_{args.model}_{args.technology}_model{level}.csv")
    report = fit_report(results, [f"Model {level}" for level in levels])
    os.makedirs(output_dir, exist_ok=True)
    report_path = os.path.join(output_dir, f"fit_{args.model}_{args.technology}.txt")
    with open(report_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(report + "\n")
    print(report)

def _fit_landuse(args, output_dir: str) -> None:
    if not args.landuse_shares:
        raise ConfigError("fit ols needs a land-use share table (--landuse_shares or 'landuse_shares' in config.yaml)")
    shares = read_table(args.landuse_shares, ["deviation"])
    grouped = aggregate_landuse(shares.drop(columns=["deviation"]))
    result = fit_deviation(shares["deviation"].to_numpy(dtype=float), grouped)
    table = pd.DataFrame({
        "column": result.columns,
        "coef": result.coefficients,
        "se": result.std_errors,
        "p_value": result.p_values,
    })
    write_csv_file(output_dir, table, list(table.columns), "fit_ols.csv")
    summary = describe_shares(grouped).reset_index(names="group")
    write_csv_file(output_dir, summary, ["group", "mean", "std", "min", "max"], "landuse_summary.csv")
    print(table.to_string(index=False))
    print(f"R2: {result.r_squared:.4f}, n = {result.n_obs}")

def run_fit(args, config: Dict[str, Any]) -> int:
    output_dir = _output_dir(args, config)
    if args.model == "ols":
        _fit_landuse(args, output_dir)
    else:
        _fit_planning(args, output_dir)
    return 0

def run_link(args, config: Dict[str, Any]) -> int:
    missing = [name for name in ("planning", "postcodes", "la_table") if not getattr(args, name)]
    if missing:
        raise ConfigError(f"link-la needs {', '.join(missing)}")
    matched, rejects = link_records(read_la_table(args.la_table), read_planning_table(args.planning), read_postcode_lookup(args.postcodes))
    output_dir = _output_dir(args, config)
    write_csv_file(output_dir, matched, list(matched.columns), "planning_linked.csv")
    write_csv_file(output_dir, rejects, REJECT_COLUMNS, "link_rejects.csv")
    print(f"Linked {len(matched)} record(s), rejected {len(rejects)}")
    return 0

def run_validate(args, config: Dict[str, Any]) -> int:
    if not args.own_results or not args.external_results:
        raise ConfigError("validate needs own_results and external_results")
    factor = args.factor if args.factor is not None else float(config.get("validation_factor", 8.0))
    table, summary = validation_compare(read_region_values(args.own_results), read_region_values(args.external_results), factor)
    output_dir = _output_dir(args, config)
    write_csv_file(output_dir, table, DEVIATION_COLUMNS, "validation.csv")
    write_csv_file(output_dir, summary, ["mean", "std", "min", "max"], "validation_summary.csv")
    row = summary.iloc[0]
    print(f"Deviation ratio: mean {row['mean']:.4f}, SD {row['std']:.4f}, min {row['min']:.4f}, max {row['max']:.4f}")
    return 0

def _output_dir(args, config: Dict[str, Any]) -> str:
    if args.output_dir:
        return os.path.abspath(args.output_dir)
    configured = config.get("output_dir")
    if configured:
        return os.path.join(config.get("config_dir", os.getcwd()), configured)
    return os.path.abspath(DEFAULT_OUTPUT_DIR)

def _merge_config(args, config: Dict[str, Any]) -> None:
    """Fills options left unset on the command line from the config file."""
    base = config.get("config_dir", os.getcwd())
    values = dict(config)
    if isinstance(config.get("layers"), dict) and "la_table" in config["layers"]:
        values.setdefault("la_table", config["layers"]["la_table"])
    for key in vars(args):
        if key not in values or key == "output_dir":
            continue
        val = getattr(args, key)
        if val is None or (isinstance(val, str) and val == ""):
            value = values[key]
            if key in PATH_KEYS and isinstance(value, str) and not os.path.isabs(value):
                value = os.path.join(base, value)
            setattr(args, key, value)

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="Path to config.yaml; otherwise the usual locations are searched.")
    common.add_argument("--output-dir", "--output_dir", dest="output_dir", type=str, default=None, help="Directory for results.")
    common.add_argument("--seed", type=int, default=None, help="Random seed for fixture generation.")

    parser = argparse.ArgumentParser(prog="vreatlas", description="VreAtlas CLI")
    subparsers = parser.add_subparsers(dest="command", required=True)

    sample_parser = subparsers.add_parser("sample", parents=[common], help="Write a synthetic study area and config.")
    sample_parser.add_argument("--rows", type=int, default=60)
    sample_parser.add_argument("--cols", type=int, default=60)
    sample_parser.set_defaults(func=run_sample)

    subparsers.add_parser("ingest", parents=[common], help="Put every layer on the master grid.").set_defaults(func=run_ingest)
    subparsers.add_parser("exclude", parents=[common], help="Write geographical and scenario masks.").set_defaults(func=run_exclude)

    potential_parser = subparsers.add_parser("potential", parents=[common], help="Technical potential of one technology.")
    potential_parser.add_argument("technology", choices=["pv-ground", "pv-roof", "wind"])
    potential_parser.add_argument("--scenario", type=int, default=1)
    potential_parser.set_defaults(func=run_potential)

    lcoe_parser = subparsers.add_parser("lcoe", parents=[common], help="LCOE from full-load hours or a site table.")
    lcoe_parser.add_argument("--tech", choices=sorted(PRESETS), required=True)
    lcoe_parser.add_argument("--flh", type=float, nargs="+", default=None, help="Full-load hours per year.")
    lcoe_parser.add_argument("--sites", type=str, default=None, help="CSV with cell_id, energy_kWh, capacity_kW.")
    lcoe_parser.add_argument("--lifetime", type=int, default=None)
    lcoe_parser.add_argument("--interest", type=float, default=None)
    lcoe_parser.set_defaults(func=run_lcoe)

    subparsers.add_parser("scenario", parents=[common], help="Run every configured scenario end to end.").set_defaults(func=run_full)
    subparsers.add_parser("overlap", parents=[common], help="Wind/ground-PV land overlap per region.").set_defaults(func=run_overlap)

    fit_parser = subparsers.add_parser("fit", parents=[common], help="Planning-outcome or land-use regressions.")
    fit_parser.add_argument("model", choices=["logit", "probit", "ols"])
    fit_parser.add_argument("--planning", type=str, default=None)
    fit_parser.add_argument("--technology", choices=["wind", "pv_ground"], default="wind")
    fit_parser.add_argument("--levels", type=str, default="1,2,3,4", help="Model levels to fit, e.g. 1,4.")
    fit_parser.add_argument("--min_votes", "--min-votes", dest="min_votes", type=int, default=0)
    fit_parser.add_argument("--landuse_shares", type=str, default=None)
    fit_parser.set_defaults(func=run_fit)

    link_parser = subparsers.add_parser("link-la", parents=[common], help="Attach Local Authority codes to planning records.")
    link_parser.add_argument("--planning", type=str, default=None)
    link_parser.add_argument("--postcodes", type=str, default=None)
    link_parser.add_argument("--la_table", type=str, default=None)
    link_parser.set_defaults(func=run_link)

    validate_parser = subparsers.add_parser("validate", parents=[common], help="Compare own results with an external study.")
    validate_parser.add_argument("--own_results", type=str, default=None)
    validate_parser.add_argument("--external_results", type=str, default=None)
    validate_parser.add_argument("--factor", type=float, default=None)
    validate_parser.set_defaults(func=run_validate)

    plot_parser = subparsers.add_parser("plot", parents=[common], help="Render a cost-curve CSV as SVG.")
    plot_parser.add_argument("curve", type=str)
    plot_parser.add_argument("--svg", type=str, default=None)
    plot_parser.add_argument("--title", type=str, default=None)
    plot_parser.set_defaults(func=run_plot)
    return parser

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    output_dir = os.path.abspath(args.output_dir or DEFAULT_OUTPUT_DIR)
    try:
        config = load_config(args.config)
        _merge_config(args, config)
        if args.seed is None:
            args.seed = 42
        output_dir = os.path.abspath(args.output_dir or SAMPLE_DIR) if args.command == "sample" else _output_dir(args, config)
        if args.command != "scenario":
            setup_logging(output_dir)
        return args.func(args, config)
    except ConfigError as e:
        logging.error(f"Configuration error: {e}")
        print(f"Configuration error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        logging.error(f"Data error: {e}")
        report = write_error_report(output_dir, e)
        print(f"Data error: {e} (report: {report})", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        logging.exception(f"Unreadable input: {e}")
        report = write_error_report(output_dir, UnreadableInputError.wrap(e))
        print(f"Data error: {type(e).__name__}: {e} (report: {report})", file=sys.stderr)
        return 2

if __name__ == "__main__":
    sys.exit(main())
