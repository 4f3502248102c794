"""Command-line pipeline tying the toolkit together.

Subcommands read their inputs from the paths named in an INI configuration
file, call the owning module, and write CSV/JSON artifacts into the
configured output directory.  ``--dry-run`` validates input schemas and
exits; ``--seed`` overrides the configured seed.  Failures never leave
partial outputs (all writes are atomic).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import estimator, market_sim, model_core, pipeline, policy, schemas
from . import shift_share, tightness
from .schemas import PipelineConfig, SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tightlab",
        description=(
            "Labor-demand toolkit: synthetic firm panels, labor market "
            "tightness, shift-share instruments, panel IV estimation, and "
            "policy simulation."
        ),
        epilog="Run 'tightlab print-config' to see every setting with its default.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=(name != "print-config"),
                         help="path to the INI configuration file")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the configured random seed")
        cmd.add_argument("--dry-run", action="store_true",
                         help="validate input schemas and exit without writing")
        return cmd

    add("simulate", "generate a synthetic economy with known elasticities")
    add("delineate-zones", "merge regions into commuting zones by dominant flows")
    add("build-tightness", "firm-specific tightness from market stocks")
    add("build-instruments", "firm-level shift-share instruments")
    add("estimate", "first-difference OLS and 2SLS labor-demand estimates")
    rot = add("rotemberg", "decompose a shift-share estimate into per-share weights")
    rot.add_argument(
        "--endogenous",
        choices=["wage", "vacancies", "job_seekers"],
        default=None,
        help="instrument family to decompose (default from config)",
    )
    cal = add("calibrate", "pre-match hiring-cost share from elasticities")
    cal.add_argument("--input", default=None,
                     help="calibration JSON (overrides [paths] calibration)")
    add("policy", "minimum-wage simulation and frozen-tightness counterfactual")
    sub.add_parser("print-config", help="print the annotated default configuration")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "print-config":
        print(schemas.example_config())
        return 0
    try:
        config = PipelineConfig.load(args.config)
        if args.seed is not None:
            config.set("simulate", "seed", args.seed)
            config.set("policy", "seed", args.seed)
        handler = _HANDLERS[args.command]
        return handler(config, args)
    except (SchemaError, FileNotFoundError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def _read_inputs(config: PipelineConfig, names: dict) -> dict:
    """Read and validate the declared inputs; values are DataFrames."""
    frames = {}
    for key, schema in names.items():
        path = config.path(key, required=True)
        frames[key] = schemas.read_csv(path, schema)
    return frames


# --- handlers --------------------------------------------------------------------


def _cmd_simulate(config: PipelineConfig, args) -> int:
    if args.dry_run:
        print("simulate: configuration valid")
        return 0
    cfg = market_sim.EconomyConfig(
        n_firms=config.getint("simulate", "n_firms"),
        n_occupations=config.getint("simulate", "n_occupations"),
        n_regions=config.getint("simulate", "n_regions"),
        n_years=config.getint("simulate", "n_years"),
        base_year=config.getint("simulate", "base_year"),
        seed=config.getint("simulate", "seed"),
        true_eta_lw=config.getfloat("simulate", "true_eta_lw"),
        true_eta_lt=config.getfloat("simulate", "true_eta_lt"),
        national_shock_sd=config.getfloat("simulate", "national_shock_sd"),
        idiosyncratic_sd=config.getfloat("simulate", "idiosyncratic_sd"),
        demand_confound_sd=config.getfloat("simulate", "demand_confound_sd"),
        employment_noise_sd=config.getfloat("simulate", "employment_noise_sd"),
        integer_employment=config.getbool("simulate", "integer_employment"),
    )
    panel = market_sim.simulate_economy(cfg)
    out = config.output_dir()
    frame = panel.firms.copy()
    frame["firm_id"] = frame["firm_id"].astype(str)
    schemas.write_csv(frame, out / "firm_panel.csv", "firm_panel")
    schemas.write_csv(panel.markets, out / "markets.csv", "markets")
    schemas.write_csv(panel.region_panel, out / "region_panel.csv", "region_panel")
    schemas.write_json_report(
        {"config": {k: getattr(cfg, k) for k in (
            "n_firms", "n_occupations", "n_regions", "n_years", "base_year",
            "seed", "true_eta_lw", "true_eta_lt",
        )}, "truth": panel.truth},
        out / "simulation_truth.json",
    )
    print(f"simulate: wrote firm_panel.csv, markets.csv, region_panel.csv to {out}")
    return 0


def _cmd_zones(config: PipelineConfig, args) -> int:
    inputs = {"commuting": "commuting", "labor_force": "labor_force"}
    frames = _read_inputs(config, inputs)
    adjacency = None
    if config.path("adjacency") is not None:
        adjacency = schemas.read_csv(config.path("adjacency"), "commuting")
    if args.dry_run:
        print("delineate-zones: inputs valid")
        return 0
    start = config.getfloat("zones", "threshold_start")
    stop = config.getfloat("zones", "threshold_stop")
    step = config.getfloat("zones", "threshold_step")
    grid = np.arange(start, stop + 1e-12, step)
    best, trace, graph = pipeline.run_zone_sweep(
        frames["commuting"],
        frames["labor_force"],
        adjacency,
        grid,
        contiguity=config.get("zones", "contiguity"),
    )
    out = config.output_dir()
    schemas.write_csv(best.to_frame(graph.regions), out / "zones.csv", "zone_assignment")
    schemas.write_json_report(
        {
            "selected": {
                "threshold": best.threshold,
                "q": best.q,
                "n_zones": best.n_zones,
                "commuter_share": best.commuter_share,
            },
            "sweep": [
                {
                    "threshold": p.threshold,
                    "q": p.q,
                    "n_zones": p.n_zones,
                    "commuter_share": p.commuter_share,
                }
                for p in trace
            ],
        },
        out / "zones_report.json",
    )
    print(
        f"delineate-zones: {best.n_zones} zones at threshold "
        f"{best.threshold:.2f} (Q={best.q:.3f})"
    )
    return 0


def _notification(config: PipelineConfig) -> tightness.NotificationShares | None:
    if not config.getbool("tightness", "use_notification_shares"):
        return None
    path = config.path("notification_shares", required=True)
    frame = schemas.read_csv(path, "notification_shares")
    return tightness.NotificationShares.from_frame(frame)


def _cmd_build_tightness(config: PipelineConfig, args) -> int:
    frames = _read_inputs(config, {"firm_panel": "firm_panel", "markets": "markets"})
    notification = _notification(config)
    flow_adjust = config.getbool("tightness", "flow_adjust")
    flow_frames = {}
    if flow_adjust:
        flow_frames = _read_inputs(
            config,
            {"transitions": "transitions", "occupation_employment": "occupation_employment"},
        )
    if args.dry_run:
        print("build-tightness: inputs valid")
        return 0
    out = config.output_dir()
    markets = frames["markets"]
    if flow_adjust:
        adjusted = pipeline.flow_adjusted_markets(
            markets,
            flow_frames["transitions"],
            flow_frames["occupation_employment"],
            notification=notification,
        )
        schemas.atomic_write_text(out / "adjusted_markets.csv", adjusted.to_csv(index=False))
        markets = adjusted.assign(
            registered_vacancies=adjusted["adjusted_vacancies"],
            job_seekers=adjusted["adjusted_job_seekers"],
        )[["occupation", "region", "year", "registered_vacancies", "job_seekers"]]
        notification = None  # already applied in the adjusted stocks
    theta = tightness.build_firm_tightness(
        frames["firm_panel"],
        markets,
        notification=notification,
        max_missing_share=config.getfloat("tightness", "max_missing_share"),
    )
    schemas.write_csv(theta, out / "tightness.csv", "tightness")
    defined = int(theta["tightness"].notna().sum())
    print(f"build-tightness: {defined}/{len(theta)} firm-years defined -> {out}")
    return 0


def _cmd_build_instruments(config: PipelineConfig, args) -> int:
    frames = _read_inputs(config, {"firm_panel": "firm_panel", "markets": "markets"})
    if args.dry_run:
        print("build-instruments: inputs valid")
        return 0
    inst = shift_share.build_instruments(
        frames["firm_panel"],
        frames["markets"],
        base_year=config.getint("instruments", "base_year"),
        estimation_start=config.getint("instruments", "estimation_start"),
        lag=config.getint("instruments", "lag"),
        weighted_wages=config.getbool("instruments", "weighted_wages"),
        max_missing_share=config.getfloat("instruments", "max_missing_share"),
    )
    out = config.output_dir()
    schemas.write_csv(inst.table, out / "instruments.csv", "instruments")
    print(f"build-instruments: {len(inst.table)} firm-years -> {out}")
    return 0


def _cmd_estimate(config: PipelineConfig, args) -> int:
    frames = _read_inputs(config, {"firm_panel": "firm_panel", "markets": "markets"})
    if args.dry_run:
        print("estimate: inputs valid")
        return 0
    fixed_effects = tuple(
        fe.strip() for fe in config.get("estimate", "fixed_effects").split(",") if fe.strip()
    )
    result = pipeline.run_firm_estimation(
        frames["firm_panel"],
        frames["markets"],
        lag=config.getint("estimate", "lag"),
        fixed_effects=fixed_effects,
        cluster=config.get("estimate", "cluster"),
        weak_f_threshold=config.getfloat("estimate", "weak_f_threshold"),
        base_year=config.getint("instruments", "base_year"),
        estimation_start=config.getint("instruments", "estimation_start"),
        weighted_wages=config.getbool("instruments", "weighted_wages"),
    )
    out = config.output_dir()
    schemas.write_json_report(result.to_dict(), out / "estimates.json")
    table = result.tsls.text_table("Two-stage least squares") + "\n\n" + (
        result.ols.text_table("Least squares")
    )
    schemas.atomic_write_text(out / "estimates.txt", table + "\n")
    print(table)
    return 0


def _cmd_rotemberg(config: PipelineConfig, args) -> int:
    frames = _read_inputs(config, {"firm_panel": "firm_panel", "markets": "markets"})
    if args.dry_run:
        print("rotemberg: inputs valid")
        return 0
    endogenous = args.endogenous or config.get("rotemberg", "endogenous")
    report = pipeline.run_rotemberg(
        frames["firm_panel"],
        frames["markets"],
        endogenous=endogenous,
        lag=config.getint("estimate", "lag"),
        base_year=config.getint("instruments", "base_year"),
        estimation_start=config.getint("instruments", "estimation_start"),
        normalize_growth=config.getbool("rotemberg", "normalize_growth"),
    )
    out = config.output_dir()
    schemas.write_json_report(report.to_dict(), out / f"rotemberg_{endogenous}.json")
    top = report.by_occupation(top=5)
    print(f"rotemberg ({endogenous}): estimate {report.bartik_estimate:.4f}, "
          f"sum of weights {report.sum_alpha:.6f}")
    print(top.to_string())
    return 0


def _cmd_calibrate(config: PipelineConfig, args) -> int:
    path = Path(args.input) if args.input else config.path("calibration", required=True)
    if not path.exists():
        raise SchemaError(f"calibration input not found: {path}")
    inputs = model_core.CalibrationInputs.from_json(path.read_text())
    if args.dry_run:
        print("calibrate: input valid")
        return 0
    result = model_core.calibrate_prematch_share(inputs)
    out = config.output_dir()
    schemas.write_json_report(result, out / "calibration_report.json")
    print(json.dumps(result, indent=2, sort_keys=True))
    print(f"pre-match hiring cost share of wage payments: {result['phi_over_w']:.3f}")
    return 0


def _cmd_policy(config: PipelineConfig, args) -> int:
    employment = schemas.read_csv(
        config.path("employment_series", required=True), "employment_series"
    )
    tightness_series = schemas.read_csv(
        config.path("tightness_series", required=True), "tightness_series"
    )
    if args.dry_run:
        print("policy: inputs valid")
        return 0
    draws = config.getint("policy", "draws")
    seed = config.getint("policy", "seed")

    report: dict = {}
    raw_elasticity = config.get("policy", "elasticity").strip()
    if raw_elasticity:
        inp = policy.MinWageInputs(
            elasticity=policy.Estimate(
                float(raw_elasticity), config.getfloat("policy", "elasticity_se")
            ),
            wage_effect=policy.Estimate(
                config.getfloat("policy", "wage_effect"),
                config.getfloat("policy", "wage_effect_se"),
            ),
            workforce=config.getfloat("policy", "workforce"),
            draws=draws,
            seed=seed,
        )
        report["minimum_wage"] = policy.minwage_effect(inp).to_dict()

    groups = [g.strip() for g in config.get("policy", "group_elasticities").split(",") if g.strip()]
    elasticities = {}
    for entry in groups:
        name, value = entry.split(":")
        elasticities[name.strip()] = float(value)
    ses = {}
    for entry in [
        g.strip() for g in config.get("policy", "group_elasticity_ses").split(",") if g.strip()
    ]:
        name, value = entry.split(":")
        ses[name.strip()] = float(value)
    if elasticities:
        cf_inputs = policy.CounterfactualInputs(
            employment=employment,
            tightness=tightness_series,
            elasticities={
                name: policy.Estimate(value, ses.get(name, 0.0))
                for name, value in elasticities.items()
            },
            draws=draws,
            seed=seed,
        )
        result = policy.counterfactual_employment(
            cf_inputs,
            convention=config.get("policy", "convention"),
            application=config.get("policy", "application"),
        )
        report["counterfactual"] = result.to_dict()
        out = config.output_dir()
        schemas.atomic_write_text(
            out / "counterfactual_series.csv", result.by_group.to_csv(index=False)
        )
    if not report:
        raise SchemaError(
            "policy: nothing to do; set [policy] elasticity and/or group_elasticities"
        )
    out = config.output_dir()
    schemas.write_json_report(report, out / "policy_report.json")
    print(json.dumps(report, indent=2, sort_keys=True, default=str)[:2000])
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "delineate-zones": _cmd_zones,
    "build-tightness": _cmd_build_tightness,
    "build-instruments": _cmd_build_instruments,
    "estimate": _cmd_estimate,
    "rotemberg": _cmd_rotemberg,
    "calibrate": _cmd_calibrate,
    "policy": _cmd_policy,
}


if __name__ == "__main__":
    sys.exit(main())
