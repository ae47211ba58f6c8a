"""Command-line harness.

Subcommands: plan (placement only), run (full pipeline), classify
(re-run analytics on an existing central-db export), replay (verify a
stored run reproduces byte-identically).  DROUGHTNET_OUT overrides the
output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from .analytics import advect_forecast, classify, evolve_all, forecast_to_json, indicators_all, patterns_to_csv_lines
from .backbone import CentralDatabase
from .config import ScenarioConfig, config_from_dict, load_config, validate
from .geometry import GeoPoint, connectivity_check, plans_to_json, tile_region
from .runner import compare_runs, run_scenario


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else validate(ScenarioConfig())
    out = args.out or os.environ.get("DROUGHTNET_OUT")
    return cfg.with_overrides(
        seed=args.seed,
        routing_mode=getattr(args, "routing", None),
        output_dir=out,
        trace=True if getattr(args, "trace", False) else None,
    )


def cmd_plan(args) -> int:
    cfg = _load(args)
    from .geometry import estimate_node_count

    estimate = estimate_node_count(100.0, cfg.cell_shape, cfg.radio_range_km)
    node_count = cfg.node_count_override or estimate + 1
    plans = []
    for rc in cfg.regions:
        plan = tile_region(rc.region_id, cfg.cell_shape, cfg.radio_range_km, node_count,
                           anchor_km=rc.anchor_km, region_size_km=cfg.region_size_km)
        conn = connectivity_check(plan, 2.0 * cfg.radio_range_km)
        plans.append(plan)
        print(f"region {rc.region_id}: {node_count} nodes "
              f"({cfg.cell_shape.value}, range {cfg.radio_range_km} km), "
              f"connected={conn.connected}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "placement.json").write_text(plans_to_json(plans) + "\n", encoding="utf-8")
    print(f"wrote {out / 'placement.json'}")
    return 0


def cmd_run(args) -> int:
    cfg = _load(args)
    report = run_scenario(cfg, out_dir=cfg.output_dir)
    print(f"seed {report['seed']}  routing {report['routing_mode']}  "
          f"events {report['event_count']}  records {report['record_count']}  "
          f"wall {report['wall_clock_s']:.1f}s")
    for region in sorted(report["classes"], key=int):
        print(f"region {region}: {report['classes'][region]}"
              f" -> forecast {report['forecast'][region]}")
    print(f"outputs in {cfg.output_dir}")
    return 0


def cmd_classify(args) -> int:
    cfg = _load(args)
    with open(args.db, encoding="utf-8") as fh:
        db = CentralDatabase.from_csv_lines(fh)
    climatologies = {r.region_id: r.climatology for r in cfg.regions}
    present = set(db.region)
    climatologies = {r: c for r, c in climatologies.items() if r in present}
    if not climatologies:
        print("no configured regions present in the database", file=sys.stderr)
        return 1
    _, t1 = db.span()
    indicators = indicators_all(db, climatologies, (0, t1 + 1))
    classes = {r: classify(ind, cfg.thresholds) for r, ind in indicators.items()}
    patterns = evolve_all(db, climatologies, cfg.window_days, cfg.thresholds)
    centroids = {
        r.region_id: GeoPoint(r.anchor_km[0] + cfg.region_size_km / 2.0,
                              r.anchor_km[1] + cfg.region_size_km / 2.0)
        for r in cfg.regions if r.region_id in climatologies
    }
    forecast = advect_forecast(classes, indicators, centroids)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "pattern.csv", "w", encoding="utf-8", newline="\n") as fh:
        for line in patterns_to_csv_lines(patterns):
            fh.write(line + "\n")
    (out / "forecast.json").write_text(forecast_to_json(classes, forecast) + "\n", encoding="utf-8")
    for region in sorted(classes):
        print(f"region {region}: {classes[region].label} -> forecast {forecast[region].label}")
    print(f"wrote {out / 'pattern.csv'} and {out / 'forecast.json'}")
    return 0


def cmd_replay(args) -> int:
    run_dir = Path(args.out or os.environ.get("DROUGHTNET_OUT") or "out")
    report_path = run_dir / "run_report.json"
    if not report_path.exists():
        print(f"no run report at {report_path}", file=sys.stderr)
        return 1
    stored = json.loads(report_path.read_text(encoding="utf-8"))
    cfg = config_from_dict(stored["config"])
    with tempfile.TemporaryDirectory(prefix="droughtnet-replay-") as tmp:
        run_scenario(cfg, out_dir=tmp)
        problems = compare_runs(run_dir, Path(tmp))
    if problems:
        for p in problems:
            print(f"MISMATCH {p}")
        return 1
    print(f"replay of {run_dir} reproduced byte-identically")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="droughtnet",
        description="three-tier wireless sensor network simulator for drought-severity prediction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, routing=True):
        p.add_argument("--config", help="scenario config file (JSON); defaults otherwise")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (or DROUGHTNET_OUT)")
        if routing:
            p.add_argument("--routing", choices=["tree", "diffusion", "flooding", "combined"],
                           help="override the routing mode")

    p = sub.add_parser("plan", help="compute and export node placement only")
    common(p)
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("run", help="run the full pipeline and write all exports")
    common(p)
    p.add_argument("--trace", action="store_true", help="write the per-event trace")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("classify", help="re-run analytics on an existing central-db CSV")
    common(p, routing=False)
    p.add_argument("--db", required=True, help="central_db.csv from a previous run")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("replay", help="re-run a stored run and verify identical exports")
    p.add_argument("--out", help="directory of the stored run (or DROUGHTNET_OUT)")
    p.set_defaults(fn=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
