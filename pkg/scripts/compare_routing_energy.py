#!/usr/bin/env python3
"""Directed diffusion vs flooding on the same seed and interest workload:
total network tx+rx energy and the savings ratio.

    python scripts/compare_routing_energy.py [--days N] [--seed S]
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from droughtnet.config import ScenarioConfig, validate
from droughtnet.runner import run_scenario
from droughtnet.stack import RoutingMode


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--days", type=int, default=365)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    results = {}
    for mode in (RoutingMode.DIFFUSION, RoutingMode.FLOODING):
        cfg = validate(replace(
            ScenarioConfig(), seed=args.seed, horizon_s=args.days * 86_400,
            routing_mode=mode,
        ))
        report = run_scenario(cfg)
        results[mode] = report
        print(f"{mode.value:10s}: tx+rx {report['total_tx_rx_mJ']:12.1f} mJ, "
              f"{report['record_count']} reports delivered, "
              f"{report['wall_clock_s']:.1f}s wall clock")

    e_diff = results[RoutingMode.DIFFUSION]["total_tx_rx_mJ"]
    e_flood = results[RoutingMode.FLOODING]["total_tx_rx_mJ"]
    same = (results[RoutingMode.DIFFUSION]["record_count"]
            == results[RoutingMode.FLOODING]["record_count"])
    print(f"delivered sets match: {same}")
    print(f"energy ratio diffusion/flooding: {e_diff / e_flood:.3f}")
    return 0 if e_diff <= e_flood else 1


if __name__ == "__main__":
    sys.exit(main())
