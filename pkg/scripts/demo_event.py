#!/usr/bin/env python3
"""Simulate one cloudburst event and print a compact operational timeline.

Usage: python3 scripts/demo_event.py [seed]
"""

import sys

from cloudburst.config import mas_config
from cloudburst.evaluation import coordination_latency
from cloudburst.evaluation.benchmark import aggregate, compute_event_aux
from cloudburst.simulation import run_simulation


def main() -> int:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
    cfg = mas_config()
    result = run_simulation(cfg, seed)

    print(f"scenario seed {seed}: {len(result.labels)} labeled event(s), "
          f"{result.ticks} ticks of {cfg.cadence_minutes:g} min")
    for lab in result.labels:
        print(f"  event {lab.event_id}: onset t={lab.onset:g}, "
              f"end t={lab.end:g}, peak {lab.peak_rate:.0f} mm/h, "
              f"districts {', '.join(lab.affected_districts) or '(none)'}")

    print("\nalert timeline:")
    for a in result.recorder.alerts:
        flag = " [low-confidence]" if a.low_confidence else ""
        print(f"  t={a.issued_at:6.1f}  {a.tier.upper():8s} {a.district}  "
              f"p={a.probability:.2f} vs p*={a.threshold:.2f}{flag}")

    print("\nroutes:")
    for p in result.recorder.route_plans:
        status = "viable" if p.viable else "NO PATH IN WINDOW"
        arr = f"arrive t={p.arrival:g}" if p.viable else ""
        print(f"  {p.zone}: depart t={p.departure:g} via "
              f"{len(p.nodes)} nodes {arr} [{status}]")

    reach = [r for r in result.recorder.reach_reports if not r.degenerate]
    if reach:
        mean_reach = sum(r.union_reach for r in reach) / len(reach)
        print(f"\nmean population reach in 10 min: {mean_reach:.1%} "
              f"over {len(reach)} alerts")
    lat = coordination_latency(result.audit)
    if lat.median is not None:
        print(f"coordination latency median: {lat.median:g} min")

    table = aggregate("demo", [compute_event_aux(result)])
    print(f"\nmetrics: crps={table.crps and round(table.crps, 2)} "
          f"csi20={table.csi20 and round(table.csi20, 3)} "
          f"lead={table.median_lead_min} reach={table.reach_10min and round(table.reach_10min, 3)} "
          f"routes={table.routes_viable_frac}")
    print(f"audit: {len(result.audit)} records, chain intact: "
          f"{result.audit.verify_chain()}")
    print(f"run digest: {result.run_digest()[:16]}…")
    return 0


if __name__ == "__main__":
    sys.exit(main())
