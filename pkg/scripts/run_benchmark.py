#!/usr/bin/env python3
"""Run the 48-event MAS-vs-baseline benchmark plus all three ablations
and write reports under runs/benchmark/.

Usage: python3 scripts/run_benchmark.py [events] [seed_base]
"""

import sys
import time
from pathlib import Path

from cloudburst.evaluation.benchmark import (report_markdown, run_ablation,
                                             run_benchmark, write_reports)


def main() -> int:
    events = int(sys.argv[1]) if len(sys.argv) > 1 else 48
    seed_base = int(sys.argv[2]) if len(sys.argv) > 2 else 1
    out = Path("runs") / f"benchmark-{events}x{seed_base}"

    t0 = time.time()
    report = run_benchmark(events=events, seed_base=seed_base,
                           progress=lambda lab, i, n: print(f"  [{lab}] {i}/{n}",
                                                            end="\r"))
    print(f"\nbenchmark finished in {time.time() - t0:.0f}s")
    print(report_markdown(report))
    write_reports(report, out)

    full = (report.mas, report.mas_aux)
    ok = report.passed()
    for comp in ("downscaling", "learning", "initiation"):
        ab = run_ablation(comp, events=events, seed_base=seed_base, full=full)
        sign = "confirmed" if ab.sign_ok() else "NOT confirmed"
        print(f"ablation {comp}: {sign}")
        for metric, delta in ab.deltas.items():
            if delta is not None:
                print(f"    {metric}: {delta:+.4f}")
        ok = ok and ab.sign_ok()

    print(f"\nreports in {out}")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
