"""Run artifact serialization: audit log, metric table, grids, event
stream, operator timeline, digests.
"""

from __future__ import annotations

import json
from pathlib import Path

from .config import save_manifest
from .evaluation.benchmark import aggregate, compute_event_aux
from .simulation import RunResult
from .wire import to_jsonable


def write_run_artifacts(result: RunResult, out_dir: str | Path,
                        seed: int | None = None) -> dict:
    """Write the full deterministic artifact set; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    save_manifest(result.cfg, seed if seed is not None else result.seed,
                  out / "manifest.json", mode=result.mode)
    result.audit.save(out / "audit.ndjson")

    aux = compute_event_aux(result)
    table = aggregate(result.mode, [aux])
    (out / "metrics.json").write_text(
        json.dumps(table.to_dict(), indent=2, sort_keys=True))

    with open(out / "events.ndjson", "w") as fh:
        for frame in result.recorder.stream:
            fh.write(json.dumps(to_jsonable(frame), separators=(",", ":"),
                                sort_keys=True) + "\n")

    (out / "operator_timeline.json").write_text(json.dumps(
        [{"t": d.t, "item_id": d.item_id, "decision": d.decision}
         for d in result.operator_timeline], indent=2))

    (out / "alerts.json").write_text(json.dumps(
        [to_jsonable(a) for a in result.recorder.alerts], indent=2,
        sort_keys=True))
    routes = []
    for p in result.recorder.route_plans:
        finite = lambda x: x if x not in (float("inf"), float("-inf")) else None
        routes.append({"zone": p.zone, "origin": p.origin,
                       "nodes": list(p.nodes), "departure": p.departure,
                       "arrival": finite(p.arrival),
                       "passability_margin": finite(p.passability_margin),
                       "viable": p.viable})
    (out / "routes.json").write_text(json.dumps(routes, indent=2,
                                                sort_keys=True))

    from .world.scenario import save_scenario
    save_scenario(result.scenario, out / "scenario")
    grids = out / "grids"
    grids.mkdir(exist_ok=True)
    elev = result.scenario.terrain.elevation
    elev.save(grids / "elevation")
    result.scenario.community.population.save(grids / "population")
    final_truth = None
    if result.recorder.verification:
        last = result.recorder.verification[-1]
        final_truth = last["frame_t"]
    digest = {
        "run_digest": result.run_digest(),
        "audit_digest": result.audit.digest(),
        "state_hash": result.final_state_hash,
        "obs_digest": result.recorder.obs_digest(),
        "degraded": result.degraded,
        "ticks": result.ticks,
        "alerts": len(result.recorder.alerts),
        "events": len(result.labels),
        "last_verified_frame": final_truth,
    }
    (out / "run_digest.json").write_text(json.dumps(digest, indent=2,
                                                    sort_keys=True))
    return {"digest": digest, "metrics": table.to_dict()}


def load_stream(run_dir: str | Path) -> list[dict]:
    path = Path(run_dir) / "events.ndjson"
    return [json.loads(line) for line in path.read_text().splitlines()
            if line.strip()]
