"""Benchmark and ablation runners: per-event metric extraction, batch
aggregation, MAS-vs-baseline comparison verdicts, report emission.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import ablation_config, baseline_config, mas_config
from ..response.routing import check_route
from ..simulation import RunResult, run_simulation, truth_depth_schedule
from ..world.scenario import truth_step
from .metrics import (ContingencyTable, contingency, coordination_latency,
                      crps_field, lead_time)


@dataclass
class MetricTable:
    label: str
    crps: float | None = None
    csi20: float | None = None
    csi40: float | None = None
    pod: float | None = None             # event detection rate
    far: float | None = None             # cell FAR at 20 mm/h
    reliability: float | None = None
    median_lead_min: float | None = None
    median_signal_lead_min: float | None = None
    reach_10min: float | None = None
    routes_viable_frac: float | None = None
    coordination_latency_min: float | None = None
    events: int = 0
    warned: int = 0
    late: int = 0
    missed: int = 0

    ORDER = ("crps", "csi20", "csi40", "reliability", "median_lead_min",
             "reach_10min", "routes_viable_frac")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "label", "crps", "csi20", "csi40", "pod", "far", "reliability",
            "median_lead_min", "median_signal_lead_min", "reach_10min",
            "routes_viable_frac", "coordination_latency_min", "events",
            "warned", "late", "missed")}


@dataclass
class EventAux:
    """Raw per-event accumulables the batch aggregation runs on."""
    seed: int
    crps: float | None
    cont20: ContingencyTable
    cont40: ContingencyTable
    rel_bins: np.ndarray                 # (bins, 3): n, sum_p, sum_o
    leads: list
    signal_leads: list
    warned: int
    late: int
    missed: int
    events: int
    reach: list
    routes_viable: int
    routes_total: int
    latencies: list
    degraded: bool


REL_BINS = 10
# raw exceedance fraction that counts as a detection signal
SIGNAL_QUORUM = 0.25


def _reliability_from_bins(bins: np.ndarray) -> float | None:
    n = bins[:, 0].sum()
    if n == 0:
        return None
    score = 1.0
    for k in range(bins.shape[0]):
        nk = bins[k, 0]
        if nk == 0:
            continue
        score -= (nk / n) * abs(bins[k, 1] / nk - bins[k, 2] / nk)
    return float(score)


def _accumulate_pairs(bins: np.ndarray, p: np.ndarray, o: np.ndarray) -> None:
    idx = np.minimum((p * REL_BINS).astype(int), REL_BINS - 1)
    for k in range(REL_BINS):
        sel = idx == k
        if sel.any():
            bins[k, 0] += int(sel.sum())
            bins[k, 1] += float(p[sel].sum())
            bins[k, 2] += float(o[sel].sum())


def compute_event_aux(result: RunResult) -> EventAux:
    scenario = result.scenario
    labels = result.labels
    cfg = result.cfg
    bbox, windows = result.recorder.bbox, result.recorder.windows

    crps_vals = []
    cont20 = ContingencyTable()
    cont40 = ContingencyTable()
    rel_bins = np.zeros((REL_BINS, 3))

    def in_window(vt: float) -> bool:
        if vt > scenario.duration:
            return False
        return not windows or any(a <= vt <= b for a, b in windows)

    truth_cache: dict = {}

    def truth_at(vt: float) -> np.ndarray:
        if vt not in truth_cache:
            truth_cache[vt] = truth_step(scenario, vt).rain.values[bbox[0],
                                                                   bbox[1]]
        return truth_cache[vt]

    for rec in result.recorder.verification:
        # CSI accumulates over the whole horizon; CRPS and reliability
        # verify at the fixed lead
        for li, lvt in enumerate(rec["lead_valid_ts"]):
            if not in_window(lvt):
                continue
            truth_l = truth_at(lvt)
            cont20 = cont20 + contingency(rec["mean_leads"][li], truth_l, 20.0)
            cont40 = cont40 + contingency(rec["mean_leads"][li], truth_l, 40.0)
        vt = rec["valid_t"]
        if not in_window(vt):
            continue
        truth = truth_at(vt)
        crps_vals.append(crps_field(rec["members"], truth))
        _accumulate_pairs(rel_bins, rec["p20"].ravel(),
                          (truth >= 20.0).ravel().astype(float))

    stats = lead_time(result.alert_tuples(), labels,
                      max_lead=cfg.forecast.horizon)
    leads = [v for v in stats.per_event.values() if v is not None and v > 0]

    # detection lead of the raw forecast-exceedance signal, free of alert
    # dedup and governance timing
    signal_leads = []
    ordered = sorted(labels, key=lambda l: l.onset)
    for i, lab in enumerate(ordered):
        start = max(ordered[i - 1].end if i > 0 else -np.inf,
                    lab.onset - cfg.forecast.horizon)
        hits = [t for (t, pmax) in result.recorder.district_pmax
                if start < t <= lab.onset
                and any(pmax.get(d, 0.0) >= SIGNAL_QUORUM
                        for d in lab.affected_districts)]
        signal_leads.append(lab.onset - min(hits) if hits else 0.0)

    reach = [r.union_reach for r in result.recorder.reach_reports
             if not r.degenerate]

    routes_viable = routes_total = 0
    if labels:
        truth_sched = truth_depth_schedule(scenario, cfg)
        roads = scenario.community.roads
        window = cfg.routing.evac_window
        for lab in labels:
            for zone in lab.affected_districts:
                routes_total += 1
                plans = [p for p in result.recorder.route_plans
                         if p.zone == zone
                         and lab.onset - cfg.forecast.horizon
                         <= p.departure <= lab.end]
                if not plans:
                    continue
                plan = plans[0]
                if plan.viable and check_route(roads, plan, truth_sched, window):
                    routes_viable += 1

    latency = coordination_latency(result.audit)

    return EventAux(seed=result.seed,
                    crps=float(np.mean(crps_vals)) if crps_vals else None,
                    cont20=cont20, cont40=cont40, rel_bins=rel_bins,
                    leads=leads, signal_leads=signal_leads,
                    warned=stats.warned, late=stats.late,
                    missed=stats.missed, events=len(labels), reach=reach,
                    routes_viable=routes_viable, routes_total=routes_total,
                    latencies=list(latency.latencies),
                    degraded=result.degraded)


def aggregate(label: str, auxes: list[EventAux]) -> MetricTable:
    crps_vals = [a.crps for a in auxes if a.crps is not None]
    cont20 = sum((a.cont20 for a in auxes), ContingencyTable())
    cont40 = sum((a.cont40 for a in auxes), ContingencyTable())
    rel_bins = np.sum([a.rel_bins for a in auxes], axis=0) \
        if auxes else np.zeros((REL_BINS, 3))
    # missed events contribute zero lead so the batch median rewards
    # detections instead of surviving flukes
    leads = [v for a in auxes for v in a.leads] + \
        [0.0] * sum(a.missed for a in auxes)
    signal_leads = [v for a in auxes for v in a.signal_leads]
    reach = [v for a in auxes for v in a.reach]
    lats = [v for a in auxes for v in a.latencies]
    warned = sum(a.warned for a in auxes)
    late = sum(a.late for a in auxes)
    missed = sum(a.missed for a in auxes)
    events = sum(a.events for a in auxes)
    routes_total = sum(a.routes_total for a in auxes)
    routes_viable = sum(a.routes_viable for a in auxes)
    return MetricTable(
        label=label,
        crps=float(np.mean(crps_vals)) if crps_vals else None,
        csi20=cont20.csi, csi40=cont40.csi,
        pod=(warned + late) / events if events else None,
        far=cont20.far,
        reliability=_reliability_from_bins(rel_bins),
        median_lead_min=float(np.median(leads)) if leads else None,
        median_signal_lead_min=float(np.median(signal_leads))
        if signal_leads else None,
        reach_10min=float(np.mean(reach)) if reach else None,
        routes_viable_frac=routes_viable / routes_total if routes_total else None,
        coordination_latency_min=float(np.median(lats)) if lats else None,
        events=events, warned=warned, late=late, missed=missed)


@dataclass
class BenchmarkReport:
    mas: MetricTable
    baseline: MetricTable
    mas_aux: list[EventAux]
    baseline_aux: list[EventAux]
    seeds: list[int]
    verdicts: dict = field(default_factory=dict)
    crps_win_frac: float | None = None

    def passed(self) -> bool:
        return all(v["win"] for v in self.verdicts.values()) and \
            (self.crps_win_frac or 0.0) >= 0.75


# lower-is-better metrics flip the comparison
_LOWER_BETTER = {"crps"}


def compare(mas: MetricTable, baseline: MetricTable,
            mas_aux: list[EventAux], base_aux: list[EventAux]) -> tuple[dict, float]:
    verdicts = {}
    for metric in MetricTable.ORDER:
        m, b = getattr(mas, metric), getattr(baseline, metric)
        if m is None or b is None:
            verdicts[metric] = {"mas": m, "baseline": b, "delta": None,
                                "win": False}
            continue
        delta = m - b
        win = delta < 0 if metric in _LOWER_BETTER else delta > 0
        verdicts[metric] = {"mas": m, "baseline": b, "delta": delta,
                            "win": bool(win)}
    wins = total = 0
    for ma, ba in zip(mas_aux, base_aux):
        if ma.crps is None or ba.crps is None:
            continue
        total += 1
        wins += ma.crps < ba.crps
    return verdicts, (wins / total if total else None)


def run_batch(cfg_factory, seeds: list[int], label: str,
              thread_learning: bool = True,
              progress=None) -> tuple[MetricTable, list[EventAux]]:
    """Run one configuration over the seed batch sequentially, carrying the
    strategic learning state from event to event."""
    auxes = []
    learning_state = None
    for i, seed in enumerate(seeds):
        cfg = cfg_factory()
        try:
            result = run_simulation(cfg, seed, mode=label,
                                    initial_learning=learning_state)
        except Exception as exc:
            raise RuntimeError(
                f"event with seed {seed} failed to simulate: {exc}") from exc
        if thread_learning and cfg.toggles.learning:
            learning_state = {
                "pstar": result.learning_out["pstar"],
                "calibration": result.learning_out["calibration"],
                "spread_inflation": result.learning_out["spread_inflation"]}
        auxes.append(compute_event_aux(result))
        if progress is not None:
            progress(label, i + 1, len(seeds))
    return aggregate(label, auxes), auxes


def run_benchmark(events: int = 48, seed_base: int = 1,
                  progress=None) -> BenchmarkReport:
    if events <= 0:
        raise ValueError("empty batch")
    seeds = [seed_base + i for i in range(events)]
    mas, mas_aux = run_batch(mas_config, seeds, "mas", progress=progress)
    base, base_aux = run_batch(baseline_config, seeds, "baseline",
                               progress=progress)
    verdicts, win_frac = compare(mas, base, mas_aux, base_aux)
    return BenchmarkReport(mas=mas, baseline=base, mas_aux=mas_aux,
                           baseline_aux=base_aux, seeds=seeds,
                           verdicts=verdicts, crps_win_frac=win_frac)


@dataclass
class AblationReport:
    component: str
    full: MetricTable
    ablated: MetricTable
    deltas: dict

    def sign_ok(self) -> bool:
        checks = {
            "downscaling": lambda d: d["csi20"] is not None and d["csi20"] < 0,
            "learning": lambda d: (d["reliability"] is not None
                                   and d["reliability"] <= 0
                                   and d["crps"] is not None and d["crps"] >= 0),
            "initiation": lambda d: (d["median_signal_lead_min"] is not None
                                     and d["median_signal_lead_min"] <= 0
                                     and d["pod"] is not None and d["pod"] <= 0),
        }
        return checks[self.component](self.deltas)


def run_ablation(component: str, events: int = 48, seed_base: int = 1,
                 full: tuple[MetricTable, list[EventAux]] | None = None,
                 progress=None) -> AblationReport:
    seeds = [seed_base + i for i in range(events)]
    if full is None:
        full = run_batch(mas_config, seeds, "mas", progress=progress)
    full_table, _ = full
    ablated_table, _ = run_batch(lambda: ablation_config(component), seeds,
                                 f"ablation:{component}", progress=progress)
    deltas = {}
    for metric in ("crps", "csi20", "csi40", "pod", "reliability",
                   "median_lead_min", "median_signal_lead_min",
                   "reach_10min", "routes_viable_frac"):
        f, a = getattr(full_table, metric), getattr(ablated_table, metric)
        deltas[metric] = (a - f) if (f is not None and a is not None) else None
    return AblationReport(component=component, full=full_table,
                          ablated=ablated_table, deltas=deltas)


# -- report emission -------------------------------------------------------------

def report_markdown(report: BenchmarkReport) -> str:
    rows = [("CRPS (lower better)", "crps"), ("CSI @ 20 mm/h", "csi20"),
            ("CSI @ 40 mm/h", "csi40"), ("Reliability", "reliability"),
            ("Median lead time (min)", "median_lead_min"),
            ("Population reach (10 min)", "reach_10min"),
            ("Viable routes maintained", "routes_viable_frac")]
    out = ["| Metric | Baseline | MAS | MAS wins |",
           "|---|---|---|---|"]
    for name, key in rows:
        v = report.verdicts[key]
        fmt = lambda x: "n/a" if x is None else f"{x:.3f}"
        out.append(f"| {name} | {fmt(v['baseline'])} | {fmt(v['mas'])} | "
                   f"{'yes' if v['win'] else 'NO'} |")
    out.append("")
    out.append(f"CRPS per-event win fraction: "
               f"{report.crps_win_frac:.2f}" if report.crps_win_frac is not None
               else "CRPS per-event win fraction: n/a")
    out.append(f"Events: {report.mas.events}, MAS warned {report.mas.warned}, "
               f"late {report.mas.late}, missed {report.mas.missed}")
    return "\n".join(out) + "\n"


def report_json(report: BenchmarkReport) -> dict:
    return {"verdicts": report.verdicts,
            "crps_win_frac": report.crps_win_frac,
            "mas": report.mas.to_dict(),
            "baseline": report.baseline.to_dict(),
            "seeds": report.seeds,
            "passed": report.passed()}


def write_reports(report: BenchmarkReport, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "benchmark.md").write_text(report_markdown(report))
    (out / "verdicts.json").write_text(
        json.dumps(report_json(report), indent=2, sort_keys=True))
    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        keys = list(report.mas.to_dict())
        writer.writerow(keys)
        writer.writerow([report.mas.to_dict()[k] for k in keys])
        writer.writerow([report.baseline.to_dict()[k] for k in keys])
