"""HTTP gateway for the operator dashboard: snapshots, alert and HITL
queues, a server-sent event stream, and grid blobs.

The gateway observes and injects only: reads take state snapshots, and
operator decisions enter the runtime through the scheduler's operator
inbox, so a slow or absent client can never block the simulation. Replay
mode serves a recorded run's artifacts read-only.
"""

from __future__ import annotations

import base64
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .artifacts import load_stream, write_run_artifacts
from .config import SimConfig
from .simulation import Simulation, build_simulation
from .wire import to_jsonable


class LiveSession:
    """A paced simulation plus everything the gateway needs to serve it."""

    def __init__(self, cfg: SimConfig, seed: int, mode: str = "mas",
                 pace: float = 10.0, out_dir: Path | None = None):
        self.sim: Simulation = build_simulation(cfg, seed, mode=mode)
        self.pace = pace
        self.out_dir = out_dir
        self.finished = threading.Event()
        self.tick_done = threading.Condition()
        self.result = None
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def _loop(self) -> None:
        wall_per_tick = self.sim.cfg.cadence_minutes / max(self.pace, 1e-6)
        for _ in range(self.sim.n_ticks):
            t0 = time.monotonic()
            self.sim.step()
            with self.tick_done:
                self.tick_done.notify_all()
            sleep = wall_per_tick - (time.monotonic() - t0)
            if sleep > 0:
                time.sleep(sleep)
        self.result = self.sim.finish()
        if self.out_dir is not None:
            write_run_artifacts(self.result, self.out_dir)
        self.finished.set()
        with self.tick_done:
            self.tick_done.notify_all()

    def join(self, timeout: float | None = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    # -- views ---------------------------------------------------------------
    def snapshot(self) -> dict:
        sim = self.sim
        snap = sim.state.snapshot()
        out = {"version": snap.version, "clock": snap.clock,
               "mode": sim.mode, "seed": sim.seed,
               "duration": sim.scenario.duration,
               "degraded": sim.sched.degraded_mode,
               "pstar": snap.get("pstar"),
               "spread_inflation": snap.get("spread_inflation"),
               "alerts_issued": len(sim.recorder.alerts),
               "hitl_pending": len(sim.governor.pending_items()),
               "finished": self.finished.is_set(),
               "grids": {}}
        analysis = snap.get("analysis")
        if analysis is not None:
            out["grids"]["analysis"] = {
                "t": analysis.t, "hash": sim.blobs.put(analysis.rain),
                "max": float(analysis.rain.values.max()),
                "stale_frac": analysis.stale_frac}
        prob = snap.get("probability")
        if prob is not None:
            from .grids import GridField
            p40 = GridField(prob["p_any"], t=prob["frame_t"],
                            variable="p_exceed", units="1")
            out["grids"]["probability"] = {
                "t": prob["frame_t"], "hash": sim.blobs.put(p40),
                "calibrated": prob["calibrated"]}
        depth = snap.get("hydro.depth_now")
        if depth is not None:
            out["grids"]["depth"] = {
                "t": depth.t, "hash": sim.blobs.put(depth.depth),
                "max": float(depth.depth.values.max())}
        elev = sim.scenario.terrain.elevation
        out["grids"]["elevation"] = {"t": 0.0, "hash": sim.blobs.put(elev),
                                     "max": float(elev.values.max())}
        return out

    def alerts(self) -> list:
        return [to_jsonable(a) for a in self.sim.recorder.alerts]

    def hitl_items(self, pending_only: bool = True) -> list:
        items = self.sim.governor.pending_items() if pending_only \
            else self.sim.governor.all_items()
        return [{"id": i.item_id, "district": i.decision.district,
                 "tier": i.decision.tier, "p": i.decision.probability,
                 "threshold": i.decision.threshold,
                 "created_at": i.created_at, "deadline": i.deadline,
                 "status": i.status} for i in items]

    def submit_decision(self, item_id: str, decision: str) -> dict:
        gov = self.sim.governor
        items = {i.item_id: i for i in gov.all_items()}
        if item_id not in items:
            return {"status": 404, "body": {"error": "unknown item"}}
        item = items[item_id]
        if item.status != "pending":
            return {"status": 409,
                    "body": {"id": item_id, "status": item.status,
                             "error": "already resolved"}}
        if decision not in ("approve", "override"):
            return {"status": 400, "body": {"error": "bad decision"}}
        self.sim.sched.submit_operator_decision(item_id, decision)
        deadline = time.monotonic() + 3.0
        while time.monotonic() < deadline and not self.finished.is_set():
            if items[item_id].status != "pending":
                return {"status": 200, "body": {"id": item_id,
                                                "status": item.status}}
            with self.tick_done:
                self.tick_done.wait(0.2)
        status = items[item_id].status
        code = 200 if status != "pending" else 202
        return {"status": code,
                "body": {"id": item_id,
                         "status": status if status != "pending"
                         else "submitted"}}

    def stream_frames(self) -> list:
        return self.sim.recorder.stream

    def grid_blob(self, key: str) -> dict | None:
        if key not in self.sim.blobs:
            return None
        blob, sidecar = self.sim.blobs.get_raw(key)
        return dict(sidecar, data_b64=base64.b64encode(blob).decode())


class ReplaySession:
    """Read-only view over a recorded run's artifacts."""

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)
        self.frames = load_stream(self.run_dir)
        self.manifest = json.loads((self.run_dir / "manifest.json").read_text())
        self._alerts = json.loads((self.run_dir / "alerts.json").read_text())
        self.digest = json.loads((self.run_dir / "run_digest.json").read_text())
        self.finished = threading.Event()
        self.finished.set()

    def snapshot(self) -> dict:
        ticks = [f for f in self.frames if f.get("type") == "tick"]
        last = ticks[-1] if ticks else {}
        return {"replay": True, "mode": self.manifest.get("mode"),
                "seed": self.manifest.get("seed"),
                "clock": last.get("t"), "version": last.get("version"),
                "degraded": self.digest.get("degraded"),
                "alerts_issued": self.digest.get("alerts"),
                "hitl_pending": 0, "finished": True, "grids": {}}

    def alerts(self) -> list:
        return self._alerts

    def hitl_items(self, pending_only: bool = True) -> list:
        items: dict = {}
        for f in self.frames:
            if f.get("type") == "hitl":
                items[f["id"]] = {"id": f["id"], "district": f["district"],
                                  "tier": f["tier"], "p": f["p"],
                                  "deadline": f["deadline"],
                                  "created_at": f["t"],
                                  "status": f["status"]}
            elif f.get("type") == "hitl_resolved" and f["id"] in items:
                items[f["id"]]["status"] = f["status"]
        out = [items[k] for k in sorted(items)]
        if pending_only:
            out = [i for i in out if i["status"] == "pending"]
        return out

    def submit_decision(self, item_id: str, decision: str) -> dict:
        return {"status": 409, "body": {"error": "replay is read-only"}}

    def stream_frames(self) -> list:
        return self.frames

    def grid_blob(self, key: str) -> dict | None:
        return None


def _make_handler(session):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            pass

        def _json(self, code: int, body) -> None:
            payload = json.dumps(body).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(payload)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods",
                             "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            path = self.path.split("?")[0]
            if path == "/state/snapshot":
                self._json(200, session.snapshot())
            elif path == "/alerts":
                self._json(200, session.alerts())
            elif path == "/hitl":
                self._json(200, session.hitl_items())
            elif path == "/events":
                self._serve_events()
            elif path.startswith("/grids/"):
                blob = session.grid_blob(path.split("/grids/", 1)[1])
                if blob is None:
                    self._json(404, {"error": "unknown grid"})
                else:
                    self._json(200, blob)
            else:
                self._json(404, {"error": "unknown endpoint"})

        def do_POST(self):
            path = self.path.split("?")[0]
            if not path.startswith("/hitl/"):
                self._json(404, {"error": "unknown endpoint"})
                return
            item_id = path.split("/hitl/", 1)[1]
            try:
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
            except (ValueError, json.JSONDecodeError):
                self._json(400, {"error": "bad request body"})
                return
            result = session.submit_decision(item_id,
                                             body.get("decision", ""))
            self._json(result["status"], result["body"])

        def _serve_events(self):
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Connection", "close")
            self.end_headers()
            self.close_connection = True
            sent = 0
            try:
                while True:
                    frames = session.stream_frames()
                    while sent < len(frames):
                        frame = frames[sent]
                        data = json.dumps(to_jsonable(frame),
                                          separators=(",", ":"),
                                          sort_keys=True)
                        msg = f"event: {frame.get('type', 'message')}\n" \
                              f"data: {data}\n\n"
                        self.wfile.write(msg.encode())
                        sent += 1
                    self.wfile.flush()
                    if session.finished.is_set() and \
                            sent >= len(session.stream_frames()):
                        self.wfile.write(b"event: end\ndata: {}\n\n")
                        self.wfile.flush()
                        break
                    time.sleep(0.05)
            except (BrokenPipeError, ConnectionResetError):
                pass

    return Handler


class Gateway:
    def __init__(self, session, host: str = "127.0.0.1", port: int = 0):
        self.session = session
        self.server = ThreadingHTTPServer((host, port),
                                          _make_handler(session))
        self.server.daemon_threads = True

    @property
    def address(self) -> tuple[str, int]:
        return self.server.server_address[:2]

    def start(self) -> None:
        threading.Thread(target=self.server.serve_forever,
                         daemon=True).start()

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()


def serve_live(cfg: SimConfig, seed: int, mode: str, host: str, port: int,
               pace: float, out_dir: Path) -> None:
    session = LiveSession(cfg, seed, mode=mode, pace=pace, out_dir=out_dir)
    session.start()
    gateway = Gateway(session, host, port)
    try:
        gateway.server.serve_forever()
    except KeyboardInterrupt:
        gateway.stop()


def serve_replay(run_dir: Path, host: str, port: int) -> None:
    session = ReplaySession(run_dir)
    gateway = Gateway(session, host, port)
    try:
        gateway.server.serve_forever()
    except KeyboardInterrupt:
        gateway.stop()
