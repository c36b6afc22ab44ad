/** Wire types for the gateway HTTP/JSON and event-stream contract. */

export interface GridRef {
  t: number;
  hash: string;
  max?: number;
  calibrated?: boolean;
  stale_frac?: number;
}

export interface Snapshot {
  version: number;
  clock: number | null;
  mode: string;
  seed?: number;
  duration?: number;
  degraded: boolean;
  pstar?: number | null;
  spread_inflation?: number | null;
  alerts_issued: number;
  hitl_pending: number;
  finished: boolean;
  replay?: boolean;
  grids: Partial<Record<"analysis" | "probability" | "depth" | "elevation", GridRef>>;
}

export interface Alert {
  district: string;
  tier: "watch" | "warning" | "evacuate";
  probability?: number;
  p?: number;
  threshold: number;
  low_confidence: boolean;
  issued_at: number;
  expiry: number;
  frame_t: number;
}

export type HitlStatus = "pending" | "approved" | "overridden" | "timed_out";

export interface HitlItemWire {
  id: string;
  district: string;
  tier: string;
  p: number;
  threshold?: number;
  created_at: number;
  deadline: number;
  status: HitlStatus;
}

export interface TickFrame {
  type: "tick";
  t: number;
  version: number;
  delivered: number;
  degraded: boolean;
  alerts_issued: number;
  hitl_pending: number;
}

export interface AlertFrame {
  type: "alert";
  t: number;
  alert: Alert;
}

export interface HitlFrame {
  type: "hitl";
  t: number;
  id: string;
  district: string;
  tier: string;
  p: number;
  deadline: number;
  status: HitlStatus;
}

export interface HitlResolvedFrame {
  type: "hitl_resolved";
  t: number;
  id: string;
  status: HitlStatus;
}

export type Frame = TickFrame | AlertFrame | HitlFrame | HitlResolvedFrame;

export interface GridBlob {
  nx: number;
  ny: number;
  cell_km: number;
  t: number;
  variable: string;
  units: string;
  data_b64: string;
}

export interface RouteFrame {
  zone: string;
  nodes: string[];
  departure: number;
  arrival: number | null;
  viable: boolean;
}
