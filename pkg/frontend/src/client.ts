/**
 * Gateway client: snapshot fetch, event-stream subscription with
 * backoff-reconnect (snapshot refetch always precedes stream resume),
 * and guarded HITL decision submission (a decision POST is never
 * silently retried).
 */

import { Action } from "./reducer.js";
import { Frame, GridBlob, HitlStatus, Snapshot } from "./types.js";

export type Dispatch = (action: Action) => void;

export interface EventSourceLike {
  addEventListener(type: string, handler: (ev: { data: string }) => void): void;
  close(): void;
  onerror: ((ev: unknown) => void) | null;
}

export interface ClientDeps {
  fetchJson: (url: string) => Promise<unknown>;
  postJson: (url: string, body: unknown) =>
    Promise<{ status: number; body: Record<string, unknown> }>;
  makeEventSource: (url: string) => EventSourceLike;
  setTimer: (fn: () => void, ms: number) => unknown;
}

export const FRAME_TYPES = ["tick", "alert", "hitl", "hitl_resolved"] as const;

export class GatewayClient {
  private stopped = false;
  private backoffMs = 500;
  private source: EventSourceLike | null = null;
  private inflight = new Set<string>();

  constructor(private base: string, private dispatch: Dispatch,
              private deps: ClientDeps) {}

  /** Fetch a snapshot, then attach to the event stream; on error, retry
   * with exponential backoff, snapshot first every time. */
  async subscribe(): Promise<void> {
    if (this.stopped) return;
    this.dispatch({ type: "connecting" });
    try {
      const snapshot = await this.deps.fetchJson(
        `${this.base}/state/snapshot`) as Snapshot;
      this.dispatch({ type: "snapshot", snapshot });
      this.attachStream();
      this.dispatch({ type: "connected" });
      this.backoffMs = 500;
    } catch {
      this.scheduleReconnect();
    }
  }

  private attachStream(): void {
    const source = this.deps.makeEventSource(`${this.base}/events`);
    this.source = source;
    for (const kind of FRAME_TYPES) {
      source.addEventListener(kind, (ev) => {
        const frame = JSON.parse(ev.data) as Frame;
        this.dispatch({ type: "frame", frame });
      });
    }
    source.addEventListener("end", () => {
      this.dispatch({ type: "stream_ended" });
      this.stop();
    });
    source.onerror = () => {
      if (this.stopped) return;
      source.close();
      this.dispatch({ type: "disconnected" });
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    const delay = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, 8000);
    this.deps.setTimer(() => void this.subscribe(), delay);
  }

  stop(): void {
    this.stopped = true;
    this.source?.close();
  }

  /** POST one decision; duplicate submissions for an in-flight item are
   * dropped at the client too (belt to the reducer's braces). */
  async submitDecision(id: string, decision: "approve" | "override"):
      Promise<void> {
    if (this.inflight.has(id)) return;
    this.inflight.add(id);
    this.dispatch({ type: "decision_submit", id });
    try {
      const { status, body } = await this.deps.postJson(
        `${this.base}/hitl/${id}`, { decision });
      if (status === 200 || status === 202 || status === 409) {
        const serverStatus = (body.status as HitlStatus | undefined) ?? null;
        this.dispatch({
          type: "decision_result", id,
          status: serverStatus === ("submitted" as unknown) ? null : serverStatus,
          error: status === 409 ? "resolved server-side" : undefined,
        });
      } else {
        this.dispatch({ type: "decision_result", id, status: null,
                        error: `gateway returned ${status}` });
      }
    } catch (err) {
      this.dispatch({ type: "decision_result", id, status: null,
                      error: String(err) });
    } finally {
      this.inflight.delete(id);
    }
  }

  async fetchGrid(hash: string): Promise<GridBlob> {
    return await this.deps.fetchJson(`${this.base}/grids/${hash}`) as GridBlob;
  }
}

export function browserDeps(): ClientDeps {
  return {
    fetchJson: async (url) => {
      const resp = await fetch(url);
      if (!resp.ok) throw new Error(`${resp.status} for ${url}`);
      return resp.json();
    },
    postJson: async (url, body) => {
      const resp = await fetch(url, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
      return { status: resp.status, body: await resp.json() };
    },
    makeEventSource: (url) => new EventSource(url) as unknown as EventSourceLike,
    setTimer: (fn, ms) => setTimeout(fn, ms),
  };
}
