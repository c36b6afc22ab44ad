/**
 * Single reducer owning every UI state transition, so the console's
 * behavior is replayable from an action log.
 *
 * Version gating: stream frames older than the last accepted snapshot or
 * tick are ignored, and rendered layers never run ahead of the latest
 * snapshot version.
 */

import {
  Alert, Frame, HitlStatus, Snapshot,
} from "./types.js";

export type Connection = "idle" | "connecting" | "live" | "reconnecting" | "ended";

export interface HitlItemVM {
  id: string;
  district: string;
  tier: string;
  p: number;
  createdAt: number;
  deadline: number;
  status: HitlStatus;
  submitting: boolean;
}

export interface ViewModel {
  connection: Connection;
  snapshotVersion: number;
  clock: number | null;
  degraded: boolean;
  finished: boolean;
  snapshot: Snapshot | null;
  alerts: Alert[];
  hitl: Record<string, HitlItemVM>;
  lastError: string | null;
}

export type Action =
  | { type: "connecting" }
  | { type: "connected" }
  | { type: "disconnected" }
  | { type: "stream_ended" }
  | { type: "snapshot"; snapshot: Snapshot }
  | { type: "frame"; frame: Frame }
  | { type: "decision_submit"; id: string }
  | { type: "decision_result"; id: string; status: HitlStatus | null; error?: string };

export function initialViewModel(): ViewModel {
  return {
    connection: "idle",
    snapshotVersion: 0,
    clock: null,
    degraded: false,
    finished: false,
    snapshot: null,
    alerts: [],
    hitl: {},
    lastError: null,
  };
}

const TERMINAL: HitlStatus[] = ["approved", "overridden", "timed_out"];

export function isTerminal(status: HitlStatus): boolean {
  return TERMINAL.includes(status);
}

/** Seconds-equivalent countdown in simulated minutes; never negative. */
export function countdown(item: HitlItemVM, clock: number | null): number {
  if (clock === null) return item.deadline - item.createdAt;
  return Math.max(0, item.deadline - clock);
}

/** Items the operator may act on right now. */
export function actionable(vm: ViewModel): HitlItemVM[] {
  return Object.values(vm.hitl)
    .filter((i) => i.status === "pending" && countdown(i, vm.clock) > 0)
    .sort((a, b) => a.deadline - b.deadline || a.id.localeCompare(b.id));
}

function alertKey(a: Alert): string {
  return `${a.district}@${a.issued_at}:${a.tier}`;
}

export function reduce(vm: ViewModel, action: Action): ViewModel {
  switch (action.type) {
    case "connecting":
      return { ...vm, connection: vm.snapshot ? "reconnecting" : "connecting" };
    case "connected":
      return { ...vm, connection: "live" };
    case "disconnected":
      // keep the cached view; the client refetches a snapshot on reconnect
      return { ...vm, connection: "reconnecting" };
    case "stream_ended":
      return { ...vm, connection: "ended", finished: true };
    case "snapshot": {
      const snap = action.snapshot;
      if (snap.version < vm.snapshotVersion) return vm;
      return {
        ...vm,
        snapshot: snap,
        snapshotVersion: snap.version,
        clock: snap.clock ?? vm.clock,
        degraded: snap.degraded,
        finished: snap.finished,
      };
    }
    case "frame":
      return applyFrame(vm, action.frame);
    case "decision_submit": {
      const item = vm.hitl[action.id];
      if (!item || item.submitting || isTerminal(item.status)) return vm;
      return {
        ...vm,
        hitl: { ...vm.hitl, [action.id]: { ...item, submitting: true } },
      };
    }
    case "decision_result": {
      const item = vm.hitl[action.id];
      if (!item) return { ...vm, lastError: action.error ?? null };
      const status = action.status ?? item.status;
      return {
        ...vm,
        lastError: action.error ?? null,
        hitl: {
          ...vm.hitl,
          [action.id]: { ...item, status, submitting: false },
        },
      };
    }
  }
}

function applyFrame(vm: ViewModel, frame: Frame): ViewModel {
  switch (frame.type) {
    case "tick": {
      if (frame.version < vm.snapshotVersion) return vm;   // stale frame
      return {
        ...vm,
        snapshotVersion: frame.version,
        clock: frame.t,
        degraded: vm.degraded || frame.degraded,
      };
    }
    case "alert": {
      const key = alertKey(frame.alert);
      if (vm.alerts.some((a) => alertKey(a) === key)) return vm;
      return { ...vm, alerts: [...vm.alerts, frame.alert] };
    }
    case "hitl": {
      const existing = vm.hitl[frame.id];
      if (existing && isTerminal(existing.status)) return vm;
      return {
        ...vm,
        hitl: {
          ...vm.hitl,
          [frame.id]: {
            id: frame.id,
            district: frame.district,
            tier: frame.tier,
            p: frame.p,
            createdAt: frame.t,
            deadline: frame.deadline,
            status: frame.status,
            submitting: existing?.submitting ?? false,
          },
        },
      };
    }
    case "hitl_resolved": {
      const item = vm.hitl[frame.id];
      if (!item) return vm;
      return {
        ...vm,
        hitl: {
          ...vm.hitl,
          [frame.id]: { ...item, status: frame.status, submitting: false },
        },
      };
    }
  }
}
