"""Append-only audit ledger with per-record chained hashing.

Every parameter change, governance outcome, HITL decision, agent failure
and issued alert lands here as one record. The on-disk form is
newline-delimited JSON with a fixed field order so determinism checks can
compare logs byte for byte. Tamper evidence comes from chaining: each
record's hash covers its content plus the previous record's hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

KINDS = ("param_change", "governance_veto", "hitl_decision", "agent_failure",
         "alert_issued", "ingest", "run_event")

_GENESIS = "0" * 64


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    t: float
    actor: str
    kind: str
    subject: str
    old: object = None
    new: object = None
    evidence: dict = field(default_factory=dict)
    rationale: str = ""
    hash: str = ""

    def body(self) -> dict:
        # Field order here is the canonical serialization order.
        return {"seq": self.seq, "t": self.t, "actor": self.actor,
                "kind": self.kind, "subject": self.subject,
                "old": self.old, "new": self.new,
                "evidence": self.evidence, "rationale": self.rationale}

    def to_json(self) -> str:
        d = self.body()
        d["hash"] = self.hash
        return json.dumps(d, separators=(",", ":"), allow_nan=False)


def _chain_hash(prev: str, body: dict) -> str:
    payload = json.dumps(body, separators=(",", ":"), sort_keys=True,
                         allow_nan=False)
    return hashlib.sha256((prev + payload).encode()).hexdigest()


class AuditLog:
    """Single-writer append-only ledger."""

    def __init__(self):
        self._records: list[AuditRecord] = []

    def append(self, t: float, actor: str, kind: str, subject: str,
               old: object = None, new: object = None,
               evidence: dict | None = None, rationale: str = "") -> AuditRecord:
        if kind not in KINDS:
            raise ValueError(f"unknown audit kind {kind!r}")
        prev = self._records[-1].hash if self._records else _GENESIS
        rec = AuditRecord(seq=len(self._records), t=t, actor=actor, kind=kind,
                          subject=subject, old=old, new=new,
                          evidence=dict(evidence or {}), rationale=rationale)
        rec = AuditRecord(**{**rec.__dict__, "hash": _chain_hash(prev, rec.body())})
        self._records.append(rec)
        return rec

    @property
    def records(self) -> tuple[AuditRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def digest(self) -> str:
        """Hash of the final record, covering the whole chain."""
        return self._records[-1].hash if self._records else _GENESIS

    def verify_chain(self) -> bool:
        prev = _GENESIS
        for i, rec in enumerate(self._records):
            if rec.seq != i or _chain_hash(prev, rec.body()) != rec.hash:
                return False
            prev = rec.hash
        return True

    def to_ndjson(self) -> str:
        return "".join(rec.to_json() + "\n" for rec in self._records)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_ndjson())

    @staticmethod
    def load(path: str | Path) -> "AuditLog":
        log = AuditLog()
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            log._records.append(AuditRecord(
                seq=d["seq"], t=d["t"], actor=d["actor"], kind=d["kind"],
                subject=d["subject"], old=d["old"], new=d["new"],
                evidence=d["evidence"], rationale=d["rationale"], hash=d["hash"]))
        return log

    def select(self, kind: str | None = None,
               actor: str | None = None) -> Iterable[AuditRecord]:
        for rec in self._records:
            if kind is not None and rec.kind != kind:
                continue
            if actor is not None and rec.actor != actor:
                continue
            yield rec
