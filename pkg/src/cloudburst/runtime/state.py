"""Versioned shared state repository with snapshot isolation.

Values stored here are treated as immutable; writers replace whole
entries. Each write bumps the global version, and a snapshot taken at
version v keeps returning the content it saw at v.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from types import MappingProxyType

from ..wire import canonical_json


class StaleWrite(Exception):
    pass


@dataclass(frozen=True)
class Snapshot:
    version: int
    clock: float
    entries: MappingProxyType

    def get(self, key: str, default: object = None) -> object:
        return self.entries.get(key, default)

    def __contains__(self, key: str) -> bool:
        return key in self.entries


class SharedState:
    def __init__(self):
        self._version = 0
        self._clock = 0.0
        self._entries: dict[str, object] = {}
        self._entry_versions: dict[str, int] = {}

    @property
    def version(self) -> int:
        return self._version

    @property
    def clock(self) -> float:
        return self._clock

    def advance_clock(self, to: float) -> None:
        if to < self._clock:
            raise ValueError("clock never decreases")
        self._clock = to

    def write(self, key: str, value: object) -> int:
        self._version += 1
        self._entries[key] = value
        self._entry_versions[key] = self._version
        return self._version

    def get(self, key: str, default: object = None) -> object:
        return self._entries.get(key, default)

    def entry_version(self, key: str) -> int:
        return self._entry_versions.get(key, 0)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def keys(self) -> list[str]:
        return sorted(self._entries)

    def snapshot(self) -> Snapshot:
        return Snapshot(self._version, self._clock,
                        MappingProxyType(dict(self._entries)))

    def content_hash(self) -> str:
        """Hash over (clock, version, all entries) in sorted key order."""
        h = hashlib.sha256()
        h.update(f"v{self._version}@{self._clock!r}".encode())
        for key in sorted(self._entries):
            h.update(key.encode())
            h.update(canonical_json(self._entries[key]).encode())
        return h.hexdigest()
