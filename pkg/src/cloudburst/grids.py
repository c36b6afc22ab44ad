"""2D scalar fields on a regular grid, plus the on-disk exchange format.

A grid blob is little-endian float32 row-major bytes with a JSON sidecar
{nx, ny, cell_km, t, variable, units}. In-memory values are float64;
exchange deliberately narrows to float32.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class GridField:
    """Scalar field on an ny x nx regular grid.

    values is row-major with shape (ny, nx); t is virtual minutes.
    """

    values: np.ndarray
    cell_km: float = 1.0
    t: float = 0.0
    variable: str = "rain"
    units: str = "mm/h"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def with_values(self, values: np.ndarray, t: float | None = None) -> "GridField":
        return GridField(values, self.cell_km, self.t if t is None else t,
                         self.variable, self.units)

    def content_hash(self) -> str:
        """Hash of the full-precision payload; stable across identical runs."""
        h = hashlib.sha256()
        ny, nx = self.values.shape
        h.update(f"{ny}x{nx}|{self.cell_km!r}|{self.t!r}|{self.variable}|{self.units}".encode())
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return h.hexdigest()

    def to_blob(self) -> tuple[bytes, dict]:
        """(float32 LE bytes, sidecar dict) in the documented layout."""
        ny, nx = self.values.shape
        sidecar = {"nx": nx, "ny": ny, "cell_km": self.cell_km, "t": self.t,
                   "variable": self.variable, "units": self.units}
        return np.ascontiguousarray(self.values, dtype="<f4").tobytes(), sidecar

    @staticmethod
    def from_blob(blob: bytes, sidecar: dict) -> "GridField":
        nx, ny = int(sidecar["nx"]), int(sidecar["ny"])
        vals = np.frombuffer(blob, dtype="<f4").reshape(ny, nx).astype(np.float64)
        return GridField(vals, float(sidecar["cell_km"]), float(sidecar["t"]),
                         str(sidecar["variable"]), str(sidecar["units"]))

    def save(self, path: str | Path) -> None:
        """Write <path>.f32 and <path>.json sidecar."""
        path = Path(path)
        blob, sidecar = self.to_blob()
        path.with_suffix(".f32").write_bytes(blob)
        path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True))

    @staticmethod
    def load(path: str | Path) -> "GridField":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(".json").read_text())
        return GridField.from_blob(path.with_suffix(".f32").read_bytes(), sidecar)


@dataclass
class BlobStore:
    """Content-addressed store for grid blobs referenced from bus payloads."""

    _blobs: dict[str, tuple[bytes, dict]] = field(default_factory=dict)

    def put(self, grid: GridField) -> str:
        key = grid.content_hash()
        if key not in self._blobs:
            self._blobs[key] = grid.to_blob()
        return key

    def get(self, key: str) -> GridField:
        blob, sidecar = self._blobs[key]
        return GridField.from_blob(blob, sidecar)

    def get_raw(self, key: str) -> tuple[bytes, dict]:
        return self._blobs[key]

    def __contains__(self, key: str) -> bool:
        return key in self._blobs

    def keys(self) -> list[str]:
        return list(self._blobs)
