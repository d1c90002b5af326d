"""Binary field snapshots ("KHM1" format).

Byte layout, all integers and floats little-endian::

    offset  type              content
    0       4 bytes           magic b"KHM1"
    4       uint32            n_per_axis
    8       uint32            field_count F
    12      float64           time
    20      uint32            parameter count P
            P times:          uint16 key length, UTF-8 key, float64 value
            F times:          uint16 name length, UTF-8 field name
            F times:          3 components, each n^3 float64, x fastest
                              (flat index = ix + n*(iy + n*iz))

Field names are free-form; the solver writes ``b`` and, for Hall-MHD, ``u``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import ConfigurationError, Grid, VectorField

MAGIC = b"KHM1"


@dataclass
class Snapshot:
    time: float
    fields: dict[str, VectorField]
    params: dict[str, float] = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return next(iter(self.fields.values())).grid


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def write_snapshot(path, snap: Snapshot) -> None:
    if not snap.fields:
        raise ConfigurationError("snapshot has no fields")
    grids = {f.grid for f in snap.fields.values()}
    if len(grids) != 1:
        raise ConfigurationError("all snapshot fields must share one grid")
    n = snap.grid.n
    parts = [MAGIC, struct.pack("<IId", n, len(snap.fields), float(snap.time))]
    parts.append(struct.pack("<I", len(snap.params)))
    for key, value in snap.params.items():
        parts.append(_pack_str(key) + struct.pack("<d", float(value)))
    for name in snap.fields:
        parts.append(_pack_str(name))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))
        for f in snap.fields.values():
            for comp in f.data:
                fh.write(comp.astype("<f8").ravel(order="F").tobytes())


def read_snapshot(path) -> Snapshot:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ConfigurationError(f"{path}: not a KHM1 snapshot")
    n, count, time = struct.unpack_from("<IId", raw, 4)
    pos = 20
    (nparams,) = struct.unpack_from("<I", raw, pos)
    pos += 4

    def read_str(pos):
        (length,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        return raw[pos : pos + length].decode("utf-8"), pos + length

    params = {}
    for _ in range(nparams):
        key, pos = read_str(pos)
        (params[key],) = struct.unpack_from("<d", raw, pos)
        pos += 8
    names = []
    for _ in range(count):
        name, pos = read_str(pos)
        names.append(name)
    grid = Grid(int(n))
    size = n**3
    expected = pos + count * 3 * size * 8
    if len(raw) != expected:
        raise ConfigurationError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", offset=pos).astype(np.float64)
    fields = {}
    for i, name in enumerate(names):
        comps = [
            values[(3 * i + c) * size : (3 * i + c + 1) * size].reshape((n, n, n), order="F")
            for c in range(3)
        ]
        fields[name] = VectorField(grid, np.stack(comps))
    return Snapshot(time=float(time), fields=fields, params=params)
