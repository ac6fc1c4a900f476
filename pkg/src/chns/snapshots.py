"""Binary snapshot files and the plain-text trajectory manifest.

Each file holds one field at one time: a 32-byte ASCII header
``CHNS1 <field> <rows> <cols> <time>`` padded with spaces and ending in a
newline, followed by little-endian float64 values in row-major order.  The
header time is informational; the manifest stores the exact time.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .domain import Grid, VectorField
from .solver import State

MAGIC = "CHNS1"
HEADER_BYTES = 32
FIELDS = ("n", "c", "u1", "u2", "P")
MANIFEST = "manifest.txt"


class SnapshotFormatError(ValueError):
    pass


def _header(name: str, shape: tuple[int, int], t: float) -> bytes:
    for tfmt in (repr(float(t)), f"{t:.9e}", f"{t:.4e}"):
        text = f"{MAGIC} {name} {shape[0]} {shape[1]} {tfmt}"
        if len(text) <= HEADER_BYTES - 1:
            return (text.ljust(HEADER_BYTES - 1) + "\n").encode("ascii")
    raise SnapshotFormatError(f"header for field {name!r} does not fit in {HEADER_BYTES} bytes")


def write_field(path, name: str, a: np.ndarray, t: float) -> None:
    a = np.ascontiguousarray(a, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_header(name, a.shape, t))
        fh.write(a.tobytes(order="C"))


def read_field(path) -> tuple[str, float, np.ndarray]:
    raw = Path(path).read_bytes()
    head = raw[:HEADER_BYTES].decode("ascii", errors="replace").split()
    if len(head) != 5 or head[0] != MAGIC:
        raise SnapshotFormatError(f"{path}: not a {MAGIC} snapshot")
    name, rows, cols, t = head[1], int(head[2]), int(head[3]), float(head[4])
    body = raw[HEADER_BYTES:]
    if len(body) != 8 * rows * cols:
        raise SnapshotFormatError(f"{path}: expected {rows * cols} values, found {len(body) // 8} bytes/8")
    return name, t, np.frombuffer(body, dtype="<f8").reshape(rows, cols).copy()


class SnapshotWriter:
    """Writes every field of each state and keeps the manifest current."""

    def __init__(self, directory, grid: Grid):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.grid = grid
        self.entries: list[tuple[int, float]] = []

    def __call__(self, state: State) -> None:
        k = len(self.entries)
        arrays = {"n": state.n, "c": state.c, "u1": state.u.u1, "u2": state.u.u2, "P": state.P}
        for name in FIELDS:
            write_field(self.dir / f"snap_{k:05d}_{name}.bin", name, arrays[name], state.t)
        self.entries.append((k, float(state.t)))
        self.write_manifest()

    def write_manifest(self) -> None:
        lines = [f"# grid {self.grid.nx} {self.grid.ny}", "# index time files"]
        for k, t in self.entries:
            files = " ".join(f"snap_{k:05d}_{name}.bin" for name in FIELDS)
            lines.append(f"{k} {t!r} {files}")
        tmp = self.dir / (MANIFEST + ".tmp")
        tmp.write_text("\n".join(lines) + "\n")
        os.replace(tmp, self.dir / MANIFEST)


def read_manifest(directory) -> tuple[Grid, list[tuple[float, dict]]]:
    d = Path(directory)
    path = d / MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {d}")
    grid = None
    entries = []
    for line in path.read_text().splitlines():
        if line.startswith("# grid"):
            _, _, nx, ny = line.split()
            grid = Grid(int(nx), int(ny))
            continue
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        t = float(parts[1])
        files = dict(zip(FIELDS, parts[2:]))
        entries.append((t, files))
    if grid is None:
        raise SnapshotFormatError(f"{path}: missing grid line")
    return grid, entries


def load_states(directory) -> tuple[Grid, list[State]]:
    """Replay a stored trajectory."""
    d = Path(directory)
    grid, entries = read_manifest(d)
    states = []
    for t, files in entries:
        a = {}
        for name in FIELDS:
            fname, _, arr = read_field(d / files[name])
            if fname != name:
                raise SnapshotFormatError(f"{files[name]}: holds field {fname!r}, expected {name!r}")
            a[name] = arr
        u = VectorField(a["u1"], a["u2"], no_slip=True)
        states.append(State(t, a["n"], a["c"], u, a["P"]))
    return grid, states
