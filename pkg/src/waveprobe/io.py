"""Text persistence for fields and boundary datasets.

Every number is written with ``repr``, Python's shortest decimal that
parses back to the same double, so load(save(x)) is bitwise exact.

FieldFile::

    WPF1
    n_space nt nx T L kind
    <one line per time level, (nx+1)^n values, x fastest>

``kind`` is ``real`` or ``complex``; complex lines hold the real values of
the level followed by the imaginary values.

DatasetFile::

    WPD1
    grid n_space nt nx T L
    F <count> <facet indices>
    G <count> <facet indices>
    potential_id <label or ->
    g <rows> <cols>          then rows lines
    v1 <rows> <cols>
    neumann_G <rows> <cols>
    final_value <rows> <cols>
"""

from __future__ import annotations

import os

import numpy as np

from .grid import GridError, SpaceTimeGrid, make_grid
from .ibvp import BoundaryDataset

FIELD_MAGIC = "WPF1"
DATASET_MAGIC = "WPD1"
KINDS = ("real", "complex")
SECTIONS = ("g", "v1", "neumann_G", "final_value")


class FormatError(ValueError):
    """Malformed file content; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class _Lines:
    """Line reader that remembers the byte offset of each line."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def next(self, what: str) -> tuple[str, int]:
        if self.pos >= len(self.data):
            raise FormatError(f"unexpected end of file, expected {what}", self.pos)
        end = self.data.find(b"\n", self.pos)
        if end < 0:
            end = len(self.data)
        start = self.pos
        self.pos = end + 1
        try:
            return self.data[start:end].decode("ascii"), start
        except UnicodeDecodeError:
            raise FormatError(f"non-ASCII bytes in {what}", start) from None

    def at_end(self) -> bool:
        return not self.data[self.pos:].strip()


def _fmt(values) -> str:
    return " ".join(map(repr, np.asarray(values, dtype=float).ravel().tolist()))


def _parse_row(line: str, offset: int, count: int, what: str) -> np.ndarray:
    toks = line.split()
    if len(toks) != count:
        raise FormatError(f"{what}: expected {count} values, found {len(toks)}", offset)
    try:
        row = np.array([float(t) for t in toks])
    except ValueError:
        raise FormatError(f"{what}: unparseable number", offset) from None
    bad = np.flatnonzero(~np.isfinite(row))
    if bad.size:
        col = offset + len(" ".join(toks[: bad[0]])) + (1 if bad[0] else 0)
        raise FormatError(f"{what}: non-finite value {toks[bad[0]]!r}", col)
    return row


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise GridError(f"{what} contains non-finite values")


def _grid_tokens(grid: SpaceTimeGrid) -> str:
    return f"{grid.n_space} {grid.nt} {grid.nx} {grid.T!r} {grid.L!r}"


def _parse_grid(toks, offset) -> SpaceTimeGrid:
    try:
        n, nt, nx = int(toks[0]), int(toks[1]), int(toks[2])
        T, L = float(toks[3]), float(toks[4])
    except (ValueError, IndexError):
        raise FormatError("malformed grid header", offset) from None
    try:
        return make_grid(n, T, L, nt, nx)
    except GridError as e:
        raise FormatError(f"invalid grid header: {e}", offset) from None


# ---------------------------------------------------------------- fields


def dump_field(grid: SpaceTimeGrid, values) -> str:
    values = np.asarray(values)
    kind = "complex" if np.iscomplexobj(values) else "real"
    grid.check_field(values.real if kind == "complex" else values)
    _check_finite(values, "field")
    lines = [FIELD_MAGIC, f"{_grid_tokens(grid)} {kind}"]
    for m in range(grid.nt + 1):
        if kind == "real":
            lines.append(_fmt(values[m]))
        else:
            lines.append(_fmt(values[m].real) + " " + _fmt(values[m].imag))
    return "\n".join(lines) + "\n"


def parse_field(data: bytes) -> tuple[SpaceTimeGrid, np.ndarray]:
    rd = _Lines(data)
    magic, off = rd.next("magic")
    if magic.strip() != FIELD_MAGIC:
        raise FormatError(f"bad magic {magic[:8]!r}, expected {FIELD_MAGIC}", off)
    header, off = rd.next("header")
    toks = header.split()
    if len(toks) != 6:
        raise FormatError("header needs 'n_space nt nx T L kind'", off)
    grid = _parse_grid(toks, off)
    kind = toks[5]
    if kind not in KINDS:
        raise FormatError(f"unknown kind {kind!r}", off)
    per = (grid.nx + 1) ** grid.n_space
    width = per * (2 if kind == "complex" else 1)
    rows = []
    for m in range(grid.nt + 1):
        line, off = rd.next(f"time level {m} of {grid.nt}")
        rows.append(_parse_row(line, off, width, f"time level {m}"))
    if not rd.at_end():
        raise FormatError("trailing data after last time level", rd.pos)
    arr = np.array(rows)
    if kind == "complex":
        arr = arr[:, :per] + 1j * arr[:, per:]
    return grid, arr.reshape((grid.nt + 1,) + grid.space_shape)


def save_field(path, grid: SpaceTimeGrid, values) -> None:
    _write(path, dump_field(grid, values))


def load_field(path) -> tuple[SpaceTimeGrid, np.ndarray]:
    return parse_field(_read(path))


# ---------------------------------------------------------------- datasets


def dump_dataset(ds: BoundaryDataset) -> str:
    grid = ds.grid
    label = ds.potential_id or "-"
    if any(c.isspace() for c in label):
        raise GridError("potential_id must not contain whitespace")
    lines = [DATASET_MAGIC, f"grid {_grid_tokens(grid)}"]
    for name, idx in (("F", ds.F_facets), ("G", ds.G_facets)):
        idx = np.asarray(idx, dtype=int)
        lines.append(f"{name} {idx.size} " + " ".join(map(str, idx.tolist())))
    lines.append(f"potential_id {label}")
    for name in SECTIONS:
        arr = np.asarray(getattr(ds, name), dtype=float)
        _check_finite(arr, name)
        arr2 = arr.reshape(1, -1) if name in ("v1", "final_value") else arr
        lines.append(f"{name} {arr2.shape[0]} {arr2.shape[1]}")
        lines.extend(_fmt(r) for r in arr2)
    return "\n".join(lines) + "\n"


def _expected_shapes(grid: SpaceTimeGrid, n_G: int) -> dict:
    per = (grid.nx + 1) ** grid.n_space
    return {
        "g": (grid.nt + 1, grid.facets.count),
        "v1": (1, per),
        "neumann_G": (grid.nt + 1, n_G),
        "final_value": (1, per),
    }


def parse_dataset(data: bytes) -> BoundaryDataset:
    rd = _Lines(data)
    magic, off = rd.next("magic")
    if magic.strip() != DATASET_MAGIC:
        raise FormatError(f"bad magic {magic[:8]!r}, expected {DATASET_MAGIC}", off)
    line, off = rd.next("grid header")
    toks = line.split()
    if len(toks) != 6 or toks[0] != "grid":
        raise FormatError("expected 'grid n_space nt nx T L'", off)
    grid = _parse_grid(toks[1:], off)
    facets = {}
    for name in ("F", "G"):
        line, off = rd.next(f"{name} facet list")
        toks = line.split()
        try:
            if toks[0] != name:
                raise ValueError
            count = int(toks[1])
            idx = np.array([int(t) for t in toks[2:]], dtype=np.int64)
        except (ValueError, IndexError):
            raise FormatError(f"malformed {name} facet list", off) from None
        if idx.size != count:
            raise FormatError(f"{name}: declared {count} facets, found {idx.size}", off)
        if idx.size and (idx.min() < 0 or idx.max() >= grid.facets.count):
            raise FormatError(f"{name}: facet index outside 0..{grid.facets.count - 1}", off)
        if np.unique(idx).size != idx.size:
            raise FormatError(f"{name}: repeated facet index", off)
        facets[name] = idx
    line, off = rd.next("potential_id")
    toks = line.split()
    if len(toks) != 2 or toks[0] != "potential_id":
        raise FormatError("expected 'potential_id <label>'", off)
    label = "" if toks[1] == "-" else toks[1]
    shapes = _expected_shapes(grid, facets["G"].size)
    out = {}
    for name in SECTIONS:
        line, off = rd.next(f"section {name}")
        toks = line.split()
        try:
            if toks[0] != name:
                raise ValueError
            rows, cols = int(toks[1]), int(toks[2])
        except (ValueError, IndexError):
            raise FormatError(f"expected section header '{name} <rows> <cols>'", off) from None
        if (rows, cols) != shapes[name]:
            raise FormatError(f"{name}: shape {(rows, cols)} != expected {shapes[name]}", off)
        block = []
        for r in range(rows):
            line, off = rd.next(f"{name} row {r}")
            block.append(_parse_row(line, off, cols, f"{name} row {r}"))
        out[name] = np.array(block)
    if not rd.at_end():
        raise FormatError("trailing data after last section", rd.pos)
    return BoundaryDataset(
        grid=grid,
        F_facets=facets["F"],
        G_facets=facets["G"],
        g=out["g"],
        v1=out["v1"].reshape(grid.space_shape),
        neumann_G=out["neumann_G"],
        final_value=out["final_value"].reshape(grid.space_shape),
        potential_id=label,
    )


def save_dataset(path, ds: BoundaryDataset) -> None:
    _write(path, dump_dataset(ds))


def load_dataset(path) -> BoundaryDataset:
    return parse_dataset(_read(path))


# ---------------------------------------------------------------- files


def _read(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _write(path, text: str) -> None:
    # write-then-rename so a failed run never leaves a half file behind
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)
