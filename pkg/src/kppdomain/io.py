"""Portable file formats for domains, fields, scans and tail profiles.

Domain text format (floats written with ``repr`` so round trips are exact)::

    kppdomain-domain 1
    h <float>
    origin <float> <float>
    nx <int>
    ny <int>
    tags <json>
    mask
    <one line per row j = 0..ny-1: runs "v*count" separated by commas>
    faces
    i,j,face,sigma
    <one CSV line per boundary face>

Raw field format: 16-byte header (nx, ny as little-endian int64) followed by
``ny * nx`` little-endian float64 values in row-major order, NaN outside
the mask.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .geometry import FACE_NAMES, DomainModel, GridSpec
from .operators import Field

MAGIC = "kppdomain-domain 1"


def _rle(row: np.ndarray) -> str:
    vals = row.astype(np.int8)
    edges = np.flatnonzero(np.diff(vals)) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [len(vals)]])
    return ",".join(f"{vals[s]}*{e - s}" for s, e in zip(starts, ends))


def _unrle(line: str, nx: int) -> np.ndarray:
    out = []
    for tok in line.strip().split(","):
        v, c = tok.split("*")
        out.extend([v == "1"] * int(c))
    if len(out) != nx:
        raise ValueError(f"mask row has {len(out)} cells, expected {nx}")
    return np.array(out, dtype=bool)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def domain_to_text(domain: DomainModel) -> str:
    g = domain.grid
    lines = [
        MAGIC,
        f"h {float(g.h)!r}",
        f"origin {float(g.origin[0])!r} {float(g.origin[1])!r}",
        f"nx {g.nx}",
        f"ny {g.ny}",
        "tags " + json.dumps(_jsonable(dict(domain.tags)), sort_keys=True),
        "mask",
    ]
    lines += [_rle(row) for row in domain.mask]
    lines += ["faces", "i,j,face,sigma"]
    d, j, i = np.nonzero(domain.boundary_face_mask())
    order = np.lexsort((d, i, j))
    for k in order:
        lines.append(f"{i[k]},{j[k]},{FACE_NAMES[d[k]]},{float(domain.face_sigma[d[k], j[k], i[k]])!r}")
    return "\n".join(lines) + "\n"


def domain_from_text(text: str) -> DomainModel:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ValueError("not a kppdomain domain file")
    head = {}
    k = 1
    while lines[k].strip() != "mask":
        key, _, rest = lines[k].partition(" ")
        head[key] = rest
        k += 1
    h = float(head["h"])
    ox, oy = (float(v) for v in head["origin"].split())
    nx, ny = int(head["nx"]), int(head["ny"])
    tags = json.loads(head.get("tags", "{}"))
    grid = GridSpec(h, (ox, oy), nx, ny)
    mask = np.array([_unrle(lines[k + 1 + j], nx) for j in range(ny)])
    k += 1 + ny
    if lines[k].strip() != "faces" or lines[k + 1].strip() != "i,j,face,sigma":
        raise ValueError("missing faces section")
    sig = np.full((4, ny, nx), np.nan)
    for row in csv.reader(lines[k + 2 :]):
        if not row:
            continue
        i, j, face, s = row
        sig[FACE_NAMES.index(face), int(j), int(i)] = float(s)
    return DomainModel(grid, mask, sig, tags)


def write_domain(domain: DomainModel, path) -> None:
    Path(path).write_text(domain_to_text(domain))


def read_domain(path) -> DomainModel:
    return domain_from_text(Path(path).read_text())


def write_field_csv(field: Field, path) -> None:
    i, j = field.domain.cell_indices()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "value"])
        for a, b, v in zip(i, j, field.values):
            w.writerow([int(a), int(b), repr(float(v))])


def read_field_csv(path, domain: DomainModel) -> Field:
    grid = np.full(domain.grid.shape, np.nan)
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for i, j, v in r:
            grid[int(j), int(i)] = float(v)
    vals = grid[domain.mask]
    if np.isnan(vals).any():
        raise ValueError("field file does not cover every masked cell")
    return Field(vals, domain)


def write_field_raw(field: Field, path) -> None:
    g = field.domain.grid
    with open(path, "wb") as fh:
        fh.write(np.array([g.nx, g.ny], dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(field.to_grid(np.nan), dtype="<f8").tobytes())


def read_field_raw(path, domain: DomainModel | None = None):
    """Grid array ``(ny, nx)``, or a :class:`Field` when ``domain`` is given."""
    data = Path(path).read_bytes()
    nx, ny = (int(v) for v in np.frombuffer(data[:16], dtype="<i8"))
    grid = np.frombuffer(data[16:], dtype="<f8")
    if grid.size != nx * ny:
        raise ValueError("raw field size does not match its header")
    grid = grid.reshape(ny, nx).copy()
    if domain is None:
        return grid
    if domain.grid.shape != (ny, nx):
        raise ValueError("raw field grid does not match the domain")
    return Field.from_grid(domain, grid)


def write_scan_csv(rows, path) -> None:
    """Rows of ``(x, y, lambda)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "lambda"])
        for x, y, lam in rows:
            w.writerow([repr(float(x)), repr(float(y)), repr(float(lam))])


def read_scan_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_profile_csv(profile, path) -> None:
    K = profile.alpha.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [f"alpha_{k}" for k in range(1, K + 1)])
        for row in profile.to_rows():
            w.writerow([repr(v) for v in row])


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=True) + "\n")
