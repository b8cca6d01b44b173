"""On-disk formats.

Field snapshots: comment header lines `# key=value` carrying grid metadata
(dim, modes_per_axis, freq_cut) and the config hash, then a CSV header row
`j1,...,jd,re,im` and one row per retained lattice point.  Operators use the
same scheme with rows `j1..jd,k1..kd,re,im` (nonzero entries only).  Run
tables are plain CSV with the same comment-header convention.  All floats are
written with repr round-trip precision so reruns are byte-identical."""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .fields import SpectralField, TorusGrid, lattice_points


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_header(fh, meta: dict):
    for k, v in meta.items():
        fh.write(f"# {k}={v}\n")


def read_header(path: str) -> dict:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            k, _, v = line[1:].strip().partition("=")
            meta[k.strip()] = v.strip()
    return meta


def save_field(path: str, u: SpectralField, meta: dict | None = None):
    g = u.grid
    lat = lattice_points(g)
    flat = u.flat
    with open(path, "w") as fh:
        write_header(fh, {"dim": g.dim, "modes_per_axis": g.modes_per_axis,
                          "freq_cut": g.freq_cut, **(meta or {})})
        fh.write(",".join(f"j{i + 1}" for i in range(g.dim)) + ",re,im\n")
        for row, c in zip(lat, flat):
            fh.write(",".join(str(int(j)) for j in row)
                     + f",{_fmt(c.real)},{_fmt(c.imag)}\n")


def load_field(path: str) -> SpectralField:
    meta = read_header(path)
    grid = TorusGrid(int(meta["dim"]), int(meta["modes_per_axis"]),
                     int(meta["freq_cut"]))
    coeffs = np.zeros(grid.shape, dtype=complex)
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("j1"):
                continue
            parts = line.strip().split(",")
            if len(parts) != grid.dim + 2:
                continue
            j = tuple(int(p) + grid.freq_cut for p in parts[:grid.dim])
            coeffs[j] = float(parts[-2]) + 1j * float(parts[-1])
    return SpectralField(grid, coeffs)


def save_operator(path: str, op, meta: dict | None = None):
    g = op.grid
    lat = lattice_points(g)
    with open(path, "w") as fh:
        write_header(fh, {"dim": g.dim, "modes_per_axis": g.modes_per_axis,
                          "freq_cut": g.freq_cut, "order": op.order,
                          "cutoff_eps": op.cutoff_eps,
                          "symbol": op.provenance, **(meta or {})})
        fh.write(",".join(f"j{i + 1}" for i in range(g.dim))
                 + "," + ",".join(f"k{i + 1}" for i in range(g.dim)) + ",re,im\n")
        rows, cols = np.nonzero(op.matrix)
        for r, c in zip(rows, cols):
            v = op.matrix[r, c]
            fh.write(",".join(str(int(x)) for x in lat[r])
                     + "," + ",".join(str(int(x)) for x in lat[c])
                     + f",{_fmt(v.real)},{_fmt(v.imag)}\n")


def write_csv(path: str, header, rows, meta: dict | None = None):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        write_header(fh, meta or {})
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [cell if isinstance(cell, str) else _fmt(cell) for cell in row]
            fh.write(",".join(cells) + "\n")


def read_csv(path: str):
    """(meta, header, rows-as-strings)."""
    meta = read_header(path)
    header, rows = None, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    return meta, header or [], rows


def write_json(path: str, payload: dict):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def dump_symbol(directory: str, name: str, symbol, xis, meta: dict | None = None):
    """One field file per sampled frequency argument (diagnostics)."""
    from .fields import field_from_phys

    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, xi in enumerate(xis):
        vals = symbol.eval(xi)
        f = field_from_phys(vals, symbol.grid)
        p = os.path.join(directory, f"{name}_xi{i}.csv")
        save_field(p, f, {"xi": " ".join(_fmt(x) for x in np.atleast_1d(xi)),
                          **(meta or {})})
        paths.append(p)
    return paths
