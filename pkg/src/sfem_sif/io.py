"""Plain-text dumps: mesh/domain debug files and CSV tables."""

from __future__ import annotations

import csv
import io
import sys
from pathlib import Path

import numpy as np

from .mesh import Mesh

SIF_HEADER = ("specimen", "method", "element", "pattern", "tip_mod", "h_over_a",
              "extraction", "G", "K", "K_star", "err_vs_ref")
NODE_HEADER = ("node", "x", "y", "ux", "uy")
DOMAIN_HEADER = ("domain", "kind", "anchor", "area", "sxx", "syy", "sxy")


def fmt(value) -> str:
    """CSV cell text: 12 significant digits for reals, empty for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def write_csv(target, header, rows) -> None:
    """Write dict rows (or sequences) under ``header`` to a path or stream."""
    own = isinstance(target, (str, Path))
    fh = open(target, "w", newline="") if own else (target or sys.stdout)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(k) for k in header]
            w.writerow([fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _g17(x) -> str:
    return f"{float(x):.17g}"


def dump_mesh(mesh: Mesh, domains=None) -> str:
    """Text dump with ``nodes``, ``elements`` and ``groups`` sections."""
    out = io.StringIO()
    out.write(f"nodes {mesh.n_nodes}\n")
    for k, (x, y) in enumerate(mesh.nodes):
        out.write(f"{k} {_g17(x)} {_g17(y)}\n")
    out.write(f"elements {mesh.n_elements}\n")
    for k, conn in enumerate(mesh.elements):
        out.write(f"{k} {mesh.kind} {' '.join(map(str, conn))}\n")
    out.write(f"groups {len(mesh.groups)}\n")
    for name in sorted(mesh.groups):
        out.write(f"{name}: {' '.join(map(str, mesh.groups[name]))}\n")
    if domains is not None:
        out.write(f"domains {len(domains)}\n")
        for d in domains:
            elems = " ".join(map(str, d.contributors))
            out.write(f"{d.anchor} {d.kind} {_g17(d.area)} {elems}\n")
    return out.getvalue()


def parse_mesh_dump(text: str) -> dict:
    """Inverse of :func:`dump_mesh` (raw arrays; no Mesh metadata)."""
    lines = iter(text.splitlines())
    out = {"nodes": None, "elements": None, "kind": None, "groups": {}, "domains": []}
    for header in lines:
        name, count = header.split()
        count = int(count)
        block = [next(lines) for _ in range(count)]
        if name == "nodes":
            out["nodes"] = np.array([[float(v) for v in ln.split()[1:]] for ln in block])
        elif name == "elements":
            out["kind"] = block[0].split()[1] if block else None
            out["elements"] = np.array([[int(v) for v in ln.split()[2:]] for ln in block])
        elif name == "groups":
            for ln in block:
                key, _, ids = ln.partition(":")
                out["groups"][key] = np.array([int(v) for v in ids.split()], dtype=np.int64)
        elif name == "domains":
            for ln in block:
                anchor, kind, area, *elems = ln.split()
                out["domains"].append((int(anchor), kind, float(area), [int(e) for e in elems]))
        else:
            raise ValueError(f"unknown mesh dump section {name!r}")
    return out


def write_mesh_dump(path, mesh: Mesh, domains=None) -> None:
    Path(path).write_text(dump_mesh(mesh, domains))


def node_rows(mesh: Mesh, u: np.ndarray):
    disp = u.reshape(-1, 2)
    for k in range(mesh.n_nodes):
        yield (k, mesh.nodes[k, 0], mesh.nodes[k, 1], disp[k, 0], disp[k, 1])


def domain_rows(stresses, scale: float = 1.0):
    for k in range(len(stresses)):
        s = stresses.stress[k] * scale
        yield (k, stresses.kind[k], stresses.anchor[k], stresses.area[k], s[0], s[1], s[2])
