"""Structured meshes of the cracked tension specimens.

Both specimens are reduced by symmetry to a square model of side ``2a``:

* SEN: half of a ``2a x 4a`` plate with an edge crack along ``y = 0``,
  ``x in [0, a)``; the left edge ``x = 0`` is the free crack mouth side.
* CEN: quarter of a ``4a x 4a`` plate with a central crack; ``x = 0`` is a
  symmetry line.

The crack line is ``y = 0``: crack face for ``x < a``, tip at ``(a, 0)`` and
ligament for ``x > a``.  Numbering is row-major (``y`` outer, ``x`` inner).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

SPECIMENS = ("CEN", "SEN")
PATTERNS = ("P1", "P2", "P2C")
ELEMENT_KINDS = ("T3", "T6", "Q4")
NODES_PER_ELEMENT = {"T3": 3, "T6": 6, "Q4": 4}


class MeshError(ValueError):
    """Invalid mesh request or structurally broken mesh."""


def as_density(value) -> Fraction:
    """Parse ``h/a`` from ``"1/8"``, ``0.125`` or a Fraction."""
    if isinstance(value, str):
        value = value.strip()
    try:
        frac = Fraction(value).limit_denominator(4096)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise MeshError(f"cannot parse mesh density {value!r}") from exc
    if frac <= 0:
        raise MeshError(f"mesh density must be positive, got {value!r}")
    return frac


@dataclass(frozen=True)
class SpecimenSpec:
    kind: str
    density: Fraction
    pattern: str = "P2"
    tip_modified: bool = False
    element: str = "T3"
    a: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).upper())
        object.__setattr__(self, "pattern", str(self.pattern).upper())
        object.__setattr__(self, "element", str(self.element).upper())
        object.__setattr__(self, "density", as_density(self.density))
        if self.kind not in SPECIMENS:
            raise MeshError(f"unknown specimen kind {self.kind!r}")
        if self.pattern not in PATTERNS:
            raise MeshError(f"unknown mesh pattern {self.pattern!r}")
        if self.element not in ELEMENT_KINDS:
            raise MeshError(f"unknown element kind {self.element!r}")
        if not self.a > 0:
            raise MeshError("crack length a must be positive")
        if self.tip_modified and self.element != "T3":
            raise MeshError("tip modification is only defined for T3 meshes")
        # raises on a non-integer cell count
        self.cells_along_crack

    @property
    def h(self) -> float:
        """Node spacing on the crack face."""
        return float(self.density) * self.a

    @property
    def cells_along_crack(self) -> int:
        # quadratic elements span two node spacings
        span = self.density * (2 if self.element == "T6" else 1)
        n = 1 / span
        if n.denominator != 1:
            raise MeshError(
                f"h/a = {self.density} does not divide the crack into whole "
                f"{self.element} cells (a / cell = {float(n):g})"
            )
        return int(n)


@dataclass
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    kind: str
    groups: dict
    h: float
    extent: tuple
    tip: int
    spec: SpecimenSpec | None = None
    tip_modified: bool = False
    cell_size: float = field(default=0.0)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_dofs(self) -> int:
        return 2 * len(self.nodes)

    def element_coords(self) -> np.ndarray:
        return self.nodes[self.elements]

    def element_areas(self) -> np.ndarray:
        """Signed areas from the corner nodes (exact for straight-sided elements)."""
        xy = self.nodes[self.elements]
        if self.kind == "Q4":
            x, y = xy[..., 0], xy[..., 1]
            return 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)
        p0, p1, p2 = xy[:, 0], xy[:, 1], xy[:, 2]
        return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                      - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))

    @property
    def area(self) -> float:
        return float(self.extent[0] * self.extent[1])


def _triangulate_cell(n00, n10, n11, n01, slash):
    if slash:  # diagonal from lower-left to upper-right
        return [(n00, n10, n11), (n00, n11, n01)]
    return [(n00, n10, n01), (n10, n11, n01)]


def _slash(pattern, i, j):
    if pattern == "P1":
        return True
    if pattern == "P2":
        # rows alternate; the row on the crack line matches P1
        return j % 2 == 0
    return (i + j) % 2 == 0  # P2C: checkerboard


def _grid_nodes(n, spacing):
    ticks = np.arange(n + 1) * spacing
    xx, yy = np.meshgrid(ticks, ticks)
    return np.column_stack([xx.ravel(), yy.ravel()])


def build_specimen_mesh(spec: SpecimenSpec) -> Mesh:
    """Uniform mesh of the symmetric model for ``spec``.

    The model is ``2a x 2a`` with square cells.  T3 cells are split along
    one diagonal: P1 uses the lower-left/upper-right diagonal everywhere, P2
    flips it on every other row, P2C flips it in a checkerboard.  T6 cells
    (side ``2h``) are split the same way with mid-side nodes; Q4 cells stay
    whole.
    """
    a = spec.a
    nc = 2 * spec.cells_along_crack
    kind = spec.element

    if kind == "T6":
        # every T6 node lies on the grid of half-cell spacing
        nf = 2 * nc
        nodes = _grid_nodes(nf, spec.h)
        row = nf + 1
        elems = []
        for j in range(nc):
            for i in range(nc):
                def g(di, dj):
                    return (2 * j + dj) * row + 2 * i + di
                for tri in _triangulate_cell((0, 0), (2, 0), (2, 2), (0, 2),
                                             _slash(spec.pattern, i, j)):
                    corners = [g(*c) for c in tri]
                    mids = []
                    for k in range(3):
                        c0, c1 = tri[k], tri[(k + 1) % 3]
                        mids.append(g((c0[0] + c1[0]) // 2, (c0[1] + c1[1]) // 2))
                    elems.append(corners + mids)
        elements = np.array(elems, dtype=np.int64)
        cell = 2 * spec.h
    else:
        nodes = _grid_nodes(nc, spec.h)
        row = nc + 1
        elems = []
        for j in range(nc):
            for i in range(nc):
                n00 = j * row + i
                n10, n01, n11 = n00 + 1, n00 + row, n00 + row + 1
                if kind == "Q4":
                    elems.append((n00, n10, n11, n01))
                else:
                    elems.extend(_triangulate_cell(n00, n10, n11, n01,
                                                   _slash(spec.pattern, i, j)))
        elements = np.array(elems, dtype=np.int64)
        cell = spec.h

    # snap exact multiples of h; avoids 0.1+0.2 style drift in coordinates
    nodes = np.round(nodes / spec.h) * spec.h
    mesh = Mesh(nodes=nodes, elements=elements, kind=kind, groups={},
                h=spec.h, extent=(2 * a, 2 * a), tip=-1, spec=spec,
                cell_size=cell)
    _mark_groups(mesh)
    if spec.tip_modified:
        mesh = apply_tip_modification(mesh)
    return mesh


def _mark_groups(mesh: Mesh) -> None:
    a = mesh.extent[0] / 2
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    tol = 1e-9 * mesh.h
    on_line = np.abs(y) < tol
    order = lambda ids: ids[np.argsort(x[ids], kind="stable")]  # noqa: E731
    crack = order(np.flatnonzero(on_line & (x < a - tol)))
    tip = np.flatnonzero(on_line & (np.abs(x - a) < tol))
    if len(tip) != 1:
        raise MeshError("mesh has no unique crack-tip node")
    groups = {
        "crack_face": crack,
        "tip": tip,
        "ligament": order(np.flatnonzero(on_line & (x > a + tol))),
        "load_edge": order(np.flatnonzero(np.abs(y - mesh.extent[1]) < tol)),
    }
    if mesh.spec is None or mesh.spec.kind == "CEN":
        groups["symmetry_x"] = np.flatnonzero(np.abs(x) < tol)
    mesh.groups = groups
    mesh.tip = int(tip[0])


def apply_tip_modification(mesh: Mesh) -> Mesh:
    """Fan-refine the grid cells touching the crack tip.

    Each tip-incident cell loses its two triangles and gains four, fanned
    from a new node at the cell centre.  Cell outlines are untouched, so
    the mesh stays conforming.
    """
    if mesh.kind != "T3":
        raise MeshError("tip modification requires a T3 mesh")
    if mesh.tip_modified:
        raise MeshError("mesh is already tip-modified")
    s = mesh.cell_size
    tip_xy = mesh.nodes[mesh.tip]
    centroids = mesh.nodes[mesh.elements].mean(axis=1)
    # cell index of every triangle, from its centroid
    cell_ij = np.floor(centroids / s).astype(np.int64)
    tip_ij = np.round(tip_xy / s).astype(np.int64)
    touching = np.all((cell_ij == tip_ij) | (cell_ij == tip_ij - 1), axis=1)
    cells = sorted({tuple(c) for c in cell_ij[touching]}, key=lambda c: (c[1], c[0]))

    nodes = [mesh.nodes]
    new_elems = [mesh.elements[~touching]]
    next_id = mesh.n_nodes
    lookup = {tuple(np.round(p / s * 2).astype(int)): k for k, p in enumerate(mesh.nodes)}
    for ci, cj in cells:
        corners = [lookup[(2 * (ci + di), 2 * (cj + dj))]
                   for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1))]
        centre = np.array([[(ci + 0.5) * s, (cj + 0.5) * s]])
        nodes.append(centre)
        fan = [(corners[k], corners[(k + 1) % 4], next_id) for k in range(4)]
        new_elems.append(np.array(fan, dtype=np.int64))
        next_id += 1

    spec = None if mesh.spec is None else replace(mesh.spec, tip_modified=True)
    return replace(mesh, nodes=np.vstack(nodes), elements=np.vstack(new_elems),
                   tip_modified=True, groups=dict(mesh.groups), spec=spec)


@dataclass
class EdgeAdjacency:
    edges: np.ndarray          # (n_edges, 2) node ids, i < j
    elements: np.ndarray       # (n_edges, 2) element ids, -1 where absent
    boundary: np.ndarray       # (n_edges,) bool

    def __len__(self):
        return len(self.edges)


@dataclass
class NodeAdjacency:
    elements: list             # per node: array of incident element ids

    def counts(self) -> np.ndarray:
        return np.array([len(e) for e in self.elements])


def _require_t3(mesh: Mesh):
    if mesh.kind != "T3":
        raise MeshError(f"operation needs a T3 mesh, got {mesh.kind}")


def build_edge_adjacency(mesh: Mesh) -> EdgeAdjacency:
    _require_t3(mesh)
    tri = mesh.elements
    pairs = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    owner = np.tile(np.arange(len(tri)), 3)
    pairs = np.sort(pairs, axis=1)
    uniq, inverse, counts = np.unique(pairs, axis=0, return_inverse=True,
                                      return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        bad = uniq[counts > 2]
        raise MeshError(f"non-manifold edges shared by >2 elements: {bad[:5].tolist()}")
    adj = np.full((len(uniq), 2), -1, dtype=np.int64)
    order = np.lexsort((owner, inverse))
    first = np.ones(len(order), dtype=bool)
    first[1:] = inverse[order][1:] != inverse[order][:-1]
    adj[inverse[order][first], 0] = owner[order][first]
    adj[inverse[order][~first], 1] = owner[order][~first]
    return EdgeAdjacency(edges=uniq, elements=adj, boundary=counts == 1)


def build_node_adjacency(mesh: Mesh) -> NodeAdjacency:
    _require_t3(mesh)
    flat = mesh.elements.ravel()
    owner = np.repeat(np.arange(mesh.n_elements), 3)
    order = np.argsort(flat, kind="stable")
    splits = np.searchsorted(flat[order], np.arange(1, mesh.n_nodes))
    return NodeAdjacency(elements=np.split(owner[order], splits))


def check_mesh(mesh: Mesh) -> None:
    """Raise :class:`MeshError` if the mesh breaks a structural invariant."""
    areas = mesh.element_areas()
    if np.any(areas <= 0):
        raise MeshError(f"{np.sum(areas <= 0)} elements with non-positive area")
    total = areas.sum()
    if abs(total - mesh.area) > 1e-12 * mesh.area:
        raise MeshError(f"element areas sum to {total!r}, model area is {mesh.area!r}")
    scaled = np.round(mesh.nodes / (1e-12 * mesh.h))
    if len(np.unique(scaled, axis=0)) != mesh.n_nodes:
        raise MeshError("duplicate nodes")
    if mesh.kind == "T3":
        build_edge_adjacency(mesh)
    line = np.concatenate([mesh.groups["crack_face"], mesh.groups["tip"],
                           mesh.groups["ligament"]])
    on_line = np.flatnonzero(np.abs(mesh.nodes[:, 1]) < 1e-9 * mesh.h)
    if sorted(line.tolist()) != on_line.tolist():
        raise MeshError("crack-line groups do not partition the crack-line nodes")
