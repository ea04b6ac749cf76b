"""Strain-smoothing domains and global stiffness assembly.

For linear triangles the strain in each element is constant, so the
smoothed strain matrix of a domain is the area-weighted mean of the
element matrices of the element fragments it contains.  Each element
contributes a third of its area to every domain it touches:

* edge domains (ES-FEM): one per mesh edge, built from the one or two
  triangles sharing that edge;
* node domains (NS-FEM): one per node, built from all incident triangles.

alpha-FEM keeps a compatible (FEM) part of weight ``alpha**2`` in every
element and a node-smoothed part of weight ``1 - alpha**2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elasticity import (Material, plane_stress_D, q4_gauss_B, t3_gradients,
                         t6_gauss_B)
from .mesh import (EdgeAdjacency, Mesh, MeshError, NodeAdjacency,
                   build_edge_adjacency, build_node_adjacency)

METHODS = ("FEM", "ES", "NS", "ALPHA")


@dataclass(frozen=True)
class Method:
    name: str
    alpha: float | None = None

    def __post_init__(self):
        name = str(self.name).upper()
        object.__setattr__(self, "name", name)
        if name not in METHODS:
            raise ValueError(f"unknown method {self.name!r}; choose from {METHODS}")
        if name == "ALPHA":
            if self.alpha is None:
                raise ValueError("alpha-FEM needs an alpha value")
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        elif self.alpha is not None:
            raise ValueError(f"{name} takes no alpha")

    @classmethod
    def parse(cls, text: str, alpha: float | None = None) -> "Method":
        """Accept ``FEM``, ``ES``, ``NS``, ``ALPHA`` or ``ALPHA:0.42``."""
        name, _, value = str(text).partition(":")
        if value:
            alpha = float(value)
        return cls(name, alpha)

    @property
    def tag(self) -> str:
        return f"ALPHA({self.alpha:g})" if self.name == "ALPHA" else self.name

    @property
    def smoothed(self) -> bool:
        return self.name != "FEM"


@dataclass
class SmoothingDomain:
    kind: str                  # "edge" | "node"
    anchor: int                # edge id or node id
    area: float
    contributors: np.ndarray   # element ids
    shares: np.ndarray         # area share of each contributor
    B: np.ndarray              # (3, 2m) smoothed strain matrix
    nodes: np.ndarray          # (m,) node ids the columns of B refer to

    @property
    def dofs(self) -> np.ndarray:
        return np.column_stack([2 * self.nodes, 2 * self.nodes + 1]).ravel()


@dataclass
class GlobalStiffness:
    matrix: sp.csr_matrix
    method: Method
    parts: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape


def element_dofs(elements: np.ndarray) -> np.ndarray:
    n = elements.shape[1]
    dofs = np.empty((len(elements), 2 * n), dtype=np.int64)
    dofs[:, 0::2] = 2 * elements
    dofs[:, 1::2] = 2 * elements + 1
    return dofs


def _smooth(kind, anchor, elem_ids, mesh, B_e, A_e):
    shares = A_e[elem_ids] / 3.0
    area = float(shares.sum())
    nodes = np.unique(mesh.elements[elem_ids])
    col = {n: k for k, n in enumerate(nodes)}
    B = np.zeros((3, 2 * len(nodes)))
    for e, w in zip(elem_ids, shares):
        for local, n in enumerate(mesh.elements[e]):
            c = 2 * col[n]
            B[:, c:c + 2] += w * B_e[e][:, 2 * local:2 * local + 2]
    B /= area
    return SmoothingDomain(kind, int(anchor), area, np.asarray(elem_ids),
                           shares, B, nodes)


def build_edge_domains(mesh: Mesh, adjacency: EdgeAdjacency | None = None,
                       anchors=None) -> list[SmoothingDomain]:
    """One smoothing domain per edge (optionally only for ``anchors``)."""
    if adjacency is None:
        adjacency = build_edge_adjacency(mesh)
    B_e, A_e = t3_gradients(mesh.element_coords())
    ids = range(len(adjacency)) if anchors is None else anchors
    out = []
    for k in ids:
        elems = adjacency.elements[k]
        out.append(_smooth("edge", k, elems[elems >= 0], mesh, B_e, A_e))
    return out


def build_node_domains(mesh: Mesh, adjacency: NodeAdjacency | None = None,
                       anchors=None) -> list[SmoothingDomain]:
    if adjacency is None:
        adjacency = build_node_adjacency(mesh)
    B_e, A_e = t3_gradients(mesh.element_coords())
    ids = range(mesh.n_nodes) if anchors is None else anchors
    out = []
    for n in ids:
        elems = adjacency.elements[n]
        if len(elems) == 0:
            raise MeshError(f"node {n} is not attached to any element")
        out.append(_smooth("node", n, np.sort(elems), mesh, B_e, A_e))
    return out


def audit_area_partition(domains, mesh: Mesh, rtol: float = 1e-12) -> dict:
    """Check that domain areas tile the mesh; raise with offenders otherwise."""
    A_e = mesh.element_areas()
    total = sum(d.area for d in domains)
    offenders = [d.anchor for d in domains
                 if not np.allclose(d.shares, A_e[d.contributors] / 3.0,
                                    rtol=rtol, atol=0.0)
                 or abs(d.shares.sum() - d.area) > rtol * abs(d.area)]
    report = {"domains": len(domains), "domain_area": total,
              "mesh_area": float(A_e.sum()), "offenders": offenders}
    if offenders or abs(total - A_e.sum()) > rtol * A_e.sum():
        raise MeshError(
            f"smoothing domains do not partition the mesh area "
            f"({total!r} vs {A_e.sum()!r}); offending domains: {offenders[:10]}")
    return report


def _coo(n_dofs, blocks):
    rows, cols, vals = [], [], []
    for dofs, k in blocks:
        m = len(dofs)
        rows.append(np.repeat(dofs, m))
        cols.append(np.tile(dofs, m))
        vals.append(k.ravel())
    if not rows:
        return sp.csr_matrix((n_dofs, n_dofs))
    return sp.coo_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n_dofs, n_dofs)).tocsr()


def _batched_coo(n_dofs, dofs, ke):
    m = dofs.shape[1]
    rows = np.repeat(dofs, m, axis=1).ravel()
    cols = np.tile(dofs, (1, m)).ravel()
    return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()


def element_stiffnesses(mesh: Mesh, mat: Material, elements=None) -> np.ndarray:
    """Stack of element stiffness matrices, (n, 2k, 2k)."""
    ids = np.arange(mesh.n_elements) if elements is None else np.asarray(elements)
    coords = mesh.nodes[mesh.elements[ids]]
    D = plane_stress_D(mat)
    if mesh.kind == "T3":
        B, A = t3_gradients(coords)
        return mat.t * A[:, None, None] * np.einsum("eki,kl,elj->eij", B, D, B)
    rule = t6_gauss_B if mesh.kind == "T6" else q4_gauss_B
    out = []
    for xy in coords:
        out.append(mat.t * sum(w * Bg.T @ D @ Bg for Bg, w in rule(xy)))
    return np.array(out)


def assemble_fem(mesh: Mesh, mat: Material) -> GlobalStiffness:
    ke = element_stiffnesses(mesh, mat)
    K = _batched_coo(mesh.n_dofs, element_dofs(mesh.elements), ke)
    return GlobalStiffness(K, Method("FEM"))


def domain_stiffness_blocks(domains, mat: Material):
    D = plane_stress_D(mat)
    return [(d.dofs, mat.t * d.area * d.B.T @ D @ d.B) for d in domains]


def _require_t3(mesh):
    if mesh.kind != "T3":
        raise MeshError(f"smoothed methods need a T3 mesh, got {mesh.kind}")


def assemble_es(mesh: Mesh, mat: Material, edge_domains=None) -> GlobalStiffness:
    _require_t3(mesh)
    if edge_domains is None:
        edge_domains = build_edge_domains(mesh)
    K = _coo(mesh.n_dofs, domain_stiffness_blocks(edge_domains, mat))
    return GlobalStiffness(K, Method("ES"))


def assemble_ns(mesh: Mesh, mat: Material, node_domains=None) -> GlobalStiffness:
    _require_t3(mesh)
    if node_domains is None:
        node_domains = build_node_domains(mesh)
    K = _coo(mesh.n_dofs, domain_stiffness_blocks(node_domains, mat))
    return GlobalStiffness(K, Method("NS"))


def combine_alpha(K_fem, K_ns, alpha: float) -> sp.csr_matrix:
    """Blend compatible and node-smoothed parts by area fractions."""
    w = alpha * alpha
    return (w * K_fem + (1.0 - w) * K_ns).tocsr()


def assemble_alpha(mesh: Mesh, mat: Material, node_domains=None,
                   alpha: float = 0.42) -> GlobalStiffness:
    method = Method("ALPHA", alpha)
    _require_t3(mesh)
    fem = assemble_fem(mesh, mat).matrix
    ns = assemble_ns(mesh, mat, node_domains).matrix
    return GlobalStiffness(combine_alpha(fem, ns, alpha), method,
                           parts={"FEM": fem, "NS": ns})


def assemble(mesh: Mesh, mat: Material, method: Method) -> GlobalStiffness:
    if method.name == "FEM":
        return assemble_fem(mesh, mat)
    if method.name == "ES":
        return assemble_es(mesh, mat)
    if method.name == "NS":
        return assemble_ns(mesh, mat)
    return assemble_alpha(mesh, mat, alpha=method.alpha)
