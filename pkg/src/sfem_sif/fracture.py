"""Mode-I fracture quantities extracted from a solved specimen model.

The models are symmetric about the crack line, so ``u_y`` on the crack face
is half the crack opening and the symmetry reaction at a ligament node is
the closing force the removed half would exert.  Energy release rates refer
to one crack tip of the full specimen, per unit thickness.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

import scipy.sparse as sp

from .mesh import Mesh, build_edge_adjacency, build_node_adjacency
from .smoothing import (_batched_coo, _coo, build_edge_domains,
                        build_node_domains, domain_stiffness_blocks,
                        element_dofs, element_stiffnesses)
from .solver import AnalysisCase, FieldSolution, solve_system


class ExtractionError(ValueError):
    """A fracture quantity cannot be extracted from the given solution."""


@dataclass(frozen=True)
class CodProfile:
    x: np.ndarray   # crack-face positions, increasing toward the tip
    v: np.ndarray   # half crack opening (u_y) at those positions

    def __len__(self):
        return len(self.x)

    def at(self, positions) -> np.ndarray:
        """Linear interpolation of the opening at ``positions``."""
        return np.interp(positions, self.x, self.v)


@dataclass(frozen=True)
class SifEstimate:
    G: float
    K: float
    K_star: float
    extraction: str
    method: str
    h_over_a: float
    meta: dict = field(default_factory=dict, compare=False)


def extract_cod(mesh: Mesh, solution: FieldSolution) -> CodProfile:
    ids = mesh.groups.get("crack_face")
    if ids is None or len(ids) == 0:
        raise ExtractionError("mesh has an empty crack_face group")
    return CodProfile(mesh.nodes[ids, 0].copy(), solution.u[2 * ids + 1].copy())


def to_sif(G: float, case: AnalysisCase, extraction: str, **meta) -> SifEstimate:
    """Plane-stress ``K = sqrt(G E)`` and ``K* = K / (sigma sqrt(pi a))``."""
    mesh = case.mesh
    a = mesh.extent[0] / 2
    K = float(np.sqrt(max(G, 0.0) * case.material.E))
    K_star = K / (case.sigma * np.sqrt(np.pi * a)) if case.sigma != 0 else 0.0
    return SifEstimate(float(G), K, float(K_star), extraction, case.method.tag,
                       mesh.h / a, meta)


def _crack_line_neighbours(mesh):
    crack = mesh.groups["crack_face"]
    ligament = mesh.groups["ligament"]
    if len(crack) == 0 or len(ligament) == 0:
        raise ExtractionError("closure integral needs crack-face and ligament nodes")
    return crack[::-1], ligament   # both ordered outward from the tip


def _closing_force(solution, node):
    # symmetry reaction pulls the model toward the crack plane (negative y)
    return -float(solution.reactions[2 * node + 1])


def mcci_linear(solution: FieldSolution, mesh: Mesh | None = None) -> SifEstimate:
    """Closure integral for linear elements: ``G = F v / h``."""
    case = solution.case
    mesh = mesh or case.mesh
    if mesh.kind == "T6":
        raise ExtractionError("use mcci_quadratic for T6 meshes")
    behind, _ = _crack_line_neighbours(mesh)
    F = _closing_force(solution, mesh.tip)
    v = float(solution.u[2 * behind[0] + 1])
    _check_opening(F, v)
    G = F * v / mesh.h
    return to_sif(G, case, "MCCI", F=F, v=v)


def mcci_quadratic(solution: FieldSolution, mesh: Mesh | None = None) -> SifEstimate:
    """Closure integral for T6: ``G = (F1 v1 + F2 v2) / (2 h)``.

    Closing one whole element (length ``2h``) brings the tip node to the
    opening now found ``2h`` behind it and the mid-side node ahead to the
    opening ``h`` behind.  So F1 (tip) pairs with v1 taken at ``2h`` and F2
    (first ligament mid-side node) with v2 taken at ``h``.
    """
    case = solution.case
    mesh = mesh or case.mesh
    if mesh.kind != "T6":
        raise ExtractionError("mcci_quadratic needs a T6 mesh")
    behind, ahead = _crack_line_neighbours(mesh)
    if len(behind) < 2:
        raise ExtractionError("need two crack-face nodes behind the tip")
    F1 = _closing_force(solution, mesh.tip)
    F2 = _closing_force(solution, ahead[0])
    v1 = float(solution.u[2 * behind[1] + 1])
    v2 = float(solution.u[2 * behind[0] + 1])
    work = F1 * v1 + F2 * v2
    _check_opening(work, min(v1, v2))
    G = work / (2 * mesh.h)
    return to_sif(G, case, "MCCI", F1=F1, F2=F2, v1=v1, v2=v2)


def mcci(solution: FieldSolution) -> SifEstimate:
    if solution.case.mesh.kind == "T6":
        return mcci_quadratic(solution)
    return mcci_linear(solution)


def _check_opening(F, v):
    if v < 0:
        raise ExtractionError(f"crack faces overlap (opening {v:.3e} < 0); "
                              f"closure needs a tensile, opening load")
    if F * v < 0:
        raise ExtractionError(f"non-opening state at the crack tip (F*v = {F * v:.3e} < 0)")


@dataclass(frozen=True)
class VceConfig:
    """Virtual crack extension settings.

    ``delta_a`` is absolute unless ``relative`` is set, in which case it is a
    multiple of h.  ``central`` differences the stiffness between shifts of
    ``-delta_a/2`` and ``+delta_a/2``; otherwise a forward shift is used.
    """
    delta_a: float | None = None
    shift_group: tuple | None = None
    relative: bool = False
    central: bool = True

    def resolve(self, mesh: Mesh):
        if self.delta_a is None:
            da = 1e-3 * mesh.h
        else:
            da = self.delta_a * mesh.h if self.relative else self.delta_a
        if not 0 < da <= 0.01 * mesh.h * (1 + 1e-12):
            raise ValueError(f"virtual extension {da:g} must lie in (0, 0.01 h]")
        if self.shift_group is None:
            group = default_shift_group(mesh)
        else:
            group = np.asarray(self.shift_group, dtype=np.int64)
        if mesh.tip not in group:
            raise ValueError("shift group must contain the crack-tip node")
        return da, group


def default_shift_group(mesh: Mesh) -> np.ndarray:
    """Nodes of the grid cells adjoining the tip (4 triangles on a plain T3 mesh)."""
    d = np.abs(mesh.nodes - mesh.nodes[mesh.tip])
    s = mesh.cell_size or mesh.h
    return np.flatnonzero(np.all(d <= s * (1 + 1e-9), axis=1))


def affected_entities(case: AnalysisCase, group: np.ndarray) -> dict:
    """Elements and smoothing domains whose stiffness changes when ``group`` moves.

    Any domain that contains a fragment of an element with a moved node is
    selected.  Over-selection only costs time: unchanged entities cancel in
    the stiffness difference.
    """
    mesh = case.mesh
    moved = np.zeros(mesh.n_nodes, dtype=bool)
    moved[group] = True
    touched = np.flatnonzero(np.any(moved[mesh.elements], axis=1))
    name = case.method.name
    out = {}
    if name in ("FEM", "ALPHA"):
        out["elements"] = touched
    if name == "ES":
        adj = build_edge_adjacency(mesh)
        hit = np.isin(adj.elements, touched) & (adj.elements >= 0)
        out["edges"] = np.flatnonzero(np.any(hit, axis=1))
    elif name in ("NS", "ALPHA"):
        out["nodes"] = np.unique(mesh.elements[touched])
    return out


def partial_stiffness(case: AnalysisCase, mesh: Mesh, entities: dict):
    """Sum of the stiffness contributions of ``entities``, evaluated on ``mesh``."""
    mat, method = case.material, case.method
    w_fem = method.alpha**2 if method.name == "ALPHA" else 1.0
    K = sp.csr_matrix((mesh.n_dofs, mesh.n_dofs))
    if len(entities.get("elements", ())):
        ids = entities["elements"]
        ke = element_stiffnesses(mesh, mat, ids)
        K = K + w_fem * _batched_coo(mesh.n_dofs, element_dofs(mesh.elements[ids]), ke)
    if "edges" in entities:
        doms = build_edge_domains(mesh, build_edge_adjacency(mesh), entities["edges"])
        K = K + _coo(mesh.n_dofs, domain_stiffness_blocks(doms, mat))
    if "nodes" in entities:
        doms = build_node_domains(mesh, build_node_adjacency(mesh), entities["nodes"])
        w_ns = 1.0 - w_fem if method.name == "ALPHA" else 1.0
        K = K + w_ns * _coo(mesh.n_dofs, domain_stiffness_blocks(doms, mat))
    return K


def _shifted(mesh: Mesh, group, dx: float) -> Mesh:
    nodes = mesh.nodes.copy()
    nodes[group, 0] += dx
    out = replace(mesh, nodes=nodes)
    moved = np.isin(mesh.elements, group).any(axis=1)
    if np.any(out.element_areas()[moved] <= 0):
        raise ExtractionError("virtual crack extension inverts an element")
    return out


def vce(case: AnalysisCase, solution: FieldSolution,
        cfg: VceConfig = VceConfig()) -> SifEstimate:
    """Virtual crack extension: ``G = -(1 / (t da)) u^T dK u``.

    The shift group moves rigidly along the crack; only entities touching
    moved nodes are re-evaluated.  The factor is twice the usual ``1/2``
    because the symmetric model carries half the crack-plane energy.
    """
    mesh = case.mesh
    if mesh.kind == "T6":
        raise ExtractionError("virtual crack extension is implemented for T3 and Q4 meshes")
    da, group = cfg.resolve(mesh)
    entities = affected_entities(case, group)
    if cfg.central:
        lo, hi = _shifted(mesh, group, -da / 2), _shifted(mesh, group, da / 2)
    else:
        lo, hi = mesh, _shifted(mesh, group, da)
    dK = partial_stiffness(case, hi, entities) - partial_stiffness(case, lo, entities)
    u = solution.u
    G = -float(u @ (dK @ u)) / (case.material.t * da)
    if G < 0:
        raise ExtractionError(f"negative energy release rate {G:.3e} from VCE")
    return to_sif(G, case, "VCE", delta_a=da, central=cfg.central,
                  shift_group=group.tolist())


def compliance_release_rate(case: AnalysisCase, steps: int = 1) -> SifEstimate:
    """G from the compliance energy of the same mesh with a longer and a
    shorter crack (tip moved by ``steps`` crack-line nodes either way).

    Used as an oracle: it needs neither tip forces nor openings.  Choose
    ``steps`` as a multiple of the mesh period along the crack so both
    tips see the same local element layout.
    """
    mesh = case.mesh
    line = np.concatenate([mesh.groups["crack_face"], mesh.groups["tip"],
                           mesh.groups["ligament"]])
    k = len(mesh.groups["crack_face"])
    if not (steps <= k and k + steps < len(line) - 1):
        raise ExtractionError(f"cannot move the tip by {steps} nodes on this mesh")
    K = case.global_stiffness().matrix
    f = case.load_vector
    pinned_x = case.constraints[case.constraints % 2 == 0]
    energy = {}
    for s in (-steps, steps):
        fixed = np.unique(np.concatenate([pinned_x, 2 * line[k + s:] + 1]))
        u, _, _ = solve_system(K, f, fixed, mesh)
        energy[s] = 0.5 * float(u @ f)
    x = mesh.nodes[line, 0]
    da = x[k + steps] - x[k - steps]
    G = 2.0 * (energy[steps] - energy[-steps]) / (case.material.t * da)
    return to_sif(G, case, "COMPLIANCE", steps=steps)


def richardson_extrapolate(k1: SifEstimate, k2: SifEstimate) -> float:
    """Eliminate the term linear in h from two estimates of K*."""
    if k1.method != k2.method or k1.extraction.split("(")[0] != k2.extraction.split("(")[0]:
        raise ValueError("estimates come from different methods or extractions")
    m1, m2 = k1.meta.get("case"), k2.meta.get("case")
    if m1 is not None and m2 is not None and m1 != m2:
        raise ValueError(f"estimates belong to different cases: {m1} vs {m2}")
    h1, h2 = k1.h_over_a, k2.h_over_a
    if h1 == h2:
        raise ValueError("extrapolation needs two different mesh densities")
    return (k1.K_star * h2 - k2.K_star * h1) / (h2 - h1)


def oscillation_index(profile: CodProfile, window: int = 5) -> int:
    """Sign changes between successive opening increments near the tip."""
    if len(profile) < 4:
        raise ValueError("oscillation index needs at least 4 crack-face samples")
    v = np.asarray(profile.v)[-window:]
    d = np.diff(v)
    s = np.sign(d[d != 0])
    return int(np.sum(s[1:] != s[:-1]))
