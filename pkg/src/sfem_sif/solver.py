"""Boundary conditions, loads, the constrained solve and stress recovery."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .elasticity import (Material, plane_stress_D, q4_gauss_B, q4_shape_derivs,
                         rigid_modes, t3_gradients, t6_gauss_B, t6_shape_derivs, _iso_B)
from .mesh import Mesh, MeshError
from .smoothing import (GlobalStiffness, Method, assemble_fem,
                        build_edge_domains, build_node_domains, combine_alpha,
                        domain_stiffness_blocks, _coo)

RESIDUAL_RTOL = 1e-10


class SolverError(RuntimeError):
    """The reduced system is singular or not positive definite."""


class ConvergenceError(RuntimeError):
    """The solve missed the residual tolerance."""


@dataclass
class AnalysisCase:
    mesh: Mesh
    material: Material
    method: Method
    sigma: float
    constraints: np.ndarray          # constrained DOF ids (homogeneous)
    load_vector: np.ndarray
    closed_crack: bool = False
    stiffness: GlobalStiffness | None = None
    domains: list | None = field(default=None, repr=False)

    def global_stiffness(self) -> GlobalStiffness:
        if self.stiffness is None:
            self.stiffness = assemble_case(self)
        return self.stiffness


def _need(mesh, name):
    if name not in mesh.groups:
        raise MeshError(f"mesh lacks the {name!r} boundary group")
    return mesh.groups[name]


def consistent_edge_load(mesh: Mesh, sigma: float, t: float) -> np.ndarray:
    """Nodal forces for a uniform y-traction ``sigma`` on the load edge."""
    f = np.zeros(mesh.n_dofs)
    ids = _need(mesh, "load_edge")
    x = mesh.nodes[ids, 0]
    if mesh.kind == "T6":
        for k in range(0, len(ids) - 2, 2):
            L = x[k + 2] - x[k]
            f[2 * ids[k:k + 3] + 1] += sigma * t * L * np.array([1, 4, 1]) / 6
    else:
        for k in range(len(ids) - 1):
            L = x[k + 1] - x[k]
            f[2 * ids[k:k + 2] + 1] += sigma * t * L / 2
    return f


def build_case(mesh: Mesh, mat: Material, method: Method, sigma: float = 1.0,
               closed_crack: bool = False) -> AnalysisCase:
    """Symmetry constraints plus far-edge tension for a specimen model.

    ``closed_crack`` also pins the crack face, turning the model into the
    uncracked plate used for patch tests.
    """
    if method.smoothed and mesh.kind != "T3":
        raise MeshError(f"{method.tag} requires T3 elements, mesh is {mesh.kind}")
    ligament = _need(mesh, "ligament")
    tip = _need(mesh, "tip")
    crack = _need(mesh, "crack_face")
    fixed_y = np.concatenate([tip, ligament] + ([crack] if closed_crack else []))
    kind = mesh.spec.kind if mesh.spec is not None else "CEN"
    if kind == "CEN":
        fixed_x = _need(mesh, "symmetry_x")
    else:
        # one x-pin, at the crack-line node farthest from the tip
        fixed_x = ligament[-1:] if len(ligament) else tip
    constraints = np.unique(np.concatenate([2 * fixed_x, 2 * fixed_y + 1]))
    f = consistent_edge_load(mesh, sigma, mat.t)
    return AnalysisCase(mesh, mat, method, float(sigma), constraints, f,
                        closed_crack=closed_crack)


def case_domains(case: AnalysisCase):
    if case.domains is None:
        if case.method.name == "ES":
            case.domains = build_edge_domains(case.mesh)
        elif case.method.name in ("NS", "ALPHA"):
            case.domains = build_node_domains(case.mesh)
        else:
            case.domains = []
    return case.domains


def assemble_case(case: AnalysisCase) -> GlobalStiffness:
    mesh, mat, method = case.mesh, case.material, case.method
    if method.name == "FEM":
        return assemble_fem(mesh, mat)
    domains = case_domains(case)
    smoothed = _coo(mesh.n_dofs, domain_stiffness_blocks(domains, mat))
    if method.name in ("ES", "NS"):
        return GlobalStiffness(smoothed, method)
    fem = assemble_fem(mesh, mat).matrix
    return GlobalStiffness(combine_alpha(fem, smoothed, method.alpha), method,
                           parts={"FEM": fem, "NS": smoothed})


@dataclass(frozen=True)
class FieldSolution:
    u: np.ndarray
    reactions: np.ndarray            # full-length; nonzero only at constrained DOFs
    energy: float
    residual: float                  # relative to ||f||
    case: AnalysisCase = field(repr=False, compare=False)

    @property
    def U(self) -> float:
        return self.energy

    def displacements(self) -> np.ndarray:
        return self.u.reshape(-1, 2)


_MODE_NAMES = ("x-translation", "y-translation", "rotation")


def _unconstrained_modes(mesh, fixed):
    R = rigid_modes(mesh.nodes)
    names = []
    for k, name in enumerate(_MODE_NAMES):
        if np.all(np.abs(R[fixed, k]) < 1e-12 * np.abs(R[:, k]).max()):
            names.append(name)
    return names


def solve_system(K: sp.spmatrix, f: np.ndarray, fixed: np.ndarray, mesh=None):
    """Solve ``K u = f`` with ``u[fixed] = 0`` by row/column elimination.

    Returns ``(u, reactions, relative residual)``.
    """
    n = K.shape[0]
    free = np.setdiff1d(np.arange(n), fixed)
    if mesh is not None:
        loose = _unconstrained_modes(mesh, fixed)
        if loose:
            raise SolverError(f"constraints leave rigid-body mode(s) free: {', '.join(loose)}")
    K = sp.csr_matrix(K)
    Kff = K[free][:, free].tocsc()
    ff = f[free]
    try:
        lu = spla.splu(Kff, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SolverError(f"reduced stiffness is singular: {exc}") from exc
    pivots = np.abs(lu.U.diagonal())
    if pivots.size and pivots.min() <= 1e-12 * pivots.max():
        raise SolverError(f"reduced stiffness is numerically singular "
                          f"(pivot ratio {pivots.min() / pivots.max():.1e})")
    uf = lu.solve(ff)
    scale = max(np.linalg.norm(f), np.finfo(float).tiny)
    res = np.linalg.norm(Kff @ uf - ff) / scale
    if res > RESIDUAL_RTOL:
        uf = uf + lu.solve(ff - Kff @ uf)
        res = np.linalg.norm(Kff @ uf - ff) / scale
    if not np.all(np.isfinite(uf)):
        raise SolverError("solve produced non-finite displacements")
    if np.linalg.norm(f) > 0 and uf @ ff <= 0:
        raise SolverError("reduced stiffness is not positive definite (u.f <= 0)")
    if np.linalg.norm(f) == 0:
        res = 0.0
    if res > RESIDUAL_RTOL:
        raise ConvergenceError(f"relative residual {res:.3e} exceeds {RESIDUAL_RTOL:g}")
    u = np.zeros(n)
    u[free] = uf
    r = np.zeros(n)
    r[fixed] = (K @ u - f)[fixed]
    return u, r, res


def solve(case: AnalysisCase) -> FieldSolution:
    K = case.global_stiffness().matrix
    f = case.load_vector
    u, r, res = solve_system(K, f, case.constraints, case.mesh)
    return FieldSolution(u, r, 0.5 * float(u @ f), res, case)


@dataclass
class DomainStresses:
    kind: np.ndarray     # per row: "element", "edge" or "node"
    anchor: np.ndarray
    area: np.ndarray
    stress: np.ndarray   # (n, 3): sxx, syy, sxy

    def __len__(self):
        return len(self.anchor)

    def select(self, kind: str) -> "DomainStresses":
        m = self.kind == kind
        return DomainStresses(self.kind[m], self.anchor[m], self.area[m], self.stress[m])


def _element_centroid_stresses(mesh, mat, u):
    D = plane_stress_D(mat)
    if mesh.kind == "T3":
        B, A = t3_gradients(mesh.element_coords())
        ue = u.reshape(-1, 2)[mesh.elements].reshape(mesh.n_elements, -1)
        return np.einsum("kl,elj,ej->ek", D, B, ue), A
    at = (1 / 3, 1 / 3) if mesh.kind == "T6" else (0.0, 0.0)
    derivs = t6_shape_derivs(*at) if mesh.kind == "T6" else q4_shape_derivs(*at)
    out = []
    for conn in mesh.elements:
        B, _ = _iso_B(mesh.nodes[conn], *derivs)
        out.append(D @ B @ u.reshape(-1, 2)[conn].ravel())
    return np.array(out), mesh.element_areas()


def element_gauss_stresses(mesh: Mesh, mat: Material, u: np.ndarray) -> np.ndarray:
    """Stresses at every quadrature point of every element, (n_points, 3)."""
    D = plane_stress_D(mat)
    if mesh.kind == "T3":
        return _element_centroid_stresses(mesh, mat, u)[0]
    rule = t6_gauss_B if mesh.kind == "T6" else q4_gauss_B
    out = []
    for conn in mesh.elements:
        ue = u.reshape(-1, 2)[conn].ravel()
        out.extend(D @ B @ ue for B, _ in rule(mesh.nodes[conn]))
    return np.array(out)


def recover_domain_stresses(case: AnalysisCase, u: np.ndarray,
                            method: Method | None = None) -> DomainStresses:
    """Constant stress per integration domain of the case's method."""
    method = method or case.method
    if method.name != case.method.name:
        raise ValueError(f"case was solved with {case.method.tag}, not {method.tag}")
    mesh, mat = case.mesh, case.material
    rows = []
    if method.name in ("FEM", "ALPHA"):
        s, A = _element_centroid_stresses(mesh, mat, u)
        if method.name == "ALPHA":
            A = A * method.alpha**2
        rows.append(("element", np.arange(mesh.n_elements), A, s))
    if method.smoothed:
        D = plane_stress_D(mat)
        domains = case_domains(case)
        s = np.array([D @ d.B @ u[d.dofs] for d in domains])
        A = np.array([d.area for d in domains])
        if method.name == "ALPHA":
            A = A * (1 - method.alpha**2)
        kind = "edge" if method.name == "ES" else "node"
        rows.append((kind, np.array([d.anchor for d in domains]), A, s))
    return DomainStresses(
        kind=np.concatenate([np.full(len(r[1]), r[0]) for r in rows]),
        anchor=np.concatenate([r[1] for r in rows]),
        area=np.concatenate([r[2] for r in rows]),
        stress=np.vstack([r[3] for r in rows]),
    )
