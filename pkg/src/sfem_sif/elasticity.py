"""Plane-stress Hooke law and element stiffness matrices (T3, T6, Q4).

DOF ordering is interleaved per node: ``(u_x0, u_y0, u_x1, u_y1, ...)``.
Strain is engineering strain ``(eps_xx, eps_yy, gamma_xy)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ElementError(ValueError):
    """Degenerate, inverted or otherwise invalid element geometry."""


@dataclass(frozen=True)
class Material:
    E: float = 1.0
    nu: float = 0.3
    t: float = 1.0

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if not 0 <= self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {self.nu}")
        if not self.t > 0:
            raise ValueError(f"thickness must be positive, got {self.t}")


def plane_stress_D(mat: Material) -> np.ndarray:
    E, nu = mat.E, mat.nu
    return E / (1 - nu**2) * np.array([[1.0, nu, 0.0],
                                       [nu, 1.0, 0.0],
                                       [0.0, 0.0, (1 - nu) / 2]])


def strain_matrix(dNdx: np.ndarray, dNdy: np.ndarray) -> np.ndarray:
    """Assemble B (…, 3, 2n) from shape-function derivatives (…, n)."""
    shape = dNdx.shape[:-1]
    n = dNdx.shape[-1]
    B = np.zeros(shape + (3, 2 * n))
    B[..., 0, 0::2] = dNdx
    B[..., 1, 1::2] = dNdy
    B[..., 2, 0::2] = dNdy
    B[..., 2, 1::2] = dNdx
    return B


def t3_gradients(coords: np.ndarray, tol: float = 1e-14):
    """Constant strain matrices for a batch of triangles.

    ``coords`` has shape (n, 3, 2).  Returns ``(B, area)`` with B of shape
    (n, 3, 6).  Raises on triangles with ``|A| < tol * L**2``, L being the
    longest edge.
    """
    coords = np.asarray(coords, dtype=float)
    x, y = coords[..., 0], coords[..., 1]
    # b_i = y_j - y_k, c_i = x_k - x_j over cyclic (i, j, k)
    b = np.roll(y, -1, axis=-1) - np.roll(y, -2, axis=-1)
    c = np.roll(x, -2, axis=-1) - np.roll(x, -1, axis=-1)
    two_a = np.sum(x * b, axis=-1)
    edges = coords - np.roll(coords, -1, axis=-2)
    scale = np.max(np.sum(edges**2, axis=-1), axis=-1)
    bad = np.abs(two_a) < 2 * tol * scale
    if np.any(bad):
        raise ElementError(f"degenerate triangle(s): {np.flatnonzero(bad)[:5].tolist()}")
    B = strain_matrix(b / two_a[..., None], c / two_a[..., None])
    return B, two_a / 2


def t3_gradient(coords):
    B, area = t3_gradients(np.asarray(coords, dtype=float)[None])
    return B[0], float(area[0])


def t3_stiffnesses(coords, mat: Material) -> np.ndarray:
    B, area = t3_gradients(coords)
    D = plane_stress_D(mat)
    return mat.t * area[:, None, None] * np.einsum("eki,kl,elj->eij", B, D, B)


def t3_stiffness(coords, mat: Material) -> np.ndarray:
    return t3_stiffnesses(np.asarray(coords, dtype=float)[None], mat)[0]


# 3-point interior rule, exact for quadratics on the reference triangle
T6_POINTS = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
T6_WEIGHTS = np.full(3, 1 / 6)

_G = 1 / np.sqrt(3)
Q4_POINTS = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])
Q4_WEIGHTS = np.ones(4)


def t6_shape_derivs(xi, eta):
    """dN/dxi, dN/deta for node order (corner 1..3, mid 12, 23, 31)."""
    L1 = 1 - xi - eta
    dxi = np.array([-(4 * L1 - 1), 4 * xi - 1, 0.0,
                    4 * (L1 - xi), 4 * eta, -4 * eta])
    deta = np.array([-(4 * L1 - 1), 0.0, 4 * eta - 1,
                     -4 * xi, 4 * xi, 4 * (L1 - eta)])
    return dxi, deta


def t6_shape(xi, eta):
    L1 = 1 - xi - eta
    return np.array([L1 * (2 * L1 - 1), xi * (2 * xi - 1), eta * (2 * eta - 1),
                     4 * L1 * xi, 4 * xi * eta, 4 * eta * L1])


def q4_shape_derivs(xi, eta):
    dxi = 0.25 * np.array([-(1 - eta), 1 - eta, 1 + eta, -(1 + eta)])
    deta = 0.25 * np.array([-(1 - xi), -(1 + xi), 1 + xi, 1 - xi])
    return dxi, deta


def _iso_B(coords, dxi, deta):
    J = np.array([[dxi @ coords[:, 0], dxi @ coords[:, 1]],
                  [deta @ coords[:, 0], deta @ coords[:, 1]]])
    detJ = np.linalg.det(J)
    inv = np.linalg.inv(J)
    dNdx = inv[0, 0] * dxi + inv[0, 1] * deta
    dNdy = inv[1, 0] * dxi + inv[1, 1] * deta
    return strain_matrix(dNdx, dNdy), detJ


def _check_t6(coords, tol=1e-9):
    corners = coords[:3]
    mids = 0.5 * (corners + np.roll(corners, -1, axis=0))
    size = np.max(np.ptp(corners, axis=0))
    if np.max(np.abs(coords[3:] - mids)) > tol * size:
        raise ElementError("T6 mid-side nodes must sit at edge midpoints")
    t3_gradient(corners)
    x, y = corners[:, 0], corners[:, 1]
    if (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]) <= 0:
        raise ElementError("T6 corner nodes must be counter-clockwise")


def t6_gauss_B(coords):
    """Strain matrices and weights ``detJ * w`` at the 3 Gauss points."""
    coords = np.asarray(coords, dtype=float)
    _check_t6(coords)
    out = []
    for (xi, eta), w in zip(T6_POINTS, T6_WEIGHTS):
        B, detJ = _iso_B(coords, *t6_shape_derivs(xi, eta))
        out.append((B, detJ * w))
    return out


def t6_stiffness(coords, mat: Material) -> np.ndarray:
    D = plane_stress_D(mat)
    return mat.t * sum(w * B.T @ D @ B for B, w in t6_gauss_B(coords))


def _check_q4(coords):
    d = np.roll(coords, -1, axis=0) - coords
    cross = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
    scale = np.max(np.sum(d**2, axis=1))
    if np.any(cross <= 1e-14 * scale):
        raise ElementError("Q4 must be strictly convex and counter-clockwise")


def q4_gauss_B(coords):
    coords = np.asarray(coords, dtype=float)
    _check_q4(coords)
    out = []
    for (xi, eta), w in zip(Q4_POINTS, Q4_WEIGHTS):
        B, detJ = _iso_B(coords, *q4_shape_derivs(xi, eta))
        out.append((B, detJ * w))
    return out


def q4_stiffness(coords, mat: Material) -> np.ndarray:
    D = plane_stress_D(mat)
    return mat.t * sum(w * B.T @ D @ B for B, w in q4_gauss_B(coords))


def rigid_modes(coords) -> np.ndarray:
    """The 3 rigid-body displacement vectors (columns) for a node set."""
    coords = np.asarray(coords, dtype=float)
    n = len(coords)
    c = coords - coords.mean(axis=0)
    R = np.zeros((2 * n, 3))
    R[0::2, 0] = 1.0
    R[1::2, 1] = 1.0
    R[0::2, 2] = -c[:, 1]
    R[1::2, 2] = c[:, 0]
    return R
