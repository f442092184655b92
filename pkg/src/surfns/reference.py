"""Lagrange bases on the reference triangle with equispaced nodes.

Node ordering per degree k: the three vertices (0,0), (1,0), (0,1); then k-1
interior nodes per edge in local edge order (v0->v1, v1->v2, v2->v0), walking
from the first to the second vertex; then interior nodes.  This matches the
global numbering used by the mesh (vertices / edge dofs / face dofs).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))

__all__ = ["ReferenceBasis", "lagrange_basis", "node_pattern", "VERTS", "LOCAL_EDGES"]


def node_pattern(k: int):
    """Reference node coordinates and their (kind, slot) labels for degree k."""
    if k < 1:
        raise ValueError("polynomial degree must be >= 1")
    nodes = [VERTS[0], VERTS[1], VERTS[2]]
    labels = [("vertex", 0, 0), ("vertex", 1, 0), ("vertex", 2, 0)]
    for e, (a, b) in enumerate(LOCAL_EDGES):
        for i in range(1, k):
            s = i / k
            nodes.append(VERTS[a] + s * (VERTS[b] - VERTS[a]))
            labels.append(("edge", e, i - 1))
    interior = []
    for i in range(1, k):
        for j in range(1, k - i):
            interior.append((i / k, j / k))
    for m, p in enumerate(interior):
        nodes.append(np.array(p))
        labels.append(("interior", 0, m))
    return np.array(nodes), labels


@lru_cache(maxsize=None)
def _basis_data(k: int):
    nodes, labels = node_pattern(k)
    exps = [(i, j) for tot in range(k + 1) for i in range(tot + 1) for j in [tot - i]]
    V = np.array([[x**i * y**j for (i, j) in exps] for x, y in nodes])
    coeffs = np.linalg.inv(V)  # column b = monomial coefficients of basis b
    return nodes, labels, exps, coeffs


@dataclass(frozen=True)
class ReferenceBasis:
    degree: int
    nodes: np.ndarray  # (nb, 2)
    labels: tuple

    @property
    def n_basis(self) -> int:
        return len(self.nodes)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Basis values, shape (npts, nb)."""
        _, _, exps, coeffs = _basis_data(self.degree)
        pts = np.atleast_2d(pts)
        mono = np.stack([pts[:, 0] ** i * pts[:, 1] ** j for (i, j) in exps], axis=1)
        return mono @ coeffs

    def grad(self, pts: np.ndarray) -> np.ndarray:
        """Basis gradients, shape (npts, nb, 2)."""
        _, _, exps, coeffs = _basis_data(self.degree)
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        dx = np.stack([i * x ** max(i - 1, 0) * y**j for (i, j) in exps], axis=1)
        dy = np.stack([j * x**i * y ** max(j - 1, 0) for (i, j) in exps], axis=1)
        return np.stack([dx @ coeffs, dy @ coeffs], axis=-1)

    def hess(self, pts: np.ndarray) -> np.ndarray:
        """Basis second derivatives, shape (npts, nb, 2, 2)."""
        _, _, exps, coeffs = _basis_data(self.degree)
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        dxx = np.stack([i * (i - 1) * x ** max(i - 2, 0) * y**j for (i, j) in exps], axis=1)
        dxy = np.stack([i * j * x ** max(i - 1, 0) * y ** max(j - 1, 0) for (i, j) in exps], axis=1)
        dyy = np.stack([j * (j - 1) * x**i * y ** max(j - 2, 0) for (i, j) in exps], axis=1)
        H = np.empty((pts.shape[0], coeffs.shape[1], 2, 2))
        H[..., 0, 0] = dxx @ coeffs
        H[..., 0, 1] = H[..., 1, 0] = dxy @ coeffs
        H[..., 1, 1] = dyy @ coeffs
        return H


def lagrange_basis(k: int) -> ReferenceBasis:
    nodes, labels, _, _ = _basis_data(k)
    return ReferenceBasis(k, nodes, tuple(labels))
