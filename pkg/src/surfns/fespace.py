"""Taylor-Hood finite element spaces on the evolving mesh.

Dof indices are time-independent: a coefficient vector represents the
time-lifted function on any mesh snapshot (transport property), so functions
are carried across time steps by reusing coefficients on the new snapshot.
Velocity dofs are node-major: dof 3*j+c is component c at scalar node j.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import EvolvingSurfaceMesh, MeshSnapshot, NodeLayout, _make_layout

__all__ = ["TaylorHoodSpace", "FeFunction", "interpolate", "eval_function", "zero_mean_functional", "h1_dual_norm"]


@dataclass(frozen=True)
class TaylorHoodSpace:
    mesh: EvolvingSurfaceMesh
    k_u: int
    k_pr: int
    k_lambda: int
    layout_u: NodeLayout
    layout_p: NodeLayout
    layout_l: NodeLayout

    @staticmethod
    def create(mesh: EvolvingSurfaceMesh, k_u: int, k_lambda: int | None = None, k_pr: int | None = None):
        if k_u < 2:
            raise ValueError("velocity order k_u must be >= 2")
        if k_pr is None:
            k_pr = k_u - 1
        if k_pr != k_u - 1:
            raise ValueError("inf-sup pairing requires k_pr = k_u - 1")
        if k_lambda is None:
            k_lambda = k_u
        if k_lambda not in (k_u, k_u - 1):
            raise ValueError("multiplier order k_lambda must be k_u or k_u-1")
        mk = (mesh.k_g, k_u, k_lambda)
        if k_lambda == k_u and mesh.k_g != k_u:
            warnings.warn(
                f"k_lambda=k_u expects iso-parametric geometry (k_g=k_u); got k_g={mk[0]}", stacklevel=2
            )
        if k_lambda == k_u - 1 and mesh.k_g <= k_u:
            warnings.warn(
                f"k_lambda=k_u-1 expects super-parametric geometry (k_g>k_u); got k_g={mk[0]}", stacklevel=2
            )
        mk_args = (mesh.geom_layout.n_vertices, mesh.faces, mesh.edges)
        return TaylorHoodSpace(
            mesh,
            k_u,
            k_pr,
            k_lambda,
            _make_layout(k_u, *mk_args),
            _make_layout(k_pr, *mk_args),
            _make_layout(k_lambda, *mk_args),
        )

    @property
    def n_u(self):
        return 3 * self.layout_u.n_nodes

    @property
    def n_p(self):
        return self.layout_p.n_nodes

    @property
    def n_l(self):
        return self.layout_l.n_nodes

    def layout(self, field: str) -> NodeLayout:
        return {"velocity": self.layout_u, "pressure": self.layout_p, "multiplier": self.layout_l}[field]


@dataclass
class FeFunction:
    space: TaylorHoodSpace
    field: str  # velocity | pressure | multiplier
    coeffs: np.ndarray

    def __post_init__(self):
        n = 3 * self.space.layout(self.field).n_nodes if self.field == "velocity" else self.space.layout(self.field).n_nodes
        if self.coeffs.shape != (n,):
            raise ValueError(f"coefficient vector has length {self.coeffs.shape}, expected ({n},)")

    def copy(self):
        return FeFunction(self.space, self.field, self.coeffs.copy())


def interpolate(space: TaylorHoodSpace, field: str, fn, snapshot: MeshSnapshot) -> FeFunction:
    """Lagrange interpolant: coefficients are nodal values of ``fn(x, t)``."""
    layout = space.layout(field)
    x = snapshot.node_coords(layout)
    vals = np.asarray(fn(x, snapshot.t), dtype=float)
    if field == "velocity":
        if vals.shape != (layout.n_nodes, 3):
            raise ValueError("velocity interpolation callback must return (n,3) values")
        return FeFunction(space, field, vals.reshape(-1))
    if vals.shape != (layout.n_nodes,):
        raise ValueError("scalar interpolation callback must return (n,) values")
    return FeFunction(space, field, vals.copy())


def _gather(f: FeFunction, layout: NodeLayout):
    if f.field == "velocity":
        return f.coeffs.reshape(-1, 3)[layout.elem_dofs]  # (F, nb, 3)
    return f.coeffs[layout.elem_dofs]  # (F, nb)


def eval_function(f: FeFunction, snapshot: MeshSnapshot):
    """Values and surface gradients of ``f`` at the snapshot quadrature points.

    Scalar fields: (val (F,Q), grad (F,Q,3)).
    Velocity: (val (F,Q,3), grad (F,Q,3,3), cov (F,Q,3,3), strain E_h (F,Q,3,3)).
    """
    layout = f.space.layout(f.field)
    val_tab, D = snapshot.fe_tables(layout.degree)
    coeffs = _gather(f, layout)
    if f.field == "velocity":
        val = np.einsum("fbi,qb->fqi", coeffs, val_tab)
        grad = np.einsum("fbi,fqbd->fqid", coeffs, D)
        cov = np.einsum("fqab,fqbd->fqad", snapshot.Ph, grad)
        E = 0.5 * (cov + cov.swapaxes(-1, -2))
        return val, grad, cov, E
    val = np.einsum("fb,qb->fq", coeffs, val_tab)
    grad = np.einsum("fb,fqbd->fqd", coeffs, D)
    return val, grad


def zero_mean_functional(space: TaylorHoodSpace, snapshot: MeshSnapshot, field: str = "pressure"):
    """Vector m with m . q = integral of q_h over the snapshot surface."""
    layout = space.layout(field)
    val_tab, _ = snapshot.fe_tables(layout.degree)
    local = np.einsum("fq,qb->fb", snapshot.w, val_tab)
    out = np.zeros(layout.n_nodes)
    np.add.at(out, layout.elem_dofs.reshape(-1), local.reshape(-1))
    return out


def scalar_gram_matrices(space: TaylorHoodSpace, snapshot: MeshSnapshot, field: str = "multiplier"):
    """L2 mass and H1 (mass + tangential stiffness) Gram matrices of a scalar field."""
    layout = space.layout(field)
    val_tab, D = snapshot.fe_tables(layout.degree)
    w = snapshot.w
    mloc = np.einsum("fq,qa,qb->fab", w, val_tab, val_tab)
    kloc = np.einsum("fq,fqad,fqbd->fab", w, D, D)
    n = layout.n_nodes
    rows = np.repeat(layout.elem_dofs, layout.elem_dofs.shape[1], axis=1).reshape(-1)
    cols = np.tile(layout.elem_dofs, (1, layout.elem_dofs.shape[1])).reshape(-1)
    M = sp.coo_matrix((mloc.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    K = sp.coo_matrix(((mloc + kloc).reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    return M, K


def h1_dual_norm(ell: FeFunction, snapshot: MeshSnapshot) -> float:
    """Discrete H^-1 norm of a multiplier-space function by Riesz representation.

    ||ell|| = sup (ell, xi)_L2 / ||xi||_H1 over the finite element space, which
    equals sqrt(b^T K^{-1} b) with b = M ell and K the H1 Gram matrix.
    """
    M, K = scalar_gram_matrices(ell.space, snapshot, ell.field)
    b = M @ ell.coeffs
    y = spla.spsolve(K.tocsc(), b)
    return float(np.sqrt(max(b @ y, 0.0)))
