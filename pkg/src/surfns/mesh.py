"""Evolving curved triangulations of the benchmark surfaces.

The initial mesh is an icosphere (icosahedron + edge bisection, new vertices
projected to the surface at t=0).  Geometric nodes are the equispaced Lagrange
nodes of degree ``k_g`` on each triangle, projected to Gamma(0); they ride the
exact benchmark node map (or an RK4 integration of the node ODE) afterwards,
so every node stays on Gamma(t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .geometry import AnalyticSurface
from .quadrature import QuadratureRule, triangle_rule
from .reference import LOCAL_EDGES, lagrange_basis

__all__ = [
    "EvolvingSurfaceMesh",
    "MeshSnapshot",
    "NodeLayout",
    "build_initial_mesh",
    "icosahedron",
]

SUPPORTED_KG = (1, 2, 3)


def icosahedron():
    """Unit icosahedron vertices and outward-oriented faces."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = []
    for s1 in (-1, 1):
        for s2 in (-1, 1):
            v.append([0, s1, s2 * phi])
            v.append([s1, s2 * phi, 0])
            v.append([s1 * phi, 0, s2])
    verts = np.array(v, dtype=float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    hull = ConvexHull(verts)
    faces = hull.simplices.copy()
    for f in faces:
        a, b, c = verts[f]
        if np.dot(np.cross(b - a, c - a), a + b + c) < 0.0:
            f[1], f[2] = f[2], f[1]
    return verts, np.asarray(sorted(map(tuple, faces)), dtype=int)


def _refine(verts, faces, project):
    """One round of edge bisection; new vertices projected onto the surface."""
    verts = list(verts)
    mid = {}

    def midpoint(a, b):
        key = (min(a, b), max(a, b))
        if key not in mid:
            p = project(0.5 * (np.asarray(verts[a]) + np.asarray(verts[b])))
            mid[key] = len(verts)
            verts.append(p)
        return mid[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(verts), np.array(new_faces, dtype=int)


def _build_edges(faces):
    edges = {}
    for f in faces:
        for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            key = (min(a, b), max(a, b))
            if key not in edges:
                edges[key] = len(edges)
    return edges


@dataclass(frozen=True)
class NodeLayout:
    """Global numbering for degree-k Lagrange nodes on a triangulation."""

    degree: int
    n_vertices: int
    n_edges: int
    n_faces: int
    elem_dofs: np.ndarray  # (F, nb) global node ids, in reference-node order

    @property
    def n_nodes(self) -> int:
        k = self.degree
        return self.n_vertices + self.n_edges * (k - 1) + self.n_faces * ((k - 1) * (k - 2) // 2)


def _make_layout(degree, n_vertices, faces, edges):
    k = degree
    nf = len(faces)
    per_edge = k - 1
    per_face = (k - 1) * (k - 2) // 2
    edge_base = n_vertices
    face_base = n_vertices + len(edges) * per_edge
    nb = 3 + 3 * per_edge + per_face
    elem = np.empty((nf, nb), dtype=int)
    for fi, f in enumerate(faces):
        dofs = [f[0], f[1], f[2]]
        for a_loc, b_loc in LOCAL_EDGES:
            ga, gb = f[a_loc], f[b_loc]
            eid = edges[(min(ga, gb), max(ga, gb))]
            ids = [edge_base + eid * per_edge + i for i in range(per_edge)]
            if ga > gb:
                ids = ids[::-1]
            dofs += ids
        dofs += [face_base + fi * per_face + i for i in range(per_face)]
        elem[fi] = dofs
    return NodeLayout(degree, n_vertices, len(edges), nf, elem)


@dataclass
class EvolvingSurfaceMesh:
    surface: AnalyticSurface
    level: int
    k_g: int
    vertices0: np.ndarray  # (V,3) on Gamma(0)
    faces: np.ndarray  # (F,3)
    edges: dict
    geom_layout: NodeLayout
    node_positions0: np.ndarray  # (Ng,3) geometric nodes on Gamma(0)
    _snapshots: dict = field(default_factory=dict, repr=False)

    @property
    def n_faces(self):
        return len(self.faces)

    def node_positions(self, t, mode="exact", dt_ode=1e-2):
        """Geometric node positions at time t (exact benchmark map or RK4)."""
        T = self.surface.T_final
        if t < -1e-12 or t > T + 1e-12:
            raise ValueError(f"time {t} outside [0, {T}]")
        if mode == "exact":
            return self.surface.mesh_map(self.node_positions0, t)
        if mode == "rk4":
            x = self.node_positions0.copy()
            nsteps = max(1, int(np.ceil(t / dt_ode)))
            dt = t / nsteps if nsteps else 0.0
            vel = self.surface.mesh_velocity
            s = 0.0
            for _ in range(nsteps):
                k1 = vel(x, s)
                k2 = vel(x + 0.5 * dt * k1, s + 0.5 * dt)
                k3 = vel(x + 0.5 * dt * k2, s + 0.5 * dt)
                k4 = vel(x + dt * k3, s + dt)
                x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                s += dt
            return x
        raise ValueError(f"unknown node evolution mode {mode!r}")

    def snapshot(self, t, quad_degree=6, mode="exact") -> "MeshSnapshot":
        key = (round(float(t), 14), quad_degree, mode)
        if key not in self._snapshots:
            if len(self._snapshots) > 4:
                self._snapshots.clear()
            self._snapshots[key] = MeshSnapshot(self, float(t), self.node_positions(t, mode), quad_degree)
        return self._snapshots[key]

    @property
    def h_max(self):
        v = self.vertices0[self.faces]
        d = [np.linalg.norm(v[:, i] - v[:, j], axis=1) for i, j in ((0, 1), (1, 2), (2, 0))]
        return float(np.max(d))


def build_initial_mesh(surface: AnalyticSurface, level: int, k_g: int) -> EvolvingSurfaceMesh:
    if k_g not in SUPPORTED_KG:
        raise ValueError(f"unsupported geometry order k_g={k_g}; supported: {SUPPORTED_KG}")
    if level < 0:
        raise ValueError("refinement level must be >= 0")

    def project(p):
        return surface.closest_point(p, 0.0)

    verts, faces = icosahedron()
    verts = project(verts)
    for _ in range(level):
        verts, faces = _refine(verts, faces, project)
    edges = _build_edges(faces)
    layout = _make_layout(k_g, len(verts), faces, edges)

    ref = lagrange_basis(k_g)
    bary = np.column_stack([1 - ref.nodes.sum(axis=1), ref.nodes[:, 0], ref.nodes[:, 1]])
    pos0 = np.zeros((layout.n_nodes, 3))
    corner = verts[faces]  # (F,3,3)
    affine = np.einsum("nb,fbd->fnd", bary, corner)  # (F, nb, 3)
    flat = project(affine.reshape(-1, 3)).reshape(affine.shape)
    for fi in range(len(faces)):
        pos0[layout.elem_dofs[fi]] = flat[fi]
    return EvolvingSurfaceMesh(surface, level, k_g, verts, faces, edges, layout, pos0)


class MeshSnapshot:
    """Fixed-time view of the evolving mesh with cached per-element geometry."""

    def __init__(self, mesh: EvolvingSurfaceMesh, t: float, positions: np.ndarray, quad_degree: int):
        self.mesh = mesh
        self.t = t
        self.positions = positions
        self.quad: QuadratureRule = triangle_rule(quad_degree)
        self._fe_cache = {}
        self._node_coord_cache = {}
        self._build_geometry()

    # -- geometry at quadrature points ---------------------------------------
    def _build_geometry(self):
        mesh = self.mesh
        ref = lagrange_basis(mesh.k_g)
        q = self.quad.points
        val = ref.eval(q)  # (Q, nb)
        grad = ref.grad(q)  # (Q, nb, 2)
        Pg = self.positions[mesh.geom_layout.elem_dofs]  # (F, nb, 3)

        self.x = np.einsum("fnd,qn->fqd", Pg, val)
        DF = np.einsum("fnd,qnk->fqdk", Pg, grad)
        metric = np.einsum("fqdk,fqdl->fqkl", DF, DF)
        det = metric[..., 0, 0] * metric[..., 1, 1] - metric[..., 0, 1] ** 2
        if np.any(det <= 1e-28):
            raise ValueError("degenerate element Jacobian (rank < 2)")
        self.measure = np.sqrt(det)
        self.w = self.quad.weights[None, :] * self.measure

        cr = np.cross(DF[..., 0], DF[..., 1])
        nh = cr / np.linalg.norm(cr, axis=-1, keepdims=True)
        n_exact = mesh.surface.normal(self.x.reshape(-1, 3), self.t).reshape(nh.shape)
        ori = np.einsum("fqd,fqd->fq", nh, n_exact)
        if np.any(ori <= 0.0):
            raise ValueError("inconsistent element orientation (n_h . n <= 0)")
        self.nh = nh
        self.Ph = np.eye(3)[None, None] - nh[..., :, None] * nh[..., None, :]

        inv = np.empty_like(metric)
        inv[..., 0, 0] = metric[..., 1, 1]
        inv[..., 1, 1] = metric[..., 0, 0]
        inv[..., 0, 1] = -metric[..., 0, 1]
        inv[..., 1, 0] = -metric[..., 1, 0]
        inv /= det[..., None, None]
        self.G = np.einsum("fqdk,fqkl->fqdl", DF, inv)  # maps ref grads to surface grads
        self.DF = DF

        if mesh.k_g >= 2:
            hess = ref.hess(q)  # (Q, nb, 2, 2)
            D2F = np.einsum("fnd,qnkl->fqdkl", Pg, hess)
            dt1 = D2F[..., 0, :]  # (F,Q,3,2): d(t1)/dxi_m
            dt2 = D2F[..., 1, :]
            dcr = np.cross(dt1, DF[..., 1][..., None], axisa=2, axisb=2, axisc=2) + np.cross(
                DF[..., 0][..., None], dt2, axisa=2, axisb=2, axisc=2
            )
            nrm = np.linalg.norm(cr, axis=-1)[..., None, None]
            dn = (dcr - nh[..., None] * np.einsum("fqd,fqdm->fqm", nh, dcr)[..., None, :]) / nrm
            grad_n = np.einsum("fqdm,fqjm->fqdj", dn, self.G)
            self.Hh = np.einsum("fqde,fqej->fqdj", self.Ph, grad_n)
        else:
            self.Hh = np.zeros_like(self.Ph)

    # -- finite element helpers ------------------------------------------------
    def fe_tables(self, degree):
        """(values (Q,nb), surface gradients (F,Q,nb,3)) of the degree-k basis."""
        if degree not in self._fe_cache:
            ref = lagrange_basis(degree)
            val = ref.eval(self.quad.points)
            g = ref.grad(self.quad.points)
            D = np.einsum("fqdl,qnl->fqnd", self.G, g)
            self._fe_cache[degree] = (val, D)
        return self._fe_cache[degree]

    def node_coords(self, layout: NodeLayout):
        """Physical positions of the degree-k Lagrange nodes (on Gamma_h)."""
        if layout.degree not in self._node_coord_cache:
            refk = lagrange_basis(layout.degree)
            refg = lagrange_basis(self.mesh.k_g)
            val = refg.eval(refk.nodes)  # (nbk, nbg)
            Pg = self.positions[self.mesh.geom_layout.elem_dofs]
            pos = np.einsum("fnd,bn->fbd", Pg, val)
            out = np.zeros((layout.n_nodes, 3))
            out[layout.elem_dofs.reshape(-1)] = pos.reshape(-1, 3)
            self._node_coord_cache[layout.degree] = out
        return self._node_coord_cache[layout.degree]

    def area(self):
        return float(self.w.sum())

    def quasi_uniformity(self):
        v = self.positions[: self.mesh.geom_layout.n_vertices][self.mesh.faces]
        a = np.linalg.norm(v[:, 1] - v[:, 0], axis=1)
        b = np.linalg.norm(v[:, 2] - v[:, 1], axis=1)
        c = np.linalg.norm(v[:, 0] - v[:, 2], axis=1)
        s = 0.5 * (a + b + c)
        area = np.sqrt(np.maximum(s * (s - a) * (s - b) * (s - c), 0.0))
        inradius = area / s
        h = np.max(np.stack([a, b, c]))
        return float(inradius.min() / h)

    def h_max(self):
        v = self.positions[: self.mesh.geom_layout.n_vertices][self.mesh.faces]
        d = [np.linalg.norm(v[:, i] - v[:, j], axis=1) for i, j in ((0, 1), (1, 2), (2, 0))]
        return float(np.max(d))


# -- pointwise element operations -----------------------------------------------
def element_geometry(snapshot: MeshSnapshot, elem: int, ref_pt):
    """Pointwise element geometry sample (position, measure, n_h, P_h, grad op)."""
    mesh = snapshot.mesh
    ref = lagrange_basis(mesh.k_g)
    pt = np.atleast_2d(ref_pt)
    Pg = snapshot.positions[mesh.geom_layout.elem_dofs[elem]]
    val = ref.eval(pt)
    grad = ref.grad(pt)
    x = val @ Pg
    DF = np.einsum("nd,qnk->qdk", Pg, grad)
    metric = np.einsum("qdk,qdl->qkl", DF, DF)
    det = metric[:, 0, 0] * metric[:, 1, 1] - metric[:, 0, 1] ** 2
    if np.any(det <= 1e-28):
        raise ValueError("degenerate element Jacobian (rank < 2)")
    cr = np.cross(DF[:, :, 0], DF[:, :, 1])
    nh = cr / np.linalg.norm(cr, axis=-1, keepdims=True)
    inv = np.linalg.inv(metric)
    G = np.einsum("qdk,qkl->qdl", DF, inv)
    Ph = np.eye(3)[None] - nh[:, :, None] * nh[:, None, :]
    return {
        "x": x[0] if np.ndim(ref_pt) == 1 else x,
        "measure": np.sqrt(det),
        "normal": nh[0] if np.ndim(ref_pt) == 1 else nh,
        "projector": Ph[0] if np.ndim(ref_pt) == 1 else Ph,
        "grad_op": G[0] if np.ndim(ref_pt) == 1 else G,
    }


def discrete_weingarten(snapshot: MeshSnapshot, elem: int, qpt: int):
    """H_h = P_h grad_{G_h} n_h at a cached quadrature point of an element."""
    return snapshot.Hh[elem, qpt]


def improved_normal(snapshot: MeshSnapshot, x):
    """Higher-order normal: the exact normal at the closest point on Gamma(t)."""
    return snapshot.mesh.surface.improved_normal(x, snapshot.t)
