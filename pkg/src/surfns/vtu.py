"""VTU (XML unstructured grid) and legacy VTK export of mesh snapshots.

Curved elements are flattened into the linear sub-triangulation of the
degree-k_g node lattice; fields are sampled at the geometric nodes.
"""

from __future__ import annotations

import numpy as np

from .reference import lagrange_basis

__all__ = ["write_vtu", "write_legacy_vtk"]


def _sub_triangulation(k):
    ref = lagrange_basis(k)
    idx = {}
    for loc, (x, y) in enumerate(ref.nodes):
        idx[(round(x * k), round(y * k))] = loc
    tris = []
    for i in range(k):
        for j in range(k - i):
            tris.append((idx[(i, j)], idx[(i + 1, j)], idx[(i, j + 1)]))
            if i + j < k - 1:
                tris.append((idx[(i + 1, j)], idx[(i + 1, j + 1)], idx[(i, j + 1)]))
    return np.array(tris, dtype=int)


def _point_fields(snapshot, space, state):
    fields = {}
    if state is None:
        return fields
    geom = snapshot.mesh.geom_layout
    coords = snapshot.node_coords(geom)

    def sample(fe):
        lay = space.layout(fe.field)
        ref_from = lagrange_basis(lay.degree)
        refg = lagrange_basis(geom.degree)
        vals_tab = ref_from.eval(refg.nodes)  # (n_geom_nodes_per_el, n_from)
        out_dim = 3 if fe.field == "velocity" else 1
        out = np.zeros((geom.n_nodes, out_dim))
        coeffs = fe.coeffs.reshape(-1, 3) if fe.field == "velocity" else fe.coeffs[:, None]
        gathered = coeffs[lay.elem_dofs]  # (F, n_from, dim)
        per_el = np.einsum("gn,fnd->fgd", vals_tab, gathered)
        out[geom.elem_dofs.reshape(-1)] = per_el.reshape(-1, out_dim)
        return out

    fields["velocity"] = sample(state.u)
    fields["pressure"] = sample(state.p)
    if state.lam is not None:
        fields["multiplier"] = sample(state.lam)
    return fields, coords


def write_vtu(path, snapshot, space=None, state=None):
    mesh = snapshot.mesh
    geom = mesh.geom_layout
    coords = snapshot.node_coords(geom)
    sub = _sub_triangulation(mesh.k_g)
    cells = geom.elem_dofs[:, sub.reshape(-1)].reshape(-1, 3)
    fields = {}
    if state is not None and space is not None:
        fields, coords = _point_fields(snapshot, space, state)

    lines = [
        '<?xml version="1.0"?>',
        '<VTKFile type="UnstructuredGrid" version="0.1" byte_order="LittleEndian">',
        "<UnstructuredGrid>",
        f'<Piece NumberOfPoints="{len(coords)}" NumberOfCells="{len(cells)}">',
        "<Points>",
        '<DataArray type="Float64" NumberOfComponents="3" format="ascii">',
        "\n".join(" ".join(f"{v:.16g}" for v in p) for p in coords),
        "</DataArray>",
        "</Points>",
        "<Cells>",
        '<DataArray type="Int64" Name="connectivity" format="ascii">',
        "\n".join(" ".join(map(str, c)) for c in cells),
        "</DataArray>",
        '<DataArray type="Int64" Name="offsets" format="ascii">',
        " ".join(str(3 * (i + 1)) for i in range(len(cells))),
        "</DataArray>",
        '<DataArray type="UInt8" Name="types" format="ascii">',
        " ".join("5" for _ in range(len(cells))),
        "</DataArray>",
        "</Cells>",
        "<PointData>",
    ]
    for name, vals in fields.items():
        ncomp = vals.shape[1]
        lines.append(f'<DataArray type="Float64" Name="{name}" NumberOfComponents="{ncomp}" format="ascii">')
        lines.append("\n".join(" ".join(f"{v:.16g}" for v in row) for row in vals))
        lines.append("</DataArray>")
    lines += ["</PointData>", "</Piece>", "</UnstructuredGrid>", "</VTKFile>"]
    with open(path, "w") as f:
        f.write("\n".join(lines))
    return path


def write_legacy_vtk(path, snapshot):
    mesh = snapshot.mesh
    geom = mesh.geom_layout
    coords = snapshot.node_coords(geom)
    sub = _sub_triangulation(mesh.k_g)
    cells = geom.elem_dofs[:, sub.reshape(-1)].reshape(-1, 3)
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\nsurfns surface mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {len(coords)} double\n")
        for p in coords:
            f.write(" ".join(f"{v:.16g}" for v in p) + "\n")
        f.write(f"CELLS {len(cells)} {4 * len(cells)}\n")
        for c in cells:
            f.write("3 " + " ".join(map(str, c)) + "\n")
        f.write(f"CELL_TYPES {len(cells)}\n")
        f.write("\n".join("5" for _ in cells) + "\n")
    return path
