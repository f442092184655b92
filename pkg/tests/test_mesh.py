import numpy as np
import pytest

from surfns.geometry import make_surface
from surfns.mesh import (
    build_initial_mesh,
    discrete_weingarten,
    element_geometry,
    icosahedron,
    improved_normal,
)

MOVING = make_surface("moving_sphere")
OSC = make_surface("oscillating_sphere")


def test_icosahedron_counts_and_orientation():
    v, f = icosahedron()
    assert v.shape == (12, 3)
    assert f.shape == (20, 3)
    tri = v[f]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    cent = tri.mean(axis=1)
    assert np.all(np.einsum("fd,fd->f", n, cent) > 0)


def test_build_counts():
    m0 = build_initial_mesh(MOVING, 0, 1)
    assert m0.n_faces == 20 and len(m0.vertices0) == 12
    m2 = build_initial_mesh(MOVING, 2, 2)
    assert m2.n_faces == 320
    assert len(m2.vertices0) == 162 and len(m2.edges) == 480
    assert m2.geom_layout.n_nodes == 162 + 480  # V + E for quadratic geometry
    with pytest.raises(ValueError):
        build_initial_mesh(MOVING, 0, 4)


def test_area_convergence_to_sphere():
    # computed flat-mesh errors: 7.2% at level 1, 1.9% at level 2 (O(h^2))
    e1 = abs(build_initial_mesh(MOVING, 1, 1).snapshot(0.0, quad_degree=4).area() - 4 * np.pi) / (4 * np.pi)
    e2 = abs(build_initial_mesh(MOVING, 2, 1).snapshot(0.0, quad_degree=4).area() - 4 * np.pi) / (4 * np.pi)
    assert e1 < 0.08 and e2 < 0.03
    assert e1 / e2 > 3.0
    m3 = build_initial_mesh(MOVING, 3, 2)
    area3 = m3.snapshot(0.0, quad_degree=6).area()
    assert abs(area3 - 4 * np.pi) / (4 * np.pi) < 1e-4


def test_nodes_on_surface_all_times():
    for sf, ts in ((MOVING, (0.0, 0.7, 2.0)), (OSC, (0.0, 0.25, 1.0))):
        m = build_initial_mesh(sf, 1, 3)
        for t in ts:
            pos = m.node_positions(t)
            assert np.abs(sf.level_set(pos, t)).max() < 1e-10


def test_evolution_examples():
    m = build_initial_mesh(MOVING, 0, 1)
    i = int(np.argmin(np.linalg.norm(m.node_positions0 - [1, 0, 0], axis=1)))
    # move the nearest vertex onto (1,0,0) exactly for the check
    m.node_positions0[i] = [1.0, 0, 0]
    assert np.allclose(m.node_positions(2.0)[i], [1.4, 0, 0], atol=1e-14)

    mo = build_initial_mesh(OSC, 0, 1)
    j = int(np.argmin(np.linalg.norm(mo.node_positions0 - [0, 1, 0], axis=1)))
    mo.node_positions0[j] = [0, 1.0, 0]
    assert np.allclose(mo.node_positions(0.25)[j], [0, 1.25, 0], atol=1e-14)

    with pytest.raises(ValueError):
        m.node_positions(3.0)


def test_rk4_matches_exact_map():
    m = build_initial_mesh(MOVING, 1, 2)
    exact = m.node_positions(1.5, mode="exact")
    rk4 = m.node_positions(1.5, mode="rk4", dt_ode=1e-2)
    assert np.abs(exact - rk4).max() < 1e-10  # constant velocity: RK4 exact

    mo = build_initial_mesh(OSC, 0, 2)
    e1 = np.abs(mo.node_positions(0.8, mode="rk4", dt_ode=2e-2) - mo.node_positions(0.8)).max()
    e2 = np.abs(mo.node_positions(0.8, mode="rk4", dt_ode=1e-2) - mo.node_positions(0.8)).max()
    assert e1 < 1e-6
    assert e1 / e2 > 8.0  # fourth-order in the ODE step


def test_element_geometry_sample():
    m = build_initial_mesh(MOVING, 1, 2)
    snap = m.snapshot(0.3)
    s = element_geometry(snap, 0, np.array([0.25, 0.25]))
    n, P = s["normal"], s["projector"]
    assert np.abs(P @ P - P).max() < 1e-12
    assert np.abs(P @ n).max() < 1e-12
    # n_h orthogonal to the Jacobian columns == to any tangential gradient
    assert np.abs(s["grad_op"].T @ n).max() < 1e-12


def test_normal_consistency_quadrature():
    # computed minima: 0.954 (k_g=1, level 1), 0.988 (k_g=1, level 2), >0.999 (k_g=2)
    for kg, lvl, bound in ((1, 1, 0.95), (1, 2, 0.98), (2, 1, 0.99), (2, 2, 0.999)):
        m = build_initial_mesh(MOVING, lvl, kg)
        snap = m.snapshot(0.0)
        n_exact = MOVING.normal(snap.x.reshape(-1, 3), 0.0).reshape(snap.nh.shape)
        dots = np.einsum("fqd,fqd->fq", snap.nh, n_exact)
        assert dots.min() > bound


def test_projector_identities_at_quadrature():
    m = build_initial_mesh(OSC, 1, 2)
    snap = m.snapshot(0.4)
    P, n = snap.Ph, snap.nh
    assert np.abs(np.einsum("fqab,fqbc->fqac", P, P) - P).max() < 1e-12
    assert np.abs(np.einsum("fqab,fqb->fqa", P, n)).max() < 1e-12


def test_discrete_weingarten():
    m1 = build_initial_mesh(MOVING, 1, 1)
    assert np.abs(m1.snapshot(0.0).Hh).max() == 0.0

    errs = []
    for lvl in (1, 2, 3):
        m = build_initial_mesh(MOVING, lvl, 2)
        snap = m.snapshot(0.0)
        P_exact = MOVING.projector(snap.x.reshape(-1, 3), 0.0).reshape(snap.Ph.shape)
        errs.append(np.abs(snap.Hh - P_exact).max())  # H = P/r with r=1
        assert np.abs(np.einsum("fqab,fqb->fqa", snap.Hh, snap.nh)).max() < 1e-12
    assert errs[0] / errs[1] > 1.6 and errs[1] / errs[2] > 1.6
    H = discrete_weingarten(m.snapshot(0.0), 3, 0)
    assert H.shape == (3, 3)


def test_improved_normal():
    errs = []
    for lvl in (1, 2):
        mm = build_initial_mesh(OSC, lvl, 2)
        snap = mm.snapshot(0.2)
        tilde = improved_normal(snap, snap.x.reshape(-1, 3)).reshape(snap.nh.shape)
        assert np.abs(np.linalg.norm(tilde, axis=-1) - 1.0).max() < 1e-14
        errs.append(np.abs(tilde - snap.nh).max())
    assert errs[0] / errs[1] > 2.5  # O(h^2) for quadratic geometry


def test_conformity_of_node_coordinates():
    m = build_initial_mesh(MOVING, 1, 3)
    snap = m.snapshot(1.1)
    coords = snap.node_coords(m.geom_layout)
    from surfns.reference import lagrange_basis

    ref = lagrange_basis(3)
    refg = lagrange_basis(m.k_g)
    val = refg.eval(ref.nodes)
    Pg = snap.positions[m.geom_layout.elem_dofs]
    per_elem = np.einsum("fnd,bn->fbd", Pg, val)
    gathered = coords[m.geom_layout.elem_dofs]
    assert np.abs(per_elem - gathered).max() < 1e-14


def test_quasi_uniformity_bound():
    for lvl in (0, 1, 2):
        m = build_initial_mesh(MOVING, lvl, 1)
        for t in (0.0, 2.0):
            assert m.snapshot(t).quasi_uniformity() > 0.1


def test_geometric_convergence_orders():
    # max |n - n_h| decays at order >= k_g - 0.3; area error at order >= k_g + 0.7
    for kg in (1, 2):
        nerr, aerr, hs = [], [], []
        for lvl in (1, 2, 3):
            m = build_initial_mesh(MOVING, lvl, kg)
            snap = m.snapshot(0.0, quad_degree=2 * kg + 2)
            n_exact = MOVING.normal(snap.x.reshape(-1, 3), 0.0).reshape(snap.nh.shape)
            nerr.append(np.linalg.norm(snap.nh - n_exact, axis=-1).max())
            aerr.append(abs(snap.area() - 4 * np.pi))
            hs.append(snap.h_max())
        for e, low in ((nerr, kg - 0.3), (aerr, kg + 0.7)):
            rates = [np.log(e[i] / e[i + 1]) / np.log(hs[i] / hs[i + 1]) for i in range(2)]
            assert min(rates) >= low
