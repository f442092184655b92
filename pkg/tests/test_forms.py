"""Assembly tests, including level-0 brute-force quadrature-loop equivalence.

The brute-force oracle rebuilds every block entry from the literal form
definition using the pointwise ``element_geometry`` path (independent of the
vectorized snapshot assembly) and plain Python loops over elements.
"""

import numpy as np
import pytest

from surfns.fespace import FeFunction, TaylorHoodSpace, eval_function, interpolate
from surfns.forms import (
    assemble_bL,
    assemble_convective_cov,
    assemble_convective_dir,
    assemble_g,
    assemble_mass,
    assemble_mass_projected,
    assemble_penalty_form,
    assemble_rhs,
    assemble_strain,
    make_context,
    pressure_mean_row,
)
from surfns.geometry import make_surface
from surfns.mesh import build_initial_mesh, element_geometry
from surfns.reference import lagrange_basis

RNG = np.random.default_rng(3)
MOVING = make_surface("moving_sphere")
OSC = make_surface("oscillating_sphere")
STATIC = make_surface("stationary_sphere")


def build(surface, level, kg, ku=2, kl=2, t=0.0, qd=None, data="manufactured", pm=False):
    mesh = build_initial_mesh(surface, level, kg)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        space = TaylorHoodSpace.create(mesh, ku, k_lambda=kl)
    snap = mesh.snapshot(t, quad_degree=qd or (2 * ku + kg))
    ctx = make_context(space, snap, mu=surface.mu_default, data=data, pm=pm)
    return mesh, space, snap, ctx


# ------------------------------------------------------------------ brute force
def brute_force_blocks(ctx, z=None, tau=None):
    """Literal per-element quadrature loops for every assembled block."""
    space, snap = ctx.space, ctx.snapshot
    sf = space.mesh.surface
    qpts, qw = snap.quad.points, snap.quad.weights
    bu = lagrange_basis(space.k_u)
    bp = lagrange_basis(space.k_pr)
    bl = lagrange_basis(space.k_lambda)
    nu, npb, nl = bu.n_basis, bp.n_basis, bl.n_basis
    Nu, Np, Nl = space.n_u, space.n_p, space.n_l
    M = np.zeros((Nu, Nu))
    G = np.zeros((Nu, Nu))
    A = np.zeros((Nu, Nu))
    Bp = np.zeros((Np, Nu))
    Bl = np.zeros((Nl, Nu))
    C = np.zeros((Nu, Nu))
    Ccov = np.zeros((Nu, Nu))
    Apen = np.zeros((Nu, Nu)) if tau is not None else None

    du = space.layout_u.elem_dofs
    dp = space.layout_p.elem_dofs
    dl = space.layout_l.elem_dofs
    zc = None if z is None else z.coeffs.reshape(-1, 3)
    Vmc = ctx.mesh_velocity.coeffs.reshape(-1, 3)
    eta_c = ctx.eta_conv.coeffs

    for f in range(space.mesh.n_faces):
        geo = element_geometry(snap, f, qpts)
        for q in range(len(qw)):
            x, P, n = geo["x"][q], geo["projector"][q], geo["normal"][q]
            Gop = geo["grad_op"][q]
            w = qw[q] * geo["measure"][q]
            H = snap.Hh[f, q]
            vu = bu.eval(qpts[q : q + 1])[0]
            gu = bu.grad(qpts[q : q + 1])[0] @ Gop.T  # (nu, 3) surface grads
            vp = bp.eval(qpts[q : q + 1])[0]
            gp = bp.grad(qpts[q : q + 1])[0] @ Gop.T
            vl = bl.eval(qpts[q : q + 1])[0]
            zv = None if zc is None else vu @ zc[du[f]]
            # div_Gh Vm: tr(J P) with J = sum_b Vm_b outer grad(phi_b)
            J_Vm = Vmc[du[f]].T @ gu  # (3,3): rows comp, cols deriv
            divVm = np.trace(J_Vm @ P)
            etav = vl @ eta_c[dl[f]]
            ntilde = sf.improved_normal(x, snap.t)

            basis = []
            for b in range(nu):
                for j in range(3):
                    val = np.zeros(3)
                    val[j] = vu[b]
                    Jg = np.zeros((3, 3))
                    Jg[j, :] = gu[b]
                    basis.append((val, Jg))
            for ai, (va, Ja) in enumerate(basis):
                ga = 3 * du[f][ai // 3] + ai % 3
                Ea = P @ Ja @ P
                Ea = 0.5 * (Ea + Ea.T)
                for bi, (vb, Jb) in enumerate(basis):
                    gb = 3 * du[f][bi // 3] + bi % 3
                    M[ga, gb] += w * (vb @ va)
                    G[ga, gb] += w * divVm * (vb @ va)
                    Eb = P @ Jb @ P
                    Eb = 0.5 * (Eb + Eb.T)
                    A[ga, gb] += w * np.tensordot(Eb, Ea)
                    if zc is not None:
                        C[ga, gb] += w * (
                            0.5 * ((Jb @ P @ zv) @ va - (Ja @ P @ zv) @ vb) - 0.5 * etav * (vb @ va)
                        )
                        Ccov[ga, gb] += w * (
                            0.5 * ((P @ Jb @ P @ zv) @ va - (P @ Ja @ P @ zv) @ vb)
                            + 0.5 * ((vb @ n) * (zv @ H @ va) + (va @ n) * (zv @ H @ vb))
                            - 0.5 * etav * ((P @ vb) @ (P @ va))
                        )
                    if tau is not None:
                        Hs = 0.5 * (H + H.T)
                        EPa = Ea - (va @ n) * Hs
                        EPb = Eb - (vb @ n) * Hs
                        Apen[ga, gb] += w * (np.tensordot(EPb, EPa) + tau * (vb @ ntilde) * (va @ ntilde))
                for p in range(npb):
                    Bp[dp[f][p], ga] += w * (va @ (P @ gp[p]))
                for l in range(nl):
                    Bl[dl[f][l], ga] += w * (vl[l] * (va @ n))
    return M, G, A, Bp, Bl, C, Ccov, Apen


@pytest.mark.slow
def test_brute_force_equivalence_level0():
    mesh, space, snap, ctx = build(MOVING, 0, 2, t=0.6, qd=4)
    z = FeFunction(space, "velocity", RNG.normal(size=space.n_u))
    tau = 2.0
    Mo, Go, Ao, Bpo, Blo, Co, Ccovo, Apo = brute_force_blocks(ctx, z=z, tau=tau)

    scale = lambda A: max(1.0, abs(A).max())
    M = assemble_mass(ctx).toarray()
    assert np.abs(M - Mo).max() / scale(Mo) < 1e-12
    G = assemble_g(ctx).toarray()
    assert np.abs(G - Go).max() / scale(Go) < 1e-12
    A = assemble_strain(ctx).toarray()
    assert np.abs(A - Ao).max() / scale(Ao) < 1e-12
    Bp, Bl = assemble_bL(ctx)
    assert np.abs(Bp.toarray() - Bpo).max() / scale(Bpo) < 1e-12
    assert np.abs(Bl.toarray() - Blo).max() / scale(Blo) < 1e-12
    C = assemble_convective_dir(ctx, z).toarray()
    assert np.abs(C - Co).max() / scale(Co) < 1e-12
    Ccov = assemble_convective_cov(ctx, z).toarray()
    assert np.abs(Ccov - Ccovo).max() / scale(Ccovo) < 1e-12
    Ap = assemble_penalty_form(ctx, tau).toarray()
    assert np.abs(Ap - Apo).max() / scale(Apo) < 1e-12


# ------------------------------------------------------------------ mass
def test_mass_area_and_spd():
    mesh, space, snap, ctx = build(MOVING, 2, 2)
    M = assemble_mass(ctx)
    e1 = np.zeros(space.n_u)
    e1[0::3] = 1.0
    area = e1 @ (M @ e1)
    assert abs(area - 4 * np.pi) / (4 * np.pi) < 1e-4
    for _ in range(50):
        x = RNG.normal(size=space.n_u)
        assert x @ (M @ x) > 0
    assert abs(M - M.T).max() < 1e-14


# ------------------------------------------------------------------ g form
def test_g_zero_on_stationary_surface():
    mesh, space, snap, ctx = build(STATIC, 1, 2)
    G = assemble_g(ctx)
    assert abs(G).max() < 1e-13


def test_g_zero_for_rigid_translation():
    # ALE mesh velocity of the moving sphere is constant: div vanishes
    mesh, space, snap, ctx = build(MOVING, 1, 2, t=0.9)
    G = assemble_g(ctx)
    assert abs(G).max() < 1e-11


def test_g_matches_analytic_divergence_oracle():
    # feed the normal-speed interpolant V_Gh^N: 1^T G 1 -> int div_G(V n) dA
    for sf, t, lvl in ((MOVING, 0.0, 2), (OSC, 0.0, 2)):
        mesh, space, snap, ctx = build(sf, lvl, 2, t=t)
        Vn = interpolate(
            space, "velocity", lambda x, tt: sf.normal_speed(x, tt)[:, None] * sf.normal(x, tt), snap
        )
        G = assemble_g(ctx, velocity=Vn)
        ones = np.zeros(space.n_u)
        ones[0::3] = ones[1::3] = ones[2::3] = 1.0
        got = ones @ (G @ ones)
        # analytic: int 3 * div_G(V n) = 3 * int kappa V  (grad V tangential)
        x, wq = snap.x.reshape(-1, 3), snap.w.reshape(-1)
        _, kappa = sf.weingarten(x, t)
        want = 3 * np.sum(wq * kappa * sf.normal_speed(x, t))
        assert abs(got - want) < 5e-3 * max(1.0, abs(want))


def test_g_oscillating_uniform_expansion_value():
    # at t=0: div_G(V n) = kappa V = 2 * (pi/2); 1^T G 1 = 3 * area * pi
    mesh, space, snap, ctx = build(OSC, 2, 2, t=0.0)
    Vn = interpolate(
        space, "velocity", lambda x, tt: OSC.normal_speed(x, tt)[:, None] * OSC.normal(x, tt), snap
    )
    G = assemble_g(ctx, velocity=Vn)
    ones = np.ones(space.n_u)
    got = ones @ (G @ ones)
    want = 3 * snap.area() * np.pi
    assert abs(got - want) / abs(want) < 2e-3


# ------------------------------------------------------------------ strain
def test_strain_kernel_and_symmetry():
    mesh, space, snap, ctx = build(OSC, 1, 2, t=0.3)
    A = assemble_strain(ctx)
    c = np.tile([0.4, -0.2, 0.9], space.layout_u.n_nodes)
    assert np.abs(A @ c).max() < 1e-12
    assert abs(A - A.T).max() < 1e-13
    for _ in range(50):
        x = RNG.normal(size=space.n_u)
        assert x @ (A @ x) >= -1e-12


# ------------------------------------------------------------------ b^L
def test_bL_constant_pressure_row_zero():
    mesh, space, snap, ctx = build(MOVING, 1, 2)
    Bp, Bl = assemble_bL(ctx)
    ones_p = np.ones(space.n_p)
    assert np.abs(Bp.T @ ones_p).max() < 1e-14


def test_bL_tangential_field_no_multiplier_coupling():
    mesh, space, snap, ctx = build(MOVING, 1, 2)
    _, Bl = assemble_bL(ctx)
    # build a discretely tangential field at quadrature level: project a field
    # pointwise is impossible in the FE space, so use the weaker statement:
    # fields along n_h columns of Bl pair as int xi (w . n_h)
    w = FeFunction(space, "velocity", RNG.normal(size=space.n_u))
    val, _, _, _ = eval_function(w, snap)
    lhs = np.ones(space.n_l) @ (Bl @ w.coeffs)
    rhs = np.sum(snap.w * np.einsum("fqd,fqd->fq", val, snap.nh))
    assert abs(lhs - rhs) < 1e-11


# ------------------------------------------------------------------ convective forms
def test_convective_skew_parts():
    mesh, space, snap, ctx = build(MOVING, 1, 2, t=0.5)
    z = FeFunction(space, "velocity", RNG.normal(size=space.n_u))
    _, skew_d, _ = assemble_convective_dir(ctx, z, return_parts=True)
    _, skew_c, _ = assemble_convective_cov(ctx, z, return_parts=True)
    for _ in range(100):
        u = RNG.normal(size=space.n_u)
        nrm = u @ u
        assert abs(u @ (skew_d @ u)) < 1e-12 * nrm
        assert abs(u @ (skew_c @ u)) < 1e-12 * nrm


def test_convective_zero_cases():
    mesh, space, snap, ctx = build(STATIC, 1, 2, data="zero")
    z = FeFunction(space, "velocity", np.zeros(space.n_u))
    C = assemble_convective_dir(ctx, z)
    assert abs(C).max() < 1e-14
    Ccov = assemble_convective_cov(ctx, z)
    assert abs(Ccov).max() < 1e-14
    # stationary surface: eta term vanishes, pure skew
    ctx2 = make_context(space, snap, mu=0.5, data="manufactured")
    z2 = FeFunction(space, "velocity", RNG.normal(size=space.n_u))
    C2 = assemble_convective_dir(ctx2, z2)
    u = RNG.normal(size=space.n_u)
    assert abs(u @ (C2 @ u)) < 1e-11 * (u @ u)


def test_convective_cov_against_analytic_geometry_oracle():
    # stationary unit sphere: compare against a quadrature loop with exact P, H
    diffs, hs = [], []
    z_fn = lambda x, t: STATIC.exact.tangential_velocity(x, t)
    for lvl in (1, 2):
        mesh, space, snap, ctx = build(STATIC, lvl, 2, t=0.2)
        z = interpolate(space, "velocity", z_fn, snap)
        Ccov = assemble_convective_cov(ctx, z)
        # oracle: same integrals with analytic projector and Weingarten map
        x = snap.x.reshape(-1, 3)
        P = STATIC.projector(x, snap.t).reshape(snap.Ph.shape)
        H, _ = STATIC.weingarten(STATIC.closest_point(x, snap.t), snap.t)
        H = H.reshape(snap.Hh.shape)
        valu, D = snap.fe_tables(space.k_u)
        C = np.einsum("fqab,fqnb->fqna", P, D)
        zval, _, _, _ = eval_function(z, snap)
        Cz = np.einsum("fqbd,fqd->fqb", C, zval)
        X = np.einsum("fq,qa,fqij,fqb->faibj", snap.w, valu, P, Cz)
        skew = 0.5 * (X - X.transpose(0, 3, 4, 1, 2))
        Hz = np.einsum("fqd,fqdi->fqi", zval, H)
        Y = np.einsum("fq,qa,qb,fqj,fqi->faibj", snap.w, valu, valu, snap.nh, Hz)
        symY = 0.5 * (Y + Y.transpose(0, 3, 4, 1, 2))
        from surfns.forms import _vel_csr

        oracle = _vel_csr(skew + symY, space.layout_u)
        diffs.append(abs(Ccov - oracle).max())
        hs.append(snap.h_max())
    assert diffs[1] < diffs[0]  # consistency error decreases under refinement


# ------------------------------------------------------------------ penalty form
def test_penalty_form_properties():
    mesh, space, snap, ctx = build(OSC, 1, 2, t=0.1)
    h = snap.h_max()
    tau = 0.5 / h**2
    assert abs(0.5 / 0.5**2 - 2.0) < 1e-14  # tau(h=0.5) = 2 per the tau-law
    Ap = assemble_penalty_form(ctx, tau)
    assert abs(Ap - Ap.T).max() < 1e-11
    for _ in range(30):
        x = RNG.normal(size=space.n_u)
        assert x @ (Ap @ x) >= -1e-10

    # normal-aligned nodal field: penalty energy ~ tau * ||u||_L2^2
    coords = snap.node_coords(space.layout_u)
    ntilde = OSC.improved_normal(coords, snap.t)
    u = FeFunction(space, "velocity", ntilde.reshape(-1))
    A0 = assemble_penalty_form(ctx, 0.0)
    energy = u.coeffs @ (Ap @ u.coeffs) - u.coeffs @ (A0 @ u.coeffs)
    val, _, _, _ = eval_function(u, snap)
    l2 = np.sum(snap.w * np.einsum("fqd,fqd->fq", val, val))
    assert abs(energy - tau * l2) / (tau * l2) < 1e-2

    # tau = 0 with tangential nodal field reduces to tangential strain energy
    uT = interpolate(space, "velocity", OSC.exact.tangential_velocity, snap)
    e_pen = uT.coeffs @ (A0 @ uT.coeffs)
    A = assemble_strain(ctx)
    e_str = uT.coeffs @ (A @ uT.coeffs)
    assert abs(e_pen - e_str) / e_str < 0.05  # differ by O(h^{k_g-1}) H-terms


# ------------------------------------------------------------------ rhs
def test_rhs_zero_data():
    mesh, space, snap, ctx = build(MOVING, 1, 2, data="zero")
    rhs_u, rhs_p, rhs_l = assemble_rhs(ctx, None, None, 0.1)
    assert np.abs(rhs_u).max() == 0.0
    assert np.abs(rhs_p).max() == 0.0
    assert np.abs(rhs_l).max() == 0.0


def test_rhs_cross_step_and_symmetry():
    mesh, space, snap, ctx = build(MOVING, 1, 2, t=0.0)
    M = assemble_mass(ctx)
    u_prev = FeFunction(space, "velocity", RNG.normal(size=space.n_u))
    dt = 0.25
    rhs_u, rhs_p, rhs_l = assemble_rhs(ctx, M, u_prev, dt)
    want = M @ ctx.forcing.coeffs + (1 / dt) * (M @ u_prev.coeffs)
    assert np.abs(rhs_u - want).max() < 1e-12
    # moving sphere at t=0: int V_G over the sphere vanishes by symmetry
    # (up to curved-element quadrature error)
    assert abs(rhs_l @ np.ones(space.n_l)) < 1e-8
    # manufactured pressure-row data is zero
    assert np.abs(rhs_p).max() < 1e-10


def test_mean_row():
    mesh, space, snap, ctx = build(MOVING, 1, 2)
    m = pressure_mean_row(ctx)
    assert m @ np.ones(space.n_p) == pytest.approx(snap.area(), rel=1e-12)


def test_projected_mass():
    mesh, space, snap, ctx = build(OSC, 1, 2, t=0.6)
    Mp = assemble_mass_projected(ctx)
    assert abs(Mp - Mp.T).max() < 1e-12
    # projected mass of a normal-aligned field is ~0
    coords = snap.node_coords(space.layout_u)
    n = OSC.normal(coords, snap.t)
    u = n.reshape(-1)
    # u . P u integrates |P n_h-aligned|^2 which is O(h^{2 k_g}) small
    assert u @ (Mp @ u) < 1e-3 * (u @ assemble_mass(ctx) @ u)
