"""Assembly of the discrete bilinear forms into sparse blocks.

Velocity dofs are node-major (3*node+component).  All assemblies are
vectorized over elements and quadrature points; the level-0 brute-force
equivalence tests re-derive every block entry with an independent per-entry
quadrature loop.

Convective forms.  Both variants are assembled as an exactly skew-symmetric
pair plus symmetric data terms whose weight ``eta_conv`` is the consistent
skew-symmetrization correction div_G(u_T) - div_G(P V_mesh) of the benchmark
data (zero for the oscillating sphere, kappa*V for the ALE moving sphere).
The covariant variant additionally carries the symmetric Weingarten pair
0.5*[ (w.n_h) z.H_h v + (v.n_h) z.H_h w ].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fespace import FeFunction, TaylorHoodSpace, eval_function, interpolate, zero_mean_functional
from .mesh import MeshSnapshot

__all__ = [
    "FormContext",
    "make_context",
    "assemble_mass",
    "assemble_g",
    "assemble_strain",
    "assemble_bL",
    "assemble_convective_dir",
    "assemble_convective_cov",
    "assemble_penalty_form",
    "assemble_rhs",
]


# -- scatter helpers -----------------------------------------------------------
def _scalar_csr(local, rows_layout, cols_layout):
    er, ec = rows_layout.elem_dofs, cols_layout.elem_dofs
    nb_r, nb_c = er.shape[1], ec.shape[1]
    rows = np.repeat(er, nb_c, axis=1).reshape(-1)
    cols = np.tile(ec, (1, nb_r)).reshape(-1)
    A = sp.coo_matrix(
        (local.reshape(-1), (rows, cols)), shape=(rows_layout.n_nodes, cols_layout.n_nodes)
    )
    return A.tocsr()


def _vel_csr(local, layout):
    """local (F, nb, 3, nb, 3) -> csr over node-major velocity dofs."""
    F, nb = local.shape[0], local.shape[1]
    gd = layout.elem_dofs
    r = (3 * gd[:, :, None] + np.arange(3)[None, None, :]).reshape(F, 3 * nb)
    rows = np.repeat(r, 3 * nb, axis=1).reshape(-1)
    cols = np.tile(r, (1, 3 * nb)).reshape(-1)
    A = sp.coo_matrix(
        (local.reshape(F, 3 * nb, 3 * nb).reshape(-1), (rows, cols)),
        shape=(3 * layout.n_nodes, 3 * layout.n_nodes),
    )
    return A.tocsr()


def _mixed_csr(local, scalar_layout, vel_layout):
    """local (F, ns, nb, 3) -> csr (n_scalar x 3*n_vel)."""
    F, ns, nb, _ = local.shape
    gd = vel_layout.elem_dofs
    c = (3 * gd[:, :, None] + np.arange(3)[None, None, :]).reshape(F, 3 * nb)
    rows = np.repeat(scalar_layout.elem_dofs, 3 * nb, axis=1).reshape(-1)
    cols = np.tile(c, (1, ns)).reshape(-1)
    A = sp.coo_matrix(
        (local.reshape(F, ns, 3 * nb).reshape(-1), (rows, cols)),
        shape=(scalar_layout.n_nodes, 3 * vel_layout.n_nodes),
    )
    return A.tocsr()


@dataclass
class FormContext:
    """Everything needed to assemble one time level."""

    snapshot: MeshSnapshot
    space: TaylorHoodSpace
    mu: float
    mesh_velocity: FeFunction
    forcing: FeFunction | None = None
    eta_conv: FeFunction | None = None  # velocity-layout scalar data
    eta_p: FeFunction | None = None  # pressure-layout data (constraint rhs)
    eta_l: FeFunction | None = None  # multiplier-layout data (normal speed)
    constraint_form: str = "strong"
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def w(self):
        return self.snapshot.w

    def tables(self, degree):
        return self.snapshot.fe_tables(degree)

    def tangential_grads(self, degree):
        """C = P_h D, the projected basis gradients."""
        key = ("C", degree)
        if key not in self._cache:
            _, D = self.tables(degree)
            self._cache[key] = np.einsum("fqab,fqnb->fqna", self.snapshot.Ph, D)
        return self._cache[key]


def make_context(
    space: TaylorHoodSpace,
    snapshot: MeshSnapshot,
    mu: float,
    data: str = "manufactured",
    pm: bool = False,
    constraint_form: str = "strong",
) -> FormContext:
    """Build the context with interpolated data for a benchmark time level."""
    sf = space.mesh.surface
    ex = sf.exact
    Vmesh = interpolate(space, "velocity", sf.mesh_velocity, snapshot)
    ctx = FormContext(snapshot, space, mu, Vmesh, constraint_form=constraint_form)
    if data == "zero":
        zero_u = FeFunction(space, "velocity", np.zeros(space.n_u))
        ctx.forcing = zero_u
        ctx.eta_conv = FeFunction(space, "multiplier", np.zeros(space.n_l))
        ctx.eta_p = FeFunction(space, "pressure", np.zeros(space.n_p))
        ctx.eta_l = FeFunction(space, "multiplier", np.zeros(space.n_l))
        return ctx
    if data != "manufactured":
        raise ValueError(f"unknown data mode {data!r}")
    forcing_fn = ex.forcing_pm if pm else ex.forcing
    ctx.forcing = interpolate(space, "velocity", lambda x, t: forcing_fn(x, t, mu), snapshot)
    ctx.eta_conv = interpolate(space, "multiplier", ex.convective_data, snapshot)
    ctx.eta_p = interpolate(space, "pressure", ex.constraint_data_pressure, snapshot)
    ctx.eta_l = interpolate(space, "multiplier", ex.constraint_data_multiplier, snapshot)
    return ctx


# -- scalar building blocks ------------------------------------------------------
def _scalar_mass(ctx: FormContext, degree, weight=None):
    val, _ = ctx.tables(degree)
    w = ctx.w if weight is None else ctx.w * weight
    local = np.einsum("fq,qa,qb->fab", w, val, val)
    layout = _layout_by_degree(ctx.space, degree)
    return _scalar_csr(local, layout, layout)


def _layout_by_degree(space, degree):
    for lay in (space.layout_u, space.layout_p, space.layout_l):
        if lay.degree == degree:
            return lay
    raise ValueError(f"no field with degree {degree}")


def _kron3(A):
    return sp.kron(A, sp.eye(3), format="csr")


# -- velocity-velocity blocks ----------------------------------------------------
def assemble_mass(ctx: FormContext):
    """m_h: block-diagonal velocity mass matrix."""
    return _kron3(_scalar_mass(ctx, ctx.space.k_u))


def assemble_mass_projected(ctx: FormContext):
    """m_h(w, P_h v) for the penalty scheme."""
    val, _ = ctx.tables(ctx.space.k_u)
    local = np.einsum("fq,qa,qb,fqij->faibj", ctx.w, val, val, ctx.snapshot.Ph)
    return _vel_csr(local, ctx.space.layout_u)


def mesh_divergence(ctx: FormContext):
    """div_Gh of the discrete mesh velocity at quadrature points."""
    _, grad, _, _ = eval_function(ctx.mesh_velocity, ctx.snapshot)
    return np.einsum("fqii->fq", grad)


def assemble_g(ctx: FormContext, velocity: FeFunction | None = None, projected: bool = False):
    """g_h: mass weighted with div_Gh of the (mesh) velocity."""
    vel = ctx.mesh_velocity if velocity is None else velocity
    _, grad, _, _ = eval_function(vel, ctx.snapshot)
    div = np.einsum("fqii->fq", grad)
    if projected:
        val, _ = ctx.tables(ctx.space.k_u)
        local = np.einsum("fq,qa,qb,fqij->faibj", ctx.w * div, val, val, ctx.snapshot.Ph)
        return _vel_csr(local, ctx.space.layout_u)
    return _kron3(_scalar_mass(ctx, ctx.space.k_u, weight=div))


def assemble_strain(ctx: FormContext):
    """a_{S,h}: E_h(w) : E_h(v)."""
    C = ctx.tangential_grads(ctx.space.k_u)
    S = np.einsum("fqad,fqbd->fqab", C, C)
    t1 = 0.5 * np.einsum("fq,fqij,fqab->faibj", ctx.w, ctx.snapshot.Ph, S)
    t2 = 0.5 * np.einsum("fq,fqbi,fqaj->faibj", ctx.w, C, C)
    return _vel_csr(t1 + t2, ctx.space.layout_u)


def assemble_bL(ctx: FormContext):
    """Constraint blocks: B_p (pressure x velocity) and B_l (multiplier x velocity).

    strong form: B_p(q, w) = int w . grad_Gh q;  ibp form: int div_Gh(w) q.
    B_l(xi, w) = int xi (w . n_h).
    """
    space = ctx.space
    valu, Du = ctx.tables(space.k_u)
    if ctx.constraint_form == "strong":
        _, Dp = ctx.tables(space.k_pr)
        local_p = np.einsum("fq,fqpd,qb->fpbd", ctx.w, Dp, valu)
    elif ctx.constraint_form == "ibp":
        valp, _ = ctx.tables(space.k_pr)
        local_p = np.einsum("fq,qp,fqbd->fpbd", ctx.w, valp, Du)
    else:
        raise ValueError(f"unknown constraint form {ctx.constraint_form!r}")
    vall, _ = ctx.tables(space.k_lambda)
    local_l = np.einsum("fq,ql,qb,fqd->flbd", ctx.w, vall, valu, ctx.snapshot.nh)
    Bp = _mixed_csr(local_p, space.layout_p, space.layout_u)
    Bl = _mixed_csr(local_l, space.layout_l, space.layout_u)
    return Bp, Bl


def _eta_conv_at_qp(ctx: FormContext):
    val, _ = eval_function(ctx.eta_conv, ctx.snapshot)
    return val


def assemble_convective_dir(ctx: FormContext, z: FeFunction, return_parts: bool = False):
    """Directional convective form: skew pair minus 0.5 * eta_conv mass."""
    valu, _ = ctx.tables(ctx.space.k_u)
    D = ctx.tables(ctx.space.k_u)[1]
    zval, _, _, _ = eval_function(z, ctx.snapshot)
    Dz = np.einsum("fqbd,fqd->fqb", D, zval)
    N1 = _scalar_csr(
        np.einsum("fq,qa,fqb->fab", ctx.w, valu, Dz), ctx.space.layout_u, ctx.space.layout_u
    )
    skew = _kron3(0.5 * (N1 - N1.T))
    eta = _eta_conv_at_qp(ctx)
    sym = _kron3(-0.5 * _scalar_mass(ctx, ctx.space.k_u, weight=eta))
    if return_parts:
        return skew + sym, skew, sym
    return skew + sym


def assemble_convective_cov(ctx: FormContext, z: FeFunction, return_parts: bool = False):
    """Covariant convective form: covariant skew pair + symmetric Weingarten pair
    - 0.5 * eta_conv projected mass."""
    space = ctx.space
    valu, _ = ctx.tables(space.k_u)
    C = ctx.tangential_grads(space.k_u)
    zval, _, _, _ = eval_function(z, ctx.snapshot)
    Cz = np.einsum("fqbd,fqd->fqb", C, zval)
    X = np.einsum("fq,qa,fqij,fqb->faibj", ctx.w, valu, ctx.snapshot.Ph, Cz)
    skew_loc = 0.5 * (X - X.transpose(0, 3, 4, 1, 2))
    skew = _vel_csr(skew_loc, space.layout_u)

    Hz = np.einsum("fqd,fqdi->fqi", zval, ctx.snapshot.Hh)
    Y = np.einsum("fq,qa,qb,fqj,fqi->faibj", ctx.w, valu, valu, ctx.snapshot.nh, Hz)
    sym_h = _vel_csr(0.5 * (Y + Y.transpose(0, 3, 4, 1, 2)), space.layout_u)

    eta = _eta_conv_at_qp(ctx)
    Zloc = np.einsum("fq,qa,qb,fqij->faibj", ctx.w * (-0.5 * eta), valu, valu, ctx.snapshot.Ph)
    sym_eta = _vel_csr(Zloc, space.layout_u)
    if return_parts:
        return skew + sym_h + sym_eta, skew, sym_h + sym_eta
    return skew + sym_h + sym_eta


def assemble_penalty_form(ctx: FormContext, tau: float):
    """Penalty-scheme operator: E_h(P_h w):E_h(P_h v) + tau (w.n~)(v.n~)."""
    space = ctx.space
    snap = ctx.snapshot
    valu, _ = ctx.tables(space.k_u)
    C = ctx.tangential_grads(space.k_u)
    Hs = 0.5 * (snap.Hh + snap.Hh.swapaxes(-1, -2))

    S = np.einsum("fqad,fqbd->fqab", C, C)
    t1 = 0.5 * np.einsum("fq,fqij,fqab->faibj", ctx.w, snap.Ph, S)
    t2 = 0.5 * np.einsum("fq,fqbi,fqaj->faibj", ctx.w, C, C)

    HC = np.einsum("fqie,fqed,fqad->fqai", snap.Ph, Hs, C)  # (P_h Hs C_a)_i
    cross = np.einsum("fq,qb,fqj,fqai->faibj", ctx.w, valu, snap.nh, HC)
    cross = cross + cross.transpose(0, 3, 4, 1, 2)
    hh = np.einsum("fqde,fqde->fq", Hs, Hs)
    quad = np.einsum("fq,qa,qb,fqi,fqj->faibj", ctx.w * hh, valu, valu, snap.nh, snap.nh)

    ntilde = snap.mesh.surface.improved_normal(snap.x.reshape(-1, 3), snap.t).reshape(snap.nh.shape)
    pen = np.einsum("fq,qa,qb,fqi,fqj->faibj", tau * ctx.w, valu, valu, ntilde, ntilde)
    return _vel_csr(t1 + t2 - cross + quad + pen, space.layout_u)


def assemble_rhs(ctx: FormContext, mass_prev, u_prev: FeFunction | None, dt: float, mass_like=None):
    """Momentum and constraint right-hand sides of one backward-Euler level.

    momentum = M_now f + (1/dt) M_prev u_prev  (cross-step term via the shared
    coefficients of the transport property); constraint rows carry the data.
    ``mass_like`` is the mass used against the forcing (projected mass for PM).
    """
    space = ctx.space
    M_now = assemble_mass(ctx) if mass_like is None else mass_like
    rhs_u = np.zeros(space.n_u)
    if ctx.forcing is not None:
        rhs_u += M_now @ ctx.forcing.coeffs
    if u_prev is not None:
        if mass_prev is None:
            raise ValueError("previous mass matrix required for the cross-step term")
        if mass_prev.shape[0] != space.n_u:
            raise ValueError("mesh snapshot mismatch in cross-step mass term")
        rhs_u += (1.0 / dt) * (mass_prev @ u_prev.coeffs)

    if ctx.constraint_form == "strong":
        valp, _ = ctx.tables(space.k_pr)
        etap, _ = eval_function(ctx.eta_p, ctx.snapshot)
        loc = np.einsum("fq,qp->fp", ctx.w * etap, valp)
    else:
        # ibp: int q div_G u = int q (kappa_h V + eta_p-type data) at quadrature
        valp, _ = ctx.tables(space.k_pr)
        kap = np.einsum("fqii->fq", ctx.snapshot.Hh)
        Vq, _ = eval_function(ctx.eta_l, ctx.snapshot)
        etap, _ = eval_function(ctx.eta_p, ctx.snapshot)
        loc = np.einsum("fq,qp->fp", ctx.w * (kap * Vq - etap), valp)
    rhs_p = np.zeros(space.n_p)
    np.add.at(rhs_p, space.layout_p.elem_dofs.reshape(-1), loc.reshape(-1))

    vall, _ = ctx.tables(space.k_lambda)
    etal, _ = eval_function(ctx.eta_l, ctx.snapshot)
    locl = np.einsum("fq,ql->fl", ctx.w * etal, vall)
    rhs_l = np.zeros(space.n_l)
    np.add.at(rhs_l, space.layout_l.elem_dofs.reshape(-1), locl.reshape(-1))
    return rhs_u, rhs_p, rhs_l


def pressure_mean_row(ctx: FormContext):
    return zero_mean_functional(ctx.space, ctx.snapshot, "pressure")
