"""Error measures, convergence rates, and standing property checks.

Exact fields are compared on the discrete surface through the inverse lift:
values and tangential gradients of the exact solution are evaluated at the
closest point of each quadrature point, and gradients on Gamma_h are obtained
from the ambient Jacobian of the normal extension (J P_h and P_h J P_h).

Time norms follow the benchmark experiment conventions: L2-in-time by the
rectangle rule dt * sum over steps n >= 1, L-infinity as the max over all
steps including n = 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .fespace import FeFunction, eval_function
from .forms import assemble_bL, assemble_g, assemble_mass, assemble_rhs, make_context

__all__ = [
    "ErrorReport",
    "ErrorAccumulator",
    "step_errors",
    "eoc",
    "verify_transport",
    "divergence_residual",
    "geometry_convergence_report",
    "CSV_COLUMNS",
]

CSV_COLUMNS = [
    "level",
    "h",
    "dt",
    "N_u",
    "N_p",
    "N_l",
    "e_u_ah",
    "e_u_h1",
    "e_u_linf_l2",
    "e_Pu_linf_l2",
    "e_n_linf_l2",
    "e_div_linf_l2",
    "e_p_l2l2",
    "lam_l2l2",
    "walltime_s",
]


def step_errors(state, space, surface, scheme: str, zero_reference=False):
    """Squared L2(Gamma_h^n) error integrals of one step state.

    ``zero_reference`` compares against the zero solution of the homogeneous
    (zero-data) problem instead of the manufactured fields.
    """
    snap = state.snapshot
    t = snap.t
    pm = scheme == "pm"
    ex = surface.exact
    xq = snap.x.reshape(-1, 3)
    pi_x = surface.closest_point(xq, t)
    shape = snap.x.shape[:2]

    if zero_reference:
        u_ex = np.zeros((*shape, 3))
        J_ex = np.zeros((*shape, 3, 3))
    elif pm:
        u_ex = ex.tangential_velocity(pi_x, t).reshape(*shape, 3)
        jets = ex._velocity_jets(pi_x, t, order=1)
        J_ex = ex._stack_jac(jets["uT"]).reshape(*shape, 3, 3)
    else:
        u_ex = ex.velocity(pi_x, t).reshape(*shape, 3)
        J_ex = ex.velocity_gradient(pi_x, t).reshape(*shape, 3, 3)

    uval, ugrad, ucov, _ = eval_function(state.u, snap)
    grad_ex = np.einsum("fqij,fqjd->fqid", J_ex, snap.Ph)
    cov_ex = np.einsum("fqab,fqbd->fqad", snap.Ph, grad_ex)

    w = snap.w

    def nrm2(err):
        sq = err * err
        while sq.ndim > 2:
            sq = sq.sum(axis=-1)
        return float(np.sum(w * sq))

    out = {
        "cov2": nrm2(cov_ex - ucov),
        "h12": nrm2(grad_ex - ugrad),
        "l2u2": nrm2(u_ex - uval),
        "l2Pu2": nrm2(np.einsum("fqab,fqb->fqa", snap.Ph, u_ex - uval)),
        "div2": nrm2(np.einsum("fqii->fq", grad_ex) - np.einsum("fqii->fq", ugrad)),
    }
    if pm:
        ntilde = surface.improved_normal(xq, t).reshape(*shape, 3)
        out["n2"] = nrm2(np.einsum("fqd,fqd->fq", uval, ntilde))
    else:
        V = np.zeros(shape) if zero_reference else surface.normal_speed(pi_x, t).reshape(shape)
        out["n2"] = nrm2(np.einsum("fqd,fqd->fq", uval, snap.nh) - V)

    pval, _ = eval_function(state.p, snap)
    p_ex = np.zeros(shape) if zero_reference else ex.pressure(pi_x, t).reshape(shape)
    area = float(np.sum(w))
    shift = float(np.sum(w * (p_ex - pval))) / area  # mean-matched comparison
    out["p2"] = nrm2(p_ex - pval - shift)
    if state.lam is not None:
        lval, _ = eval_function(state.lam, snap)
        out["lam2"] = float(np.sum(w * lval * lval))
    else:
        out["lam2"] = 0.0
    return out


@dataclass
class ErrorReport:
    level: int
    h: float
    dt: float
    N_u: int
    N_p: int
    N_l: int
    e_u_ah: float
    e_u_h1: float
    e_u_linf_l2: float
    e_Pu_linf_l2: float
    e_n_linf_l2: float
    e_div_linf_l2: float
    e_p_l2l2: float
    lam_l2l2: float
    walltime_s: float = 0.0

    def row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]

    def as_dict(self):
        return {c: getattr(self, c) for c in CSV_COLUMNS}


class ErrorAccumulator:
    def __init__(self, stepper):
        self.stepper = stepper
        self.steps: list[dict] = []

    def add(self, state):
        self.steps.append(
            step_errors(
                state,
                self.stepper.space,
                self.stepper.surface,
                self.stepper.cfg.scheme,
                zero_reference=self.stepper.cfg.data == "zero",
            )
        )

    def report(self, wall=0.0) -> ErrorReport:
        cfg = self.stepper.cfg
        dt = cfg.dt
        later = self.steps[1:] if len(self.steps) > 1 else []
        rect = lambda key: math.sqrt(dt * sum(s[key] for s in later))
        sup = lambda key: math.sqrt(max(s[key] for s in self.steps))
        space = self.stepper.space
        return ErrorReport(
            level=cfg.level,
            h=self.stepper.state.snapshot.h_max(),
            dt=dt,
            N_u=space.n_u,
            N_p=space.n_p,
            N_l=space.n_l,
            e_u_ah=rect("cov2"),
            e_u_h1=rect("h12"),
            e_u_linf_l2=sup("l2u2"),
            e_Pu_linf_l2=sup("l2Pu2"),
            e_n_linf_l2=sup("n2"),
            e_div_linf_l2=sup("div2"),
            e_p_l2l2=rect("p2"),
            lam_l2l2=rect("lam2"),
            walltime_s=wall,
        )


def eoc(errors, hs):
    """Experimental orders between consecutive levels: log(e_i/e_{i+1})/log(h_i/h_{i+1})."""
    errors, hs = list(errors), list(hs)
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("need matching lists of length >= 2")
    if any(hs[i + 1] >= hs[i] for i in range(len(hs) - 1)):
        raise ValueError("mesh sizes must be strictly decreasing")
    return [
        math.log(errors[i] / errors[i + 1]) / math.log(hs[i] / hs[i + 1]) if errors[i + 1] > 0 else float("inf")
        for i in range(len(errors) - 1)
    ]


def verify_transport(mesh, space, w_coeffs, v_coeffs, t, delta, quad_degree=6):
    """|d/dt (w^T M(t) v) - w^T G(t) v| with a central difference in time.

    The transport identity holds with the mesh velocity in g_h; for fixed
    coefficient vectors the discrete material derivatives vanish.
    """
    vals = {}
    for s in (t - delta, t, t + delta):
        snap = mesh.snapshot(s, quad_degree=quad_degree)
        ctx = make_context(space, snap, mu=1.0, data="zero")
        M = assemble_mass(ctx)
        vals[s] = w_coeffs @ (M @ v_coeffs)
        if s == t:
            G = assemble_g(ctx)
            gval = w_coeffs @ (G @ v_coeffs)
    dmdt = (vals[t + delta] - vals[t - delta]) / (2 * delta)
    return abs(dmdt - gval), gval


def divergence_residual(state, ctx):
    """max over basis pairs of |b_h^L(u_h, .) - data|."""
    Bp, Bl = assemble_bL(ctx)
    _, rhs_p, rhs_l = assemble_rhs(ctx, None, None, 1.0)
    r = np.abs(Bp @ state.u.coeffs - rhs_p).max()
    if state.lam is not None:
        r = max(r, np.abs(Bl @ state.u.coeffs - rhs_l).max())
    return float(r)


def geometry_convergence_report(surface, k_g, levels, t=0.0, quad_degree=None):
    """Max normal error and area error per level with fitted orders."""
    from .mesh import build_initial_mesh

    qd = quad_degree or (2 * k_g + 4)
    rows = []
    for lvl in levels:
        mesh = build_initial_mesh(surface, lvl, k_g)
        snap = mesh.snapshot(t, quad_degree=qd)
        n_exact = surface.normal(snap.x.reshape(-1, 3), t).reshape(snap.nh.shape)
        nerr = float(np.linalg.norm(snap.nh - n_exact, axis=-1).max())
        area_exact = 4.0 * np.pi * surface.radius(t) ** 2
        aerr = float(abs(snap.area() - area_exact))
        rows.append(dict(level=lvl, h=snap.h_max(), normal_err=nerr, area_err=aerr))
    out = {"rows": rows, "normal_order": None, "area_order": None}
    if len(rows) >= 2:
        hs = [r["h"] for r in rows]
        out["normal_order"] = eoc([r["normal_err"] for r in rows], hs)
        out["area_order"] = eoc([r["area_err"] for r in rows], hs)
    return out


def write_csv(path, reports, columns=CSV_COLUMNS):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(columns)
        for r in reports:
            wr.writerow(r.row() if hasattr(r, "row") else r)


def eoc_table(reports):
    """EOC rows between consecutive refinement levels of a sweep."""
    hs = [r.h for r in reports]
    cols = ["e_u_ah", "e_u_h1", "e_u_linf_l2", "e_Pu_linf_l2", "e_n_linf_l2", "e_div_linf_l2", "e_p_l2l2"]
    table = []
    for i in range(len(reports) - 1):
        row = {"levels": f"{reports[i].level}->{reports[i+1].level}"}
        for c in cols:
            e0, e1 = getattr(reports[i], c), getattr(reports[i + 1], c)
            row[c] = math.log(e0 / e1) / math.log(hs[i] / hs[i + 1]) if e1 > 0 else float("inf")
        table.append(row)
    return table


def format_eoc_csv(table):
    buf = io.StringIO()
    if not table:
        return ""
    wr = csv.DictWriter(buf, fieldnames=list(table[0].keys()))
    wr.writeheader()
    for row in table:
        wr.writerow(row)
    return buf.getvalue()
