"""Analytic benchmark surfaces and manufactured solutions.

Both benchmark surfaces are spheres at every time, so signed distance, closest
point, normal, normal speed and curvature all have closed forms; the generic
level-set route is kept alongside for cross-checking.

The manufactured velocity is u = u_T + V*n with u_T = n x grad_G(psi) (surface
curl of a stream function, hence tangential and surface-divergence free) and a
prescribed pressure.  The forcing is the strong residual of the *directional*
momentum equation

    rho*(mat_der(u) + (u_T . grad_G) u) - 2*mu*div_G(E(u)) + grad_G(p),

i.e. the normal-constraint multiplier of the directional form is zero by
construction; the covariant form then has the multiplier ``lambda_cov`` below.
All derivatives are obtained by forward-mode automatic differentiation of the
closed forms (``jets``), never hand-coded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .jets import Jet, grad, seed, vcross, vdot

__all__ = [
    "AnalyticSurface",
    "ExactSolution",
    "make_surface",
    "signed_distance",
    "closest_point",
    "normal_and_speed",
    "curvature",
    "exact_fields",
    "manufactured_forcing",
]

BENCHMARKS = ("moving_sphere", "oscillating_sphere")
RHO = 1.0  # density is fixed to one throughout


def _pts(x):
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    return np.atleast_2d(x), squeeze


def _ret(a, squeeze):
    return a[0] if squeeze else a


class ExactSolution:
    """Manufactured velocity/pressure fields attached to a surface."""

    def __init__(self, surface: "AnalyticSurface"):
        self.surface = surface

    # -- jet programs ---------------------------------------------------------
    def _geo_jets(self, x, t, order):
        sf = self.surface
        X, T = seed(x, t, order=order)
        C = sf._center_jets(T)
        R = sf._radius_jet(T)
        D = [X[i] - C[i] for i in range(3)]
        rho = vdot(D, D).sqrt()
        N = [D[i] / rho for i in range(3)]
        PI = [C[i] + R * N[i] for i in range(3)]
        return X, T, C, R, rho, N, PI

    def _velocity_jets(self, x, t, order):
        """Jets of the extended exact velocity, to spatial ``order`` (1 or 2)."""
        X, T, C, R, rho, N, PI = self._geo_jets(x, t, order + 1)
        psi_e = self.surface._stream(PI, T)
        g = grad(psi_e)
        uT = vcross(N, g)
        V = self.surface._normal_speed_jet(X, T, N)
        U = [uT[i] + V * N[i] for i in range(3)]
        return {"X": X, "T": T, "N": N, "PI": PI, "uT": uT, "V": V, "U": U}

    @staticmethod
    def _stack_val(js):
        return np.stack([j.val for j in js], axis=-1)

    @staticmethod
    def _stack_jac(js):
        return np.stack([j.dx for j in js], axis=-2)  # (n, i, j)

    # -- point evaluations -----------------------------------------------------
    def velocity(self, x, t):
        """Full exact velocity u = u_T + V*n (normal extension off the surface)."""
        x2, sq = _pts(x)
        U = self._velocity_jets(x2, t, order=1)["U"]
        return _ret(self._stack_val(U), sq)

    def tangential_velocity(self, x, t):
        x2, sq = _pts(x)
        uT = self._velocity_jets(x2, t, order=1)["uT"]
        return _ret(self._stack_val(uT), sq)

    def pressure(self, x, t):
        x2, sq = _pts(x)
        pi = self.surface.closest_point(x2, t)
        X, T = seed(pi, t, order=2)
        return _ret(self.surface._pressure(X, T).val, sq)

    def velocity_gradient(self, x, t):
        """Ambient Jacobian of the normal extension; grad_G u = J, cov = P J P."""
        x2, sq = _pts(x)
        U = self._velocity_jets(x2, t, order=1)["U"]
        return _ret(self._stack_jac(U), sq)

    def strain(self, x, t):
        """Surface rate-of-strain E(u) at on-surface points."""
        x2, sq = _pts(x)
        J = self.velocity_gradient(x2, t)
        P = self.surface.projector(x2, t)
        cov = np.einsum("nab,nbc,ncd->nad", P, J, P)
        return _ret(0.5 * (cov + cov.swapaxes(-1, -2)), sq)

    def pressure_tangential_gradient(self, x, t):
        x2, sq = _pts(x)
        X, T, C, R, rho, N, PI = self._geo_jets(x2, t, 2)
        pe = self.surface._pressure(PI, T)
        P = self.surface.projector(x2, t)
        return _ret(np.einsum("nij,nj->ni", P, pe.dx), sq)

    # -- manufactured data -------------------------------------------------------
    def forcing(self, x, t, mu=None):
        """Strong residual of the directional momentum equation (lambda_dir = 0)."""
        sf = self.surface
        mu = sf.mu_default if mu is None else mu
        x2, sq = _pts(x)
        jets = self._velocity_jets(x2, t, order=2)
        U = jets["U"]
        uval = self._stack_val(U)
        J = self._stack_jac(U)
        Ut = np.stack([j.dt for j in U], axis=-1)
        Uxx = np.stack([j.dxx for j in U], axis=1)  # (n, i, j, k)

        N = jets["N"]
        nval = self._stack_val(N)
        ndx = self._stack_jac(N)  # (n, i, k)
        Pval = np.eye(3)[None] - nval[:, :, None] * nval[:, None, :]
        # dP_ij/dx_k = -(dn_i n_j + n_i dn_j)
        Pdx = -(ndx[:, :, None, :] * nval[:, None, :, None] + nval[:, :, None, None] * ndx[:, None, :, :])

        A = np.einsum("nab,nbc,ncd->nad", Pval, J, Pval)
        # dA/dx_k = dP J P + P dJ P + P J dP
        dA = (
            np.einsum("nabk,nbc,ncd->nadk", Pdx, J, Pval)
            + np.einsum("nab,nbck,ncd->nadk", Pval, Uxx, Pval)
            + np.einsum("nab,nbc,ncdk->nadk", Pval, J, Pdx)
        )
        dE = 0.5 * (dA + dA.swapaxes(1, 2))
        divE = np.einsum("nijk,nkj->ni", dE, Pval)

        X, T = jets["X"], jets["T"]
        PI = jets["PI"]
        pe = sf._pressure(PI, T)
        gradp_t = np.einsum("nij,nj->ni", Pval, pe.dx)

        material = Ut + np.einsum("nij,nj->ni", J, uval)
        F = RHO * material - 2.0 * mu * divE + gradp_t
        return _ret(F, sq)

    def forcing_pm(self, x, t, mu=None):
        """Tangentially projected forcing for the penalty (tangential NS) scheme."""
        x2, sq = _pts(x)
        F = self.forcing(x2, t, mu)
        P = self.surface.projector(x2, t)
        return _ret(np.einsum("nij,nj->ni", P, F), sq)

    def constraint_data_pressure(self, x, t):
        """Data for the pressure row of the constraint: -div_G(u_T of the exact solution).

        Identically zero for surface-curl solutions; computed, not assumed.
        """
        x2, sq = _pts(x)
        jets = self._velocity_jets(x2, t, order=1)
        JuT = self._stack_jac(jets["uT"])
        P = self.surface.projector(x2, t)
        return _ret(-np.einsum("nik,nki->n", JuT, P), sq)

    def constraint_data_multiplier(self, x, t):
        """Data for the multiplier row of the constraint: the normal speed."""
        return self.surface.normal_speed(x, t)

    def convective_data(self, x, t):
        """div_G(u_T) - div_G(P V_mesh): weight of the skew-symmetrization correction."""
        sf = self.surface
        x2, sq = _pts(x)
        X, T, C, R, rho, N, PI = self._geo_jets(x2, t, 3)
        psi_e = sf._stream(PI, T)
        uT = vcross(N, grad(psi_e))
        JuT = self._stack_jac(uT)

        Vm = sf._mesh_velocity_jets(X, T)
        W = []
        for i in range(3):
            acc = Vm[i]
            for j in range(3):
                acc = acc - N[i] * N[j] * Vm[j]
            W.append(acc)
        JW = self._stack_jac(W)
        P = sf.projector(x2, t)
        div_uT = np.einsum("nik,nki->n", JuT, P)
        div_W = np.einsum("nik,nki->n", JW, P)
        return _ret(div_uT - div_W, sq)

    def lambda_dir(self, x, t):
        x2, sq = _pts(x)
        return _ret(np.zeros(x2.shape[0]), sq)

    def lambda_cov(self, x, t):
        """Multiplier of the covariant form: rho*(u_T . grad_G V - u_T . H u_T)."""
        sf = self.surface
        x2, sq = _pts(x)
        jets = self._velocity_jets(x2, t, order=1)
        uT = self._stack_val(jets["uT"])
        Vdx = jets["V"].dx
        P = sf.projector(x2, t)
        gradV = np.einsum("nij,nj->ni", P, Vdx)
        H, _ = sf.weingarten(sf.closest_point(x2, t), t)
        quad = np.einsum("ni,nij,nj->n", uT, H, uT)
        return _ret(RHO * (np.einsum("ni,ni->n", uT, gradV) - quad), sq)


@dataclass(frozen=True)
class AnalyticSurface:
    """Level-set geometry of an evolving sphere with closed-form helpers."""

    kind: str
    speed: float = 0.0  # translation speed along x1 (moving/stationary sphere)
    T_final: float = 2.0
    mu_default: float = 0.5
    exact: ExactSolution = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "exact", ExactSolution(self))

    # -- closed-form sphere data -----------------------------------------------
    def center(self, t):
        if self.kind == "oscillating_sphere":
            return np.zeros(3)
        return np.array([self.speed * t, 0.0, 0.0])

    def center_velocity(self, t):
        if self.kind == "oscillating_sphere":
            return np.zeros(3)
        return np.array([self.speed, 0.0, 0.0])

    def radius(self, t):
        if self.kind == "oscillating_sphere":
            return 1.0 + 0.25 * np.sin(2.0 * np.pi * t)
        return 1.0

    def radius_rate(self, t):
        if self.kind == "oscillating_sphere":
            return 0.5 * np.pi * np.cos(2.0 * np.pi * t)
        return 0.0

    # -- level set ----------------------------------------------------------------
    def level_set(self, x, t):
        x2, sq = _pts(x)
        d = x2 - self.center(t)
        if self.kind == "oscillating_sphere":
            return _ret(np.linalg.norm(d, axis=-1) - self.radius(t), sq)
        return _ret(np.einsum("ni,ni->n", d, d) - 1.0, sq)

    def level_set_grad(self, x, t):
        x2, sq = _pts(x)
        d = x2 - self.center(t)
        if self.kind == "oscillating_sphere":
            return _ret(d / np.linalg.norm(d, axis=-1, keepdims=True), sq)
        return _ret(2.0 * d, sq)

    def level_set_dt(self, x, t):
        x2, sq = _pts(x)
        d = x2 - self.center(t)
        if self.kind == "oscillating_sphere":
            out = np.full(x2.shape[0], -self.radius_rate(t))
        else:
            out = -2.0 * self.speed * d[:, 0]
        return _ret(out, sq)

    def level_set_hess(self, x, t):
        x2, sq = _pts(x)
        d = x2 - self.center(t)
        if self.kind == "oscillating_sphere":
            r = np.linalg.norm(d, axis=-1)
            n = d / r[:, None]
            H = (np.eye(3)[None] - n[:, :, None] * n[:, None, :]) / r[:, None, None]
        else:
            H = np.broadcast_to(2.0 * np.eye(3), (x2.shape[0], 3, 3)).copy()
        return _ret(H, sq)

    # -- closed-form geometry -------------------------------------------------------
    def _offsets(self, x, t):
        x2, sq = _pts(x)
        d = x2 - self.center(t)
        rho = np.linalg.norm(d, axis=-1)
        if np.any(rho < 1e-13):
            raise ValueError("point at the sphere center: closest point undefined")
        return x2, sq, d, rho

    def signed_distance(self, x, t):
        x2, sq, d, rho = self._offsets(x, t)
        return _ret(rho - self.radius(t), sq)

    def closest_point(self, x, t):
        x2, sq, d, rho = self._offsets(x, t)
        return _ret(self.center(t) + self.radius(t) * d / rho[:, None], sq)

    def normal(self, x, t):
        """Unit outward normal, extended off-surface (= normal at closest point)."""
        x2, sq, d, rho = self._offsets(x, t)
        return _ret(d / rho[:, None], sq)

    def projector(self, x, t):
        n = np.atleast_2d(self.normal(x, t))
        P = np.eye(3)[None] - n[:, :, None] * n[:, None, :]
        return _ret(P, np.asarray(x).ndim == 1)

    def normal_speed(self, x, t):
        """V_Gamma = -dD/dt / |grad D|, extended off-surface."""
        x2, sq, d, rho = self._offsets(x, t)
        if self.kind == "oscillating_sphere":
            out = np.full(x2.shape[0], self.radius_rate(t))
        else:
            out = self.speed * d[:, 0] / rho
        return _ret(out, sq)

    def is_on_surface(self, x, t, tol=1e-10):
        return np.all(np.abs(self.signed_distance(x, t)) < tol)

    def require_on_surface(self, x, t, tol=1e-10):
        sd = np.abs(self.signed_distance(x, t))
        if not np.all(sd < tol):
            raise ValueError(f"point not on the surface: |d| = {np.max(sd):.3e}")

    def normal_and_speed(self, x, t, tol=1e-10):
        self.require_on_surface(x, t, tol)
        return self.normal(x, t), self.normal_speed(x, t)

    def weingarten(self, x, t, check=False):
        """Shape operator H = cov-grad of n and kappa = tr H (= 2/r on a sphere)."""
        if check:
            self.require_on_surface(x, t)
        x2, sq = _pts(x)
        r = self.radius(t)
        P = np.atleast_2d(self.projector(x2, t)).reshape(x2.shape[0], 3, 3)
        H = P / r
        kappa = np.full(x2.shape[0], 2.0 / r)
        return _ret(H, sq), _ret(kappa, sq)

    # -- generic level-set fallbacks (cross-check path) ------------------------------
    def normal_generic(self, x, t):
        g = np.atleast_2d(self.level_set_grad(x, t))
        out = g / np.linalg.norm(g, axis=-1, keepdims=True)
        return _ret(out, np.asarray(x).ndim == 1)

    def normal_speed_generic(self, x, t):
        x2, sq = _pts(x)
        g = np.atleast_2d(self.level_set_grad(x2, t))
        dt = np.atleast_1d(self.level_set_dt(x2, t))
        return _ret(-dt / np.linalg.norm(g, axis=-1), sq)

    def closest_point_generic(self, x, t, tol=1e-14, maxit=60):
        """Newton-type projection onto the zero level set along grad D."""
        x2, sq = _pts(x)
        y = x2.copy()
        for _ in range(maxit):
            D = np.atleast_1d(self.level_set(y, t))
            g = np.atleast_2d(self.level_set_grad(y, t))
            gn2 = np.einsum("ni,ni->n", g, g)
            step = (D / gn2)[:, None] * g
            y = y - step
            if np.max(np.abs(D)) < tol:
                break
        return _ret(y, sq)

    def weingarten_generic(self, x, t):
        x2, sq = _pts(x)
        g = np.atleast_2d(self.level_set_grad(x2, t))
        Hs = np.atleast_2d(self.level_set_hess(x2, t)).reshape(x2.shape[0], 3, 3)
        gl = np.linalg.norm(g, axis=-1)
        n = g / gl[:, None]
        P = np.eye(3)[None] - n[:, :, None] * n[:, None, :]
        Jn = np.einsum("nij,njk->nik", P, Hs) / gl[:, None, None]
        H = np.einsum("nij,njk,nkl->nil", P, Jn, P)
        return _ret(H, sq), _ret(np.einsum("nii->n", H), sq)

    # -- mesh motion -------------------------------------------------------------
    def mesh_map(self, x0, t):
        """Exact node map from Gamma(0) to Gamma(t) used by the benchmarks."""
        x0 = np.asarray(x0, dtype=float)
        if self.kind == "oscillating_sphere":
            return self.radius(t) * x0
        return x0 + self.center(t)

    def mesh_velocity(self, x, t):
        """Velocity of the node map (ALE velocity; normal-flow for the oscillating sphere)."""
        x2, sq = _pts(x)
        if self.kind == "oscillating_sphere":
            out = (self.radius_rate(t) / self.radius(t)) * (x2 - self.center(t))
        else:
            out = np.broadcast_to(self.center_velocity(t), x2.shape).copy()
        return _ret(out, sq)

    def improved_normal(self, x, t):
        """Exact normal at the closest point; |n - n_h| = O(h^{k_g}) is thus beaten."""
        return self.normal(x, t)

    # -- jet programs (shared by ExactSolution) --------------------------------------
    def _center_jets(self, T: Jet):
        zero = Jet.const(0.0, T)
        if self.kind == "oscillating_sphere":
            return [zero, Jet.const(0.0, T), Jet.const(0.0, T)]
        return [self.speed * T, Jet.const(0.0, T), Jet.const(0.0, T)]

    def _radius_jet(self, T: Jet):
        if self.kind == "oscillating_sphere":
            return 1.0 + 0.25 * (2.0 * np.pi * T).sin()
        return Jet.const(1.0, T)

    def _normal_speed_jet(self, X, T, N):
        if self.kind == "oscillating_sphere":
            return 0.5 * np.pi * (2.0 * np.pi * T).cos()
        return self.speed * N[0]

    def _mesh_velocity_jets(self, X, T):
        if self.kind == "oscillating_sphere":
            R = self._radius_jet(T)
            # r'(t)/r(t) * x, with r'(t) written out for jet propagation
            Rdot = 0.5 * np.pi * (2.0 * np.pi * T).cos()
            return [Rdot / R * X[i] for i in range(3)]
        return [Jet.const(self.speed, T), Jet.const(0.0, T), Jet.const(0.0, T)]

    def _stream(self, Y, T: Jet):
        if self.kind == "oscillating_sphere":
            w = 2.0 * np.pi
            return (1.0 - 2.0 * T) * (1.0 / w) * (w * Y[0]).cos() * (w * Y[1]).cos() * (w * Y[2]).cos()
        return (Y[0] - self.speed * T * Y[2]) * Y[1] - 2.0 * T

    def _pressure(self, Y, T: Jet):
        if self.kind == "oscillating_sphere":
            return (np.pi * Y[0]).sin() * (2.0 * np.pi * Y[1]).sin() * (2.0 * np.pi * Y[2]).sin()
        return (Y[0] - self.speed * T) * Y[1] + Y[2]


def make_surface(name: str) -> AnalyticSurface:
    if name == "moving_sphere":
        return AnalyticSurface("moving_sphere", speed=0.2, T_final=2.0, mu_default=0.5)
    if name == "oscillating_sphere":
        return AnalyticSurface("oscillating_sphere", speed=0.0, T_final=1.0, mu_default=2e-2)
    if name == "stationary_sphere":
        # unit sphere at rest; moving-sphere fields with zero translation speed
        return AnalyticSurface("moving_sphere", speed=0.0, T_final=1.0, mu_default=0.5)
    raise ValueError(f"unknown surface {name!r}; expected one of {BENCHMARKS}")


# module-level operation aliases matching the library surface
def signed_distance(surface, x, t):
    return surface.signed_distance(x, t)


def closest_point(surface, x, t):
    return surface.closest_point(x, t)


def normal_and_speed(surface, x, t):
    return surface.normal_and_speed(x, t)


def curvature(surface, x, t):
    return surface.weingarten(x, t, check=True)


def exact_fields(surface, x, t):
    return surface.exact.velocity(x, t), surface.exact.pressure(x, t)


def manufactured_forcing(surface, x, t, mu=None):
    return surface.exact.forcing(x, t, mu)
