"""Forward-mode derivative propagation ("jets") for the manufactured-solution pipeline.

A Jet carries the value of a scalar field together with its spatial derivatives
up to third order and one time derivative (plus the mixed time/space slot needed
for material derivatives of gradients).  All slots are numpy arrays broadcast
over a leading batch of evaluation points, so whole point clouds are
differentiated at once.

Slots (n = number of points):
    val   (n,)        field value
    dx    (n, 3)      first spatial derivatives
    dxx   (n, 3, 3)   second spatial derivatives
    dxxx  (n, 3, 3, 3) third spatial derivatives (optional)
    dt    (n,)        first time derivative
    dtdx  (n, 3)      d/dt of the spatial gradient (optional)

Higher slots are dropped (set to None) as soon as one operand lacks them;
`grad` demotes a jet to the gradient-component jets one order lower.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Jet", "seed", "grad", "vdot", "vcross"]


def _zeros(n, *shape):
    return np.zeros((n, *shape))


class Jet:
    __slots__ = ("val", "dx", "dxx", "dxxx", "dt", "dtdx")

    def __init__(self, val, dx=None, dxx=None, dxxx=None, dt=None, dtdx=None):
        self.val = val
        self.dx = dx
        self.dxx = dxx
        self.dxxx = dxxx
        self.dt = dt
        self.dtdx = dtdx

    # -- constant lifting ---------------------------------------------------
    @staticmethod
    def const(value, like: "Jet") -> "Jet":
        n = like.val.shape[0]
        v = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
        return Jet(
            v,
            _zeros(n, 3) if like.dx is not None else None,
            _zeros(n, 3, 3) if like.dxx is not None else None,
            _zeros(n, 3, 3, 3) if like.dxxx is not None else None,
            _zeros(n) if like.dt is not None else None,
            _zeros(n, 3) if like.dtdx is not None else None,
        )

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.const(other, self)

    # -- ring operations ----------------------------------------------------
    def __add__(self, o):
        o = self._coerce(o)
        return Jet(*[_addslot(a, b) for a, b in zip(_slots(self), _slots(o))])

    __radd__ = __add__

    def __neg__(self):
        return Jet(*[None if a is None else -a for a in _slots(self)])

    def __sub__(self, o):
        return self + (-self._coerce(o))

    def __rsub__(self, o):
        return self._coerce(o) + (-self)

    def __mul__(self, o):
        o = self._coerce(o)
        u, v = self, o
        val = u.val * v.val
        dx = dxx = dxxx = dt = dtdx = None
        if u.dx is not None and v.dx is not None:
            dx = u.dx * v.val[:, None] + v.dx * u.val[:, None]
            if u.dxx is not None and v.dxx is not None:
                cross = u.dx[:, :, None] * v.dx[:, None, :]
                dxx = (
                    u.dxx * v.val[:, None, None]
                    + v.dxx * u.val[:, None, None]
                    + cross
                    + cross.swapaxes(1, 2)
                )
                if u.dxxx is not None and v.dxxx is not None:
                    dxxx = (
                        u.dxxx * v.val[:, None, None, None]
                        + v.dxxx * u.val[:, None, None, None]
                        + u.dxx[:, :, :, None] * v.dx[:, None, None, :]
                        + u.dxx[:, :, None, :] * v.dx[:, None, :, None]
                        + u.dxx[:, None, :, :] * v.dx[:, :, None, None]
                        + v.dxx[:, :, :, None] * u.dx[:, None, None, :]
                        + v.dxx[:, :, None, :] * u.dx[:, None, :, None]
                        + v.dxx[:, None, :, :] * u.dx[:, :, None, None]
                    )
        if u.dt is not None and v.dt is not None:
            dt = u.dt * v.val + v.dt * u.val
            if u.dtdx is not None and v.dtdx is not None and dx is not None:
                dtdx = (
                    u.dtdx * v.val[:, None]
                    + v.dtdx * u.val[:, None]
                    + u.dt[:, None] * v.dx
                    + v.dt[:, None] * u.dx
                )
        return Jet(val, dx, dxx, dxxx, dt, dtdx)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = self._coerce(o)
        return self * o._recip()

    def __rtruediv__(self, o):
        return self._coerce(o) * self._recip()

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 1:
            raise ValueError("Jet.__pow__ supports positive integer powers")
        out = self
        for _ in range(k - 1):
            out = out * self
        return out

    # -- elementary functions -----------------------------------------------
    def _chain(self, f0, f1, f2, f3):
        u = self
        val = f0
        dx = dxx = dxxx = dt = dtdx = None
        if u.dx is not None:
            dx = f1[:, None] * u.dx
            if u.dxx is not None:
                outer = u.dx[:, :, None] * u.dx[:, None, :]
                dxx = f2[:, None, None] * outer + f1[:, None, None] * u.dxx
                if u.dxxx is not None:
                    o3 = u.dx[:, :, None, None] * u.dx[:, None, :, None] * u.dx[:, None, None, :]
                    s = (
                        u.dxx[:, :, :, None] * u.dx[:, None, None, :]
                        + u.dxx[:, :, None, :] * u.dx[:, None, :, None]
                        + u.dxx[:, None, :, :] * u.dx[:, :, None, None]
                    )
                    dxxx = (
                        f3[:, None, None, None] * o3
                        + f2[:, None, None, None] * s
                        + f1[:, None, None, None] * u.dxxx
                    )
        if u.dt is not None:
            dt = f1 * u.dt
            if u.dtdx is not None and u.dx is not None:
                dtdx = f2[:, None] * u.dt[:, None] * u.dx + f1[:, None] * u.dtdx
        return Jet(val, dx, dxx, dxxx, dt, dtdx)

    def _recip(self):
        v = self.val
        return self._chain(1.0 / v, -1.0 / v**2, 2.0 / v**3, -6.0 / v**4)

    def sqrt(self):
        r = np.sqrt(self.val)
        return self._chain(r, 0.5 / r, -0.25 / r**3, 0.375 / r**5)

    def sin(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(s, c, -s, -c)

    def cos(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(c, -s, -c, s)


def _slots(j: Jet):
    return (j.val, j.dx, j.dxx, j.dxxx, j.dt, j.dtdx)


def _addslot(a, b):
    if a is None or b is None:
        return None
    return a + b


def seed(x: np.ndarray, t: float, order: int = 3, with_time: bool = True):
    """Seed coordinate jets for points ``x`` (n,3) at time ``t``.

    Returns ([X1, X2, X3], T).  ``order`` is the highest spatial derivative
    carried (2 or 3).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    want3 = order >= 3
    coords = []
    for i in range(3):
        dx = _zeros(n, 3)
        dx[:, i] = 1.0
        coords.append(
            Jet(
                x[:, i].copy(),
                dx,
                _zeros(n, 3, 3),
                _zeros(n, 3, 3, 3) if want3 else None,
                _zeros(n) if with_time else None,
                _zeros(n, 3) if with_time else None,
            )
        )
    tjet = Jet(
        np.full(n, float(t)),
        _zeros(n, 3),
        _zeros(n, 3, 3),
        _zeros(n, 3, 3, 3) if want3 else None,
        np.ones(n) if with_time else None,
        _zeros(n, 3) if with_time else None,
    )
    return coords, tjet


def grad(f: Jet):
    """Spatial gradient of a jet as three component jets, one order lower."""
    if f.dx is None or f.dxx is None:
        raise ValueError("grad needs at least second-order spatial slots")
    out = []
    for i in range(3):
        out.append(
            Jet(
                f.dx[:, i],
                f.dxx[:, i, :],
                f.dxxx[:, i, :, :] if f.dxxx is not None else None,
                None,
                f.dtdx[:, i] if f.dtdx is not None else None,
                None,
            )
        )
    return out


def vdot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def vcross(a, b):
    return [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
