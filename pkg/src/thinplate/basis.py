"""One-dimensional bases, Gauss rules and their tensor products.

Two piecewise-polynomial 1D spaces are used on uniform grids:

* ``hermite``: C1 cubic Hermite, coefficients (value, slope) per node,
  global index ``2*node + kind``;
* ``p2``: C0 quadratic Lagrange, nodes at element ends and midpoints,
  global index ``2*element + local``;
* ``thickness``: the hermite space in hierarchical form, functions
  ``1`` and ``x`` at indices 0 and 1, then the hermite functions of nodes
  1..n. Constant and linear profiles own a single coefficient with exact
  derivatives, which keeps thin-plate residuals free of cancellation.

The derivative of a hermite function is exactly a p2 function on the same
grid, which is what makes the 3D and plate discretizations compatible.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def gauss01(n):
    """Gauss-Legendre points and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


KINDS = ("hermite", "p2", "thickness")


def hermite(s, length):
    """Cubic Hermite basis on a segment of the given length.

    Returns (H, dH, d2H), each (4, npts); rows are (value at start, slope at
    start, value at end, slope at end), derivatives in physical units.
    """
    s = np.asarray(s, dtype=float)
    L = float(length)
    H = np.array([
        1.0 - 3.0 * s**2 + 2.0 * s**3,
        L * (s - 2.0 * s**2 + s**3),
        3.0 * s**2 - 2.0 * s**3,
        L * (-s**2 + s**3),
    ])
    dH = np.array([
        (-6.0 * s + 6.0 * s**2) / L,
        1.0 - 4.0 * s + 3.0 * s**2,
        (6.0 * s - 6.0 * s**2) / L,
        -2.0 * s + 3.0 * s**2,
    ])
    d2H = np.array([
        (-6.0 + 12.0 * s) / L**2,
        (-4.0 + 6.0 * s) / L,
        (6.0 - 12.0 * s) / L**2,
        (-2.0 + 6.0 * s) / L,
    ])
    return H, dH, d2H


def lagrange2(s, length):
    """Quadratic Lagrange basis at s = 0, 1/2, 1; same return layout as hermite."""
    s = np.asarray(s, dtype=float)
    L = float(length)
    N = np.array([2.0 * (s - 0.5) * (s - 1.0), -4.0 * s * (s - 1.0), 2.0 * s * (s - 0.5)])
    dN = np.array([4.0 * s - 3.0, 4.0 - 8.0 * s, 4.0 * s - 1.0]) / L
    d2N = np.array([np.full_like(s, 4.0), np.full_like(s, -8.0), np.full_like(s, 4.0)]) / L**2
    return N, dN, d2N


@dataclass(frozen=True)
class Basis1D:
    """Piecewise-polynomial basis on a uniform grid of [start, start + length]."""

    kind: str
    n: int
    start: float
    length: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown 1D basis {self.kind!r}")

    @property
    def h(self):
        return self.length / self.n

    @property
    def nloc(self):
        return {"hermite": 4, "p2": 3, "thickness": 6}[self.kind]

    @property
    def size(self):
        return 2 * self.n + 1 if self.kind == "p2" else 2 * self.n + 2

    @property
    def end(self):
        return self.start + self.length

    def local_dofs(self, e):
        e = np.asarray(e)
        if self.kind != "thickness":
            return 2 * e[..., None] + np.arange(self.nloc)
        # element 0 has no own bottom-node functions; its two dead slots
        # repeat indices 0, 1 with identically zero shape values
        h = 2 * e[..., None] + np.arange(4)
        g = np.broadcast_to(np.array([0, 1]), h.shape[:-1] + (2,))
        return np.concatenate([g, h], axis=-1)

    def local(self, s, e=0):
        """(N, dN, d2N) of the local functions, each (nloc, npts).

        Only the thickness kind depends on the element index ``e``.
        """
        if self.kind == "p2":
            return lagrange2(s, self.h)
        H = hermite(s, self.h)
        if self.kind == "hermite":
            return H
        s = np.asarray(s, dtype=float)
        e = np.broadcast_to(np.asarray(e), s.shape)
        one, zero = np.ones_like(s), np.zeros_like(s)
        x = self.start + (e + s) * self.h
        glob = (np.array([one, x]), np.array([zero, one]), np.array([zero, zero]))
        live = np.where(e == 0, 0.0, 1.0)
        out = []
        for G, Hd in zip(glob, H):
            Hd = Hd.copy()
            Hd[:2] = Hd[:2] * live
            out.append(np.concatenate([G, Hd]))
        return tuple(out)

    @cached_property
    def nodes(self):
        """Grid nodes (element ends)."""
        x = self.start + self.h * np.arange(self.n + 1)
        x[-1] = self.end
        return x

    @cached_property
    def boundary_values(self):
        """Indices of the coefficients that carry the value at either end."""
        return np.array([0, 2 * self.n])

    @cached_property
    def slope_mask(self):
        m = np.zeros(self.size, dtype=bool)
        if self.kind != "p2":
            m[1::2] = True
        return m

    @cached_property
    def value_positions(self):
        """Coordinate attached to each coefficient (nodes; midpoints for p2)."""
        if self.kind != "p2":
            return np.repeat(self.nodes, 2)
        x = self.start + 0.5 * self.h * np.arange(self.size)
        x[-1] = self.end
        return x

    def interpolate(self, f, df=None):
        """Coefficients of the interpolant of f (exact for cubics, quadratics for p2).

        Hermite-type kinds need the derivative ``df``.
        """
        if self.kind == "p2":
            return np.asarray(f(self.value_positions), dtype=float) * np.ones(self.size)
        if df is None:
            raise ValueError(f"{self.kind} interpolation needs the derivative")
        v = np.asarray(f(self.nodes), dtype=float) * np.ones(self.n + 1)
        d = np.asarray(df(self.nodes), dtype=float) * np.ones(self.n + 1)
        return profile_coefficients(self, v, d)

    def locate(self, x):
        x = np.asarray(x, dtype=float)
        f = (x - self.start) / self.h
        e = np.clip(np.floor(f).astype(int), 0, self.n - 1)
        return e, f - e

    def evaluate(self, x, deriv=0):
        """Global indices (npts, nloc) and local basis values of a derivative."""
        e, s = self.locate(x)
        return self.local_dofs(e), self.local(s, e)[deriv].T

    def matrix(self, a=0, b=0, n_gauss=4):
        """Dense 1D Gram matrix of derivatives: int N_i^(a) N_j^(b) dx."""
        g, w = gauss01(n_gauss)
        M = np.zeros((self.size, self.size))
        for e in range(self.n):
            loc = self.local(g, e)
            Me = np.einsum("ig,jg,g->ij", loc[a], loc[b], w) * self.h
            np.add.at(M, np.ix_(self.local_dofs(e), self.local_dofs(e)), Me)
        return M

    def integrals(self, weight=None, n_gauss=4):
        """int N_i(x) * weight(x) dx for every coefficient."""
        g, w = gauss01(n_gauss)
        out = np.zeros(self.size)
        for e in range(self.n):
            x = self.start + (e + g) * self.h
            wx = w * self.h * (weight(x) if weight is not None else 1.0)
            np.add.at(out, self.local_dofs(e), self.local(g, e)[0] @ wx)
        return out


def derivative_matrix(hb, pb):
    """Matrix D with d/dx (hermite coefficients c) = p2 coefficients D @ c.

    Exact because the derivative of a C1 cubic is a C0 quadratic; the p2
    coefficients are nodal values, so each column samples a derivative.
    """
    if (hb.kind, pb.kind) != ("hermite", "p2") or (hb.n, hb.start, hb.length) != (pb.n, pb.start, pb.length):
        raise ValueError("derivative_matrix needs matching hermite and p2 bases")
    D = np.zeros((pb.size, hb.size))
    s = np.array([0.0, 0.5, 1.0])
    dloc = hb.local(s)[1]  # (4, 3)
    for e in range(hb.n):
        D[np.ix_(pb.local_dofs(e), hb.local_dofs(e))] = dloc.T
    return D


def profile_coefficients(b, values, slopes):
    """Coefficients in ``b`` of the spline with given nodal values and slopes.

    ``values`` and ``slopes`` have the node axis last.
    """
    values = np.asarray(values, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    out = np.zeros(values.shape[:-1] + (b.size,))
    out[..., 0::2] = values
    out[..., 1::2] = slopes
    if b.kind != "thickness":
        return out
    # subtract the affine part fixed by the bottom node
    v0, s0 = values[..., :1], slopes[..., :1]
    out[..., 0::2] -= v0 + s0 * (b.nodes - b.start)
    out[..., 1::2] -= s0
    out[..., 0] = v0[..., 0] - s0[..., 0] * b.start
    out[..., 1] = s0[..., 0]
    return out


def line(kind, n, ell):
    """Basis on (-ell, ell)."""
    return Basis1D(kind, int(n), -float(ell), 2.0 * float(ell))
