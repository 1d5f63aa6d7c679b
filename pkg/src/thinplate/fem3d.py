"""Finite-element minimization of the 3D plate energy.

Each displacement component lives in a tensor product of 1D spaces:

    u1 : p2(x1)      x hermite(x2) x hermite(x3)
    u2 : hermite(x1) x p2(x2)      x hermite(x3)
    u3 : hermite(x1) x hermite(x2) x hermite(x3)

In-plane, u3 is the Bogner-Fox-Schmit space of the plate solver and
d(u3)/dx_a lies in the space of u_a, so every Kirchhoff-Love field
w e3 - x3 grad(w) built from a discrete plate deflection is representable.
Thin plates therefore do not lock, and the thin limit of the discrete 3D
problem is exactly the discrete plate problem. C1 cubics in x3 give square
integrable u_a,33 as the kappa penalty requires.

Component arrays ("standard" coefficients) have shape (n1, n2, n3) in C
order. Along x3 the hierarchical ``thickness`` basis is used: coefficients 0
and 1 multiply 1 and x3, the rest are (value, x3-derivative) pairs at the
upper through-thickness nodes.

The solved coefficient vector uses a coupled basis of the same space: each
fibre-constant u3 function N carries the Kirchhoff-Love companion
-x3 grad(N) in the in-plane components (dropped at clamped boundary nodes).
Its transverse shear is then exactly zero, so thin-plate solutions are
represented without cancelling coefficients and residuals stay at roundoff.
"""

import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import product
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .basis import Basis1D, derivative_matrix, gauss01, line
from .material import KappaEnergyParams, kappa_voigt
from .mesh import Mesh3D
from .solvers import SolverError, SolverOptions, solve_spd

log = logging.getLogger(__name__)

PROFILES = ("uniform", "cosine")
IN_PLANE_KINDS = (("p2", "hermite"), ("hermite", "p2"), ("hermite", "hermite"))


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class VolumeLoad:
    """Body force b(x1, x2) = amplitude_i * profile(x1, x2), x3-independent."""

    amplitude: tuple
    profile: str = "uniform"
    ell: float = 1.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown load profile {self.profile!r}")
        if len(self.amplitude) != 3:
            raise ValueError("load amplitude needs three components")
        object.__setattr__(self, "amplitude", tuple(float(a) for a in self.amplitude))

    def shape(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        if self.profile == "uniform":
            return np.ones_like(x1)
        k = np.pi / (2.0 * self.ell)
        return np.cos(k * x1) * np.cos(k * np.asarray(x2, dtype=float))

    def __call__(self, x1, x2):
        g = self.shape(x1, x2)
        return np.stack([a * g for a in self.amplitude])

    def scaled(self, factor):
        return VolumeLoad(tuple(a * factor for a in self.amplitude), self.profile, self.ell)


class FieldSpace:
    """Global numbering of the 3D trial space on a plate mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.z = Basis1D("thickness", mesh.nz, -mesh.half_thickness, 2.0 * mesh.half_thickness)
        self.inplane = tuple((line(kx, mesh.nx, mesh.ell), line(ky, mesh.ny, mesh.ell))
                             for kx, ky in IN_PLANE_KINDS)
        self.shapes = tuple((bx.size, by.size, self.z.size) for bx, by in self.inplane)
        sizes = [int(np.prod(s)) for s in self.shapes]
        self.offsets = tuple(np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int))
        self.size = int(sum(sizes))

    def split(self, coeffs):
        return [coeffs[o:o + int(np.prod(s))].reshape(s) for o, s in zip(self.offsets, self.shapes)]

    def join(self, comps):
        return np.concatenate([np.asarray(c, dtype=float).ravel() for c in comps])

    @cached_property
    def companions(self):
        """Derivative maps hermite -> p2 with the clamped boundary rows removed."""
        (p2x, hy), (hx, p2y), _ = self.inplane
        Gx = derivative_matrix(hx, p2x)
        Gy = derivative_matrix(hy, p2y)
        Gx[p2x.boundary_values] = 0.0
        Gy[p2y.boundary_values] = 0.0
        return Gx, Gy

    def expand(self, coeffs):
        """Standard component arrays of a coupled-basis coefficient vector."""
        comps = [c.copy() for c in self.split(np.asarray(coeffs, dtype=float))]
        Gx, Gy = self.companions
        w = comps[2][:, :, 0]
        comps[0][:, :, 1] -= Gx @ w
        comps[1][:, :, 1] -= w @ Gy.T
        return comps

    def reduce(self, comps):
        """Inverse of expand."""
        comps = [np.array(c, dtype=float) for c in comps]
        Gx, Gy = self.companions
        w = comps[2][:, :, 0]
        comps[0][:, :, 1] += Gx @ w
        comps[1][:, :, 1] += w @ Gy.T
        return self.join(comps)

    @cached_property
    def free(self):
        out = []
        for (bx, by), shape in zip(self.inplane, self.shapes):
            fixed = np.zeros(shape, dtype=bool)
            fixed[bx.boundary_values, :, :] = True
            fixed[:, by.boundary_values, :] = True
            out.append(~fixed)
        return self.join(out).astype(bool)

    @cached_property
    def slope_mask(self):
        """True for coefficients multiplying an x3-derivative shape function."""
        return self.join([np.broadcast_to(self.z.slope_mask, s) for s in self.shapes]).astype(bool)

    @cached_property
    def local_layout(self):
        """(component, a, b, d) of every element-local function, in order."""
        out = []
        for c, (bx, by) in enumerate(self.inplane):
            out += [(c, a, b, d) for a, b, d in product(range(bx.nloc), range(by.nloc), range(self.z.nloc))]
        return out

    @property
    def n_local(self):
        return len(self.local_layout)

    @cached_property
    def cell_dofs(self):
        """(n_cells, n_local) global indices; cells ordered like Mesh3D.cells."""
        m = self.mesh
        k, j, i = np.meshgrid(np.arange(m.nz), np.arange(m.ny), np.arange(m.nx), indexing="ij")
        i, j, k = i.ravel(), j.ravel(), k.ravel()
        kz = self.z.local_dofs(k)
        cols = []
        for c, a, b, d in self.local_layout:
            n1, n2, n3 = self.shapes[c]
            cols.append(self.offsets[c] + ((2 * i + a) * n2 + (2 * j + b)) * n3 + kz[:, d])
        return np.column_stack(cols)

    @cached_property
    def cell_types(self):
        """Per cell (first_x, last_x, first_y, last_y, layer); fixes the local operators."""
        m = self.mesh
        k, j, i = np.meshgrid(np.arange(m.nz), np.arange(m.ny), np.arange(m.nx), indexing="ij")
        return [(bool(a == 0), bool(a == m.nx - 1), bool(b == 0), bool(b == m.ny - 1), int(c))
                for a, b, c in zip(i.ravel(), j.ravel(), k.ravel())]


@lru_cache(maxsize=32)
def field_space(mesh):
    return FieldSpace(mesh)


@lru_cache(maxsize=8)
def _points(n_inplane, n_thick):
    g2, w2 = gauss01(n_inplane)
    g3, w3 = gauss01(n_thick)
    xi, eta, zeta = np.meshgrid(g2, g2, g3, indexing="ij")
    wt = np.einsum("i,j,k->ijk", w2, w2, w3)
    return xi.ravel(), eta.ravel(), zeta.ravel(), wt.ravel()


class ElementRule:
    """Local operators of one box cell of the plate mesh.

    The default 4 x 4 x 4 Gauss rule integrates every term of the energy
    exactly for this basis. Operators depend on the layer index only
    through the thickness basis.
    """

    def __init__(self, space, n_inplane=4, n_thick=4):
        self.space = space
        m = space.mesh
        self.hx, self.hy, self.hz = m.section.hx, m.section.hy, m.hz
        self.n_inplane, self.n_thick = n_inplane, n_thick

    @property
    def jac(self):
        return self.hx * self.hy * self.hz

    @property
    def points(self):
        return _points(self.n_inplane, self.n_thick)

    def shape(self, xi, eta, zeta, layer=0):
        """Per-component local functions: list of dicts v, d1, d2, d3, d33 of shape (nloc_c, npts)."""
        sp_ = self.space
        Z = sp_.z.local(zeta, layer)
        out = []
        for bx, by in sp_.inplane:
            X = bx.local(xi)
            Y = by.local(eta)

            def tp(x, y, z):
                return np.einsum("ag,bg,dg->abdg", x, y, z).reshape(-1, len(xi))

            out.append({
                "v": tp(X[0], Y[0], Z[0]),
                "d1": tp(X[1], Y[0], Z[0]),
                "d2": tp(X[0], Y[1], Z[0]),
                "d3": tp(X[0], Y[0], Z[1]),
                "d33": tp(X[0], Y[0], Z[2]),
            })
        return out

    def _blocks(self):
        ends = np.cumsum([0] + [bx.nloc * by.nloc * self.space.z.nloc for bx, by in self.space.inplane])
        return [slice(ends[c], ends[c + 1]) for c in range(3)]

    def operators(self, xi, eta, zeta, layer=0):
        """Values V (3, n, npt), engineering strains B (6, n, npt), u_a,33 rows P (2, n, npt)."""
        sh = self.shape(xi, eta, zeta, layer)
        n, npt = self.space.n_local, len(xi)
        blk = self._blocks()
        V = np.zeros((3, n, npt))
        B = np.zeros((6, n, npt))
        P = np.zeros((2, n, npt))
        for c in range(3):
            V[c, blk[c]] = sh[c]["v"]
        B[0, blk[0]] = sh[0]["d1"]
        B[1, blk[1]] = sh[1]["d2"]
        B[2, blk[2]] = sh[2]["d3"]
        B[3, blk[1]] = sh[1]["d3"]
        B[3, blk[2]] = sh[2]["d2"]
        B[4, blk[0]] = sh[0]["d3"]
        B[4, blk[2]] = sh[2]["d1"]
        B[5, blk[0]] = sh[0]["d2"]
        B[5, blk[1]] = sh[1]["d1"]
        P[0, blk[0]] = sh[0]["d33"]
        P[1, blk[1]] = sh[1]["d33"]
        return V, B, P

    @lru_cache(maxsize=None)
    def standard_operators(self, layer=0):
        xi, eta, zeta, w = self.points
        return self.operators(xi, eta, zeta, layer) + (w * self.jac,)

    def transform(self, key):
        """Local map from coupled to standard coefficients, and the columns
        whose x- and y-companions are complete.

        ``key`` is a FieldSpace.cell_types entry.
        """
        first_x, last_x, first_y, last_y, _ = key
        sp_ = self.space
        (p2x, hy), (hx, p2y), _ = sp_.inplane
        s = np.array([0.0, 0.5, 1.0])
        dx = hx.local(s)[1].copy()  # (4, 3): derivative of hermite at p2 nodes
        dy = hy.local(s)[1].copy()
        if first_x:
            dx[:, 0] = 0.0
        if last_x:
            dx[:, 2] = 0.0
        if first_y:
            dy[:, 0] = 0.0
        if last_y:
            dy[:, 2] = 0.0
        full_dx = hx.local(s)[1]
        full_dy = hy.local(s)[1]
        index = {t: n for n, t in enumerate(sp_.local_layout)}
        T = np.eye(sp_.n_local)
        complete_x = np.zeros(sp_.n_local, dtype=bool)
        complete_y = np.zeros(sp_.n_local, dtype=bool)
        for a in range(4):
            for b in range(4):
                col = index[(2, a, b, 0)]
                for j in range(3):
                    T[index[(0, j, b, 1)], col] -= dx[a, j]
                    T[index[(1, a, j, 1)], col] -= dy[b, j]
                complete_x[col] = np.array_equal(dx[a], full_dx[a])
                complete_y[col] = np.array_equal(dy[b], full_dy[b])
        return T, complete_x, complete_y

    @lru_cache(maxsize=None)
    def quadrature_operators(self, key):
        """(V, B, P, weights) of the coupled basis on a cell of the given type."""
        V, B, P, w = self.standard_operators(key[4])
        T, cx, cy = self.transform(key)
        V = np.einsum("cag,ab->cbg", V, T)
        B = np.einsum("iag,ab->ibg", B, T)
        P = np.einsum("iag,ab->ibg", P, T)
        # companions cancel the shear exactly; drop the roundoff
        B[4, cx] = 0.0
        B[3, cy] = 0.0
        return V, B, P, w

    def stiffness(self, C, penalty=0.0, key=(False, False, False, False, 0)):
        """Element matrix of u -> int (C eps(u)).eps(u) + 2 penalty |u_a,33|^2."""
        _, B, P, w = self.quadrature_operators(key)
        CB = np.einsum("ij,jag->iag", C, B)
        K = np.einsum("iag,ibg,g->ab", B, CB, w)
        if penalty != 0.0:
            K = K + 2.0 * penalty * np.einsum("iag,ibg,g->ab", P, P, w)
        return 0.5 * (K + K.T)


@lru_cache(maxsize=32)
def element_rule(mesh):
    return ElementRule(field_space(mesh))


@dataclass
class DisplacementField3D:
    mesh: Mesh3D
    coeffs: np.ndarray
    eps: Optional[float] = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.size,):
            raise ValueError(f"expected {self.space.size} coefficients, got {self.coeffs.shape}")

    @property
    def space(self):
        return field_space(self.mesh)

    @classmethod
    def zeros(cls, mesh, eps=None):
        return cls(mesh, np.zeros(field_space(mesh).size), eps)

    @classmethod
    def from_components(cls, mesh, comps, eps=None):
        """Field from standard component arrays."""
        return cls(mesh, field_space(mesh).reduce(comps), eps)

    @property
    def components(self):
        """Standard component arrays (copies)."""
        return self.space.expand(self.coeffs)

    def evaluate(self, points, deriv=(0, 0, 0)):
        """Displacement (or a partial derivative) at points of shape (npts, 3)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty((len(pts), 3))
        ix3, z = self.space.z.evaluate(pts[:, 2], deriv[2])
        for c, ((bx, by), C) in enumerate(zip(self.space.inplane, self.components)):
            ix1, x = bx.evaluate(pts[:, 0], deriv[0])
            ix2, y = by.evaluate(pts[:, 1], deriv[1])
            vals = C[ix1[:, :, None, None], ix2[:, None, :, None], ix3[:, None, None, :]]
            out[:, c] = np.einsum("pabd,pa,pb,pd->p", vals, x, y, z)
        return out

    def nodal_values(self):
        return self.evaluate(self.mesh.coords)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "x3", "u1", "u2", "u3"])
            for x, u in zip(self.mesh.coords, self.nodal_values()):
                w.writerow([repr(float(v)) for v in (*x, *u)])


@dataclass
class SparseSystem:
    K: sp.csr_matrix
    f: np.ndarray
    free: np.ndarray
    mesh: Mesh3D
    params: KappaEnergyParams
    meta: dict = field(default_factory=dict)


def material_matrix(material, params):
    """Voigt matrix of 2*W_eps; only isotropic materials admit kappa > 0."""
    if params.kappa > 0 and not material.is_isotropic:
        raise AssemblyError("the kappa-modified energy requires an isotropic material")
    if material.is_isotropic:
        return kappa_voigt(material.lam, material.mu, params.c33, params.cross)
    return material.matrix()


def _cells_by_type(space):
    out = {}
    for n, key in enumerate(space.cell_types):
        out.setdefault(key, []).append(n)
    return {k: np.array(v) for k, v in out.items()}


def load_vector(mesh, load):
    space = field_space(mesh)
    rule = element_rule(mesh)
    xi, eta, _, _ = rule.points
    m = mesh.section
    org = m.cell_origins
    X1 = org[:, 0, None] + xi[None, :] * m.hx
    X2 = org[:, 1, None] + eta[None, :] * m.hy
    b = np.stack([load(X1[e], X2[e]) for e in range(len(org))])  # (ncell2d, 3, npt)
    b = np.tile(b, (mesh.nz, 1, 1))
    fe = np.empty((mesh.n_cells, space.n_local))
    for key, cells in _cells_by_type(space).items():
        V, _, _, w = rule.quadrature_operators(key)
        fe[cells] = np.einsum("cag,ecg,g->ea", V, b[cells], w)
    f = np.zeros(space.size)
    np.add.at(f, space.cell_dofs, fe)
    return f


def assemble(mesh, material, params, load):
    """Stiffness K and load f, so that F(u) = u.K.u/2 - f.u."""
    space = field_space(mesh)
    C = material_matrix(material, params)
    penalty = params.penalty if material.is_isotropic else 0.0
    rule = element_rule(mesh)
    nl = space.n_local
    data = np.empty((mesh.n_cells, nl * nl))
    for key, cells in _cells_by_type(space).items():
        data[cells] = rule.stiffness(C, penalty, key).ravel()
    data = data.ravel()
    dofs = space.cell_dofs
    rows = np.repeat(dofs, nl, axis=1).ravel()
    cols = np.tile(dofs, (1, nl)).ravel()
    K = sp.coo_matrix((data, (rows, cols)), shape=(space.size, space.size)).tocsr()
    K.sort_indices()
    f = load_vector(mesh, load) if load is not None else np.zeros(space.size)
    return SparseSystem(K, f, space.free, mesh, params,
                        meta={"material": material, "load": load})


def solve(system, options=SolverOptions()):
    """Constrained minimizer of the assembled energy."""
    free = system.free
    Kff = system.K[free][:, free]
    u = np.zeros(system.K.shape[0])
    try:
        u[free] = solve_spd(Kff, system.f[free], options)
    except SolverError:
        log.error("solve failed at eps=%s", system.params.eps)
        raise
    return DisplacementField3D(system.mesh, u, system.params.eps)


def stationarity_residual(system, field):
    free = system.free
    r = (system.K @ field.coeffs - system.f)[free]
    return float(np.linalg.norm(r) / max(np.linalg.norm(system.f[free]), np.finfo(float).tiny))


def total_energy(system, field):
    u = field.coeffs
    return float(0.5 * u @ (system.K @ u) - system.f @ u)


def l2_norm(field):
    """L2 norm over the plate, computed from 1D Gram matrices."""
    sp_ = field.space
    Mz = sp_.z.matrix()
    total = 0.0
    for (bx, by), C in zip(sp_.inplane, field.components):
        MC = np.einsum("ia,jb,kd,abd->ijk", bx.matrix(), by.matrix(), Mz, C, optimize=True)
        total += float(np.sum(C * MC))
    return float(np.sqrt(max(total, 0.0)))


def strains_at_quadrature(field):
    """Engineering strains (n_cells, 6, npt) and quadrature weights."""
    space = field.space
    rule = element_rule(field.mesh)
    cu = field.coeffs[space.cell_dofs]
    out = np.empty((field.mesh.n_cells, 6, len(rule.points[0])))
    for key, cells in _cells_by_type(space).items():
        out[cells] = np.einsum("iag,ea->eig", rule.quadrature_operators(key)[1], cu[cells])
    return out, rule.standard_operators(0)[3]


def shear_norm(field):
    """sqrt of the thickness-averaged integral of E13^2 + E23^2."""
    eps, w = strains_at_quadrature(field)
    tensor_shear = 0.5 * eps[:, [3, 4], :]
    total = np.einsum("eig,g->", tensor_shear**2, w)
    return float(np.sqrt(total / (2.0 * field.mesh.half_thickness)))
