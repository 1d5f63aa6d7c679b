"""Clamped Kirchhoff-Love plate solver and the KL / RM kinematic spaces.

The deflection is discretized with Bogner-Fox-Schmit bicubics, stored as a
hermite(x1) x hermite(x2) coefficient tensor W of shape (2nx+2, 2ny+2):
W[2i+a, 2j+b] is w, w_x, w_y or w_xy at node (i, j) for (a, b) = (0, 0),
(1, 0), (0, 1), (1, 1). Plate matrices are Kronecker products of 1D Gram
matrices, so assembly is exact and cheap.
"""

import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .basis import derivative_matrix, gauss01, line, profile_coefficients
from .fem3d import DisplacementField3D, field_space, l2_norm
from .material import KLModuli
from .mesh import Mesh2D
from .solvers import SolverOptions, solve_spd

N_GAUSS = 4
NODAL_KINDS = ((0, 0), (1, 0), (0, 1), (1, 1))


@lru_cache(maxsize=32)
def section_bases(mesh):
    return line("hermite", mesh.nx, mesh.ell), line("hermite", mesh.ny, mesh.ell)


def _gram(b, i, j):
    return sp.csr_matrix(b.matrix(i, j))


def laplacian_matrix(mesh):
    """Matrix of (w, v) -> int lap(w) lap(v)."""
    bx, by = section_bases(mesh)
    K = (sp.kron(_gram(bx, 2, 2), _gram(by, 0, 0)) + sp.kron(_gram(bx, 0, 0), _gram(by, 2, 2))
         + sp.kron(_gram(bx, 2, 0), _gram(by, 0, 2)) + sp.kron(_gram(bx, 0, 2), _gram(by, 2, 0)))
    K = 0.5 * (K + K.T)
    return sp.csr_matrix(K)


def gaussian_matrix(mesh):
    """Matrix of the symmetric bilinear form behind int (w_11 w_22 - w_12^2)."""
    bx, by = section_bases(mesh)
    K = (0.5 * sp.kron(_gram(bx, 2, 0), _gram(by, 0, 2)) + 0.5 * sp.kron(_gram(bx, 0, 2), _gram(by, 2, 0))
         - sp.kron(_gram(bx, 1, 1), _gram(by, 1, 1)))
    K = 0.5 * (K + K.T)
    return sp.csr_matrix(K)


def _quadrature(b):
    g, w = gauss01(N_GAUSS)
    x = (b.start + (np.arange(b.n)[:, None] + g[None, :]) * b.h).ravel()
    return x, np.tile(w * b.h, b.n)


def sample_matrix(b, x, deriv=0):
    """Sparse (npts, size) matrix evaluating a 1D expansion at points x."""
    idx, val = b.evaluate(x, deriv)
    rows = np.repeat(np.arange(len(idx)), idx.shape[1])
    return sp.csr_matrix((val.ravel(), (rows, idx.ravel())), shape=(len(idx), b.size))


def load_vector(mesh, b_bar):
    """int b_bar * N over the section, as a flat coefficient vector."""
    bx, by = section_bases(mesh)
    x, wx = _quadrature(bx)
    y, wy = _quadrature(by)
    X, Y = np.meshgrid(x, y, indexing="ij")
    q = np.asarray(b_bar(X, Y), dtype=float) * np.ones_like(X)
    F = sample_matrix(bx, x).T @ (q * np.outer(wx, wy)) @ sample_matrix(by, y)
    return np.asarray(F).ravel()


def clamped_free(mesh):
    bx, by = section_bases(mesh)
    fixed = np.zeros((bx.size, by.size), dtype=bool)
    # w = 0 on the boundary forces the tangential slope to vanish too
    for b, axis in ((bx, 0), (by, 1)):
        idx = np.concatenate([b.boundary_values, b.boundary_values + 1])
        if axis == 0:
            fixed[idx, :] = True
        else:
            fixed[:, idx] = True
    return ~fixed.ravel()


def evaluate_tensor(bx, by, C, x1, x2, dx=0, dy=0):
    """Pointwise value of sum C[i, j] Nx_i(x1) Ny_j(x2), differentiated dx, dy times."""
    ix, vx = bx.evaluate(np.ravel(x1), dx)
    iy, vy = by.evaluate(np.ravel(x2), dy)
    out = np.einsum("pab,pa,pb->p", C[ix[:, :, None], iy[:, None, :]], vx, vy)
    return out.reshape(np.shape(x1))


def l2_tensor(bx, by, C):
    return float(np.sqrt(max(np.sum(C * (bx.matrix() @ C @ by.matrix())), 0.0)))


@dataclass
class KLState:
    mesh: Mesh2D
    dofs: np.ndarray
    moduli: KLModuli
    b_bar: Callable = None

    @property
    def bases(self):
        return section_bases(self.mesh)

    @property
    def tensor(self):
        bx, by = self.bases
        return self.dofs.reshape(bx.size, by.size)

    @property
    def nodal(self):
        """(n_nodes, 4) array of (w, w_x, w_y, w_xy) in mesh node order."""
        m, T = self.mesh, self.tensor
        i, j = np.meshgrid(np.arange(m.nx + 1), np.arange(m.ny + 1))
        return np.column_stack([T[2 * i.ravel() + a, 2 * j.ravel() + b] for a, b in NODAL_KINDS])

    @property
    def w(self):
        return self.nodal[:, 0]

    @property
    def grad(self):
        return self.nodal[:, 1:3]

    def evaluate(self, x1, x2):
        """Dict of w, x, y, xx, yy, xy at arbitrary in-plane points."""
        bx, by = self.bases
        T = self.tensor
        keys = {"w": (0, 0), "x": (1, 0), "y": (0, 1), "xx": (2, 0), "yy": (0, 2), "xy": (1, 1)}
        return {k: evaluate_tensor(bx, by, T, x1, x2, *d) for k, d in keys.items()}

    def gradient_tensors(self):
        """grad(w) as coefficient tensors in the p2 x hermite and hermite x p2 spaces."""
        bx, by = self.bases
        Dx = derivative_matrix(bx, line("p2", self.mesh.nx, self.mesh.ell))
        Dy = derivative_matrix(by, line("p2", self.mesh.ny, self.mesh.ell))
        T = self.tensor
        return Dx @ T, T @ Dy.T

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "w", "wx", "wy", "wxy"])
            for x, d in zip(self.mesh.coords, self.nodal):
                w.writerow([repr(float(v)) for v in (*x, *d)])


def thickness_resultant(load, half_thickness, component=2):
    """b_bar(x1, x2) = integral of the body force over (-t, t)."""
    _, w = gauss01(N_GAUSS)
    weights = 2.0 * half_thickness * w

    def b_bar(x1, x2):
        # profiles do not depend on x3, so every Gauss point sees the same value
        val = np.asarray(load(x1, x2))[component]
        return sum(wk * val for wk in weights)

    return b_bar


def kl_system(mesh, moduli):
    return moduli.D_bar * laplacian_matrix(mesh) - moduli.d_bar * gaussian_matrix(mesh)


def solve_kl(mesh, moduli, b_bar, options=SolverOptions()):
    """Discrete clamped plate deflection minimizing the plate energy."""
    K = kl_system(mesh, moduli)
    f = load_vector(mesh, b_bar)
    free = clamped_free(mesh)
    u = np.zeros(K.shape[0])
    u[free] = solve_spd(K[free][:, free], f[free], options)
    return KLState(mesh, u, moduli, b_bar)


def kl_residual(state):
    """Relative residual of int D lap(w) lap(v) = int b v over clamped v."""
    m = state.mesh
    free = clamped_free(m)
    K = state.moduli.D_bar * laplacian_matrix(m)
    f = load_vector(m, state.b_bar)
    r = (K @ state.dofs - f)[free]
    return float(np.linalg.norm(r) / max(np.linalg.norm(f[free]), np.finfo(float).tiny))


def gaussian_term(state):
    """int over the section of (w_11 w_22 - w_12^2) for a BFS field."""
    return float(state.dofs @ (gaussian_matrix(state.mesh) @ state.dofs))


def laplacian_energy(state):
    return float(state.dofs @ (laplacian_matrix(state.mesh) @ state.dofs))


def gaussian_term_exact(hessian, ell, n_cells=8, n_gauss=8):
    """Quadrature of (w_11 w_22 - w_12^2) and (lap w)^2 for an analytic w.

    ``hessian(x1, x2)`` returns (w_11, w_22, w_12). Returns both integrals.
    """
    g, w = gauss01(n_gauss)
    h = 2.0 * ell / n_cells
    edges = -ell + h * np.arange(n_cells)
    x = (edges[:, None] + h * g[None, :]).ravel()
    wx = np.tile(w * h, n_cells)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    W = np.outer(wx, wx)
    h11, h22, h12 = hessian(X1, X2)
    return float(np.sum(W * (h11 * h22 - h12**2))), float(np.sum(W * (h11 + h22) ** 2))


def _check_section(mesh2d, mesh3d):
    if mesh2d.ell != mesh3d.ell or (mesh2d.nx, mesh2d.ny) != (mesh3d.nx, mesh3d.ny):
        raise ValueError("plate and 3D meshes must share the cross-section grid")


def _thickness_profile(mesh3d, v0, v1):
    """Coefficients along x3 of v0 + x3 v1 for in-plane tensors v0, v1."""
    z = field_space(mesh3d).z
    values = v0[..., None] + v1[..., None] * z.nodes
    slopes = np.broadcast_to(v1[..., None], values.shape)
    return profile_coefficients(z, values, slopes)


def reconstruct_kl_3d(state, mesh3d, eps=None):
    """3D field u = w e3 - x3 grad(w); exact, the trial space contains it."""
    _check_section(state.mesh, mesh3d)
    gx, gy = state.gradient_tensors()
    W = state.tensor
    comps = [_thickness_profile(mesh3d, np.zeros_like(gx), -gx),
             _thickness_profile(mesh3d, np.zeros_like(gy), -gy),
             _thickness_profile(mesh3d, W, np.zeros_like(W))]
    return DisplacementField3D.from_components(mesh3d, comps, eps)


@dataclass
class RMState:
    """Reissner-Mindlin kinematics w e3 + v + x3 phi.

    v and phi hold one coefficient tensor per in-plane component, in the
    in-plane spaces of u1 and u2; w is a BFS tensor.
    """

    mesh: Mesh2D
    w: np.ndarray
    v: tuple
    phi: tuple

    def spaces(self):
        m = self.mesh
        p2x, p2y = line("p2", m.nx, m.ell), line("p2", m.ny, m.ell)
        hx, hy = section_bases(m)
        return (p2x, hy), (hx, p2y), (hx, hy)

    def nodal(self):
        """(n_nodes, 5) array of w, v1, v2, phi1, phi2 at mesh nodes."""
        (a1, b1), (a2, b2), (a3, b3) = self.spaces()
        x, y = self.mesh.coords.T
        return np.column_stack([
            evaluate_tensor(a3, b3, self.w, x, y),
            evaluate_tensor(a1, b1, self.v[0], x, y),
            evaluate_tensor(a2, b2, self.v[1], x, y),
            evaluate_tensor(a1, b1, self.phi[0], x, y),
            evaluate_tensor(a2, b2, self.phi[1], x, y),
        ])

    def to_csv(self, path, residual=float("nan")):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["x1", "x2", "w", "v1", "v2", "phi1", "phi2", "residual"])
            for x, row in zip(self.mesh.coords, self.nodal()):
                out.writerow([repr(float(a)) for a in (*x, *row, residual)])


def reconstruct_rm_3d(state, mesh3d, eps=None):
    _check_section(state.mesh, mesh3d)
    comps = [_thickness_profile(mesh3d, state.v[0], state.phi[0]),
             _thickness_profile(mesh3d, state.v[1], state.phi[1]),
             _thickness_profile(mesh3d, state.w, np.zeros_like(state.w))]
    return DisplacementField3D.from_components(mesh3d, comps, eps)


def thickness_moments(field):
    """Exact integrals of u and x3*u through the thickness, per component.

    Returns two lists of in-plane coefficient tensors (M0, M1).
    """
    z = field.space.z
    m0 = z.integrals()
    m1 = z.integrals(lambda s: s)
    comps = field.components
    return [C @ m0 for C in comps], [C @ m1 for C in comps]


def fit_rm(field):
    """Least-squares RM fit over each fibre; returns (RMState, relative misfit).

    In-plane components are fitted by v + x3 phi, the transverse one by a
    constant w, in the L2 sense through the thickness.
    """
    mesh = field.mesh
    M0, M1 = thickness_moments(field)
    a, b = -mesh.half_thickness, mesh.half_thickness
    m0 = b - a
    m1 = (b**2 - a**2) / 2.0
    m2 = (b**3 - a**3) / 3.0
    det = m0 * m2 - m1 * m1
    v = tuple((m2 * M0[c] - m1 * M1[c]) / det for c in range(2))
    phi = tuple((m0 * M1[c] - m1 * M0[c]) / det for c in range(2))
    state = RMState(mesh.section, M0[2] / m0, v, phi)
    norm = l2_norm(field)
    if norm == 0.0:
        return state, 0.0
    fit = reconstruct_rm_3d(state, mesh)
    diff = DisplacementField3D(mesh, field.coeffs - fit.coeffs)
    return state, l2_norm(diff) / norm


def director_gap(state):
    """Relative L2 size of phi + grad(w) over the section."""
    kl = KLState(state.mesh, state.w.ravel(), None)
    grads = kl.gradient_tensors()
    spaces = state.spaces()[:2]
    num = sum(l2_tensor(bx, by, p + g) ** 2 for (bx, by), p, g in zip(spaces, state.phi, grads))
    den = sum(l2_tensor(bx, by, g) ** 2 for (bx, by), g in zip(spaces, grads))
    return float(np.sqrt(num / den)) if den > 0 else 0.0
