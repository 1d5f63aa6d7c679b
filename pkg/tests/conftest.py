from functools import lru_cache

import numpy as np
import pytest
import scipy.sparse as sp

from thinplate.basis import gauss01
from thinplate.fem3d import DisplacementField3D, element_rule, field_space
from thinplate.mesh import build_plate_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_mesh():
    return build_plate_mesh(1.0, 0.1, 2, 2, 1)


def separable_field(mesh, factors, eps=None):
    """Field whose component c is fx(x1) fy(x2) fz(x3).

    ``factors[c]`` is None (zero component) or three (f, df) pairs.
    """
    space = field_space(mesh)
    comps = []
    for (bx, by), shape, fac in zip(space.inplane, space.shapes, factors):
        if fac is None:
            comps.append(np.zeros(shape))
            continue
        cx, cy, cz = (b.interpolate(*f) for b, f in zip((bx, by, space.z), fac))
        comps.append(np.einsum("i,j,k->ijk", cx, cy, cz))
    return DisplacementField3D.from_components(mesh, comps, eps)


def element_oracle_error(mesh, C, penalty=0.0):
    """Worst relative gap between element matrices and the oracle, over all cell types."""
    space = field_space(mesh)
    rule = element_rule(mesh)
    seen = {}
    for n, key in enumerate(space.cell_types):
        seen.setdefault(key, n)
    worst = 0.0
    for key, n in seen.items():
        d = space.cell_dofs[n]
        cols, loc = np.unique(d, return_inverse=True)
        # dead thickness slots repeat indices, so compare after scattering
        G = np.zeros((len(cols), len(cols)))
        np.add.at(G, (loc[:, None], loc[None, :]), rule.stiffness(C, penalty, key))
        O = oracle_stiffness(mesh, C, penalty, cells=[n], columns=cols)
        worst = max(worst, np.abs(G - O).max() / np.abs(O).max())
    return worst, len(seen)


def _sampling(b, x, deriv):
    idx, val = b.evaluate(x, deriv)
    rows = np.repeat(np.arange(len(x)), idx.shape[1])
    return sp.csr_matrix((val.ravel(), (rows, idx.ravel())), shape=(len(x), b.size)).toarray()


@lru_cache(maxsize=4)
def _expand_matrix(mesh):
    space = field_space(mesh)
    return np.column_stack([space.join(space.expand(e)) for e in np.eye(space.size)])


def oracle_stiffness(mesh, C, penalty=0.0, n_gauss=6, cells=None, columns=None):
    """Brute-force energy matrix from pointwise basis evaluation.

    Independent of the element operators: samples each component with the 1D
    bases, maps the coupled coefficients through ``expand`` column by column
    and integrates with an n_gauss^3 rule over the selected cells.
    ``columns`` restricts the matrix to a subset of coefficients.
    """
    space = field_space(mesh)
    g, w = gauss01(n_gauss)
    m = mesh.section
    nx, ny, nz = mesh.nx, mesh.ny, mesh.nz
    if cells is None:
        cells = range(mesh.n_cells)
    pts, wts = [], []
    for n in cells:
        k, rest = divmod(n, nx * ny)
        j, i = divmod(rest, nx)
        x = -mesh.ell + (i + g) * m.hx
        y = -mesh.ell + (j + g) * m.hy
        z = -mesh.half_thickness + (k + g) * mesh.hz
        X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
        pts.append(np.column_stack([X.ravel(), Y.ravel(), Z.ravel()]))
        wts.append(np.einsum("i,j,k->ijk", w, w, w).ravel() * m.hx * m.hy * mesh.hz)
    pts, wts = np.vstack(pts), np.concatenate(wts)
    J = _expand_matrix(mesh)
    if columns is not None:
        J = J[:, columns]
    blocks = []
    for c, (bx, by) in enumerate(space.inplane):
        rows = J[space.offsets[c]:space.offsets[c] + int(np.prod(space.shapes[c]))]
        d = {}
        for key, (a, b, e) in {"1": (1, 0, 0), "2": (0, 1, 0), "3": (0, 0, 1), "33": (0, 0, 2)}.items():
            Sx = _sampling(bx, pts[:, 0], a)
            Sy = _sampling(by, pts[:, 1], b)
            Sz = _sampling(space.z, pts[:, 2], e)
            S = np.einsum("pi,pj,pk->pijk", Sx, Sy, Sz).reshape(len(pts), -1)
            d[key] = S @ rows
        blocks.append(d)
    B = np.stack([
        blocks[0]["1"], blocks[1]["2"], blocks[2]["3"],
        blocks[1]["3"] + blocks[2]["2"],
        blocks[0]["3"] + blocks[2]["1"],
        blocks[0]["2"] + blocks[1]["1"],
    ])
    CB = np.einsum("ij,jpb->ipb", C, B)
    K = sum(B[i].T @ (wts[:, None] * CB[i]) for i in range(6))
    if penalty:
        for c in range(2):
            P = blocks[c]["33"]
            K += 2.0 * penalty * P.T @ (wts[:, None] * P)
    return K
