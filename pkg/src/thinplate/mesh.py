"""Structured tensor-product meshes of the square plate and its cross-section."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))


class MeshError(ValueError):
    pass


def _check_counts(**counts):
    for name, n in counts.items():
        if int(n) != n or n < 1:
            raise MeshError(f"{name} must be a positive integer, got {n}")


@dataclass(frozen=True)
class Mesh2D:
    """Uniform quadrilateral grid on (-ell, ell)^2."""

    ell: float
    nx: int
    ny: int

    @property
    def hx(self):
        return 2.0 * self.ell / self.nx

    @property
    def hy(self):
        return 2.0 * self.ell / self.ny

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    @cached_property
    def x1(self):
        return np.linspace(-self.ell, self.ell, self.nx + 1)

    @cached_property
    def x2(self):
        return np.linspace(-self.ell, self.ell, self.ny + 1)

    @cached_property
    def coords(self):
        X, Y = np.meshgrid(self.x1, self.x2)
        return np.column_stack([X.ravel(), Y.ravel()])

    def node(self, i, j):
        return j * (self.nx + 1) + i

    @cached_property
    def cells(self):
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        i, j = i.ravel(), j.ravel()
        return np.column_stack([self.node(i + a, j + b) for a, b in CORNERS])

    @cached_property
    def cell_origins(self):
        return self.coords[self.cells[:, 0]]

    @cached_property
    def boundary(self):
        x, y = self.coords.T
        return (np.abs(x) == self.ell) | (np.abs(y) == self.ell)

    def locate(self, x1, x2):
        """Cell index and local coordinates in [0, 1] of in-plane points."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        fi = (x1 + self.ell) / self.hx
        fj = (x2 + self.ell) / self.hy
        i = np.clip(np.floor(fi).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(fj).astype(int), 0, self.ny - 1)
        return j * self.nx + i, fi - i, fj - j


@dataclass(frozen=True)
class Mesh3D:
    """Uniform hexahedral grid on (-ell, ell)^2 x (-t, t).

    Nodes are numbered level by level: ``k * n_plane + section node``.
    """

    ell: float
    half_thickness: float
    nx: int
    ny: int
    nz: int

    @cached_property
    def section(self):
        return Mesh2D(self.ell, self.nx, self.ny)

    @property
    def hz(self):
        return 2.0 * self.half_thickness / self.nz

    @property
    def n_plane(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_nodes(self):
        return self.n_plane * (self.nz + 1)

    @cached_property
    def x3(self):
        z = np.linspace(-self.half_thickness, self.half_thickness, self.nz + 1)
        z[0], z[-1] = -self.half_thickness, self.half_thickness
        return z

    @cached_property
    def coords(self):
        xy = self.section.coords
        return np.vstack([np.column_stack([xy, np.full(len(xy), z)]) for z in self.x3])

    @cached_property
    def cells(self):
        c2 = self.section.cells
        out = []
        for k in range(self.nz):
            out.append(np.hstack([c2 + k * self.n_plane, c2 + (k + 1) * self.n_plane]))
        return np.vstack(out)

    @property
    def n_cells(self):
        return self.nx * self.ny * self.nz

    @cached_property
    def dirichlet(self):
        """Boolean per node: True on the clamped lateral boundary."""
        return np.tile(self.section.boundary, self.nz + 1)

    def cell_volumes(self):
        return np.full(self.n_cells, self.section.hx * self.section.hy * self.hz)


def build_plate_mesh(ell, half_thickness, nx, ny, nz=1):
    _check_counts(nx=nx, ny=ny, nz=nz)
    if not (ell > 0 and half_thickness > 0):
        raise MeshError("ell and half_thickness must be positive")
    return Mesh3D(float(ell), float(half_thickness), int(nx), int(ny), int(nz))


def build_section_mesh(ell, nx, ny):
    _check_counts(nx=nx, ny=ny)
    if not ell > 0:
        raise MeshError("ell must be positive")
    return Mesh2D(float(ell), int(nx), int(ny))
