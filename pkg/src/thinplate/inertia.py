"""Inertial working integrals along the thickness family.

A manufactured acceleration family with in-plane components
(eps/eps_r) a_alpha g(x1, x2) and transverse component a_3 g(x1, x2) is
tested against psi_i g(x1, x2). The classical working loses the in-plane
part linearly in eps; the eps_r-weighted working keeps it.
"""

from dataclasses import dataclass

import numpy as np

from .fem3d import VolumeLoad
from .mesh import build_section_mesh
from .basis import gauss01

N_GAUSS = 4


@dataclass(frozen=True)
class AccelerationProfile:
    rho: float = 1.0
    accel: tuple = (-1.0, -1.0, -1.0)
    psi: tuple = (1.0, 1.0, 1.0)
    profile: str = "cosine"
    ell: float = 100.0
    h_r: float = 1.0
    eps_r: float = 0.01
    n_cells: int = 8

    def __post_init__(self):
        if len(self.accel) != 3 or len(self.psi) != 3:
            raise ValueError("accel and psi need three components")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")

    def ratio(self, eps):
        if not 0 < eps <= self.eps_r:
            raise ValueError(f"epsilon must lie in (0, eps_r={self.eps_r}], got {eps}")
        return eps / self.eps_r

    def acceleration(self, eps):
        """Amplitudes of the acceleration at eps."""
        r = self.ratio(eps)
        a1, a2, a3 = self.accel
        return (r * a1, r * a2, a3)

    def scaled(self, accel_factor=1.0, psi_factor=1.0):
        return AccelerationProfile(self.rho, tuple(a * accel_factor for a in self.accel),
                                   tuple(p * psi_factor for p in self.psi), self.profile,
                                   self.ell, self.h_r, self.eps_r, self.n_cells)


def profile_moment(p):
    """Thickness-normalized int g^2 over the reference box, by Gauss quadrature."""
    g, w = gauss01(N_GAUSS)
    mesh = build_section_mesh(p.ell, p.n_cells, p.n_cells)
    x = (-p.ell + (np.arange(p.n_cells)[:, None] + g) * mesh.hx).ravel()
    wx = np.tile(w * mesh.hx, p.n_cells)
    X, Y = np.meshgrid(x, x, indexing="ij")
    shape = VolumeLoad((1.0, 1.0, 1.0), p.profile, p.ell).shape(X, Y)
    # fields are x3-independent: thickness integral / (2 h_r) = 1
    return float(np.sum(np.outer(wx, wx) * shape**2))


def _parts(p, eps, weight):
    m = profile_moment(p)
    acc = p.acceleration(eps)
    inplane = -p.rho * weight * (acc[0] * p.psi[0] + acc[1] * p.psi[1]) * m
    transverse = -p.rho * acc[2] * p.psi[2] * m
    return transverse + inplane, inplane


def inertial_working_classical(p, eps):
    """(total, in-plane part) of -int rho udd . psi on the thickness-normalized box."""
    return _parts(p, eps, 1.0)


def inertial_working_modified(p, eps):
    """Same with the in-plane terms weighted by eps_r/eps."""
    return _parts(p, eps, 1.0 / p.ratio(eps))


def inertia_table(p, ladder):
    """Rows (eps, classical_total, classical_inplane, modified_total, modified_inplane)."""
    rows = []
    for eps in ladder:
        ct, ci = inertial_working_classical(p, eps)
        mt, mi = inertial_working_modified(p, eps)
        rows.append((float(eps), ct, ci, mt, mi))
    return rows
