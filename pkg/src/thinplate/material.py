"""Linear elastic material models and stored-energy densities.

Voigt order is (11, 22, 33, 23, 13, 12) with engineering shears
(gamma_ij = 2 E_ij for i != j). Every 6x6 matrix in this package uses it.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

VOIGT = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class ElasticityTensor:
    """Isotropic (Lame) or general (6x6 Voigt) elasticity tensor."""

    lam: Optional[float] = None
    mu: Optional[float] = None
    voigt: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.voigt is None:
            if self.lam is None or self.mu is None:
                raise MaterialError("isotropic material needs both lambda and mu")
            if not self.mu > 0:
                raise MaterialError(f"mu must be positive, got {self.mu}")
            if not 3 * self.lam + 2 * self.mu > 0:
                raise MaterialError(f"3*lambda + 2*mu must be positive, got {3 * self.lam + 2 * self.mu}")
        else:
            C = np.array(self.voigt, dtype=float)
            if C.shape != (6, 6):
                raise MaterialError(f"voigt matrix must be 6x6, got {C.shape}")
            if not np.array_equal(C, C.T):
                raise MaterialError("voigt matrix must be symmetric")
            try:
                np.linalg.cholesky(C)
            except np.linalg.LinAlgError:
                raise MaterialError("voigt matrix must be positive definite") from None
            C.setflags(write=False)
            object.__setattr__(self, "voigt", C)

    @classmethod
    def isotropic(cls, lam, mu):
        return cls(lam=float(lam), mu=float(mu))

    @classmethod
    def general(cls, C):
        return cls(voigt=np.asarray(C, dtype=float))

    @property
    def is_isotropic(self):
        return self.voigt is None

    def matrix(self):
        """6x6 Voigt stiffness acting on engineering strains."""
        if self.voigt is not None:
            return np.array(self.voigt)
        return kappa_voigt(self.lam, self.mu, 1.0, 1.0)


def kappa_voigt(lam, mu, c33, cross):
    """Voigt matrix of the isotropic energy with modified E33 coefficients.

    ``c33`` multiplies the E33^2 term and ``cross`` the (E11+E22)E33 term;
    with both equal to one this is the plain isotropic tensor.
    """
    C = np.zeros((6, 6))
    d = 2.0 * mu + lam
    C[0, 0] = C[1, 1] = d
    C[0, 1] = C[1, 0] = lam
    C[2, 2] = d * c33
    C[0, 2] = C[2, 0] = C[1, 2] = C[2, 1] = lam * cross
    C[3, 3] = C[4, 4] = C[5, 5] = mu
    return C


@dataclass(frozen=True)
class KappaEnergyParams:
    kappa: float
    eps: float
    eps_r: float

    def __post_init__(self):
        if not self.kappa >= 0:
            raise MaterialError(f"kappa must be nonnegative, got {self.kappa}")
        if not 0 < self.eps <= self.eps_r:
            raise MaterialError(f"epsilon must lie in (0, {self.eps_r}], got {self.eps}")

    @property
    def ratio(self):
        """eps_r / eps (>= 1)."""
        return self.eps_r / self.eps

    # Written as 1 + kappa*(...) so that eps == eps_r gives exactly 1.0.
    @property
    def c33(self):
        r = self.ratio
        return 1.0 + self.kappa * ((r - 1.0) * (r + 1.0))

    @property
    def cross(self):
        return 1.0 + self.kappa * (self.ratio - 1.0)

    @property
    def penalty(self):
        return self.kappa * ((self.eps_r - self.eps) / self.eps) ** 2


def symmetric_gradient(G):
    G = np.asarray(G, dtype=float)
    return 0.5 * (G + G.T)


def to_voigt(E):
    """Symmetric 3x3 strain -> engineering Voigt 6-vector."""
    E = np.asarray(E, dtype=float)
    return np.array([E[0, 0], E[1, 1], E[2, 2], 2 * E[1, 2], 2 * E[0, 2], 2 * E[0, 1]])


def from_voigt(v):
    v = np.asarray(v, dtype=float)
    return np.array([
        [v[0], 0.5 * v[5], 0.5 * v[4]],
        [0.5 * v[5], v[1], 0.5 * v[3]],
        [0.5 * v[4], 0.5 * v[3], v[2]],
    ])


def energy_density(E, C):
    """Stored energy W(E) of a symmetric strain for the given material."""
    E = np.asarray(E, dtype=float)
    if C.is_isotropic:
        return C.mu * np.sum(E * E) + 0.5 * C.lam * np.trace(E) ** 2
    v = to_voigt(E)
    return 0.5 * v @ C.voigt @ v


def energy_density_grouped(E, lam, mu):
    """The isotropic density regrouped into in-plane, normal and shear parts."""
    d = 0.5 * (2 * mu + lam)
    a = E[0, 0] + E[1, 1]
    return (d * a**2 - 2 * mu * (E[0, 0] * E[1, 1] - E[0, 1] ** 2)
            + d * E[2, 2] ** 2 + lam * a * E[2, 2]
            + 2 * mu * (E[0, 2] ** 2 + E[1, 2] ** 2))


def energy_density_kappa(E, u33, p, lam, mu):
    """Modified density W_eps(E, u; kappa).

    ``u33`` holds (u1,33, u2,33). At eps == eps_r it coincides with the
    isotropic density for every kappa.
    """
    E = np.asarray(E, dtype=float)
    d = 0.5 * (2 * mu + lam)
    a = E[0, 0] + E[1, 1]
    return (d * a**2 - 2 * mu * (E[0, 0] * E[1, 1] - E[0, 1] ** 2)
            + d * p.c33 * E[2, 2] ** 2 + lam * p.cross * a * E[2, 2]
            + 2 * mu * (E[0, 2] ** 2 + E[1, 2] ** 2)
            + p.penalty * (u33[0] ** 2 + u33[1] ** 2))


def kappa_form_matrix(p, lam, mu):
    """8x8 coefficient matrix Q with W_eps = z.Q.z.

    z = (E11, E22, E33, E23, E13, E12, u1,33, u2,33) with tensor (not
    engineering) shear components.
    """
    Q = np.zeros((8, 8))
    d = 0.5 * (2 * mu + lam)
    Q[0, 0] = Q[1, 1] = d
    Q[0, 1] = Q[1, 0] = 0.5 * (2 * d - 2 * mu)
    Q[2, 2] = d * p.c33
    Q[0, 2] = Q[2, 0] = Q[1, 2] = Q[2, 1] = 0.5 * lam * p.cross
    Q[3, 3] = Q[4, 4] = 2 * mu
    Q[5, 5] = 2 * mu
    Q[6, 6] = Q[7, 7] = p.penalty
    return Q


@dataclass(frozen=True)
class KLModuli:
    D: float
    d: float
    h: float

    def __post_init__(self):
        if not (self.D > 0 and self.d > 0):
            raise MaterialError("plate moduli must be positive")

    @property
    def D_bar(self):
        return self.D * self.h**3

    @property
    def d_bar(self):
        return self.d * self.h**3


def kl_moduli_from_lame(lam, mu, h):
    """Clamped-plate bending moduli of an isotropic layer of half-thickness h.

    Uses the plane-stress reduced modulus lam* = 2 lam mu / (lam + 2 mu).
    """
    ElasticityTensor.isotropic(lam, mu)
    lam_star = 2.0 * lam * mu / (lam + 2.0 * mu)
    return KLModuli(D=2.0 / 3.0 * (2.0 * mu + lam_star), d=8.0 / 3.0 * mu, h=float(h))
