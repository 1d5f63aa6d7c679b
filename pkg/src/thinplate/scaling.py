"""Thickness family, scaling map, fibre average and load sequences.

All thickness parameters are measured relative to eps_r: the domain at eps
is omega x (eps/eps_r)(-h_r, h_r), so eps = eps_r reproduces the real plate.
The scaling map s(y1, y2, y3) = (y1, y2, (eps/eps_r) y3) pulls fields on the
thin domain back to the reference box of half-thickness h_r.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .fem3d import DisplacementField3D, VolumeLoad, field_space
from .mesh import Mesh3D


class ScalingError(ValueError):
    pass


@dataclass(frozen=True)
class DomainFamily:
    ell_r: float = 100.0
    h_r: float = 1.0

    def __post_init__(self):
        if not (self.ell_r > 0 and self.h_r > 0):
            raise ScalingError("ell_r and h_r must be positive")
        if not 0 < self.eps_r <= 1:
            raise ScalingError(f"eps_r = h_r/ell_r must lie in (0, 1], got {self.eps_r}")

    @property
    def eps_r(self):
        return self.h_r / self.ell_r

    def ratio(self, eps):
        check_eps(self, eps)
        return eps / self.eps_r


class PlateBox(NamedTuple):
    ell: float
    half_thickness: float


def check_eps(family, eps):
    if not (np.isfinite(eps) and 0 < eps <= family.eps_r):
        raise ScalingError(f"epsilon must lie in (0, eps_r={family.eps_r}], got {eps}")


def domain_at(family, eps):
    """Cross-section half-side and half-thickness of the plate at eps."""
    return PlateBox(family.ell_r, family.ratio(eps) * family.h_r)


def reference_mesh(mesh, family):
    """The eps_r mesh with the same grid as ``mesh``."""
    return Mesh3D(mesh.ell, family.h_r, mesh.nx, mesh.ny, mesh.nz)


def _rescale(field, thickness=1.0, inplane=1.0):
    """Coupled coefficients of the field with standard coefficients scaled.

    Odd thickness coefficients get ``thickness``, in-plane components
    ``inplane``. Works on the coupled vector so unit factors are bit-exact.
    """
    sp_ = field.space
    c = field.coeffs.copy()
    c[sp_.slope_mask] *= thickness
    comps = sp_.split(c)
    comps[0] *= inplane
    comps[1] *= inplane
    # the companion -x3 grad(w) part of each x3 coefficient must stay unscaled
    k = 1.0 - thickness * inplane
    if k != 0.0:
        Gx, Gy = sp_.companions
        w = comps[2][:, :, 0]
        comps[0][:, :, 1] += k * (Gx @ w)
        comps[1][:, :, 1] += k * (w @ Gy.T)
    return c


def pullback(field, family):
    """u o s on the reference box; x3-slope coefficients pick up the ratio."""
    mesh = field.mesh
    if mesh.ell != family.ell_r:
        raise ScalingError("field mesh does not belong to this domain family")
    ratio = mesh.half_thickness / family.h_r
    ref = reference_mesh(mesh, family)
    eps = ratio * family.eps_r if field.eps is None else field.eps
    return DisplacementField3D(ref, _rescale(field, thickness=ratio), eps)


def pushforward(field, family, eps):
    """Inverse of pullback: transport a reference-box field to the domain at eps."""
    mesh = field.mesh
    if mesh.ell != family.ell_r or mesh.half_thickness != family.h_r:
        raise ScalingError("pushforward expects a field on the reference box")
    ratio = family.ratio(eps)
    box = domain_at(family, eps)
    target = Mesh3D(mesh.ell, box.half_thickness, mesh.nx, mesh.ny, mesh.nz)
    return DisplacementField3D(target, _rescale(field, thickness=1.0 / ratio), eps)


@dataclass
class FiberAverage:
    """Thickness average of a 3D field as in-plane coefficient tensors."""

    mesh: Mesh3D
    tensors: list

    def evaluate(self, x1, x2):
        from .plate2d import evaluate_tensor

        sp_ = field_space(self.mesh)
        return np.stack([evaluate_tensor(bx, by, T, x1, x2)
                         for (bx, by), T in zip(sp_.inplane, self.tensors)], axis=-1)

    def nodal(self):
        """(n_nodes, 3) averages at the section nodes."""
        x, y = self.mesh.section.coords.T
        return self.evaluate(x, y)


def fiber_average(field):
    """q(u)(x1, x2) = (1/2t) int u dx3, integrated exactly."""
    z = field.space.z
    m0 = z.integrals() / (2.0 * field.mesh.half_thickness)
    return FiberAverage(field.mesh, [C @ m0 for C in field.components])


@dataclass(frozen=True)
class LoadSpec:
    """Body force profile and per-component scaling exponents."""

    profile: str = "uniform"
    amplitude: tuple = (0.0, 0.0, 1.0)
    exponents: tuple = (1.0, 1.0, 2.0)

    def __post_init__(self):
        if len(self.exponents) != 3 or len(self.amplitude) != 3:
            raise ScalingError("load amplitude and exponents need three components")


def load_sequence(spec, family, eps):
    """b_eps with components (eps/eps_r)^p_i times the eps_r profile."""
    ratio = family.ratio(eps)
    amp = tuple(a * ratio**p for a, p in zip(spec.amplitude, spec.exponents))
    return VolumeLoad(amp, spec.profile, family.ell_r)


def beta_rescale(u, b, eps, beta):
    """(u / eps^beta, b / eps^beta); minimizers are equivariant under this map."""
    factor = 1.0 / eps**beta
    if isinstance(u, DisplacementField3D):
        u = DisplacementField3D(u.mesh, u.coeffs * factor, u.eps)
    else:
        u = np.asarray(u) * factor
    if b is None:
        pass
    elif isinstance(b, VolumeLoad):
        b = b.scaled(factor)
    else:
        b = np.asarray(b) * factor
    return u, b


@dataclass
class ScaledSolution:
    pullback: DisplacementField3D
    eps: float
    scaled: DisplacementField3D


def scaled_components(field, eps, eps_r):
    """Divide the in-plane components of a pulled-back field by eps/eps_r."""
    ratio = eps / eps_r
    return ScaledSolution(field, eps, DisplacementField3D(field.mesh, _rescale(field, inplane=1.0 / ratio), eps))
