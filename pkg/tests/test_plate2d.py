import csv

import numpy as np
import pytest

from conftest import separable_field
from thinplate.basis import line
from thinplate.fem3d import DisplacementField3D, VolumeLoad, field_space
from thinplate.material import kl_moduli_from_lame
from thinplate.mesh import build_plate_mesh, build_section_mesh
from thinplate.plate2d import (KLState, RMState, clamped_free, director_gap, fit_rm, gaussian_term,
                               gaussian_term_exact, kl_residual, laplacian_energy, reconstruct_kl_3d,
                               reconstruct_rm_3d, solve_kl, thickness_resultant)

MOD = kl_moduli_from_lame(0.0, 1.0, 1.0)
ONE = lambda x, y: 1.0 + 0 * x  # noqa: E731
# clamped square, uniform load: w(0) = c q a^4 / D with a the side length;
# c frozen from Richardson extrapolation of the BFS solver on 8/16/32 grids
CLAMPED_CENTRE = 0.00126532


@pytest.fixture(scope="module")
def kl():
    return solve_kl(build_section_mesh(1.0, 8, 8), MOD, ONE)


def test_clamped_centre_deflection():
    s = solve_kl(build_section_mesh(1.0, 16, 16), MOD, ONE)
    c = s.evaluate(0.0, 0.0)["w"] * MOD.D_bar / 2.0**4
    assert c == pytest.approx(CLAMPED_CENTRE, rel=1e-5)


def test_clamped_boundary_conditions(kl):
    bnd = kl.mesh.boundary
    assert not kl.w[bnd].any()
    x = kl.mesh.coords[bnd]
    normal = np.where(np.abs(x[:, 0]) == 1.0, kl.grad[bnd, 0], kl.grad[bnd, 1])
    assert not normal.any()
    assert clamped_free(kl.mesh).sum() == 4 * 7 * 7


def test_zero_and_doubled_load(kl):
    zero = solve_kl(kl.mesh, MOD, lambda x, y: 0 * x)
    assert not zero.dofs.any()
    two = solve_kl(kl.mesh, MOD, lambda x, y: 2.0 + 0 * x)
    np.testing.assert_allclose(two.dofs, 2 * kl.dofs, rtol=1e-12, atol=1e-14 * abs(two.dofs).max())


def test_residual_and_symmetry(kl):
    assert kl_residual(kl) <= 1e-10
    w = kl.w.reshape(9, 9)
    np.testing.assert_allclose(w, w.T, atol=1e-12 * w.max())
    np.testing.assert_allclose(w, w[::-1], atol=1e-12 * w.max())


def test_gaussian_term_null_for_clamped_solution(kl):
    assert abs(gaussian_term(kl)) <= 1e-6 * laplacian_energy(kl)


def test_gaussian_term_manufactured_polynomial():
    ell = 1.7

    def hess(x, y):
        a, b = (x**2 - ell**2), (y**2 - ell**2)
        da, db = 4 * x * a, 4 * y * b
        dda, ddb = 12 * x**2 - 4 * ell**2, 12 * y**2 - 4 * ell**2
        return dda * b**2, a**2 * ddb, da * db

    g, lap = gaussian_term_exact(hess, ell)
    assert lap > 0
    assert abs(g) <= 1e-10 * lap


def test_gaussian_term_simple_fields():
    m = build_section_mesh(2.0, 3, 3)
    bx = line("hermite", 3, 2.0)
    cx = bx.interpolate(lambda x: x, lambda x: 1 + 0 * x)
    s = KLState(m, np.outer(cx, cx).ravel(), MOD)
    assert gaussian_term(s) == pytest.approx(-(2 * 2.0) ** 2, rel=1e-13)
    cq = bx.interpolate(lambda x: x**2, lambda x: 2 * x)
    c1 = bx.interpolate(lambda x: 1 + 0 * x, lambda x: 0 * x)
    assert gaussian_term(KLState(m, np.outer(cq, c1).ravel(), MOD)) == pytest.approx(0.0, abs=1e-12)


def test_thickness_resultant():
    b = thickness_resultant(VolumeLoad((0, 0, 3.0), "uniform", 1.0), 0.25)
    assert b(0.1, 0.2) == pytest.approx(1.5, rel=1e-15)


@pytest.fixture(scope="module")
def mesh3d(kl):
    return build_plate_mesh(1.0, 0.1, 8, 8, 2)


def test_reconstruction_kinematics(kl, mesh3d):
    u = reconstruct_kl_3d(kl, mesh3d)
    pts = np.array([[0.3, -0.2, 0.07], [0.55, 0.1, -0.1], [-0.9, 0.8, 0.0]])
    ev = kl.evaluate(pts[:, 0], pts[:, 1])
    expected = np.column_stack([-pts[:, 2] * ev["x"], -pts[:, 2] * ev["y"], ev["w"]])
    np.testing.assert_allclose(u.evaluate(pts), expected, atol=1e-15 * abs(kl.dofs).max())
    zero = reconstruct_kl_3d(KLState(kl.mesh, 0 * kl.dofs, MOD), mesh3d)
    assert not zero.coeffs.any()


def test_fit_rm_on_kl_field(kl, mesh3d):
    state, res = fit_rm(reconstruct_kl_3d(kl, mesh3d))
    assert res <= 1e-14
    assert director_gap(state) <= 1e-12
    np.testing.assert_allclose(state.w.ravel(), kl.dofs, atol=1e-15 * abs(kl.dofs).max())


def _rm_field(mesh3d):
    s = (np.sin, np.cos)
    c = (np.cos, lambda x: -np.sin(x))
    lin = (lambda z: z, lambda z: 1 + 0 * z)
    one = (lambda z: 1 + 0 * z, lambda z: 0 * z)
    bump = (lambda x: (1 - x**2) ** 2, lambda x: -4 * x * (1 - x**2))
    comps = []
    for fac in ([(s, bump, lin)], [(bump, c, lin)], [(bump, bump, one)]):
        comps.append(separable_field(mesh3d, [fac[0]] * 3).components)
    return [comps[0][0], comps[1][1], comps[2][2]]


def test_fit_rm_recovers_independent_director(mesh3d):
    u = DisplacementField3D.from_components(mesh3d, _rm_field(mesh3d))
    state, res = fit_rm(u)
    assert res <= 1e-14
    back = reconstruct_rm_3d(state, mesh3d)
    np.testing.assert_allclose(back.coeffs, u.coeffs, atol=1e-14 * abs(u.coeffs).max())
    assert director_gap(state) > 0.1
    assert not any(np.any(v) for v in state.v)


def test_fit_rm_idempotent(kl, mesh3d, rng):
    u = DisplacementField3D(mesh3d, rng.standard_normal(field_space(mesh3d).size))
    s1, r1 = fit_rm(u)
    assert r1 > 0.1
    s2, r2 = fit_rm(reconstruct_rm_3d(s1, mesh3d))
    assert r2 <= 1e-13
    for a, b in zip((s1.w, *s1.v, *s1.phi), (s2.w, *s2.v, *s2.phi)):
        np.testing.assert_allclose(a, b, atol=1e-13 * max(abs(a).max(), 1.0))


def test_fit_rm_residual_linear_in_quadratic_profile(kl, mesh3d):
    base = reconstruct_kl_3d(kl, mesh3d)
    quad = separable_field(mesh3d, [((np.cos, lambda x: -np.sin(x)), (np.cos, lambda x: -np.sin(x)),
                                     (lambda z: z**2, lambda z: 2 * z)), None, None])
    res = []
    amps = np.array([1e-3, 1e-2, 1e-1])
    for a in amps:
        res.append(fit_rm(DisplacementField3D(mesh3d, base.coeffs + a * quad.coeffs))[1])
    slope = np.polyfit(np.log(amps), np.log(res), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.01)


def test_fit_rm_zero_field(mesh3d):
    state, res = fit_rm(DisplacementField3D.zeros(mesh3d))
    assert res == 0.0 and not state.w.any()


def test_mesh_mismatch(kl):
    with pytest.raises(ValueError):
        reconstruct_kl_3d(kl, build_plate_mesh(1.0, 0.1, 4, 4, 1))


def test_csv_outputs(tmp_path, kl, mesh3d):
    kl.to_csv(tmp_path / "kl.csv")
    rows = list(csv.reader(open(tmp_path / "kl.csv")))
    assert rows[0] == ["x1", "x2", "w", "wx", "wy", "wxy"] and len(rows) == 82
    state, res = fit_rm(reconstruct_kl_3d(kl, mesh3d))
    state.to_csv(tmp_path / "rm.csv", res)
    rows = list(csv.reader(open(tmp_path / "rm.csv")))
    assert rows[0] == ["x1", "x2", "w", "v1", "v2", "phi1", "phi2", "residual"]
    data = np.array(rows[1:], dtype=float)
    np.testing.assert_allclose(data[:, 2], kl.w, atol=1e-15)
    assert isinstance(state, RMState)
