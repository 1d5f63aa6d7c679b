import csv

import numpy as np
import pytest

from conftest import element_oracle_error, oracle_stiffness, separable_field
from thinplate.fem3d import (AssemblyError, DisplacementField3D, VolumeLoad, assemble, field_space,
                             l2_norm, material_matrix, shear_norm, solve,
                             stationarity_residual, total_energy)
from thinplate.material import ElasticityTensor, KappaEnergyParams, kl_moduli_from_lame
from thinplate.mesh import build_plate_mesh, build_section_mesh
from thinplate.plate2d import reconstruct_kl_3d, solve_kl, thickness_resultant

ISO = ElasticityTensor.isotropic(0.7, 1.3)
LOAD = VolumeLoad((0.2, -0.1, 1.0), "cosine", 1.0)


@pytest.fixture(scope="module")
def mesh():
    return build_plate_mesh(1.0, 0.1, 3, 3, 2)


@pytest.fixture(scope="module")
def system(mesh):
    return assemble(mesh, ISO, KappaEnergyParams(1.0, 0.005, 0.01), LOAD)


@pytest.fixture(scope="module")
def solution(system):
    return solve(system)


@pytest.mark.parametrize("kappa,eps", [(0.0, 0.01), (1.0, 0.005), (0.5, 0.0025)])
def test_element_matrices_match_oracle(mesh, kappa, eps):
    p = KappaEnergyParams(kappa, eps, 0.01)
    worst, types = element_oracle_error(mesh, material_matrix(ISO, p), p.penalty)
    assert types == 18
    assert worst <= 1e-12


def test_assembled_matrix_matches_oracle(mesh, system):
    p = system.params
    O = oracle_stiffness(mesh, material_matrix(ISO, p), p.penalty)
    K = system.K.toarray()
    assert np.abs(K - O).max() <= 1e-12 * np.abs(O).max()


def test_general_tensor_matches_isotropic(mesh):
    p = KappaEnergyParams(0.0, 0.01, 0.01)
    a = assemble(mesh, ISO, p, None).K
    b = assemble(mesh, ElasticityTensor.general(ISO.matrix()), p, None).K
    assert abs(a - b).max() <= 1e-14 * abs(a).max()
    with pytest.raises(AssemblyError):
        assemble(mesh, ElasticityTensor.general(ISO.matrix()), KappaEnergyParams(1.0, 0.005, 0.01), None)


def test_symmetric_and_psd(system, rng):
    K = system.K
    assert abs(K - K.T).max() <= 1e-14 * abs(K).max()
    for _ in range(5):
        u = rng.standard_normal(K.shape[0])
        assert u @ (K @ u) >= -1e-12 * (u @ u)


def test_rigid_translation_has_zero_energy(mesh, system):
    f = separable_field(mesh, [((lambda x: 1 + 0 * x, lambda x: 0 * x),) * 3] * 3)
    np.testing.assert_allclose(f.evaluate([[0.3, -0.2, 0.05]]), [[1, 1, 1]], rtol=1e-14)
    u = f.coeffs
    assert abs(u @ (system.K @ u)) <= 1e-12 * abs(system.K).max() * (u @ u)


def test_zero_load(mesh):
    s = assemble(mesh, ISO, KappaEnergyParams(1.0, 0.005, 0.01), VolumeLoad((0, 0, 0), "uniform", 1.0))
    assert not s.f.any()
    u = solve(s)
    assert not u.coeffs.any()
    assert total_energy(s, u) == 0.0


def test_stationarity(system, solution):
    assert stationarity_residual(system, solution) <= 1e-10
    assert stationarity_residual(system, DisplacementField3D.zeros(system.mesh)) == 1.0


def test_constraints_hold(system, solution):
    assert not solution.coeffs[~system.free].any()
    x = np.array([[1.0, 0.3, 0.02], [-0.4, -1.0, -0.1], [1.0, 1.0, 0.1]])
    np.testing.assert_allclose(solution.evaluate(x), 0.0, atol=1e-15)


def test_linearity(system, solution):
    s2 = assemble(system.mesh, ISO, system.params, LOAD.scaled(3.0))
    u2 = solve(s2)
    np.testing.assert_allclose(u2.coeffs, 3.0 * solution.coeffs, rtol=1e-9, atol=1e-12 * abs(u2.coeffs).max())


def test_dense_oracle_solution(system, solution):
    free = system.free
    K = system.K.toarray()[np.ix_(free, free)]
    u = np.linalg.solve(K, system.f[free])
    e_dense = 0.5 * u @ K @ u - system.f[free] @ u
    assert abs(total_energy(system, solution) - e_dense) <= 1e-10 * abs(e_dense)


def test_energy_at_minimizer(system, solution):
    e = total_energy(system, solution)
    assert e < 0
    assert e == pytest.approx(-0.5 * system.f @ solution.coeffs, rel=1e-10)
    assert total_energy(system, DisplacementField3D.zeros(system.mesh)) == 0.0


def test_residual_linear_in_perturbation(system, solution, rng):
    d = rng.standard_normal(system.K.shape[0]) * system.free
    d *= np.abs(solution.coeffs).max() / np.abs(d).max()
    res = []
    for delta in (1e-2, 1e-3, 1e-4, 1e-5):
        v = DisplacementField3D(system.mesh, solution.coeffs + delta * d)
        res.append(stationarity_residual(system, v))
    slope = np.polyfit(np.log10([1e-2, 1e-3, 1e-4, 1e-5]), np.log10(res), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.02)


def test_minimal_against_plate_reconstruction():
    ell, t = 1.0, 0.01
    mesh = build_plate_mesh(ell, t, 4, 4, 1)
    load = VolumeLoad((0, 0, 1.0), "uniform", ell)
    s = assemble(mesh, ElasticityTensor.isotropic(0.0, 1.0), KappaEnergyParams(0.0, 0.01, 0.01), load)
    u = solve(s)
    kl = solve_kl(build_section_mesh(ell, 4, 4), kl_moduli_from_lame(0.0, 1.0, t), thickness_resultant(load, t))
    competitor = reconstruct_kl_3d(kl, mesh)
    assert total_energy(s, u) <= total_energy(s, competitor)
    # nearly optimal: the thin limit of the 3D problem is the plate problem
    assert total_energy(s, competitor) == pytest.approx(total_energy(s, u), rel=1e-2)


def test_penalty_increases_energy_of_curved_profiles(mesh):
    f = separable_field(mesh, [((np.cos, lambda x: -np.sin(x)), (np.cos, lambda x: -np.sin(x)),
                                (lambda z: z**2, lambda z: 2 * z)), None, None])
    values = []
    for kappa in (0.0, 0.5, 1.0, 2.0):
        s = assemble(mesh, ElasticityTensor.isotropic(0.0, 1.0), KappaEnergyParams(kappa, 0.005, 0.01), None)
        values.append(f.coeffs @ (s.K @ f.coeffs))
    assert np.all(np.diff(values) > 0)


def test_kl_fields_are_shear_free():
    mesh = build_plate_mesh(1.0, 0.05, 4, 4, 2)
    kl = solve_kl(build_section_mesh(1.0, 4, 4), kl_moduli_from_lame(0.0, 1.0, 0.05), lambda x, y: 1.0 + 0 * x)
    u = reconstruct_kl_3d(kl, mesh)
    assert shear_norm(u) <= 1e-12 * l2_norm(u)


def test_l2_norm_of_constant(small_mesh):
    one = (lambda x: 1 + 0 * x, lambda x: 0 * x)
    f = separable_field(small_mesh, [None, None, ((lambda x: 2 + 0 * x, lambda x: 0 * x), one, one)])
    assert l2_norm(f) == pytest.approx(2.0 * np.sqrt(2 * 2 * 0.2), rel=1e-14)


def test_expand_reduce_round_trip(mesh, rng):
    space = field_space(mesh)
    c = rng.standard_normal(space.size)
    np.testing.assert_allclose(space.reduce(space.expand(c)), c, rtol=0, atol=1e-14)


def test_csv(tmp_path, solution):
    path = tmp_path / "field.csv"
    solution.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x1", "x2", "x3", "u1", "u2", "u3"]
    assert len(rows) == 1 + solution.mesh.n_nodes
    data = np.array(rows[1:], dtype=float)
    np.testing.assert_array_equal(data[:, 3:], solution.nodal_values())


def test_load_validation():
    with pytest.raises(ValueError):
        VolumeLoad((0, 0, 1), "gaussian", 1.0)
    with pytest.raises(ValueError):
        VolumeLoad((0, 1), "uniform", 1.0)
