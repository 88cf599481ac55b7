import json
import os
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from paretotrace.core import FiniteDifferenceError, InputError
from paretotrace.init import recover_weight
from paretotrace.shape_fem import (DEFAULT_N_ANGLES, GeometryError, MaterialData,
                                   ShapeGeometry, ShapeProblem, basis_matrix,
                                   bspline_profiles, build_mesh, export_mesh, kernels,
                                   sigma0_for_weight, solve_state, volume,
                                   weibull_direction_factor, weibull_intensity)
from paretotrace.shape_fem import test_case_1 as make_test_case_1
from paretotrace.shape_fem import test_case_2 as make_test_case_2
from paretotrace.shape_fem import _kernels_py

try:
    from paretotrace.shape_fem import _kernels_c
except ImportError:
    _kernels_c = None


@pytest.fixture(scope="module")
def tc1():
    return make_test_case_1()


@pytest.fixture(scope="module")
def rod_state(tc1):
    return solve_state(tc1.geometry, tc1.material)


def test_mesh_counts_and_area():
    g = ShapeGeometry()
    mesh = build_mesh(g)
    assert mesh.n_nodes == 287
    assert mesh.elements.shape == (480, 3)
    assert np.all(mesh.areas() > 0)
    assert volume(g) == pytest.approx(0.2, rel=1e-14)
    assert g.n_free == 6
    np.testing.assert_allclose(mesh.nodes[mesh.left_boundary()], [[0, -0.1 + 0.2 * j / 6]
                                                                 for j in range(7)], atol=1e-15)
    np.testing.assert_allclose(mesh.nodes[mesh.right_boundary(), 0], 1.0)


def test_columns_have_fixed_abscissae():
    g = ShapeGeometry(design=[0.05, -0.02, 0.0, 0.25, 0.15, 0.22])
    mesh = build_mesh(g)
    np.testing.assert_allclose(mesh.nodes[:, 0].reshape(41, 7), np.linspace(0, 1, 41)[:, None]
                               * np.ones((1, 7)), atol=0)


def test_partition_of_unity_and_clamped_ends():
    g = ShapeGeometry(design=[0.3, 0.3, 0.3, 0.3, 0.3, 0.3], left_midline=0.3,
                      right_midline=0.3, left_height=0.3, right_height=0.3)
    ml, th = bspline_profiles(g)
    np.testing.assert_allclose(ml, 0.3, atol=1e-15)
    np.testing.assert_allclose(th, 0.3, atol=1e-15)
    np.testing.assert_allclose(basis_matrix(g).sum(axis=1), 1.0, atol=1e-15)
    g = ShapeGeometry(left_midline=0.1, right_midline=-0.4, left_height=0.2, right_height=0.5,
                      design=[1, 2, 3, 0.4, 0.5, 0.6])
    ml, th = bspline_profiles(g)
    assert (ml[0], ml[-1], th[0], th[-1]) == pytest.approx((0.1, -0.4, 0.2, 0.5), abs=1e-15)


def test_interpolating_basis_limit():
    g = ShapeGeometry(nx=9, n_basis=9, degree=1, design=np.linspace(0.1, 0.9, 14))
    np.testing.assert_allclose(basis_matrix(g), np.eye(9), atol=1e-15)
    ml, th = bspline_profiles(g)
    cml, cth = g.coefficients()
    np.testing.assert_allclose(ml, cml, atol=1e-15)
    np.testing.assert_allclose(th, cth, atol=1e-15)


def test_geometry_error_names_column():
    g = ShapeGeometry(design=[0.0, 0.0, 0.0, 0.2, -0.5, 0.2])
    with pytest.raises(GeometryError) as info:
        build_mesh(g)
    col = info.value.column
    assert col is not None and f"column {col}" in str(info.value)
    assert bspline_profiles(g)[1][col] <= 0
    assert np.all(bspline_profiles(g)[1][:col] > 0)


@pytest.mark.parametrize("kwargs", [{"nx": 1}, {"n_basis": 1}, {"diagonal": "ur-ll"},
                                    {"design": [0.0] * 5}, {"length": 0.0}])
def test_geometry_validation(kwargs):
    with pytest.raises(InputError):
        ShapeGeometry(**kwargs)


@pytest.mark.parametrize("kwargs", [{"youngs_modulus": 0.0}, {"poisson_ratio": 0.5},
                                    {"weibull_modulus": 4.0}, {"weibull_modulus": 26.0},
                                    {"sigma0": -1.0}])
def test_material_validation(kwargs):
    with pytest.raises(InputError):
        MaterialData(**kwargs)


def test_lame_constants():
    m = MaterialData(youngs_modulus=2.5, poisson_ratio=0.25)
    assert m.lame_lambda == pytest.approx(1.0)
    assert m.lame_mu == pytest.approx(1.0)


def test_thickness_scaling_scales_volume():
    g = ShapeGeometry(design=[0.02, -0.01, 0.0, 0.25, 0.18, 0.21])
    a = 1.7
    ml, th = g.coefficients()
    scaled = ShapeGeometry(left_height=a * th[0], right_height=a * th[-1],
                           design=np.concatenate([ml[1:-1], a * th[1:-1]]))
    assert volume(scaled) == pytest.approx(a * volume(g), rel=1e-13)


def test_unloaded_body_has_no_displacement(tc1):
    mat = replace(tc1.material, surface_load=0.0)
    st = solve_state(tc1.geometry, mat)
    assert np.all(st.displacement == 0.0)
    assert np.all(st.stress == 0.0)
    assert weibull_intensity(st, mat) == 0.0


def test_uniaxial_tension_stress(rod_state):
    st = rod_state
    centroids = st.nodes[st.elements].mean(axis=1)
    mid = (centroids[:, 0] > 0.4) & (centroids[:, 0] < 0.6)
    np.testing.assert_allclose(st.stress[mid, 0], 1e7, rtol=0.05)
    assert np.max(np.abs(st.stress[mid, 1])) < 0.05 * 1e7
    tensors = st.stress_tensors()
    np.testing.assert_array_equal(tensors, np.swapaxes(tensors, 1, 2))


def test_clamped_dofs_and_residual(rod_state):
    st = rod_state
    assert np.all(st.displacement[:st.n_fixed] == 0.0)
    assert st.residual_norm() <= 1e-9 * (1 + np.linalg.norm(st.load))
    k = st.stiffness().toarray()
    np.testing.assert_array_equal(k, k.T)


def test_stiffness_spd_on_small_mesh():
    g = ShapeGeometry(nx=5, ny=3)
    st = solve_state(g, MaterialData())
    assert np.linalg.eigvalsh(st.stiffness().toarray()).min() > 0


def test_displacement_scales_with_compliance(tc1, rod_state):
    mat = replace(tc1.material, youngs_modulus=2 * tc1.material.youngs_modulus)
    st = solve_state(tc1.geometry, mat)
    assert np.linalg.norm(st.displacement) == pytest.approx(
        0.5 * np.linalg.norm(rod_state.displacement), rel=1e-12)
    np.testing.assert_allclose(st.stress, rod_state.stress, rtol=1e-9, atol=1e-6)


def test_body_force_load_totals():
    g = ShapeGeometry(nx=5, ny=3)
    mat = MaterialData(surface_load=0.0, body_force=(0.0, -2.0))
    st = solve_state(g, mat)
    from paretotrace.shape_fem.fem import load_vector
    f = load_vector(st.mesh, mat, st.areas)
    assert f[1::2].sum() == pytest.approx(-2.0 * volume(g))
    assert f[0::2].sum() == 0.0
    assert np.linalg.norm(st.displacement) > 0


def test_weibull_direction_factor():
    assert weibull_direction_factor(5) == pytest.approx(945 / 3840, rel=1e-14)
    assert weibull_direction_factor(1) == pytest.approx(0.5, rel=1e-14)


def _dense_angle_oracle(stress, m, n=1_000_000):
    t = 2 * np.pi * np.arange(n) / n
    normal = stress[0] * np.cos(t) ** 2 + stress[1] * np.sin(t) ** 2 + 2 * stress[2] * np.cos(t) * np.sin(t)
    return float(np.mean(np.maximum(normal, 0.0) ** m))


@pytest.mark.parametrize("stress,m", [((1.0, 0.0, 0.0), 5.0), ((0.7, -0.3, 0.4), 7.5),
                                      ((-1.0, -2.0, 0.1), 5.0), ((0.2, 0.9, -0.5), 12.0)])
def test_weibull_single_element_against_dense_oracle(stress, m):
    s = np.array([stress]) * 3e6
    ref = _dense_angle_oracle(np.array(stress) * 0.5, m)
    val = kernels.weibull_sum(s, np.array([1.0]), 6e6, m, DEFAULT_N_ANGLES)
    assert val == pytest.approx(ref, rel=1e-4, abs=1e-300)


def test_weibull_uniaxial_closed_form():
    val = kernels.weibull_sum(np.array([[2.0, 0.0, 0.0]]), np.array([1.0]), 4.0, 5.0, 64)
    assert val == pytest.approx(945 / 3840 * 0.5**5, rel=1e-13)


def test_weibull_matches_bar_model(tc1, rod_state):
    # away from the clamp the rod is in uniaxial tension g; the bar model is
    # volume * c_m * (g / sigma0)^m
    mat = tc1.material
    bar = 0.2 * weibull_direction_factor(mat.weibull_modulus) * (mat.surface_load / mat.sigma0) ** 5
    assert weibull_intensity(rod_state, mat) == pytest.approx(bar, rel=0.05)


def test_weibull_decreases_with_modulus(tc1, rod_state):
    mat = tc1.material
    assert np.abs(rod_state.stress).max() < mat.sigma0
    j5 = weibull_intensity(rod_state, mat)
    j10 = weibull_intensity(rod_state, replace(mat, weibull_modulus=10.0))
    assert j10 < j5


def test_mesh_refinement_gate(tc1, rod_state):
    fine = solve_state(ShapeGeometry(nx=81, ny=13), tc1.material)
    coarse = weibull_intensity(rod_state, tc1.material)
    assert abs(weibull_intensity(fine, tc1.material) / coarse - 1) < 0.10


def _mirror_asymmetry(st):
    ny = st.mesh.ny
    u = st.displacement.reshape(-1, ny, 2)
    flipped = u[:, ::-1, :]
    dev = np.max(np.abs(u[..., 0] - flipped[..., 0])) + np.max(np.abs(u[..., 1] + flipped[..., 1]))
    return dev / np.max(np.abs(u))


def test_mirrored_diagonal_is_symmetric(tc1, rod_state):
    assert _mirror_asymmetry(rod_state) < 1e-10
    skew = solve_state(ShapeGeometry(diagonal="ll-ur"), tc1.material)
    assert _mirror_asymmetry(skew) > 1e-4


@pytest.mark.skipif(_kernels_c is None, reason="compiled kernels not built")
def test_backends_agree():
    rng = np.random.default_rng(0)
    g = ShapeGeometry(design=[0.03, -0.02, 0.01, 0.22, 0.18, 0.21])
    mesh = build_mesh(g)
    mat = MaterialData()
    lam, mu = mat.lame_lambda, mat.lame_mu
    for name, args in [
        ("triangle_areas", (mesh.nodes, mesh.elements)),
        ("assemble_banded", (mesh.nodes, mesh.elements, lam, mu, 14, 17, 2 * mesh.n_nodes)),
        ("element_stress", (mesh.nodes, mesh.elements, rng.standard_normal(2 * mesh.n_nodes) * 1e-5, lam, mu)),
    ]:
        a = np.asarray(getattr(_kernels_py, name)(*args))
        b = np.asarray(getattr(_kernels_c, name)(*args))
        np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12 * np.abs(a).max())
    stress = rng.standard_normal((50, 3)) * 1e7
    areas = rng.random(50)
    for m in (5.0, 7.5, 25.0):
        a = _kernels_py.weibull_sum(stress, areas, 1.3e7, m, 64)
        b = _kernels_c.weibull_sum(stress, areas, 1.3e7, m, 64)
        assert b == pytest.approx(a, rel=1e-12)


@pytest.mark.skipif(_kernels_c is None, reason="compiled kernels not built")
def test_use_backend_switches_and_restores(tc1):
    x = tc1.geometry.design
    try:
        assert kernels.use_backend(_kernels_py) == "python"
        a = ShapeProblem(tc1.geometry, tc1.material).objectives(x)
        assert kernels.use_backend(_kernels_c) == "cython"
        b = ShapeProblem(tc1.geometry, tc1.material).objectives(x)
    finally:
        kernels.use_backend(None)
    assert b == pytest.approx(a, rel=1e-12)


def test_pure_python_environment_switch():
    env = dict(os.environ, PARETOTRACE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c",
                          "from paretotrace.shape_fem import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_volume_gradient_is_analytic(tc1):
    # strip areas are trapezoids dz*(th_i + th_i+1)/2, independent of the meanline
    p = tc1
    x = np.array([0.01, -0.02, 0.015, 0.21, 0.19, 0.2])
    basis = basis_matrix(p.geometry)
    w = np.full(p.geometry.nx, 1.0 / (p.geometry.nx - 1))
    w[[0, -1]] *= 0.5
    expected = np.concatenate([np.zeros(3), (w @ basis)[1:-1]])
    g = p.grad0(x)
    np.testing.assert_allclose(g, expected, rtol=1e-6, atol=1e-9)
    h = p.hess0(x)
    assert np.max(np.abs(h[3:, 3:])) < 1e-5
    np.testing.assert_array_equal(h, h.T)


def test_fd_probe_outside_domain_names_coordinate():
    p = ShapeProblem(ShapeGeometry(), MaterialData(sigma0=2e7), fd_step=0.02)
    x = np.array([0.0, 0.0, 0.0, 0.2, -0.19, 0.2])
    assert np.isfinite(p.j1(x))

    def leaves(j):
        e = np.zeros(6)
        e[j] = 0.02 * (1 + abs(x[j]))
        return any(bspline_profiles(p.geometry.with_design(x + s * e))[1].min() <= 0
                   for s in (1, -1))

    expected = min(j for j in range(6) if leaves(j))
    with pytest.raises(FiniteDifferenceError) as info:
        p.grad1(x)
    assert info.value.coordinate == expected
    assert isinstance(info.value.__cause__, GeometryError)


def test_objectives_are_memoized(tc1):
    p = ShapeProblem(tc1.geometry, tc1.material)
    x = tc1.geometry.design
    a = p.objectives(x)
    n = p.evaluations
    assert p.objectives(x.copy()) == a
    assert p.evaluations == n
    p.clear_cache()
    p.objectives(x)
    assert p.evaluations == n + 1


def test_sigma0_for_weight_satisfies_bar_criticality():
    mat = MaterialData()
    for lam in (0.3, 0.813):
        s0 = sigma0_for_weight(lam, mat)
        m = mat.weibull_modulus
        c = weibull_direction_factor(m)
        assert (1 - lam) == pytest.approx(lam * (m - 1) * c * (mat.surface_load / s0) ** m)
    with pytest.raises(InputError):
        sigma0_for_weight(1.0, mat)


def test_straight_rod_weight_recovery(tc1):
    r = recover_weight(tc1, tc1.geometry.design)
    assert 0.0 < r.lam < 1.0
    g0 = np.linalg.norm(tc1.grad0(tc1.geometry.design))
    assert r.residual < 1e-2 * g0
    # meanline gradients vanish by symmetry, so only thickness drives the weight
    np.testing.assert_allclose(tc1.grad1(tc1.geometry.design)[:3], 0.0,
                               atol=1e-6 * np.linalg.norm(tc1.grad1(tc1.geometry.design)))


def test_test_case_2_geometry():
    p = make_test_case_2()
    ml, th = bspline_profiles(p.geometry)
    assert ml[0] == pytest.approx(0.0) and ml[-1] == pytest.approx(-0.27)
    assert p.material.sigma0 == make_test_case_1().material.sigma0
    assert np.isfinite(p.j1(p.geometry.design))


def test_json_round_trip(tc1):
    doc = json.loads(json.dumps(tc1.to_json()))
    again = ShapeProblem.from_json(doc)
    x = tc1.geometry.design
    assert again.objectives(x) == tc1.objectives(x)
    assert again.hessian_step == tc1.hessian_step
    preset = ShapeProblem.from_json({"preset": "test-case-1", "mesh": {"nx": 21}})
    assert preset.geometry.nx == 21
    assert preset.material.sigma0 == tc1.material.sigma0
    with pytest.raises(InputError):
        ShapeProblem.from_json({"preset": "test-case-9"})
    with pytest.raises(InputError):
        ShapeProblem.from_json({"thickness": 3})


def test_export_mesh(tmp_path):
    mesh = build_mesh(ShapeGeometry(nx=4, ny=3))
    path = tmp_path / "mesh.txt"
    export_mesh(mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "nodes 12"
    nodes = np.array([[float(v) for v in ln.split()] for ln in lines[1:13]])
    np.testing.assert_array_equal(nodes, mesh.nodes)
    assert lines[13] == "elements 12"
    tris = np.array([[int(v) for v in ln.split()] for ln in lines[14:]])
    np.testing.assert_array_equal(tris, mesh.elements)
