import numpy as np
import pytest

from hyperdata.errors import InvalidParameterError
from hyperdata.grid import build_grid
from hyperdata.sphere import ProductSphereQuadrature, sphere_volume


def test_weights_sum_to_sphere_volume_n3(grid64):
    assert abs(grid64.sphere.weights.sum() - 4.0 * np.pi) < 1e-12 * 4 * np.pi


def test_weights_sum_to_sphere_volume_n4():
    g = build_grid(4, 2.0, 10.0, 32, 8)
    assert abs(g.sphere.weights.sum() - 2.0 * np.pi**2) < 1e-12 * 2 * np.pi**2


def test_radial_nodes_monotone_and_endpoints(grid64):
    assert grid64.r[0] == 1.0
    assert grid64.r[-1] == 12.0
    assert np.all(np.diff(grid64.r) > 0)


def test_harmonic_orthogonality(grid64):
    sph = grid64.sphere
    c21 = sph.lm_list.index((2, 1))
    y21 = sph.scalar_harmonic(c21)
    assert abs(sph.integrate(y21)) < 1e-12
    # quadrature exact through degree 2L: pairwise orthonormality
    c10 = sph.lm_list.index((1, 0))
    y10 = sph.scalar_harmonic(c10)
    assert abs(sph.integrate(y10 * y21)) < 1e-12
    assert abs(sph.integrate(y21 * y21) - 1.0) < 1e-12


def test_high_degree_quadrature_exactness(grid64):
    # Y_{L,m} * Y_{L,m} has degree 2L and must integrate to 1 exactly
    sph = grid64.sphere
    c = sph.lm_list.index((sph.L, sph.L - 1))
    y = sph.scalar_harmonic(c)
    assert abs(sph.integrate(y * y) - 1.0) < 1e-12


def test_product_quadrature_n5_harmonic():
    q = ProductSphereQuadrature(5, 4)
    assert abs(q.weights.sum() - sphere_volume(5)) < 1e-12 * sphere_volume(5)
    # degree-1 and degree-2 spherical polynomials integrate exactly
    x = q.x
    for i in range(5):
        assert abs(q.integrate(x[i])) < 1e-12
    quad_sum = sum(q.integrate(x[i] * x[i]) for i in range(5))
    assert abs(quad_sum - sphere_volume(5)) < 1e-11  # sum x_i^2 = 1


def test_coordinate_convention_n3(grid64):
    sph = grid64.sphere
    tt = np.arccos(np.clip(sph.x[2], -1, 1))
    assert np.allclose(sph.x[0] ** 2 + sph.x[1] ** 2 + sph.x[2] ** 2, 1.0)
    # x3 = cos(theta) by convention
    assert np.allclose(sph.x[2], np.cos(tt))


def test_build_grid_preconditions():
    with pytest.raises(InvalidParameterError):
        build_grid(2, 1.0, 12.0, 64, 8)
    with pytest.raises(InvalidParameterError):
        build_grid(3, 2.0, 1.0, 64, 8)
    with pytest.raises(InvalidParameterError):
        build_grid(3, 1.0, 12.0, 4, 8)
    with pytest.raises(InvalidParameterError):
        build_grid(3, 1.0, 12.0, 64, 1)


def test_radial_quadrature_and_interp(grid64):
    from scipy.integrate import quad

    vals = np.exp(-3.0 * grid64.r)[:, None] * np.ones((1, grid64.num_angular))
    got = grid64.volume_integral(vals)
    exact = quad(lambda r: np.exp(-3 * r) * np.sinh(r) ** 2, 1.0, 12.0)[0] * 4 * np.pi
    assert abs(got - exact) < 5e-9 * abs(exact)
    interp = grid64.interp_radial(np.exp(-3.0 * grid64.r), [2.345])
    assert abs(interp[0] - np.exp(-3.0 * 2.345)) < 1e-12


def test_frame_convention_slots(grid64):
    conv = grid64.frame
    assert conv.slot_names == ("r", "e1", "e2")
    assert len(conv.sym_pairs) == 6
