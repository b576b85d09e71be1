import numpy as np
import pytest

from hyperdata import calculus as calc
from hyperdata import elliptic as ell
from hyperdata.errors import ResolutionError
from hyperdata.fields import ScalarField, cosh_chain, exp_chain
from hyperdata.grid import build_grid
from hyperdata.mass import kid_basis
from hyperdata.testing import random_one_form, random_scalar


def test_frame_metric_is_identity(grid64):
    # assemble b from the coordinate legs: unit radial leg, angular legs
    # scaled by 1/sinh r against the coordinate metric diag(1, S^2, S^2 sin^2)
    sph = grid64.sphere
    tt = np.arccos(np.clip(sph.x[2], -1, 1))
    S = np.sinh(grid64.r)[:, None]
    legs = np.zeros((grid64.Nr, grid64.num_angular, 3, 3))
    legs[..., 0, 0] = 1.0
    legs[..., 1, 1] = 1.0 / S
    legs[..., 2, 2] = 1.0 / (S * np.sin(tt)[None, :])
    coord = np.zeros_like(legs)
    coord[..., 0, 0] = 1.0
    coord[..., 1, 1] = S**2
    coord[..., 2, 2] = (S * np.sin(tt)[None, :]) ** 2
    frame_b = np.einsum("raij,rakl,raik->rajl", legs, legs, coord)
    assert np.abs(frame_b - np.eye(3)).max() < 1e-14


def test_constant_scalar_gradient(grid64):
    f = ScalarField(grid64, np.ones((grid64.Nr, grid64.num_angular)))
    f.exact_dr = None
    grad = calc.gradient(f)
    assert grad.sup_norm() < 1e-12


def test_gradient_of_cosh(grid64):
    V = cosh_chain(grid64)
    grad = calc.gradient(V)
    assert np.abs(grad.values[:, :, 0] - np.sinh(grid64.r)[:, None]).max() < 1e-10
    assert np.abs(grad.values[:, :, 1:]).max() < 1e-10


def test_gradient_matches_analytic_decaying(grid64):
    # e^{-3r} Y_{1,0}: frame gradient known in closed form
    sph = grid64.sphere
    c10 = sph.lm_list.index((1, 0))
    y10 = sph.scalar_harmonic(c10)
    f = ScalarField(grid64, np.outer(np.exp(-3.0 * grid64.r), y10))
    grad = calc.gradient(f)
    exact_r = np.outer(-3.0 * np.exp(-3.0 * grid64.r), y10)
    gt = sph.frame_gradient(y10[None, :])[0]
    exact_1 = np.exp(-3.0 * grid64.r)[:, None] / np.sinh(grid64.r)[:, None] * gt[0][None, :]
    interior = slice(4, -4)
    assert np.abs(grad.values[interior, :, 0] - exact_r[interior]).max() < 1e-8
    assert np.abs(grad.values[interior, :, 1] - exact_1[interior]).max() < 1e-8


def test_kid_laplacian_identity(grid64):
    for kid in kid_basis(grid64):
        lap = calc.laplacian(kid.V)
        assert np.abs(lap.values - 3.0 * kid.V.values).max() < 1e-8


def test_kid_hessian_identity(grid64):
    eye = np.eye(3)
    for kid in kid_basis(grid64):
        H = calc.hessian(kid.V)
        res = H.values - kid.V.values[..., None, None] * eye
        assert np.abs(res).max() < 1e-8


def test_conformal_killing_trace_free(grid64, rng):
    Y = random_one_form(grid64, rng, rate=3.0)
    ck = calc.conformal_killing(Y)
    tr = np.einsum("raii->ra", ck.values)
    assert np.abs(tr).max() < 1e-12


def test_conformal_killing_of_kid_gradient_trace_free(grid64):
    kid = kid_basis(grid64)[0]
    ck = calc.conformal_killing(kid.dV)
    tr = np.einsum("raii->ra", ck.values)
    assert np.abs(tr).max() < 1e-10


def test_vector_laplacian_matches_model_assembly(rng):
    # compositional div(conformal_killing(.)) vs the closed-form radial
    # reduction, interior nodes
    g = build_grid(3, 1.0, 12.0, 320, 8)
    Y = random_one_form(g, rng, rate=3.0, amplitude=1.0)
    d1 = calc.vector_laplacian(Y)
    d2 = ell.apply_model_vector_laplacian(Y)
    diff = np.abs(d1.values - d2.values)[8:-8]
    assert diff.max() < 1e-8


def test_vector_laplacian_radial_profile_reduction():
    # Y_r = e^{-3r}, angular 0: matches the exact l=0 radial reduction
    grid = build_grid(3, 1.0, 12.0, 128, 6)
    n, d = 3, 2
    r = grid.r
    a = np.exp(-n * r)
    Yv = np.zeros((grid.Nr, grid.num_angular, 3))
    Yv[:, :, 0] = a[:, None]
    from hyperdata.fields import OneFormField

    DL = calc.vector_laplacian(OneFormField(grid, Yv))
    coth = np.cosh(r) / np.sinh(r)
    inv_S2 = 1.0 / np.sinh(r) ** 2
    app = n * n * a  # a'' for a = e^{-nr}
    ap = -n * a
    exact = ((2 - 2 / 3) * app + 2 * d * (1 - 1 / 3) * coth * ap
             - 2 * d * coth**2 * a + (2 * d / 3) * inv_S2 * a)
    interior = slice(4, -4)
    assert np.abs(DL.values[interior, :, 0] - exact[interior, None]).max() < 1e-8
    # e^{-n r} solves the asymptotic reduction exactly (indicial root), so
    # the far field is pure curvature correction, of size ~ a / sinh^2 r
    asym = (2 * (n - 1) / n) * (app + (n - 1) * ap - n * a)
    assert np.abs(asym).max() < 1e-14
    far = grid.r >= 4.0
    envelope = 20.0 * a[far] * inv_S2[far]
    assert np.all(np.abs(DL.values[far, :, 0]) <= envelope[:, None] + 1e-12)


def test_integration_by_parts(grid96, rng):
    f = random_scalar(grid96, rng, bump=(1.5, 4.0))
    h = random_scalar(grid96, rng, bump=(1.5, 4.0))
    lhs = grid96.volume_integral(calc.laplacian(f).values * h.values)
    rhs = grid96.volume_integral(f.values * calc.laplacian(h).values)
    scale = max(abs(lhs), abs(rhs), 1.0)
    assert abs(lhs - rhs) < 1e-9 * scale


def test_resolution_error_on_top_degree_field(grid64):
    sph = grid64.sphere
    c = sph.lm_list.index((sph.L, 0))
    f = ScalarField(grid64, np.outer(np.exp(-3.0 * grid64.r), sph.scalar_harmonic(c)))
    with pytest.raises(ResolutionError):
        calc.gradient(f)


def test_divergence_of_pure_trace(grid64):
    f = exp_chain(grid64, 3.0)
    vals = f.values[..., None, None] * np.eye(3)
    from hyperdata.fields import SymTensorField

    T = SymTensorField(grid64, vals)
    div = calc.divergence(T)
    grad = calc.gradient(ScalarField(grid64, f.values))
    assert np.abs(div.values - grad.values).max() < 1e-9
