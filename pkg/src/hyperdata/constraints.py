"""The constraint map, energy conditions, and the first/second-order calculus.

Sign conventions: the constraint map returns (-2 mu, J) with

    -2 mu = -(Scal^g + n(n-1)) + 2 tr pi - (tr pi)^2/(n-1) + |pi|^2,
    J = div^g pi,

and Delta = tr Hess (negative spectrum) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .fields import OneFormField, ScalarField, SymTensorField
from .geometry import Geometry

__all__ = [
    "ConstraintDensities", "DecReport", "eval_phi", "densities", "check_dec",
    "linearize_phi", "adjoint_phi", "quadratic_remainder",
]


@dataclass
class ConstraintDensities:
    mu: ScalarField
    J: OneFormField
    margin: ScalarField  # mu - |J|_g pointwise


@dataclass
class DecReport:
    satisfied: bool
    gamma: float
    strict: bool
    min_margin: float
    worst_radius: float
    worst_angular_index: int
    margin_profile: np.ndarray  # min over the sphere per radial shell


def eval_phi(data, geometry=None):
    """Constraint map Phi(g, pi) = (-2 mu, J)."""
    geo = geometry or Geometry(data)
    pi = data.pi.values
    tr_pi = geo.tr(pi)
    pi_sq = geo.inner(pi, pi)
    n = data.grid.n
    slot1 = (-(geo.scal + n * (n - 1.0)) + 2.0 * tr_pi
             - tr_pi**2 / (n - 1.0) + pi_sq)
    slot2 = geo.div_tensor(pi)
    return ScalarField(data.grid, slot1), OneFormField(data.grid, slot2)


def densities(data, geometry=None):
    """Energy density mu, momentum density J, and the DEC margin mu - |J|_g."""
    geo = geometry or Geometry(data)
    slot1, slot2 = eval_phi(data, geo)
    mu = ScalarField(data.grid, -0.5 * slot1.values)
    J = slot2
    margin = ScalarField(data.grid, mu.values - geo.norm_form(J.values))
    return ConstraintDensities(mu=mu, J=J, margin=margin)


def check_dec(data, gamma=0.0, strict=True, geometry=None, tol=1e-12):
    """Pointwise dominant-energy-condition check mu > (1+gamma)|J|_g.

    With ``strict`` False the test allows equality up to ``tol`` times the
    local scale.  The report carries the worst node and the radial profile of
    the spherical minimum of the margin.
    """
    if gamma < 0.0:
        raise InvalidParameterError("gamma must be nonnegative")
    geo = geometry or Geometry(data)
    dens = densities(data, geo)
    margin = dens.mu.values - (1.0 + gamma) * geo.norm_form(dens.J.values)
    k, a = np.unravel_index(np.argmin(margin), margin.shape)
    if strict:
        ok = bool(np.all(margin > 0.0))
    else:
        scale = np.abs(dens.mu.values) + (1.0 + gamma) * geo.norm_form(dens.J.values)
        ok = bool(np.all(margin >= -tol * np.maximum(scale, 1.0)))
    return DecReport(satisfied=ok, gamma=float(gamma), strict=strict,
                     min_margin=float(margin[k, a]), worst_radius=float(data.grid.r[k]),
                     worst_angular_index=int(a), margin_profile=margin.min(axis=1))


def linearize_phi(data, h, w, geometry=None):
    """Linearization D Phi|_(g,pi)(h, w), assembled term by term."""
    geo = geometry or Geometry(data)
    grid = data.grid
    n = grid.n
    pi = data.pi.values
    hv, wv = h.values, w.values
    tr_pi = geo.tr(pi)
    tr_h = geo.tr(hv)
    tr_w = geo.tr(wv)
    pi_up = np.einsum("raik,rajl,rakl->raij", geo.ginv, geo.ginv, pi)  # pi^{ij}
    pi_mixed = geo.raise_tensor(pi)                                    # pi^i_j
    pi_pi = np.einsum("rakl,raik,rajl->raij", geo.ginv, pi, pi)        # (pi o pi)_{ij}

    slot1 = (geo.laplacian(tr_h) - geo.div_form(geo.div_tensor(hv))
             + geo.inner(hv, geo.ric)
             + 2.0 * (1.0 - tr_pi / (n - 1.0)) * (tr_w - geo.inner(hv, pi))
             - 2.0 * geo.inner(hv, pi_pi) + 2.0 * geo.inner(pi, wv))

    div_w = geo.div_tensor(wv)
    Dpi = geo.nabla_tensor(pi)      # (m, i, j) = nabla_m pi_ij
    Dh = geo.nabla_tensor(hv)
    h_up = np.einsum("raik,rajl,rakl->raij", geo.ginv, geo.ginv, hv)
    div_h = geo.div_tensor(hv)
    d_tr_h = geo.grad(tr_h)
    slot2 = (div_w
             - np.einsum("raij,raijk->rak", h_up, Dpi)
             - np.einsum("raj,rajk->rak", div_h, pi_mixed)
             + 0.5 * np.einsum("raj,rajk->rak", d_tr_h, pi_mixed)
             - 0.5 * np.einsum("raij,rakij->rak", pi_up, Dh))
    return ScalarField(grid, slot1), OneFormField(grid, slot2)


def adjoint_phi(data, V, X, geometry=None):
    """Formal adjoint D Phi*_(g,pi)(V, X) of the linearized constraint map.

    V is a scalar, X a 1-form (vector indices raised with g).  The returned
    pair satisfies the L^2 duality with :func:`linearize_phi`; at the
    hyperbolic background its kernel is spanned by the pairs (V, 2 dV) with
    V a static Killing potential.
    """
    from . import calculus as calc

    geo = geometry or Geometry(data)
    grid = data.grid
    n = grid.n
    pi = data.pi.values
    Vv, Xv = V.values, X.values
    tr_pi = geo.tr(pi)
    # V and X may grow like cosh r (Killing potentials); their background
    # derivatives go through the closure-aware calculus, with the difference
    # tensor corrections added algebraically.
    dV = calc.gradient(V).values
    hessV_b = calc.covariant_derivative(calc.gradient(V)).values
    hessV = hessV_b - np.einsum("rakij,rak->raij", geo.C, dV)
    hessV = 0.5 * (hessV + hessV.transpose(0, 1, 3, 2))
    lapV = geo.tr(hessV)
    pi_mixed = geo.raise_tensor(pi)                                 # pi^k_j
    pi_pi_mixed = np.einsum("raik,rakj->raij", pi, geo.raise_tensor(pi))  # pi_ik pi^k_j
    DX = calc.covariant_derivative(X).values \
        - np.einsum("rakij,rak->raij", geo.C, Xv)                   # nabla^g_i X_j
    DXup = np.einsum("rakl,rail->raik", geo.ginv, DX)               # nabla_i X^k
    div_pi = geo.div_tensor(pi)
    Xup = geo.raise_form(Xv)
    lieX = DX + DX.transpose(0, 1, 3, 2)
    div_X = geo.tr(DX)
    Dpi = geo.nabla_tensor(pi)

    factor = 1.0 - tr_pi / (n - 1.0)
    slot1 = (lapV[..., None, None] * geo.g - hessV + Vv[..., None, None] * geo.ric
             - 2.0 * (Vv * factor)[..., None, None] * pi
             - 2.0 * Vv[..., None, None] * pi_pi_mixed
             + 0.5 * (np.einsum("rajk,raik->raij", pi, DXup)
                      + np.einsum("raik,rajk->raij", pi, DXup))
             - 0.5 * np.einsum("rak,rak->ra", div_pi, Xup)[..., None, None] * geo.g
             - 0.25 * geo.inner(pi, lieX)[..., None, None] * geo.g
             + 0.5 * np.einsum("rak,rakij->raij", Xup, Dpi)
             + 0.5 * div_X[..., None, None] * pi)
    slot2 = (-0.5 * lieX + 2.0 * (Vv * factor)[..., None, None] * geo.g
             + 2.0 * Vv[..., None, None] * pi)
    return (SymTensorField(grid, slot1, symmetrize=True),
            SymTensorField(grid, slot2, symmetrize=True))


def quadratic_remainder(data, geometry=None):
    """Q(e, eta) = Phi(g, pi) - D Phi|_(b,0)(e, pi): second-order remainder."""
    from . import calculus as calc

    geo = geometry or Geometry(data)
    grid = data.grid
    slot1, slot2 = eval_phi(data, geo)
    e, pi = data.e, data.pi
    tr_e = np.einsum("raii->ra", e.values)
    tr_pi_b = np.einsum("raii->ra", pi.values)
    lap_tr_e = calc.laplacian(ScalarField(grid, tr_e)).values
    div_div_e = calc.divergence(calc.divergence(e)).values
    ric_b = -(grid.n - 1.0)
    lin1 = lap_tr_e - div_div_e + ric_b * tr_e + 2.0 * tr_pi_b
    lin2 = calc.divergence(pi).values
    return (ScalarField(grid, slot1.values - lin1),
            OneFormField(grid, slot2.values - lin2))
