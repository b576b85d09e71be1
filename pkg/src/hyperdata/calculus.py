"""Exact hyperbolic-background differential calculus in the orthonormal frame.

Frame legs: E_0 = d/dr and E_a = (1/sinh r) e_a, a = 1..n-1, with (e_a) an
orthonormal frame of the round sphere.  This frame is radially parallel, so
radial covariant derivatives are plain d/dr of frame components; angular
derivatives are computed spectrally on Cartesian lifts of the components
(smooth scalars, so the transforms are exact for band-limited fields) plus
algebraic frame-rotation terms with coefficient tanh(r/2) = coth r - 1/sinh r.
"""

from __future__ import annotations

import numpy as np

from .fields import Field, ScalarField, OneFormField, SymTensorField

__all__ = [
    "radial_derivative", "covariant_derivative", "gradient", "hessian",
    "laplacian", "divergence", "lie_derivative", "conformal_killing",
    "vector_laplacian", "TwoTensorField", "ThreeTensorField",
]


class TwoTensorField(Field):
    """General (not necessarily symmetric) rank-2 frame tensor."""
    rank = 2


class ThreeTensorField(Field):
    rank = 3


_RANK_TO_TYPE = {1: OneFormField, 2: TwoTensorField, 3: ThreeTensorField}


def radial_derivative(field):
    """d/dr of every frame component; exact when the field carries a closure."""
    if field.exact_dr is not None:
        return field.exact_dr()
    vals = field.grid.radial_derivative_values(field.values)
    return type(field)(field.grid, vals) if field.rank != 2 else TwoTensorField(field.grid, vals)


def _lift(sph, vals, rank):
    """Frame components -> Cartesian components via Q = (n_hat, e_1, e_2)."""
    if rank == 0:
        return vals
    Q = sph.Q
    if rank == 1:
        return np.einsum("rai,aIi->raI", vals, Q, optimize=True)
    if rank == 2:
        return np.einsum("raij,aIi,aJj->raIJ", vals, Q, Q, optimize=True)
    return np.einsum("raijk,aIi,aJj,aKk->raIJK", vals, Q, Q, Q, optimize=True)


def _unlift(sph, vals, rank):
    if rank == 0:
        return vals
    Q = sph.Q
    if rank == 1:
        return np.einsum("r...aI,aIi->r...ai", vals, Q, optimize=True)
    if rank == 2:
        return np.einsum("r...aIJ,aIi,aJj->r...aij", vals, Q, Q, optimize=True)
    return np.einsum("r...aIJK,aIi,aJj,aKk->r...aijk", vals, Q, Q, Q, optimize=True)


def _angular_part(grid, vals, rank, check=True):
    """The rotation-corrected sphere-frame derivative P_a, shape (Nr, 2, Na, *slots).

    For every Cartesian lift component F (a smooth scalar on the sphere) this
    synthesizes (d_theta F, (1/sin theta) d_phi F); projecting back onto the
    frame yields e_a(T_{j...}) minus all frame-rotation terms.
    """
    sph = grid.require_spectral()
    lifted = _lift(sph, vals, rank)                      # (Nr, Na, 3^rank)
    flat = np.moveaxis(lifted.reshape(grid.Nr, grid.num_angular, -1), 1, 2)
    if check and grid.angular_tail_threshold is not None:
        sph.check_resolved(flat, grid.angular_tail_threshold)
    grads = sph.frame_gradient(flat)                     # (Nr, ncomp, 2, Na)
    grads = np.moveaxis(grads, 1, 3)                     # (Nr, 2, Na, ncomp)
    grads = grads.reshape((grid.Nr, 2, grid.num_angular) + (grid.n,) * rank)
    return _unlift(sph, grads, rank)


def _mixing(vals, rank, n):
    """Frame-rotation generator sum over slots, shape (Nr, 2, Na, *slots).

    Per slot: radial value picks up -T(slot -> a); angular value c picks up
    +delta_{ca} T(slot -> 0).
    """
    shape = (vals.shape[0], 2) + vals.shape[1:]
    out = np.zeros(shape)
    for a in range(2):
        leg = a + 1
        for slot in range(rank):
            axis = 2 + slot          # slot axis in vals
            src = np.take(vals, leg, axis=axis)
            dst_axis = 3 + slot      # slot axis in out[:, a]
            idx = [slice(None)] * out.ndim
            idx[1] = a
            idx[dst_axis] = 0
            out[tuple(idx)] -= src
            src0 = np.take(vals, 0, axis=axis)
            idx[dst_axis] = leg
            out[tuple(idx)] += src0
    return out


def _assemble_nabla(grid, vals, radial_vals, rank, check=True):
    n = grid.n
    out_shape = (grid.Nr, grid.num_angular, n) + (n,) * rank
    out = np.zeros(out_shape)
    out[:, :, 0] = radial_vals
    inv_s = 1.0 / grid.sinh_r
    mu = np.tanh(grid.r / 2.0)       # coth r - 1/sinh r
    P = _angular_part(grid, vals, rank, check=check)  # (Nr, 2, Na, *)
    M = _mixing(vals, rank, n) if rank else None
    for a in range(2):
        bshape = (grid.Nr,) + (1,) * (P[:, a].ndim - 1)
        term = inv_s.reshape(bshape) * P[:, a]
        if rank:
            term = term + mu.reshape(bshape) * M[:, a]
        out[:, :, a + 1] = term
    return out


def covariant_derivative(field, grid=None):
    """Background covariant derivative; result has one higher covalence.

    Output index order: (derivative leg, original slots).  A one-level exact
    radial-derivative closure is attached when the input chain allows it, so
    second covariant derivatives of analytically known fields stay exact.
    """
    grid = grid or field.grid
    rank = field.rank
    f1 = field.exact_dr() if field.exact_dr is not None else None
    radial_vals = f1.values if f1 is not None else grid.radial_derivative_values(field.values)
    out_vals = _assemble_nabla(grid, field.values, radial_vals, rank)

    closure = None
    if f1 is not None and f1.exact_dr is not None:
        def closure(base=field, d1=f1, g=grid, rk=rank):
            # d/dr of nabla(base): radial slot is base''; angular slots use
            # d/dr[(1/S) P_a + tanh(r/2) M_a] with P_a commuting with d/dr.
            d2 = d1.exact_dr()
            out = np.zeros((g.Nr, g.num_angular, g.n) + (g.n,) * rk)
            out[:, :, 0] = d2.values
            inv_s = 1.0 / g.sinh_r
            dinv_s = -g.coth_r / g.sinh_r
            mu = np.tanh(g.r / 2.0)
            dmu = 0.5 * (1.0 - mu**2)
            P0 = _angular_part(g, base.values, rk, check=False)
            P1 = _angular_part(g, d1.values, rk, check=False)
            M0 = _mixing(base.values, rk, g.n) if rk else None
            M1 = _mixing(d1.values, rk, g.n) if rk else None
            for a in range(2):
                bshape = (g.Nr,) + (1,) * (P0[:, a].ndim - 1)
                term = dinv_s.reshape(bshape) * P0[:, a] + inv_s.reshape(bshape) * P1[:, a]
                if rk:
                    term = term + dmu.reshape(bshape) * M0[:, a] + mu.reshape(bshape) * M1[:, a]
                out[:, :, a + 1] = term
            return _RANK_TO_TYPE[rk + 1](g, out)

    return _RANK_TO_TYPE[rank + 1](grid, out_vals, exact_dr=closure)


def gradient(f):
    return covariant_derivative(f)


def hessian(f):
    """Second covariant derivative of a scalar, as a symmetric 2-tensor."""
    nabla2 = covariant_derivative(covariant_derivative(f))
    return SymTensorField(f.grid, nabla2.values, symmetrize=True)


def laplacian(f):
    """Trace of the Hessian (negative-spectrum convention: Delta = tr Hess)."""
    h = hessian(f)
    vals = np.einsum("raii->ra", h.values)
    return ScalarField(f.grid, vals)


def divergence(T):
    """Contraction of the covariant derivative with its first tensor slot."""
    nabla = covariant_derivative(T)
    if T.rank == 1:
        return ScalarField(T.grid, np.einsum("raii->ra", nabla.values))
    if T.rank == 2:
        return OneFormField(T.grid, np.einsum("raiij->raj", nabla.values))
    raise NotImplementedError("divergence implemented for ranks 1 and 2")


def lie_derivative(Y):
    """(L_Y b)_{ij} = nabla_i Y_j + nabla_j Y_i for a 1-form Y."""
    nabla = covariant_derivative(Y)
    vals = nabla.values + np.swapaxes(nabla.values, -1, -2)
    return SymTensorField(Y.grid, vals)


def conformal_killing(Y):
    """Trace-free part of the Lie derivative: L_Y b - (2/n)(div Y) b."""
    grid = Y.grid
    nabla = covariant_derivative(Y)
    lie = nabla.values + np.swapaxes(nabla.values, -1, -2)
    div = np.einsum("raii->ra", nabla.values)
    vals = lie.copy()
    vals[..., range(grid.n), range(grid.n)] -= (2.0 / grid.n) * div[..., None]
    return SymTensorField(grid, vals)


def vector_laplacian(Y):
    """Delta_L Y = div(conformal_killing(Y)), computed compositionally."""
    return divergence(conformal_killing(Y))
