"""Curvature and g-covariant calculus for a metric g = b + e.

Everything is assembled from the difference tensor C^k_ij of the Levi-Civita
connections of g and b in the b-orthonormal frame, so the vacuum background
evaluates exactly (C vanishes identically when e = 0 and the hyperbolic
curvature enters in closed form).  Scalar curvature follows

    Ric_ij = Ric^b_ij + div^b(C)_ij - sym(nabla^b tr C)_ij
             + trC_l C^l_ij - C^k_il C^l_kj,

with C^k_ij = (1/2) g^{kl} (nabla^b_i e_jl + nabla^b_j e_il - nabla^b_l e_ij).
"""

from __future__ import annotations

import numpy as np

from .fields import OneFormField, ScalarField, SymTensorField

__all__ = ["Geometry"]


def _nabla_vals(grid, values, rank):
    """Raw covariant-derivative component array for a frame tensor.

    Solver-internal path: the angular resolution guard is left to the
    user-facing calculus entry points (Krylov iterates are full-spectrum).
    """
    from .calculus import _assemble_nabla

    radial = grid.radial_derivative_values(values)
    return _assemble_nabla(grid, values, radial, rank, check=False)


class Geometry:
    """Cached metric data and g-covariant operations for one InitialData."""

    def __init__(self, data):
        self.data = data
        self.grid = data.grid
        grid = self.grid
        n = grid.n
        self.g = data.metric_values()
        self.ginv = np.linalg.inv(self.g)

        De = _nabla_vals(grid, data.e.values, 2)          # (m, i, j) = nabla_m e_ij
        # C_low[k,i,j] = (1/2)(nabla_i e_jk + nabla_j e_ik - nabla_k e_ij)
        C_low = 0.5 * (np.einsum("raijk->rakij", De)
                       + np.einsum("rajik->rakij", De) - De)
        self.C = np.einsum("rakl,ralij->rakij", self.ginv, C_low)
        self.trC = np.einsum("rakkj->raj", self.C)

        DC = _nabla_vals(grid, self.C, 3)                 # (m, k, i, j)
        divC = np.einsum("rakkij->raij", DC)
        DtrC = _nabla_vals(grid, self.trC, 1)             # (m, j)
        ric = (divC - 0.5 * (DtrC + DtrC.transpose(0, 1, 3, 2))
               + np.einsum("ral,ralij->raij", self.trC, self.C)
               - np.einsum("rakil,ralkj->raij", self.C, self.C))
        ric[..., range(n), range(n)] += -(n - 1.0)
        self.ric = 0.5 * (ric + ric.transpose(0, 1, 3, 2))
        self.scal = np.einsum("raij,raij->ra", self.ginv, self.ric)

    # -- index gymnastics -----------------------------------------------------

    def tr(self, T):
        return np.einsum("raij,raij->ra", self.ginv, T)

    def inner(self, T, S):
        return np.einsum("raik,rajl,raij,rakl->ra", self.ginv, self.ginv, T, S, optimize=True)

    def inner_forms(self, X, Y):
        return np.einsum("raij,rai,raj->ra", self.ginv, X, Y)

    def norm_form(self, X):
        return np.sqrt(np.maximum(self.inner_forms(X, X), 0.0))

    def raise_form(self, X):
        return np.einsum("raij,raj->rai", self.ginv, X)

    def raise_tensor(self, T):
        """T^i_j (first index raised with g)."""
        return np.einsum("raik,rakj->raij", self.ginv, T)

    # -- g-covariant derivatives ----------------------------------------------

    def grad(self, fvals):
        return _nabla_vals(self.grid, fvals, 0)

    def hess(self, fvals):
        df = self.grad(fvals)
        hb = _nabla_vals(self.grid, df, 1)
        hg = hb - np.einsum("rakij,rak->raij", self.C, df)
        return 0.5 * (hg + hg.transpose(0, 1, 3, 2))

    def laplacian(self, fvals):
        return self.tr(self.hess(fvals))

    def nabla_form(self, Xvals):
        DX = _nabla_vals(self.grid, Xvals, 1)
        return DX - np.einsum("rakij,rak->raij", self.C, Xvals)

    def div_form(self, Xvals):
        return self.tr(self.nabla_form(Xvals))

    def lie_metric(self, Xvals):
        """(L_{X^sharp} g)_ij = nabla^g_i X_j + nabla^g_j X_i for a 1-form X."""
        DX = self.nabla_form(Xvals)
        return DX + DX.transpose(0, 1, 3, 2)

    def nabla_tensor(self, Tvals):
        DT = _nabla_vals(self.grid, Tvals, 2)
        corr1 = np.einsum("rakmi,rakj->ramij", self.C, Tvals)
        corr2 = np.einsum("rakmj,raik->ramij", self.C, Tvals)
        return DT - corr1 - corr2

    def div_tensor(self, Tvals):
        DT = self.nabla_tensor(Tvals)
        return np.einsum("rami,ramij->raj", self.ginv, DT)

    def conformal_killing(self, Yvals):
        lie = self.lie_metric(Yvals)
        divY = self.div_form(Yvals)
        return lie - (2.0 / self.grid.n) * divY[..., None, None] * self.g

    def vector_laplacian(self, Yvals):
        return self.div_tensor(self.conformal_killing(Yvals))

    # -- field wrappers ---------------------------------------------------------

    def scalar(self, vals):
        return ScalarField(self.grid, vals)

    def one_form(self, vals):
        return OneFormField(self.grid, vals)

    def sym_tensor(self, vals):
        return SymTensorField(self.grid, vals, symmetrize=True)
