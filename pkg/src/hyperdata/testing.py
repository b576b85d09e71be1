"""Seeded random smooth test fields.

Frame components of a smooth tensor field are not independent smooth
scalars (a constant angular frame component is the hairy-ball field), so
random fields are built from Cartesian polynomial data projected into the
frame: T_frame = Q^T P(n_hat) Q with P polynomial.  This makes them exactly
band-limited as tensors, which the spectral calculus requires.
"""

from __future__ import annotations

import numpy as np

from .fields import OneFormField, ScalarField, SymTensorField

__all__ = [
    "random_scalar", "random_one_form", "random_sym_tensor", "radial_bump",
]


def _radial_profile(grid, rate, rng=None, bump=None):
    if bump is not None:
        return radial_bump(grid, *bump)
    return np.exp(-rate * grid.r)


def radial_bump(grid, r1, r2):
    """Smooth compactly supported radial window, identically zero off [r1, r2].

    The bump profile is smooth in the grid's mapped coordinate s = exp(-r),
    which is what the radial finite differences resolve; windows should span
    a healthy number of s-nodes (keep r2 moderate).
    """
    s1, s2 = np.exp(-r2), np.exp(-r1)
    x = (grid.s - s1) / (s2 - s1)
    out = np.zeros_like(grid.r)
    inside = (x > 0.0) & (x < 1.0)
    xi = x[inside]
    # C^5 polynomial window: bounded derivatives keep the 4th-order radial
    # calculus clean across the support edges (an exp-bump's edge spikes
    # would dominate the finite-difference error there).
    out[inside] = (4.0 * xi * (1.0 - xi)) ** 6
    return out


def _poly_scalars(sph, rng, degree, count):
    """Random polynomials in the Cartesian coordinate functions, (count, Na)."""
    x = sph.x  # (3, Na)
    monomials = [np.ones(x.shape[1])]
    if degree >= 1:
        monomials += [x[0], x[1], x[2]]
    if degree >= 2:
        monomials += [x[i] * x[j] for i in range(3) for j in range(i, 3)]
    if degree >= 3:
        monomials += [x[0] * x[1] * x[2], x[0] ** 3, x[1] ** 3, x[2] ** 3]
    M = np.stack(monomials)
    return rng.standard_normal((count, M.shape[0])) @ M


def random_scalar(grid, rng, rate=3.0, amplitude=1.0, degree=2, bump=None):
    prof = amplitude * _radial_profile(grid, rate, bump=bump)
    ang = _poly_scalars(grid.sphere, rng, degree, 1)[0]
    return ScalarField(grid, np.outer(prof, ang))


def random_one_form(grid, rng, rate=3.0, amplitude=1.0, degree=2, bump=None):
    """Random smooth 1-form: frame components of a polynomial Cartesian field."""
    sph = grid.sphere
    prof = amplitude * _radial_profile(grid, rate, bump=bump)
    P = _poly_scalars(sph, rng, degree, 3)          # Cartesian components (3, Na)
    frame = np.einsum("Ia,aIi->ai", P, sph.Q)       # (Na, 3)
    vals = prof[:, None, None] * frame[None, :, :]
    return OneFormField(grid, vals)


def random_sym_tensor(grid, rng, rate=3.0, amplitude=1.0, degree=2, bump=None):
    sph = grid.sphere
    prof = amplitude * _radial_profile(grid, rate, bump=bump)
    P = _poly_scalars(sph, rng, degree, 9).reshape(3, 3, -1)
    P = 0.5 * (P + P.transpose(1, 0, 2))
    frame = np.einsum("IJa,aIi,aJj->aij", P, sph.Q, sph.Q)
    vals = prof[:, None, None, None] * frame[None, :, :, :]
    return SymTensorField(grid, vals, symmetrize=True)
