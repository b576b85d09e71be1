"""Weighted-norm diagnostics, cutoff/gluing utilities, and expansion extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFitError, FitQualityError, InvalidParameterError
from .fields import ScalarField

__all__ = [
    "weighted_sup_norm", "cutoff_chi", "cutoff_xi", "decay_fit",
    "extract_expansion", "AsymptoticExpansion", "fit_window_mask",
]


def weighted_sup_norm(field, delta):
    """max over nodes of e^{delta r} |field|_b: the discrete C^0_delta surrogate."""
    weight = np.exp(delta * field.grid.r)
    return float(np.max(weight[:, None] * field.pointwise_norm()))


def _smooth_step(t):
    """C^infty step: 0 for t <= 0, 1 for t >= 1 (exponential bump partition)."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


def cutoff_chi(lam, grid):
    """chi_lambda(x) = chi(r(x)/lambda): 1 for r <= lambda, 0 for r >= 2 lambda."""
    if lam < grid.R0:
        raise InvalidParameterError("cutoff radius must satisfy lambda >= R0")
    profile = 1.0 - _smooth_step(grid.r / lam - 1.0)
    vals = np.broadcast_to(profile[:, None], (grid.Nr, grid.num_angular)).copy()
    return ScalarField(grid, vals)


def cutoff_xi(lam, grid):
    """xi_lambda = chi_lambda + (1 - chi_lambda) e^{-r}: the damping factor."""
    chi = cutoff_chi(lam, grid)
    xi = np.exp(-grid.r)
    vals = chi.values + (1.0 - chi.values) * xi[:, None]
    return ScalarField(grid, vals)


def fit_window_mask(grid, drop_outer=3, fraction=1.0 / 3.0):
    """Outer-third window of the radial domain in the mapped coordinate s,
    excluding the outermost ``drop_outer`` nodes."""
    smax, smin = grid.s[0], grid.s[-1]
    cut = smin + (smax - smin) * fraction
    mask = grid.s <= cut
    if drop_outer:
        mask[-drop_outer:] = False
    return mask


@dataclass
class DecayFit:
    rate: float
    amplitude: float
    half_width: float  # 95%-style confidence half-width of the rate


def decay_fit(field, grid=None, drop_outer=3, fraction=1.0 / 3.0):
    """Fitted decay rate of |field|_b: slope of log(shell sup) against r.

    Least squares over the outer fit window (default: outer third of the
    domain in the mapped coordinate).  Raises DegenerateFitError when the
    shell norms underflow.
    """
    grid = grid or field.grid
    norms = field.shell_sup_norms()
    mask = fit_window_mask(grid, drop_outer=drop_outer, fraction=fraction)
    mask &= norms > 1e-290
    if mask.sum() < 4:
        raise DegenerateFitError("too few nonvanishing shells in the fit window")
    r = grid.r[mask]
    y = np.log(norms[mask])
    A = np.stack([np.ones_like(r), -r], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(r) - 2, 1)
    sigma2 = float(resid @ resid) / dof
    var = sigma2 * np.linalg.inv(A.T @ A)[1, 1]
    return DecayFit(rate=float(coef[1]), amplitude=float(np.exp(coef[0])),
                    half_width=float(2.0 * np.sqrt(max(var, 0.0))))


@dataclass
class AsymptoticExpansion:
    """Leading conformally-hyperbolic expansion data.

    v0, Y0_r are functions on the sphere (coefficients of e^{-n r});
    Y0_tangential holds the coordinate-convention coefficients of
    e^{-(n-1) r} (the frame-component coefficient of e^{-n r} is
    2 * coordinate coefficient at leading order; both are reported, with the
    sinh(r) conversion factor noted in ``conventions``).
    """

    v0: np.ndarray
    Y0_r: np.ndarray
    Y0_tangential_coordinate: np.ndarray
    Y0_tangential_frame: np.ndarray
    v_remainder_rate: float | None
    Y_remainder_rate: float | None
    v_remainder_sup: float
    Y_remainder_sup: float
    conventions: str = ("tangential model: coordinate Y_A ~ (Y0)_A e^{-(n-1) r}; "
                        "frame component = coordinate / sinh(r) ~ 2 (Y0)_A e^{-n r}")


def _fit_coefficient(grid, values, rate, mask, companion_rate=None):
    """Per-angular-node least-squares coefficient of e^{-rate r} over the window.

    A companion basis function (the declared remainder rate) is fitted
    jointly, which removes the leading cross-rate contamination; only the
    primary coefficient is returned.
    """
    cols = [np.exp(-rate * grid.r[mask])]
    if companion_rate is not None:
        cols.append(np.exp(-companion_rate * grid.r[mask]))
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, values[mask], rcond=None)
    return coef[0]


def extract_expansion(v, Y, grid=None, drop_outer=3):
    """Extract (v0, Y0) from fields with conformally hyperbolic asymptotics.

    Fits v ~ v0(omega) e^{-n r}, Y_r ~ (Y0)_r(omega) e^{-n r} and the
    tangential part in the coordinate convention sinh(r) Y_a ~ (Y0)_a
    e^{-(n-1) r} over the outer fit window; reports remainders and their
    fitted decay rates.  Model + remainder reproduces the input exactly.
    """
    grid = grid or v.grid
    n = grid.n
    for name, field in (("v", v), ("Y", Y)):
        try:
            fit = decay_fit(field, grid, drop_outer=drop_outer)
        except DegenerateFitError:
            continue  # identically zero component is fine
        if fit.rate <= n / 2.0:
            raise FitQualityError(
                f"{name} decays like exp(-{fit.rate:.2f} r), slower than the "
                f"n/2 = {n / 2:.1f} threshold for expansion extraction")
    mask = fit_window_mask(grid, drop_outer=drop_outer)
    v0 = _fit_coefficient(grid, v.values, float(n), mask, companion_rate=float(n + 1))
    Y0r = _fit_coefficient(grid, Y.values[:, :, 0], float(n), mask,
                           companion_rate=float(n + 1))
    coord_tang = grid.sinh_r[:, None, None] * Y.values[:, :, 1:]
    Y0t = np.stack([
        _fit_coefficient(grid, coord_tang[:, :, a], float(n - 1), mask,
                         companion_rate=float(n + 1))
        for a in range(grid.n - 1)
    ], axis=-1)

    v_model = np.outer(np.exp(-n * grid.r), v0)
    v_rem = v.values - v_model
    Y_model = np.zeros_like(Y.values)
    Y_model[:, :, 0] = np.outer(np.exp(-n * grid.r), Y0r)
    Y_model[:, :, 1:] = (np.exp(-(n - 1.0) * grid.r) / grid.sinh_r)[:, None, None] * Y0t[None, :, :]
    Y_rem = Y.values - Y_model

    def rem_stats(rem_vals, scale_vals):
        rem = np.max(np.abs(rem_vals.reshape(grid.Nr, -1)), axis=1)
        model = np.max(np.abs(scale_vals.reshape(grid.Nr, -1)), axis=1)
        sup = float(rem[mask].max()) if mask.any() else float(rem.max())
        rate = None
        usable = mask & (rem > 1e-290)
        if usable.sum() >= 4:
            A = np.stack([np.ones(usable.sum()), -grid.r[usable]], axis=1)
            coef, *_ = np.linalg.lstsq(A, np.log(rem[usable]), rcond=None)
            rate = float(coef[1])
        return sup, rate, float(model[mask].max()) if mask.any() else 0.0

    v_sup, v_rate, v_scale = rem_stats(v_rem, v_model)
    Y_sup, Y_rate, Y_scale = rem_stats(Y_rem, Y_model)
    if v_scale > 0.0 and v_sup > v_scale:
        raise FitQualityError(
            f"v remainder ({v_sup:.3e}) is not smaller than the model ({v_scale:.3e}) "
            "on the outer shells")
    if Y_scale > 0.0 and Y_sup > Y_scale:
        raise FitQualityError(
            f"Y remainder ({Y_sup:.3e}) is not smaller than the model ({Y_scale:.3e}) "
            "on the outer shells")
    return AsymptoticExpansion(v0=v0, Y0_r=Y0r,
                               Y0_tangential_coordinate=Y0t,
                               Y0_tangential_frame=2.0 * Y0t,
                               v_remainder_rate=v_rate, Y_remainder_rate=Y_rate,
                               v_remainder_sup=v_sup, Y_remainder_sup=Y_sup)
