"""Discretization of the exterior region of hyperbolic space.

Polar model: b = dr^2 + sinh^2(r) sigma on (R0, Rmax) x S^{n-1}.  Radial
nodes are uniform in the mapped coordinate s = exp(-r), which turns the
exponential decay rates in play into polynomial behaviour in s, so the
fourth-order finite differences below resolve them.  Angular nodes and
quadrature come from :mod:`hyperdata.sphere`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, OutOfRangeError
from .sphere import make_sphere, sphere_volume, SphereTransform

__all__ = ["Grid", "build_grid", "FrameConvention"]


@dataclass(frozen=True)
class FrameConvention:
    """Component-slot bookkeeping for the b-orthonormal frame.

    Slot 0 is the radial leg d/dr; slots 1..n-1 are (1/sinh r) times an
    orthonormal frame of the round sphere.  Symmetric 2-tensors are stored
    as full (n, n) matrices; ``sym_pairs`` lists the independent slots in
    the order used by the packed serialization layout.
    """

    n: int

    @property
    def slot_names(self):
        return ("r",) + tuple(f"e{a}" for a in range(1, self.n))

    @property
    def sym_pairs(self):
        return [(i, j) for i in range(self.n) for j in range(i, self.n)]


def _fd_matrix(num, h, order=1):
    """Dense differentiation matrix, 4th-order centered stencils inside.

    The closure at the edges uses 6-point one-sided/offset stencils (5th
    order), which keeps the boundary truncation constants below the interior
    ones for the steep horizon-side profiles.
    """
    D = np.zeros((num, num))
    if order != 1:
        raise ValueError("only first-derivative matrices are built directly")
    c_int = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    for i in range(2, num - 2):
        D[i, i - 2 : i + 3] = c_int
    D[0, :6] = np.array([-137.0, 300.0, -300.0, 200.0, -75.0, 12.0]) / 60.0
    D[1, :6] = np.array([-12.0, -65.0, 120.0, -60.0, 20.0, -3.0]) / 60.0
    D[-2, -6:] = -D[1, :6][::-1]
    D[-1, -6:] = -D[0, :6][::-1]
    return D / h


def _simpson_weights(num, h):
    """Composite Simpson weights on a uniform grid (3/8 patch if needed)."""
    if num < 4:
        raise InvalidParameterError("need at least 4 radial nodes for quadrature")
    w = np.zeros(num)
    if num % 2 == 1:
        idx = np.arange(num)
        w[idx % 2 == 1] = 4.0
        w[idx % 2 == 0] = 2.0
        w[0] = w[-1] = 1.0
        w *= h / 3.0
    else:
        # Simpson on the first num-4 intervals, 3/8 rule on the last three.
        w[: num - 3] = _simpson_weights(num - 3, h)
        w38 = np.array([1.0, 3.0, 3.0, 1.0]) * 3.0 * h / 8.0
        w[num - 4 :] += w38
    return w


def _cumulative_weights(num, h):
    """Per-interval quintic (6-point) integration weights, exact to degree 5.

    Returns W of shape (num-1, num) with integral over [x_j, x_{j+1}] equal
    to W[j] @ f.
    """
    W = np.zeros((num - 1, num))
    base = np.arange(6)
    for j in range(num - 1):
        start = min(max(j - 2, 0), num - 6)
        nodes = start + base
        # Integrate the Lagrange basis on [j, j+1] exactly (degree-5 poly).
        for k, node in enumerate(nodes):
            others = np.delete(nodes, k)
            # polynomial prod (x - other) / (node - other), integral over [j, j+1]
            poly = np.poly1d(np.poly(others - j))  # roots shifted so interval is [0,1]
            denom = np.prod(node - others)
            integ = poly.integ()
            W[j, node] = (integ(1.0) - integ(0.0)) / denom * h
    return W


@dataclass
class Grid:
    """Exterior-region grid with hyperbolic-polar frame data.

    Attributes
    ----------
    n : spatial dimension (>= 3)
    R0, Rmax : inner and outer truncation radii (hyperbolic distance)
    Nr : number of radial nodes, uniform in s = exp(-r)
    L : spherical-harmonic truncation degree
    r, s : radial node values (increasing in r, s = exp(-r) decreasing)
    sphere : angular transform/quadrature object
    """

    n: int
    R0: float
    Rmax: float
    Nr: int
    L: int
    r: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    sphere: object = field(repr=False)
    angular_tail_threshold: float | None = 0.5

    def __post_init__(self):
        self.ds = float(self.s[0] - self.s[1])
        self._Ds = _fd_matrix(self.Nr, -self.ds)  # derivative in s (s decreasing)
        self._Dr = -self.s[:, None] * self._Ds    # d/dr = -s d/ds
        self._wr = _simpson_weights(self.Nr, self.ds)  # weights for integral in s
        self.sinh_r = np.sinh(self.r)
        self.cosh_r = np.cosh(self.r)
        self.coth_r = self.cosh_r / self.sinh_r

    # -- radial calculus ----------------------------------------------------

    def radial_derivative_values(self, values):
        """d/dr along axis 0 of a (Nr, ...) array by the grid's FD rule."""
        flat = values.reshape(self.Nr, -1)
        out = self._Dr @ flat
        return out.reshape(values.shape)

    def radial_integral(self, values):
        """Integral over r in [R0, Rmax] along axis 0: sum w_k f(r_k).

        Weights come from composite quadrature in s with the 1/s Jacobian.
        """
        flat = values.reshape(self.Nr, -1)
        res = (self._wr[None, :] / self.s[None, :]) @ flat
        return res.reshape(values.shape[1:])

    def interp_radial(self, values, r_targets):
        """Interpolate (Nr, ...) node values to given radii (6-point Lagrange in s)."""
        r_targets = np.atleast_1d(np.asarray(r_targets, dtype=float))
        if np.any(r_targets < self.R0 - 1e-12) or np.any(r_targets > self.Rmax + 1e-12):
            raise OutOfRangeError("interpolation radius outside [R0, Rmax]")
        s_t = np.exp(-r_targets)
        flat = values.reshape(self.Nr, -1)
        out = np.zeros((s_t.size, flat.shape[1]))
        s_desc = self.s  # descending
        for i, st in enumerate(s_t):
            j = int(np.clip(np.searchsorted(-s_desc, -st), 3, self.Nr - 3))
            nodes = np.arange(j - 3, j + 3)
            sn = s_desc[nodes]
            lag = np.ones(6)
            for k in range(6):
                for m in range(6):
                    if m != k:
                        lag[k] *= (st - sn[m]) / (sn[k] - sn[m])
            out[i] = lag @ flat[nodes]
        return out.reshape((s_t.size,) + values.shape[1:])

    # -- angular helpers ----------------------------------------------------

    @property
    def num_angular(self):
        return self.sphere.num_nodes

    def angular_integral(self, values):
        """Quadrature over the unit sphere along the last axis."""
        return self.sphere.integrate(values)

    def volume_integral(self, values):
        """Integral of a scalar sample array (Nr, Na) over the exterior, d mu^b."""
        ang = self.angular_integral(values)
        return float(self.radial_integral(ang * self.sinh_r ** (self.n - 1)))

    @property
    def frame(self):
        return FrameConvention(self.n)

    def require_spectral(self):
        if not isinstance(self.sphere, SphereTransform):
            raise InvalidParameterError(
                "angular spectral differentiation is specialized to n = 3; "
                "for n >= 4 only quadrature-based operations are available"
            )
        return self.sphere


def build_grid(n, R0, Rmax, Nr, L, angular_tail_threshold=0.5):
    """Construct the exterior grid.

    Preconditions: n >= 3, 0 < R0 < Rmax, Nr >= 8, L >= 2.  Radial nodes are
    uniform in s = exp(-r) with r_0 = R0 and r_{Nr-1} = Rmax; the angular
    quadrature integrates spherical harmonics of degree <= 2L exactly and its
    weights sum to omega_{n-1}.
    """
    if n < 3:
        raise InvalidParameterError(f"dimension n must be >= 3, got {n}")
    if not (0 < R0 < Rmax):
        raise InvalidParameterError(f"need 0 < R0 < Rmax, got R0={R0}, Rmax={Rmax}")
    if Nr < 8:
        raise InvalidParameterError(f"need Nr >= 8 radial nodes, got {Nr}")
    if L < 2:
        raise InvalidParameterError(f"need spherical-harmonic degree L >= 2, got {L}")
    s = np.linspace(np.exp(-R0), np.exp(-Rmax), Nr)
    r = -np.log(s)
    r[0], r[-1] = R0, Rmax
    sphere = make_sphere(n, L)
    grid = Grid(n=n, R0=float(R0), Rmax=float(Rmax), Nr=int(Nr), L=int(L),
                r=r, s=s, sphere=sphere,
                angular_tail_threshold=angular_tail_threshold)
    return grid


Grid.omega = property(lambda self: sphere_volume(self.n))
