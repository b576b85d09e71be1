"""Angular machinery on the unit (n-1)-sphere.

For n = 3 this provides a real scalar spherical-harmonic pseudospectral
transform on a Gauss-Legendre x uniform-longitude grid, together with the
frame fields and exact first-derivative synthesis used by the tensor
calculus.  Tensor components are differentiated by lifting them to smooth
Cartesian scalar components (see :meth:`SphereTransform.frame_gradient` and
the lift helpers), so no spin-weighted bases are needed and no angular node
ever sits on a pole.

For n >= 4 only a product quadrature (Gauss-Jacobi per polar angle, uniform
in the azimuth) and the coordinate functions x^i are provided; spectral
differentiation is specialized to n = 3.
"""

from __future__ import annotations

import numpy as np
from scipy.special import roots_jacobi

from .errors import InvalidParameterError, ResolutionError

try:  # SciPy >= 1.15
    from scipy.special import assoc_legendre_p_all

    def _legendre_tables(L, x):
        p, dp = assoc_legendre_p_all(L, L, x, diff_n=1)
        return p[:, : L + 1], dp[:, : L + 1]  # (l, m) layout, CS phase included
except ImportError:  # pragma: no cover - older SciPy
    from scipy.special import lpmn

    def _legendre_tables(L, x):
        p, dp = lpmn(L, L, x)
        return p.T, dp.T

__all__ = ["SphereTransform", "ProductSphereQuadrature", "sphere_volume", "make_sphere"]


def sphere_volume(n):
    """Volume omega_{n-1} of the unit (n-1)-sphere in R^n."""
    from math import gamma, pi

    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


def _real_sh_tables(L, theta, phi):
    """Real orthonormal spherical harmonics and angular-derivative tables.

    Returns (basis, d_theta, d_phi_over_sin) each of shape (Na, Nc) where the
    coefficient index runs over (l, m) with l = 0..L, m = -l..l.  The
    normalization makes the basis orthonormal for the round measure, and the
    third table synthesizes (1/sin theta) d/dphi, which is regular at interior
    nodes.
    """
    ntheta = theta.size
    x = np.cos(theta)
    sin_t = np.sin(theta)
    # Associated Legendre values and x-derivatives per theta node.
    P = np.zeros((ntheta, L + 1, L + 1))
    dPdx = np.zeros_like(P)
    for i, xi in enumerate(x):
        P[i], dPdx[i] = _legendre_tables(L, xi)  # index (l, m)

    # Orthonormalization constants N_{lm}.
    norm = np.zeros((L + 1, L + 1))
    for l in range(L + 1):
        for m in range(l + 1):
            lognorm = 0.0
            for k in range(l - m + 1, l + m + 1):
                lognorm -= np.log(k)
            norm[l, m] = np.sqrt((2 * l + 1) / (4.0 * np.pi) * np.exp(lognorm))

    lm_list = [(l, m) for l in range(L + 1) for m in range(-l, l + 1)]
    Nc = len(lm_list)
    Na = ntheta * phi.size
    basis = np.zeros((Na, Nc))
    d_theta = np.zeros((Na, Nc))
    d_phi_s = np.zeros((Na, Nc))

    cos_mphi = {m: np.cos(m * phi) for m in range(L + 1)}
    sin_mphi = {m: np.sin(m * phi) for m in range(L + 1)}

    for c, (l, m) in enumerate(lm_list):
        am = abs(m)
        rad = norm[l, am] * P[:, l, am]          # (ntheta,)
        drad = -sin_t * norm[l, am] * dPdx[:, l, am]  # d/dtheta
        rad_over_sin = norm[l, am] * P[:, l, am] / sin_t
        if m == 0:
            ang, dang_fac = np.ones_like(phi), np.zeros_like(phi)
        elif m > 0:
            ang, dang_fac = np.sqrt(2.0) * cos_mphi[m], -np.sqrt(2.0) * m * sin_mphi[m]
        else:
            ang, dang_fac = np.sqrt(2.0) * sin_mphi[am], np.sqrt(2.0) * am * cos_mphi[am]
        basis[:, c] = np.outer(rad, ang).ravel()
        d_theta[:, c] = np.outer(drad, ang).ravel()
        d_phi_s[:, c] = np.outer(rad_over_sin, dang_fac).ravel()

    return lm_list, basis, d_theta, d_phi_s


class SphereTransform:
    """Scalar pseudospectral transform on S^2 with exact frame derivatives.

    Nodes are Gauss-Legendre in cos(theta) (L+1 points) times a uniform
    longitude grid (2L+2 points); the product rule integrates all spherical
    harmonics of degree <= 2L exactly.  ``frame_gradient`` returns the
    orthonormal-frame derivatives (d_theta f, (1/sin theta) d_phi f).
    """

    def __init__(self, L):
        if L < 2:
            raise InvalidParameterError("spherical-harmonic degree L must be >= 2")
        self.n = 3
        self.L = L
        xs, wx = np.polynomial.legendre.leggauss(L + 1)
        order = np.argsort(-xs)  # theta increasing from pole to pole
        xs, wx = xs[order], wx[order]
        self.theta = np.arccos(xs)
        nphi = 2 * L + 2
        self.phi = 2.0 * np.pi * np.arange(nphi) / nphi
        wphi = np.full(nphi, 2.0 * np.pi / nphi)
        self.num_nodes = self.theta.size * nphi
        self.weights = np.outer(wx, wphi).ravel()

        self.lm_list, self._Y, self._Yt, self._Yps = _real_sh_tables(L, self.theta, self.phi)
        self._analysis = self._Y.T * self.weights  # (Nc, Na)
        self.degrees = np.array([l for l, _ in self.lm_list])

        tt, pp = np.meshgrid(self.theta, self.phi, indexing="ij")
        tt, pp = tt.ravel(), pp.ravel()
        st, ct = np.sin(tt), np.cos(tt)
        sp_, cp = np.sin(pp), np.cos(pp)
        self.normal = np.stack([st * cp, st * sp_, ct], axis=-1)      # n_hat
        self.e_theta = np.stack([ct * cp, ct * sp_, -st], axis=-1)
        self.e_phi = np.stack([-sp_, cp, np.zeros_like(cp)], axis=-1)
        # Frame-to-Cartesian rotation, columns (n_hat, e_theta, e_phi).
        self.Q = np.stack([self.normal, self.e_theta, self.e_phi], axis=-1)
        self.x = self.normal.T.copy()  # x[i] = i-th coordinate function, (Na,)

    # -- scalar transform ---------------------------------------------------

    def analyze(self, values):
        """Spherical-harmonic coefficients of scalar samples (..., Na)."""
        return values @ self._analysis.T

    def synthesize(self, coeffs):
        return coeffs @ self._Y.T

    def integrate(self, values):
        """Quadrature over the unit sphere, exact through degree 2L."""
        return values @ self.weights

    def tail_fraction(self, values):
        """Fraction of total coefficient energy in the top two degrees {L-1, L}.

        The energy is summed over all leading axes so that numerically zero
        components cannot trigger a spurious tail signal.
        """
        coeffs = self.analyze(values)
        total = float(np.sum(coeffs**2))
        if total == 0.0:
            return 0.0
        tail = float(np.sum(coeffs[..., self.degrees >= self.L - 1] ** 2))
        return tail / total

    def check_resolved(self, values, threshold):
        if threshold is None:
            return
        frac = self.tail_fraction(values)
        if frac > threshold:
            raise ResolutionError(
                f"angular tail energy fraction {frac:.3e} exceeds threshold {threshold:.3e}"
            )

    def frame_gradient(self, values):
        """Orthonormal-frame sphere gradient of scalar samples.

        Returns an array (..., 2, Na): component 0 is d/dtheta, component 1 is
        (1/sin theta) d/dphi.  Exact for band-limited input.
        """
        coeffs = self.analyze(values)
        gt = coeffs @ self._Yt.T
        gp = coeffs @ self._Yps.T
        return np.stack([gt, gp], axis=-2)

    def laplace_beltrami(self, values):
        coeffs = self.analyze(values)
        return (coeffs * (-self.degrees * (self.degrees + 1))) @ self._Y.T

    # -- gradient / axial vector-harmonic shapes ----------------------------

    def scalar_harmonic(self, c):
        """Samples of the c-th real harmonic."""
        return self._Y[:, c].copy()

    def gradient_shape(self, c):
        """Frame components (2, Na) of D_A Y_c on the unit sphere."""
        return np.stack([self._Yt[:, c], self._Yps[:, c]])

    def axial_shape(self, c):
        """Frame components (2, Na) of eps_A^B D_B Y_c  (rotated gradient)."""
        gt, gp = self._Yt[:, c], self._Yps[:, c]
        # eps_{theta phi} = +1 in the oriented orthonormal frame.
        return np.stack([-gp, gt])


class ProductSphereQuadrature:
    """Product quadrature on S^{n-1} for n >= 4 (no spectral derivatives).

    Polar angles use Gauss-Jacobi rules matched to the sin-power measure;
    the azimuth is uniform.  Integrates smooth integrands (in particular all
    spherical harmonics of degree <= 2L) to well below 1e-12 relative error
    with the node counts chosen here.
    """

    def __init__(self, n, L):
        if n < 4:
            raise InvalidParameterError("ProductSphereQuadrature requires n >= 4")
        self.n = n
        self.L = L
        npolar = max(2 * L + 8, 16)
        nphi = max(2 * L + 2, 8)

        polar_nodes, polar_weights = [], []
        for j in range(1, n - 1):  # theta_j carries sin^{n-1-j}
            p = n - 1 - j
            a = (p - 1) / 2.0
            x, w = roots_jacobi(npolar, a, a)
            polar_nodes.append(np.arccos(x[::-1]))
            polar_weights.append(w[::-1])
        phi = 2.0 * np.pi * np.arange(nphi) / nphi
        wphi = np.full(nphi, 2.0 * np.pi / nphi)

        grids = np.meshgrid(*polar_nodes, phi, indexing="ij")
        self.angles = np.stack([g.ravel() for g in grids], axis=0)  # (n-1, Na)
        w = polar_weights[0]
        for wj in polar_weights[1:]:
            w = np.multiply.outer(w, wj)
        w = np.multiply.outer(w, wphi)
        self.weights = w.ravel()
        self.num_nodes = self.weights.size
        self.x = self._coordinate_functions()

    def _coordinate_functions(self):
        n = self.n
        thetas = self.angles[:-1]
        phi = self.angles[-1]
        sin_prod = np.ones(self.num_nodes)
        x = np.zeros((n, self.num_nodes))
        # x^k = cos(theta_{n-k+1}) * prod_{j<=n-k} sin(theta_j) for k >= 3,
        # x^2 = prod sin * sin(phi), x^1 = prod sin * cos(phi).
        for k in range(n, 2, -1):
            idx = n - k  # theta index (0-based) whose cosine enters x^k
            x[k - 1] = np.cos(thetas[idx]) * sin_prod
            sin_prod = sin_prod * np.sin(thetas[idx])
        x[1] = sin_prod * np.sin(phi)
        x[0] = sin_prod * np.cos(phi)
        return x

    def integrate(self, values):
        return values @ self.weights


def make_sphere(n, L):
    if n == 3:
        return SphereTransform(L)
    return ProductSphereQuadrature(n, L)
