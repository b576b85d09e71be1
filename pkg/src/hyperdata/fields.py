"""Tensor-field value types on the exterior grid.

Fields store b-orthonormal-frame components as arrays over
(radial node, angular node, component slots).  A field may carry an
``exact_dr`` closure producing its exact radial derivative (used for the
analytically known Killing-potential fields, whose growth the mapped-
coordinate finite differences cannot resolve); all other fields fall back
to the grid's finite-difference rule.
"""

from __future__ import annotations

import io
import json
import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "ScalarField", "OneFormField", "SymTensorField", "InitialData",
    "zero_scalar", "zero_one_form", "zero_sym_tensor",
    "scalar_from_radial", "separable_scalar", "save_field", "load_field",
    "shell_norms_csv",
]


class Field:
    rank = None

    def __init__(self, grid, values, exact_dr=None):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        expected = (grid.Nr, grid.num_angular) + (grid.n,) * self.rank
        if self.values.shape != expected:
            raise InvalidParameterError(
                f"{type(self).__name__} expected shape {expected}, got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameterError("field values must be finite")
        self.exact_dr = exact_dr

    # -- algebra -------------------------------------------------------------

    def _wrap(self, values, exact_dr=None):
        return type(self)(self.grid, values, exact_dr=exact_dr)

    def __add__(self, other):
        if isinstance(other, Field):
            closure = None
            if self.exact_dr is not None and other.exact_dr is not None:
                closure = lambda a=self, b=other: a.exact_dr() + b.exact_dr()
            return self._wrap(self.values + other.values, closure)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Field):
            closure = None
            if self.exact_dr is not None and other.exact_dr is not None:
                closure = lambda a=self, b=other: a.exact_dr() - b.exact_dr()
            return self._wrap(self.values - other.values, closure)
        return NotImplemented

    def __mul__(self, factor):
        if np.isscalar(factor):
            closure = None
            if self.exact_dr is not None:
                closure = lambda a=self, c=factor: a.exact_dr() * c
            return self._wrap(self.values * factor, closure)
        if isinstance(factor, ScalarField):
            return _scalar_times(factor, self)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __truediv__(self, factor):
        if np.isscalar(factor):
            return self * (1.0 / factor)
        return NotImplemented

    # -- diagnostics ----------------------------------------------------------

    def pointwise_norm(self):
        """|field|_b at every node, shape (Nr, Na)."""
        if self.rank == 0:
            return np.abs(self.values)
        axes = tuple(range(2, 2 + self.rank))
        return np.sqrt(np.sum(self.values**2, axis=axes))

    def sup_norm(self):
        return float(np.max(self.pointwise_norm()))

    def shell_sup_norms(self):
        """sup over the sphere of |field|_b per radial shell, shape (Nr,)."""
        return np.max(self.pointwise_norm(), axis=1)

    def copy(self):
        return self._wrap(self.values.copy(), self.exact_dr)


class ScalarField(Field):
    rank = 0


class OneFormField(Field):
    rank = 1


class SymTensorField(Field):
    rank = 2

    def __init__(self, grid, values, exact_dr=None, symmetrize=False):
        values = np.asarray(values, dtype=float)
        if symmetrize:
            values = 0.5 * (values + np.swapaxes(values, -1, -2))
        super().__init__(grid, values, exact_dr=exact_dr)
        if not np.array_equal(self.values, np.swapaxes(self.values, -1, -2)):
            raise InvalidParameterError("symmetric tensor components must satisfy T_ab = T_ba exactly")

    def _wrap(self, values, exact_dr=None):
        return SymTensorField(self.grid, values, exact_dr=exact_dr)


def _scalar_times(scalar, other):
    vals = other.values * scalar.values.reshape(scalar.values.shape + (1,) * other.rank)
    closure = None
    if scalar.exact_dr is not None and other.exact_dr is not None:
        closure = lambda f=scalar, t=other: _scalar_times(f.exact_dr(), t) + _scalar_times(f, t.exact_dr())
    if other.rank == 0:
        return ScalarField(other.grid, vals, exact_dr=closure)
    if other.rank == 1:
        return OneFormField(other.grid, vals, exact_dr=closure)
    return SymTensorField(other.grid, vals, exact_dr=closure)


# -- constructors -------------------------------------------------------------

def zero_scalar(grid):
    f = ScalarField(grid, np.zeros((grid.Nr, grid.num_angular)))
    f.exact_dr = lambda g=grid: zero_scalar(g)
    return f


def zero_one_form(grid):
    f = OneFormField(grid, np.zeros((grid.Nr, grid.num_angular, grid.n)))
    f.exact_dr = lambda g=grid: zero_one_form(g)
    return f


def zero_sym_tensor(grid):
    f = SymTensorField(grid, np.zeros((grid.Nr, grid.num_angular, grid.n, grid.n)))
    f.exact_dr = lambda g=grid: zero_sym_tensor(g)
    return f


def identity_tensor(grid):
    vals = np.zeros((grid.Nr, grid.num_angular, grid.n, grid.n))
    vals[..., range(grid.n), range(grid.n)] = 1.0
    t = SymTensorField(grid, vals)
    t.exact_dr = lambda g=grid: zero_sym_tensor(g)
    return t


def scalar_from_radial(grid, profile, derivative=None):
    """Scalar field f(r) constant in angle.

    ``profile`` and optional ``derivative`` are callables of r; when a
    derivative chain is supplied the field carries exact radial derivatives.
    """
    vals = np.broadcast_to(np.asarray(profile(grid.r))[:, None],
                           (grid.Nr, grid.num_angular)).copy()
    closure = None
    if derivative is not None:
        closure = lambda g=grid, d=derivative: scalar_from_radial(
            g, d[0], derivative=d[1] if len(d) > 1 else None)
    return ScalarField(grid, vals, exact_dr=closure)


def cosh_chain(grid, start="cosh"):
    """cosh r (or sinh r) with an infinitely chainable exact derivative."""
    fn = np.cosh if start == "cosh" else np.sinh
    nxt = "sinh" if start == "cosh" else "cosh"
    vals = np.broadcast_to(fn(grid.r)[:, None], (grid.Nr, grid.num_angular)).copy()
    return ScalarField(grid, vals, exact_dr=lambda g=grid, s=nxt: cosh_chain(g, s))


def exp_chain(grid, rate, amplitude=1.0):
    """amplitude * exp(-rate * r) with chainable exact derivative."""
    vals = np.broadcast_to(amplitude * np.exp(-rate * grid.r)[:, None],
                           (grid.Nr, grid.num_angular)).copy()
    return ScalarField(grid, vals,
                       exact_dr=lambda g=grid: exp_chain(g, rate, -rate * amplitude))


def separable_scalar(grid, angular_values, radial_profile, radial_chain=None):
    """A(omega) * B(r) with optional exact radial-derivative chain for B."""
    vals = np.outer(radial_profile(grid.r), angular_values)
    closure = None
    if radial_chain:
        closure = lambda g=grid: separable_scalar(
            g, angular_values, radial_chain[0],
            radial_chain[1] if len(radial_chain) > 1 else None)
    return ScalarField(grid, vals, exact_dr=closure)


# -- initial data --------------------------------------------------------------

class InitialData:
    """The pair (e, pi) relative to the hyperbolic background, plus decay metadata.

    g = b + e must be positive definite at every node.  alpha, tau, tau0
    declare the regularity class (carried for reporting and for the shell
    extrapolation model; they are not enforced pointwise).
    """

    def __init__(self, e, pi, alpha=0.5, tau=None, tau0=1.0, check=True):
        if e.grid is not pi.grid:
            raise InvalidParameterError("e and pi must live on the same grid")
        self.grid = e.grid
        self.e = e
        self.pi = pi
        self.alpha = float(alpha)
        self.tau = float(tau) if tau is not None else float(self.grid.n)
        self.tau0 = float(tau0)
        if check:
            gmat = self.metric_values()
            eig = np.linalg.eigvalsh(gmat)
            if eig.min() <= 0.0:
                raise InvalidParameterError(
                    f"g = b + e is not positive definite (min eigenvalue {eig.min():.3e})"
                )

    def metric_values(self):
        """Frame components of g = b + e (b is the identity in the frame)."""
        g = self.e.values.copy()
        g[..., range(self.grid.n), range(self.grid.n)] += 1.0
        return g

    def inverse_metric_values(self):
        return np.linalg.inv(self.metric_values())

    def copy(self):
        return InitialData(self.e.copy(), self.pi.copy(), alpha=self.alpha,
                           tau=self.tau, tau0=self.tau0, check=False)


# -- serialization --------------------------------------------------------------

_MAGIC = b"HYPF1\n"
_KINDS = {0: "scalar", 1: "oneform", 2: "symtensor"}


def save_field(field, path):
    """Write the documented binary container.

    Layout: magic ``HYPF1\\n``, one UTF-8 JSON header line
    (n, R0, Rmax, Nr, L, kind, shape), then the row-major float64 payload.
    Symmetric tensors store the packed upper triangle in the order given by
    ``FrameConvention.sym_pairs``.
    """
    g = field.grid
    if field.rank == 2:
        pairs = g.frame.sym_pairs
        payload = np.stack([field.values[..., i, j] for i, j in pairs], axis=-1)
    else:
        payload = field.values
    header = {
        "n": g.n, "R0": g.R0, "Rmax": g.Rmax, "Nr": g.Nr, "L": g.L,
        "kind": _KINDS[field.rank], "shape": list(payload.shape),
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def load_field(path, grid):
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise InvalidParameterError(f"{path}: not a field container")
        header = json.loads(fh.readline().decode("utf-8"))
        payload = np.frombuffer(fh.read(), dtype="<f8").reshape(header["shape"])
    for key, val in (("n", grid.n), ("Nr", grid.Nr), ("L", grid.L)):
        if header[key] != val:
            raise InvalidParameterError(f"{path}: header {key}={header[key]} does not match grid {val}")
    kind = header["kind"]
    if kind == "scalar":
        return ScalarField(grid, payload)
    if kind == "oneform":
        return OneFormField(grid, payload)
    vals = np.zeros((grid.Nr, grid.num_angular, grid.n, grid.n))
    for k, (i, j) in enumerate(grid.frame.sym_pairs):
        vals[..., i, j] = payload[..., k]
        vals[..., j, i] = payload[..., k]
    return SymTensorField(grid, vals)


def shell_norms_csv(field, path):
    """CSV export of radial shell sup-norms: columns r, shell_sup_norm."""
    norms = field.shell_sup_norms()
    buf = io.StringIO()
    buf.write("r,shell_sup_norm\n")
    for rk, nk in zip(field.grid.r, norms):
        buf.write(f"{rk:.17g},{nk:.17g}\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
