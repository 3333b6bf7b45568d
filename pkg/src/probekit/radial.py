"""Radial profiles q(r) and composite Gauss radial grids on [0, 1]."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, ValidationError

__all__ = ["RadialProfile", "RadialGrid", "default_radial_grid"]


def _to_complex(v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(v[0], v[1])
    return complex(v)


def _from_complex(z):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


@dataclass(frozen=True)
class RadialProfile:
    """A complex radial coefficient ``q(r)`` on ``[0, 1]``.

    Kinds: ``constant`` (one value), ``polynomial`` (ascending coefficients
    in ``r``) and ``table`` (samples interpolated by a cubic spline).
    """

    kind: str
    values: tuple
    radii: tuple = ()
    _spline: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("constant", "polynomial", "table"):
            raise ValidationError("q_profile", f"unknown profile kind {self.kind!r}")
        vals = tuple(complex(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise ValidationError("q_profile", "profile needs at least one value")
        if any(not (math.isfinite(v.real) and math.isfinite(v.imag)) for v in vals):
            raise ValidationError("q_profile", "profile values must be finite")
        if self.kind == "constant" and len(vals) != 1:
            raise ValidationError("q_profile", "constant profile takes one value")
        if self.kind == "table":
            r = np.asarray(self.radii, dtype=float)
            if r.size != len(vals) or r.size < 4:
                raise ValidationError("q_profile.r", "table needs matching r and q lists of length >= 4")
            if np.any(np.diff(r) <= 0) or r[0] > 0 or r[-1] < 1:
                raise ValidationError("q_profile.r", "table radii must increase and cover [0, 1]")
            object.__setattr__(self, "radii", tuple(float(x) for x in r))
            object.__setattr__(self, "_spline", CubicSpline(r, np.asarray(vals)))

    @property
    def is_zero(self):
        return all(v == 0 for v in self.values)

    @classmethod
    def constant(cls, value):
        return cls("constant", (value,))

    @classmethod
    def polynomial(cls, coeffs):
        return cls("polynomial", tuple(coeffs))

    @classmethod
    def table(cls, radii, values):
        return cls("table", tuple(values), tuple(radii))

    @classmethod
    def from_config(cls, spec, path="q_profile"):
        """Parse ``0.7``, ``{"constant": c}``, ``{"polynomial": [...]}`` or
        ``{"table": {"r": [...], "q": [...]}}``; complex entries as ``[re, im]``."""
        try:
            if isinstance(spec, RadialProfile):
                return spec
            if isinstance(spec, (int, float)) or (isinstance(spec, list) and len(spec) == 2):
                return cls.constant(_to_complex(spec))
            if not isinstance(spec, dict) or len(spec) != 1:
                raise ValidationError(path, "expected a number or a one-key object")
            (kind, body), = spec.items()
            if kind == "constant":
                return cls.constant(_to_complex(body))
            if kind == "polynomial":
                return cls.polynomial([_to_complex(v) for v in body])
            if kind == "table":
                return cls.table(body["r"], [_to_complex(v) for v in body["q"]])
            raise ValidationError(path, f"unknown profile kind {kind!r}")
        except ValidationError as exc:
            if exc.field == path or exc.field.startswith(path):
                raise
            raise ValidationError(path, str(exc)) from None
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(path, f"malformed profile: {exc}") from None

    def to_config(self):
        if self.kind == "constant":
            return {"constant": _from_complex(self.values[0])}
        if self.kind == "polynomial":
            return {"polynomial": [_from_complex(v) for v in self.values]}
        return {"table": {"r": list(self.radii), "q": [_from_complex(v) for v in self.values]}}

    @property
    def is_real(self) -> bool:
        return all(v.imag == 0 for v in self.values)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            out = np.full(r.shape, self.values[0])
        elif self.kind == "polynomial":
            out = np.polynomial.polynomial.polyval(r, np.asarray(self.values))
        else:
            out = self._spline(r)
        out = np.asarray(out, dtype=complex)
        return out.real if self.is_real else out

    def derivative(self, r, d):
        """``q^(d)`` sampled at ``r`` (complex)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            out = np.full(r.shape, self.values[0] if d == 0 else 0.0, dtype=complex)
        elif self.kind == "polynomial":
            c = np.asarray(self.values)
            c = np.polynomial.polynomial.polyder(c, d) if d else c
            out = np.polynomial.polynomial.polyval(r, c) if c.size else np.zeros(r.shape)
        else:
            out = self._spline(r, d) if d <= 3 else np.zeros(r.shape)
        return np.asarray(out, dtype=complex)

    def jet(self, r, order):
        """Derivatives ``q(r), q'(r), ..., q^(order)(r)``."""
        return np.array([complex(self.derivative(float(r), d)) for d in range(order + 1)])

    def __sub__(self, other):
        """Difference as a table on a fine grid (polynomials stay exact)."""
        kinds = {self.kind, other.kind}
        if kinds <= {"constant", "polynomial"}:
            a = np.asarray(self.values)
            b = np.asarray(other.values)
            return RadialProfile.polynomial(tuple(np.polynomial.polynomial.polysub(a, b)))
        r = np.linspace(0.0, 1.0, 401)
        return RadialProfile.table(r, self(r) - other(r))


@dataclass(frozen=True)
class RadialGrid:
    """Composite Gauss-Legendre nodes on panels covering ``[0, 1]``."""

    edges: np.ndarray
    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, edges, order=20):
        edges = np.asarray(edges, dtype=float)
        if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
            raise DomainError("panel edges must increase from 0 to 1")
        x, w = np.polynomial.legendre.leggauss(order)
        a, b = edges[:-1, None], edges[1:, None]
        nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
        weights = (0.5 * (b - a) * w).ravel()
        return cls(edges, order, nodes, weights)

    @property
    def n_panels(self):
        return self.edges.size - 1

    @property
    def size(self):
        return self.nodes.size

    def integrate(self, values, weight_power=2):
        """``int_0^1 values(r) r^p dr`` along the first axis."""
        w = self.weights * self.nodes**weight_power
        return np.tensordot(w, values, axes=(0, 0))

    def panel_values(self, values):
        return np.asarray(values).reshape((self.n_panels, self.order) + np.shape(values)[1:])

    def derivative(self, values):
        """Panel-wise spectral derivative along the first axis."""
        x, _ = np.polynomial.legendre.leggauss(self.order)
        D = _diff_matrix(x)
        vals = self.panel_values(values)
        scale = 2.0 / np.diff(self.edges)
        out = np.einsum("ij,pj...->pi...", D, vals)
        out = out * scale.reshape((-1, 1) + (1,) * (vals.ndim - 2))
        return out.reshape(np.shape(values))


def _bary_weights(x):
    w = np.ones_like(x)
    for j in range(x.size):
        d = x[j] - np.delete(x, j)
        w[j] = 1.0 / np.prod(d)
    return w


def _diff_matrix(x):
    w = _bary_weights(x)
    n = x.size
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = (w[j] / w[i]) / (x[i] - x[j])
        D[i, i] = -np.sum(D[i])
    return D


def interpolation_matrix(x, targets):
    """Barycentric Lagrange matrix mapping values at ``x`` to ``targets``."""
    w = _bary_weights(x)
    diff = targets[:, None] - x[None, :]
    exact = diff == 0
    diff[exact] = 1.0
    M = w[None, :] / diff
    M /= M.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    M[rows] = exact[rows].astype(float)
    return M


def default_radial_grid(max_degree=64, order=20):
    """Panels graded geometrically toward ``r = 1``.

    Panel ``[1 - 2^-k, 1 - 2^-(k+1)]`` down to a width of roughly
    ``8 / max_degree`` keeps ``r^n``-type bands resolved for ``n <= max_degree``.
    """
    levels = max(4, int(math.ceil(math.log2(max(max_degree, 1) / 8.0))) + 2)
    inner = [0.0, 0.25]
    graded = [1.0 - 2.0**-k for k in range(1, levels + 1)]
    return RadialGrid.from_edges(inner + graded + [1.0], order)
