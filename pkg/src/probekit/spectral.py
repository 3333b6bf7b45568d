"""Spherical-harmonic fields on the unit sphere.

Conventions, shared by every module:

* fully normalised harmonics, ``int |Y_n^k|^2 dS = 1``, with the
  Condon-Shortley phase, and ``Y_n^{-k} = (-1)^k conj(Y_n^k)``;
* a field stores ``c[n, k]`` for ``0 <= n <= N`` and ``-K <= k <= K`` where
  ``K <= N`` is the *order cap*.  Axisymmetric (zonal) fields use ``K = 0``,
  which keeps very high degree probing data cheap;
* volume fields carry a radial grid and one coefficient plane per radius.

Legendre functions are generated by the standard normalised three-term
recurrence.  Sectoral seeds are carried in log form so the recurrence stays
inside the float range for degrees in the thousands.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .errors import DomainError, TailToleranceError

__all__ = [
    "HarmonicField",
    "SobolevIndex",
    "SphereGrid",
    "legendre_table",
    "zonal_values",
    "ylm",
    "sobolev_norm",
    "point_source_trace",
    "required_degree",
    "synthesize",
    "project",
    "multiply",
    "unit_vectors",
    "gauss_legendre",
]

FOUR_PI = 4.0 * math.pi
_RESCALE = 1e200


@dataclass
class HarmonicField:
    """Triangular coefficient array, optionally sampled on radii.

    ``coeffs`` has shape ``(N+1, 2K+1)`` for a surface trace and
    ``(R, N+1, 2K+1)`` for a volume field on ``radial_grid`` (length ``R``).
    Column ``K + k`` holds order ``k``.
    """

    max_degree: int
    coeffs: np.ndarray
    radial_grid: np.ndarray | None = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.radial_grid is not None:
            self.radial_grid = np.asarray(self.radial_grid, dtype=float)
            if self.coeffs.ndim != 3 or self.coeffs.shape[0] != self.radial_grid.size:
                raise DomainError("volume coefficients must have shape (R, N+1, 2K+1)")
        elif self.coeffs.ndim != 2:
            raise DomainError("trace coefficients must have shape (N+1, 2K+1)")
        if self.coeffs.shape[-2] != self.max_degree + 1 or self.coeffs.shape[-1] % 2 != 1:
            raise DomainError(
                f"coefficient shape {self.coeffs.shape} does not match max_degree {self.max_degree}"
            )
        if self.order_cap > self.max_degree:
            raise DomainError("order cap exceeds max_degree")
        K = self.order_cap
        outside = np.abs(np.arange(-K, K + 1))[None, :] > np.arange(self.max_degree + 1)[:, None]
        if np.any(outside):
            self.coeffs[..., outside] = 0.0

    # construction

    @classmethod
    def zeros(cls, max_degree, order_cap=None, radial_grid=None):
        K = max_degree if order_cap is None else order_cap
        shape = (max_degree + 1, 2 * K + 1)
        if radial_grid is not None:
            radial_grid = np.asarray(radial_grid, dtype=float)
            shape = (radial_grid.size,) + shape
        return cls(max_degree, np.zeros(shape, dtype=complex), radial_grid)

    @classmethod
    def zonal(cls, band, radial_grid=None):
        """Axisymmetric field from its ``k = 0`` coefficients (last axis = degree)."""
        band = np.asarray(band, dtype=complex)
        return cls(band.shape[-1] - 1, band[..., None], radial_grid)

    # shape helpers

    @property
    def order_cap(self) -> int:
        return (self.coeffs.shape[-1] - 1) // 2

    @property
    def is_volume(self) -> bool:
        return self.radial_grid is not None

    @property
    def is_zonal(self) -> bool:
        K = self.order_cap
        return K == 0 or not np.any(np.delete(self.coeffs, K, axis=-1))

    def get(self, n, k):
        if abs(k) > n or n > self.max_degree:
            return 0.0
        if abs(k) > self.order_cap:
            return 0.0
        return self.coeffs[..., n, self.order_cap + k]

    def set(self, n, k, value):
        if abs(k) > n or n > self.max_degree or abs(k) > self.order_cap:
            raise DomainError(f"(n, k) = ({n}, {k}) outside the stored triangle")
        self.coeffs[..., n, self.order_cap + k] = value

    @property
    def band0(self) -> np.ndarray:
        """The ``k = 0`` column."""
        return self.coeffs[..., self.order_cap]

    def copy(self):
        grid = None if self.radial_grid is None else self.radial_grid.copy()
        return HarmonicField(self.max_degree, self.coeffs.copy(), grid)

    def with_shape(self, max_degree=None, order_cap=None):
        """Zero-padded or truncated copy with a new degree and order cap."""
        N = self.max_degree if max_degree is None else max_degree
        K = min(N, self.order_cap if order_cap is None else order_cap)
        out = HarmonicField.zeros(N, K, self.radial_grid)
        n = min(N, self.max_degree) + 1
        kk = min(K, self.order_cap)
        out.coeffs[..., :n, K - kk:K + kk + 1] = self.coeffs[
            ..., :n, self.order_cap - kk:self.order_cap + kk + 1
        ]
        return out

    def _aligned(self, other):
        if (self.radial_grid is None) != (other.radial_grid is None):
            raise DomainError("cannot combine a trace with a volume field")
        if self.radial_grid is not None and not np.array_equal(self.radial_grid, other.radial_grid):
            raise DomainError("radial grids differ")
        N = max(self.max_degree, other.max_degree)
        K = max(self.order_cap, other.order_cap)
        return self.with_shape(N, K), other.with_shape(N, K)

    def __add__(self, other):
        a, b = self._aligned(other)
        a.coeffs += b.coeffs
        return a

    def __sub__(self, other):
        a, b = self._aligned(other)
        a.coeffs -= b.coeffs
        return a

    def __neg__(self):
        return HarmonicField(self.max_degree, -self.coeffs, self.radial_grid)

    def __mul__(self, scalar):
        return HarmonicField(self.max_degree, self.coeffs * scalar, self.radial_grid)

    __rmul__ = __mul__

    def scale_degrees(self, multipliers):
        """Multiply degree band ``n`` by ``multipliers[n]``."""
        mult = np.asarray(multipliers)[: self.max_degree + 1]
        if mult.size != self.max_degree + 1:
            raise DomainError("need one multiplier per degree")
        return HarmonicField(self.max_degree, self.coeffs * mult[:, None], self.radial_grid)

    def at_radius(self, i):
        return HarmonicField(self.max_degree, self.coeffs[i].copy())

    def energy(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    @property
    def tail_energy(self) -> float:
        """Energy in degrees above ``0.9 N``."""
        start = int(math.floor(0.9 * self.max_degree)) + 1
        return float(np.sum(np.abs(self.coeffs[..., start:, :]) ** 2))

    def conjugate_symmetric(self, tol=1e-12) -> bool:
        """True when the coefficients describe a real-valued field."""
        K = self.order_cap
        ks = np.arange(-K, K + 1)
        mirrored = ((-1.0) ** np.abs(ks)) * np.conj(self.coeffs[..., ::-1])
        scale = max(1.0, float(np.max(np.abs(self.coeffs), initial=0.0)))
        return bool(np.max(np.abs(self.coeffs - mirrored), initial=0.0) <= tol * scale)

    # serialisation

    def to_dict(self):
        N, K = self.max_degree, self.order_cap

        def flat(plane):
            out = []
            for n in range(N + 1):
                for k in range(-n, n + 1):
                    c = plane[n, K + k] if abs(k) <= K else 0.0
                    out += [float(np.real(c)), float(np.imag(c))]
            return out

        if self.radial_grid is None:
            return {"max_degree": N, "order_cap": K, "coeffs": flat(self.coeffs)}
        return {
            "max_degree": N,
            "order_cap": K,
            "radial_grid": [float(r) for r in self.radial_grid],
            "coeffs": [flat(p) for p in self.coeffs],
        }

    @classmethod
    def from_dict(cls, data):
        N = int(data["max_degree"])

        def unflat(values):
            values = np.asarray(values, dtype=float)
            if values.size != 2 * (N + 1) ** 2:
                raise DomainError("coefficient list length does not match max_degree")
            plane = np.zeros((N + 1, 2 * N + 1), dtype=complex)
            z = values[0::2] + 1j * values[1::2]
            pos = 0
            for n in range(N + 1):
                plane[n, N - n:N + n + 1] = z[pos:pos + 2 * n + 1]
                pos += 2 * n + 1
            return plane

        K = int(data.get("order_cap", N))
        grid = data.get("radial_grid")
        if grid is None:
            full = cls(N, unflat(data["coeffs"]))
        else:
            full = cls(N, np.stack([unflat(p) for p in data["coeffs"]]), np.asarray(grid))
        return full.with_shape(N, K)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SobolevIndex:
    """Order ``s`` of a surface Sobolev space ``H^s``."""

    s: float

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise DomainError("Sobolev order must be finite")


def _as_s(s):
    return s.s if isinstance(s, SobolevIndex) else float(s)


def sobolev_norm(f: HarmonicField, s) -> float:
    """Spectral ``H^s`` norm ``(sum (1+n(n+1))^s |c_nk|^2)^(1/2)``."""
    if f.is_volume:
        raise DomainError("sobolev_norm takes a surface trace")
    n = np.arange(f.max_degree + 1)
    weight = (1.0 + n * (n + 1.0)) ** _as_s(s)
    return float(np.sqrt(np.sum(weight[:, None] * np.abs(f.coeffs) ** 2)))


# Legendre machinery

def _sectoral_log(K, sin_theta):
    """log|Pbar_k^k| for k = 0..K, shape (K+1, P)."""
    logsin = np.log(np.maximum(sin_theta, 1e-300))
    k = np.arange(1, K + 1)
    steps = 0.5 * np.log((2.0 * k + 1.0) / (2.0 * k))
    logc = np.concatenate([[0.0], np.cumsum(steps)]) - 0.5 * math.log(FOUR_PI)
    return logc[:, None] + np.arange(K + 1)[:, None] * logsin[None, :]


def legendre_table(N, K, x):
    """Normalised associated Legendre values ``Pbar_n^k(x)``.

    Returns shape ``(K+1, N+1, P)``; entries with ``n < k`` are zero.  The
    values include the Condon-Shortley phase so that
    ``Y_n^k = Pbar_n^k(cos theta) exp(i k phi)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    sin_theta = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    out = np.zeros((K + 1, N + 1, x.size))
    logs = _sectoral_log(K, sin_theta)
    for k in range(K + 1):
        if k > N:
            break
        expo = logs[k].copy()
        if k > 0:
            expo[sin_theta == 0.0] = -np.inf
        sign = -1.0 if k % 2 else 1.0
        prev2 = np.zeros_like(x)
        prev = np.ones_like(x)
        with np.errstate(under="ignore", over="ignore", invalid="ignore"):
            out[k, k] = sign * np.exp(expo)
            if k + 1 <= N:
                cur = math.sqrt(2 * k + 3) * x * prev
                out[k, k + 1] = sign * cur * np.exp(expo)
                prev2, prev = prev, cur
            for n in range(k + 2, N + 1):
                a = math.sqrt((4.0 * n * n - 1.0) / (n * n - k * k))
                b = math.sqrt(((n - 1.0) ** 2 - k * k) / (4.0 * (n - 1.0) ** 2 - 1.0))
                cur = a * (x * prev - b * prev2)
                big = np.abs(cur) > _RESCALE
                if np.any(big):
                    cur = np.where(big, cur / _RESCALE, cur)
                    prev = np.where(big, prev / _RESCALE, prev)
                    expo = np.where(big, expo + math.log(_RESCALE), expo)
                out[k, n] = sign * cur * np.exp(expo)
                prev2, prev = prev, cur
    return np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)


def zonal_values(N, x):
    """``Y_n^0`` on colatitude cosines ``x``; shape ``(N+1, P)``."""
    return legendre_table(N, 0, x)[0]


def _zonal_synth(band, x):
    """``sum_n band[..., n] Y_n^0(x)`` by streaming the recurrence."""
    x = np.asarray(x, dtype=float)
    band = np.asarray(band)
    norm = 1.0 / math.sqrt(FOUR_PI)
    p_prev = np.zeros_like(x)
    p = np.full_like(x, norm)
    acc = band[..., 0:1] * p
    for n in range(1, band.shape[-1]):
        a = math.sqrt((4.0 * n * n - 1.0) / (n * n))
        b = math.sqrt((n - 1.0) ** 2 / (4.0 * (n - 1.0) ** 2 - 1.0)) if n > 1 else 0.0
        p_prev, p = p, a * (x * p - b * p_prev)
        acc = acc + band[..., n:n + 1] * p
    return acc


def _zonal_analysis(values, x, w, N):
    """Project samples at Gauss nodes onto ``Y_n^0``; ``values`` last axis = node."""
    values = np.asarray(values) * (2.0 * math.pi * w)
    out = np.zeros(values.shape[:-1] + (N + 1,), dtype=complex)
    norm = 1.0 / math.sqrt(FOUR_PI)
    p_prev = np.zeros_like(x)
    p = np.full_like(x, norm)
    out[..., 0] = values @ p
    for n in range(1, N + 1):
        a = math.sqrt((4.0 * n * n - 1.0) / (n * n))
        b = math.sqrt((n - 1.0) ** 2 / (4.0 * (n - 1.0) ** 2 - 1.0)) if n > 1 else 0.0
        p_prev, p = p, a * (x * p - b * p_prev)
        out[..., n] = values @ p
    return out


def unit_vectors(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms == 0):
        raise DomainError("zero vector has no direction")
    return pts / norms[:, None]


def _angles(points):
    pts = unit_vectors(points)
    x = np.clip(pts[:, 2], -1.0, 1.0)
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    return x, phi


def ylm(n, k, points):
    """``Y_n^k`` at unit vectors (any order sign)."""
    x, phi = _angles(points)
    kk = abs(k)
    if kk > n:
        return np.zeros(x.size, dtype=complex)
    p = legendre_table(n, kk, x)[kk, n]
    val = p * np.exp(1j * kk * phi)
    if k < 0:
        val = (-1) ** kk * np.conj(val)
    return val


def synthesize(f: HarmonicField, points) -> np.ndarray:
    """Pointwise values ``sum c[n,k] Y_n^k`` at unit vectors.

    Volume fields are evaluated on every radius, giving shape ``(R, P)``.
    """
    x, phi = _angles(points)
    K = f.order_cap
    if K == 0:
        return _zonal_synth(f.coeffs[..., 0], x)
    table = legendre_table(f.max_degree, K, x)
    out = 0.0
    for k in range(-K, K + 1):
        kk = abs(k)
        sign = (-1.0) ** kk if k < 0 else 1.0
        radial = np.tensordot(f.coeffs[..., :, K + k], table[kk], axes=([-1], [0]))
        out = out + sign * radial * np.exp(1j * k * phi)
    return np.asarray(out, dtype=complex)


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre colatitude nodes times a uniform longitude grid."""

    n_theta: int
    n_phi: int
    x: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    @classmethod
    def for_degree(cls, N, order_cap=None):
        """Grid of size ``2(N+1) x (2N+2)``, exact for degree ``2N`` products."""
        K = N if order_cap is None else order_cap
        x, w = gauss_legendre(2 * (N + 1))
        n_phi = 1 if K == 0 else 2 * N + 2
        return cls(x.size, n_phi, x, w)

    @property
    def phi(self):
        return 2.0 * math.pi * np.arange(self.n_phi) / self.n_phi

    def points(self):
        """Unit vectors, shape ``(n_theta * n_phi, 3)`` in theta-major order."""
        st = np.sqrt(1.0 - self.x**2)
        ph = self.phi
        pts = np.stack(
            [
                np.outer(st, np.cos(ph)),
                np.outer(st, np.sin(ph)),
                np.outer(self.x, np.ones_like(ph)),
            ],
            axis=-1,
        )
        return pts.reshape(-1, 3)

    def synthesize(self, f: HarmonicField):
        """Samples on the grid, shape ``(..., n_theta, n_phi)``."""
        K = f.order_cap
        if K == 0:
            vals = _zonal_synth(f.coeffs[..., 0], self.x)
            return np.repeat(vals[..., None], self.n_phi, axis=-1)
        if 2 * K + 1 > self.n_phi:
            raise DomainError("longitude grid too coarse for the order cap")
        table = legendre_table(f.max_degree, K, self.x)
        spec = np.zeros(f.coeffs.shape[:-2] + (self.n_theta, self.n_phi), dtype=complex)
        for k in range(-K, K + 1):
            kk = abs(k)
            sign = (-1.0) ** kk if k < 0 else 1.0
            spec[..., k % self.n_phi] = sign * np.tensordot(
                f.coeffs[..., :, K + k], table[kk], axes=([-1], [0])
            )
        return np.fft.ifft(spec, axis=-1) * self.n_phi

    def analyze(self, values, N, order_cap=None, radial_grid=None):
        """Project grid samples onto degrees ``<= N``."""
        K = N if order_cap is None else min(order_cap, N)
        values = np.asarray(values)
        if K == 0:
            ring = values.mean(axis=-1)
            band = _zonal_analysis(ring, self.x, self.w, N)
            return HarmonicField.zonal(band, radial_grid)
        if 2 * K + 1 > self.n_phi:
            raise DomainError("longitude grid too coarse for the order cap")
        four = np.fft.fft(values, axis=-1) * (2.0 * math.pi / self.n_phi)
        table = legendre_table(N, K, self.x)
        coeffs = np.zeros(values.shape[:-2] + (N + 1, 2 * K + 1), dtype=complex)
        for k in range(-K, K + 1):
            kk = abs(k)
            sign = (-1.0) ** kk if k < 0 else 1.0
            ring = four[..., k % self.n_phi] * self.w
            coeffs[..., K + k] = sign * np.tensordot(ring, table[kk], axes=([-1], [1]))
        return HarmonicField(N, coeffs, radial_grid)


@lru_cache(maxsize=32)
def _gauss(n):
    # scipy's nodes are accurate but its large-n weights are not; polish the
    # nodes with one Newton step and rebuild the weights from P_n'
    x = np.asarray(roots_legendre(n)[0], dtype=float)
    for _ in range(2):
        p_prev, p = np.ones_like(x), x.copy()
        for k in range(2, n + 1):
            p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        x = x - p / dp
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n):
    """Cached Gauss-Legendre nodes and weights on ``[-1, 1]``."""
    return _gauss(int(n))


def project(func, N, order_cap=None):
    """Harmonic coefficients of ``func(points) -> values`` up to degree ``N``.

    With ``order_cap=0`` the function is assumed axisymmetric about the
    z-axis and is only sampled on one meridian.
    """
    grid = SphereGrid.for_degree(N, order_cap)
    vals = np.asarray(func(grid.points()), dtype=complex).reshape(grid.n_theta, grid.n_phi)
    return grid.analyze(vals, N, order_cap)


def multiply(f: HarmonicField, g: HarmonicField, max_degree=None):
    """Pseudospectral product, exact up to the returned degree.

    Returns ``(product, aliasing_tail)`` where the tail is the energy the
    product carries above ``max_degree`` (default ``f.max_degree``).
    """
    N_out = f.max_degree if max_degree is None else max_degree
    N_full = f.max_degree + g.max_degree
    K_full = min(N_full, f.order_cap + g.order_cap)
    grid = SphereGrid.for_degree(N_full, K_full)
    prod = grid.synthesize(f.with_shape(order_cap=f.order_cap))
    other = grid.synthesize(g)
    if g.is_volume and not f.is_volume:
        raise DomainError("put the volume factor first")
    full = grid.analyze(prod * other, N_full, K_full, f.radial_grid)
    tail = float(np.sum(np.abs(full.coeffs[..., N_out + 1:, :]) ** 2))
    return full.with_shape(N_out, min(N_out, K_full)), tail


def required_degree(radius, tail_tol):
    """Smallest ``N`` with ``radius^-(N+1) < tail_tol``."""
    if radius <= 1.0:
        raise DomainError(f"source must lie outside the unit sphere, |z| = {radius}")
    return max(0, int(math.ceil(math.log(1.0 / tail_tol) / math.log(radius))) - 1)


def point_source_trace(z, N=None, tail_tol=1e-10, order_cap=None) -> HarmonicField:
    """Coefficients of ``1/(4 pi |x - z|)`` on the unit sphere.

    Band ``n`` is ``|z|^-(n+1)/(2n+1) conj(Y_n^k(z_hat))``.  ``N`` defaults to
    the smallest degree meeting ``tail_tol``; an explicit ``N`` that is too
    small raises :class:`TailToleranceError` carrying the required degree.
    """
    z = np.asarray(z, dtype=float)
    R = float(np.linalg.norm(z))
    need = required_degree(R, tail_tol)
    if N is None:
        N = need
    elif N < need:
        raise TailToleranceError(
            f"degree cap {N} leaves a tail above {tail_tol:g}; need N >= {need}", need
        )
    n = np.arange(N + 1)
    radial = R ** -(n + 1.0) / (2.0 * n + 1.0)
    zhat = z / R
    on_axis = abs(zhat[0]) < 1e-15 and abs(zhat[1]) < 1e-15
    if order_cap == 0 and not on_axis:
        raise DomainError("a zonal expansion needs the source on the z-axis")
    K = 0 if on_axis and order_cap is None else (N if order_cap is None else order_cap)
    out = HarmonicField.zeros(N, K)
    table = legendre_table(N, K, np.array([zhat[2]]))[:, :, 0]
    phi = math.atan2(zhat[1], zhat[0])
    for k in range(-K, K + 1):
        kk = abs(k)
        y = table[kk] * np.exp(1j * kk * phi)
        if k < 0:
            y = (-1) ** kk * np.conj(y)
        out.coeffs[:, K + k] = radial * np.conj(y)
    return out
