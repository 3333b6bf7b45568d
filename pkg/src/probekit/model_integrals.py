"""Model integrals on the cylinder ``{y2^2 + y3^2 < 1, -1 < y1 < 0}``.

With ``z_j = (1/j, 0, 0)`` every integrand is axisymmetric about the
``y1``-axis.  Writing ``t = -y1`` and ``rho = sqrt(y2^2 + y3^2)`` reduces
each integral to ``2 pi int_0^1 int_0^1 F(t, rho) rho d rho dt``.  The
integrands concentrate at the corner ``(t, rho) = (0, 0)`` on the scale
``1/j``; the unit square is covered by dyadic L-shaped shells around that
corner, each made of three squares integrated by tensor Gauss rules and
bisected further while a lower-order rule disagrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import AccuracyError, DomainError
from .kernel_algebra import p_poly

__all__ = [
    "ModelDomainSpec",
    "QuadResult",
    "SlopeFit",
    "eval_I",
    "eval_I_with_error",
    "eval_probe_lower_bound",
    "probe_integral",
    "printed_lower_bound",
    "theory_slope",
    "fit_log_slope",
    "derivative_kernel",
]

HIGH, LOW = 16, 10
MAX_DEPTH = 40
MAX_SQUARES = 200_000


@dataclass(frozen=True)
class ModelDomainSpec:
    """Fixed cylinder; only the ``j`` values and tolerance vary."""

    j_list: tuple = (16, 32, 64, 128, 256, 512, 1024, 2048, 4096)
    quad_tol: float = 1e-8

    def __post_init__(self):
        js = tuple(int(j) for j in self.j_list)
        if not js or js[0] < 2 or any(b <= a for a, b in zip(js, js[1:])):
            raise DomainError("j_list must be strictly increasing with min >= 2")
        if not self.quad_tol > 0:
            raise DomainError("quad_tol must be positive")
        object.__setattr__(self, "j_list", js)


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float


@lru_cache(maxsize=None)
def _rule(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _square(f, x0, y0, h, n):
    x, w = _rule(n)
    X = x0 + h * x
    Y = y0 + h * x
    T, R = np.meshgrid(X, Y, indexing="ij")
    return float(h * h * np.einsum("i,j,ij->", w, w, f(T, R)))


def _adaptive_square(f, x0, y0, h, tol, depth, budget):
    budget[0] -= 1
    if budget[0] < 0:
        raise AccuracyError(f"adaptive refinement exceeded {MAX_SQUARES} squares")
    hi = _square(f, x0, y0, h, HIGH)
    lo = _square(f, x0, y0, h, LOW)
    err = abs(hi - lo)
    if err <= tol or depth >= MAX_DEPTH:
        return hi, err
    total, etot = 0.0, 0.0
    half = 0.5 * h
    for dx in (0.0, half):
        for dy in (0.0, half):
            v, e = _adaptive_square(f, x0 + dx, y0 + dy, half, tol / 4.0, depth + 1, budget)
            total += v
            etot += e
    return total, etot


def _duffy_core(f, h, n):
    """``int_[0,h]^2 f`` for ``f ~ 1/|(t, rho)|`` at the origin.

    Each half of the square is mapped from the unit square by
    ``(u, v) -> (h u, h u v)``; the Jacobian ``h^2 u`` cancels the singularity.
    """
    x, w = _rule(n)
    U, V = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w) * h * h * U
    a, b = h * U, h * U * V
    return float(np.sum(W * (f(a, b) + f(b, a))))


def corner_quadrature(f, tol, scale):
    """``int_0^1 int_0^1 f(t, rho) d rho dt`` for integrands peaked at the origin.

    ``scale`` is the width of the peak; shells are generated until they are
    far inside it and contribute below ``tol``.
    """
    total, err = 0.0, 0.0
    h = 1.0
    depth = 0
    shell_tol = tol / 8.0
    budget = [MAX_SQUARES]
    while True:
        half = 0.5 * h
        shell, shell_err = 0.0, 0.0
        for (x0, y0) in ((half, 0.0), (0.0, half), (half, half)):
            v, e = _adaptive_square(f, x0, y0, half, shell_tol, depth, budget)
            shell += v
            shell_err += e
        total += shell
        err += shell_err
        h = half
        depth += 1
        if h < 1e-3 * scale:
            core = _duffy_core(f, h, HIGH)
            total += core
            err += abs(core - _duffy_core(f, h, LOW))
            break
        if depth >= MAX_DEPTH:
            raise AccuracyError("corner refinement exhausted its depth budget", err)
    if err > tol:
        raise AccuracyError(f"quadrature error {err:.3g} above tolerance {tol:.3g}", err)
    return QuadResult(total, err)


def derivative_kernel(order):
    """Vectorised ``d^order/ds^order (s^2 + t^2)^(-1/2)`` from the exact polynomials."""
    p = p_poly(order)
    coeffs = [float(c) for c in p.coeffs]
    h = p.half

    def kern(s, t):
        r2 = s * s + t * t
        u, v = s * s / r2, t * t / r2
        total = np.zeros(np.shape(r2))
        for i, c in enumerate(coeffs):
            total = total + c * u**i * v ** (h - i)
        if order % 2:
            total = total * s / np.sqrt(r2)
        return total / r2 ** ((order + 1) / 2.0)

    return kern


def theory_slope(k):
    """Coefficient of ``ln j`` for ``I_k``."""
    if k < 1:
        raise DomainError("index must be >= 1")
    return -math.pi * math.factorial(k) / 2.0**k


def eval_I_with_error(k, j, spec: ModelDomainSpec | None = None, derivative=None) -> QuadResult:
    """``I_k`` on the model cylinder (``k`` odd or even, ``k >= 1``).

    Odd ``k = 2m-1``: ``int (1/|y|) d_1^{2m}(1/|y - z_j|) y_1^{2m-1} dy``.
    Even ``k = 2m``: ``int (1/|y|) d_1[d_1^{2m}(1/|y - z_j|) y_1^{2m}] dy``,
    evaluated as ``2m I_{2m-1}`` plus the ``d_1^{2m+1}`` term.

    ``derivative(order)`` may supply an alternative kernel factory with the
    signature of :func:`derivative_kernel`.
    """
    spec = ModelDomainSpec() if spec is None else spec
    if k < 1 or int(k) != k:
        raise DomainError("index must be a positive integer")
    if j < 2:
        raise DomainError("j must be >= 2")
    make = derivative_kernel if derivative is None else derivative
    m = (k + 1) // 2
    eps = 1.0 / j
    tol = spec.quad_tol

    def integrand(order, power):
        kern = make(order)
        sign = (-1.0) ** power  # y1^power with y1 = -t

        def f(t, rho):
            return 2.0 * math.pi * rho / np.sqrt(t * t + rho * rho) * kern(-t - eps, rho) * sign * t**power

        return f

    odd = corner_quadrature(integrand(2 * m, 2 * m - 1), tol / (2.0 * m + 1.0), eps)
    if k % 2:
        return odd
    extra = corner_quadrature(integrand(2 * m + 1, 2 * m), tol / 2.0, eps)
    return QuadResult(2 * m * odd.value + extra.value, 2 * m * odd.error + extra.error)


def eval_I(k, j, spec: ModelDomainSpec | None = None, derivative=None) -> float:
    return eval_I_with_error(k, j, spec, derivative).value


def probe_integral(j, quad_tol=1e-8) -> QuadResult:
    """``int (-y1)/|y|^3 * 1/|y - z_j| dy`` over the cylinder."""
    if j < 2:
        raise DomainError("j must be >= 2")
    eps = 1.0 / j

    def f(t, rho):
        r2 = t * t + rho * rho
        return 2.0 * math.pi * t * rho / (r2 * np.sqrt(r2)) / np.sqrt((t + eps) ** 2 + rho * rho)

    return corner_quadrature(f, quad_tol, eps)


def eval_probe_lower_bound(j, quad_tol=1e-8) -> float:
    """Value of the probe integral (to be compared with :func:`printed_lower_bound`)."""
    return probe_integral(j, quad_tol).value


def printed_lower_bound(j):
    return math.pi * (math.log(j) + math.log1p(1.0 / j) + 1.0 / (j + 1.0) - 1.0) - math.pi


@dataclass
class SlopeFit:
    """Least-squares fit ``value = slope ln j + intercept``."""

    pairs: list
    slope: complex
    intercept: complex
    residual_max: float
    threshold: float | None = None
    verdict: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def normalized_slope(self):
        scale = float(np.mean([abs(v) for _, v in self.pairs]))
        return abs(self.slope) / scale if scale > 0 else 0.0


def fit_log_slope(values, threshold=None) -> SlopeFit:
    """Affine fit in ``ln j``; verdict ``divergent`` iff ``|slope| > threshold``."""
    pairs = [(int(j), v) for j, v in values]
    if len(pairs) < 4:
        raise DomainError("a slope fit needs at least four points")
    js = np.array([j for j, _ in pairs], dtype=float)
    if np.any(js <= 0) or np.any(np.diff(js) <= 0):
        raise DomainError("j values must be positive and strictly increasing")
    y = np.array([v for _, v in pairs])
    X = np.stack([np.log(js), np.ones_like(js)], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    slope, intercept = coef
    if not np.iscomplexobj(y):
        slope, intercept = float(slope), float(intercept)
    verdict = None
    if threshold is not None:
        verdict = "divergent" if abs(slope) > threshold else "bounded"
    return SlopeFit(pairs, slope, intercept, float(np.max(np.abs(resid))), threshold, verdict)
