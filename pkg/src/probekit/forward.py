"""Dirichlet-to-Neumann multipliers for radial ``q`` and a concentric obstacle.

For ``u = w(r) Y_n`` the equation ``Delta u + q u = 0`` reduces to

    w'' + (2/r) w' + (q - n(n+1)/r^2) w = 0,    lambda_n = w'(1)/w(1).

We solve for ``g = w / r^n``, which satisfies the regular equation

    r g'' + 2(n+1) g' + r q g = 0

and stays O(1) for every degree, so ``lambda_n = n + g'(1)/g(1)``.  The
problem is posed as an initial-value collocation at the inner end (``g(0)=1``
with the equation itself enforcing regularity at the origin, or the obstacle
condition at ``r = rho``) on Chebyshev points, batched over degrees.  The
node count is doubled until the multipliers settle.

Obstacle influence decays like ``rho^(2n+1)``; above the degree where that
falls below double precision the regular solution is used instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NearEigenvalueError, ResolutionError, ValidationError
from .radial import RadialProfile
from .spectral import HarmonicField

__all__ = [
    "ObstacleSpec",
    "DtnOperator",
    "solve_radial_mode",
    "assemble_dtn",
    "apply_dtn",
    "cheb",
    "closed_form_dirichlet",
    "closed_form_constant_q0",
]

EIGEN_TOL = 1e-8


@dataclass(frozen=True)
class ObstacleSpec:
    """Concentric ball ``|x| < rho`` with a Dirichlet or Robin condition.

    The obstacle normal points out of the obstacle (toward larger ``r``), so
    the Robin condition reads ``w'(rho) + gamma w(rho) = 0``.
    """

    rho: float = 0.0
    bc: str = "dirichlet"
    gamma: complex = 0.0

    def __post_init__(self):
        try:
            rho = float(self.rho)
        except (TypeError, ValueError):
            raise ValidationError("obstacle.rho", "must be a number") from None
        if not (0.0 <= rho < 1.0):
            raise ValidationError("obstacle.rho", f"must lie in [0, 1), got {self.rho}")
        bc = str(self.bc).lower()
        if bc not in ("dirichlet", "robin"):
            raise ValidationError("obstacle.bc", f"must be 'dirichlet' or 'robin', got {self.bc!r}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "bc", bc)
        g = self.gamma
        if isinstance(g, (list, tuple)):
            g = complex(g[0], g[1])
        object.__setattr__(self, "gamma", complex(g))

    @property
    def present(self):
        return self.rho > 0.0

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def from_config(cls, spec):
        if spec is None:
            return cls()
        if isinstance(spec, ObstacleSpec):
            return spec
        if not isinstance(spec, dict):
            raise ValidationError("obstacle", "expected an object")
        unknown = set(spec) - {"rho", "bc", "gamma"}
        if unknown:
            raise ValidationError(f"obstacle.{sorted(unknown)[0]}", "unknown key")
        return cls(spec.get("rho", 0.0), spec.get("bc", "dirichlet"), spec.get("gamma", 0.0))

    def to_config(self):
        g = self.gamma
        return {"rho": self.rho, "bc": self.bc, "gamma": g.real if g.imag == 0 else [g.real, g.imag]}

    def active_degrees(self):
        """Number of degrees for which the obstacle is numerically visible."""
        if not self.present:
            return 0
        n = 0
        while (2 * n + 1) * self.rho ** (2 * n + 1) * max(1.0, abs(self.gamma)) > 1e-18:
            n += 1
        return n


@dataclass
class DtnOperator:
    max_degree: int
    multipliers: np.ndarray

    def __post_init__(self):
        self.multipliers = np.asarray(self.multipliers, dtype=complex)
        if self.multipliers.size != self.max_degree + 1:
            raise DomainError("need one multiplier per degree")

    def apply(self, f):
        return apply_dtn(self, f)


def cheb(M):
    """Chebyshev points ``x_j = cos(pi j / M)`` and differentiation matrix."""
    if M == 0:
        return np.zeros((1, 1)), np.ones(1)
    x = np.cos(np.pi * np.arange(M + 1) / M)
    c = np.ones(M + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(M + 1)
    i = np.arange(M + 1)
    # x_i - x_j via a product of sines keeps D accurate for large M
    X = 2.0 * np.sin(np.pi * (i[:, None] + i[None, :]) / (2 * M)) * np.sin(
        np.pi * (i[None, :] - i[:, None]) / (2 * M)
    )
    D = np.outer(c, 1.0 / c) / (X + np.eye(M + 1))
    D -= np.diag(D.sum(axis=1))
    return D, x


def _solve_block(degrees, q, a, obstacle, M):
    """``(lambda_n, g(1)/max|g|)`` for the given degrees on ``[a, 1]``.

    Without an obstacle the collocation runs in ``r``.  With one it runs in
    ``s = log r``, where the equation becomes
    ``g_ss + (2n+1) g_s + r^2 q g = 0`` and the ``(rho/r)^(2n+1)`` layer at
    the obstacle is spread over a wider interval.
    """
    D, x = cheb(M)
    nn = np.asarray(degrees, dtype=float)
    if a == 0.0:
        r = 0.5 * (x + 1.0)
        Dv = 2.0 * D
        D2 = Dv @ Dv
    else:
        s0 = math.log(a)
        r = np.exp(s0 - 0.5 * s0 * (x + 1.0))
        Dv = D * (-2.0 / s0)
        D2 = Dv @ Dv
    qr = np.asarray(q(r), dtype=complex)
    cplx = bool(np.any(qr.imag)) or obstacle.gamma.imag != 0
    qr = qr if cplx else qr.real
    dtype = complex if cplx else float
    if a == 0.0:
        base = r[:, None] * D2 + np.diag(r * qr)
        A = base[None] + 2.0 * (nn[:, None, None] + 1.0) * Dv[None]
    else:
        base = D2 + np.diag(r * r * qr)
        A = base[None] + (2.0 * nn[:, None, None] + 1.0) * Dv[None]
    A = A.astype(dtype)
    rhs = np.zeros((nn.size, M + 1), dtype=dtype)
    last = M  # node at the inner end
    # row 0 (outer end) and row M are replaced by the inner-end conditions
    A[:, 0] = 0.0
    A[:, 0, last] = 1.0
    if a == 0.0:
        rhs[:, 0] = 1.0
        # row M keeps the equation, which at r = 0 forces g'(0) = 0
    elif obstacle.bc == "dirichlet":
        A[:, last] = Dv[last]
        rhs[:, last] = 1.0
    else:
        rhs[:, 0] = 1.0
        A[:, last] = Dv[last]
        A[:, last, last] += nn + (obstacle.gamma * a if cplx else obstacle.gamma.real * a)
    g = np.linalg.solve(A, rhs[..., None])[..., 0]
    g1 = g[:, 0]
    dg1 = np.einsum("j,nj->n", Dv[0], g)
    scale = np.max(np.abs(g), axis=1)
    return nn + dg1 / g1, np.abs(g1) / scale


def _multipliers(q, obstacle, degrees, M0=24, M_max=512, tol=2e-11, chunk=1024):
    degrees = np.asarray(degrees, dtype=int)
    lam = np.zeros(degrees.size, dtype=complex)
    n_obs = obstacle.active_degrees()
    groups = [(degrees < n_obs, obstacle.rho), (degrees >= n_obs, 0.0)]
    for mask, a in groups:
        idx = np.nonzero(mask)[0]
        if a == 0.0 and q.is_zero:
            # harmonic r^n: exact, so q = 0 comparisons cancel to the last bit
            lam[idx] = degrees[idx]
            continue
        for start in range(0, idx.size, chunk):
            sel = idx[start:start + chunk]
            M = M0
            prev, rel_prev = _solve_block(degrees[sel], q, a, obstacle, M)
            last = np.inf
            while True:
                M *= 2
                cur, rel = _solve_block(degrees[sel], q, a, obstacle, M)
                err = float(np.max(np.abs(cur - prev) / np.maximum(1.0, np.abs(cur - degrees[sel]))))
                if not np.isfinite(err):
                    break
                if err < tol:
                    break
                allowed = min(1e-5, max(1e-9, 1e-11 / max(float(np.min(rel)), 1e-300)))
                if err < allowed and err > 0.25 * last:
                    # roundoff plateau: the coarser solve is the better one
                    cur, rel = prev, rel_prev
                    break
                if M >= M_max:
                    break
                last, prev, rel_prev = err, cur, rel
            bad = rel < EIGEN_TOL
            if np.any(bad):
                n_bad = int(degrees[sel][np.argmax(bad)])
                raise NearEigenvalueError(
                    f"degree {n_bad}: |w(1)| = {rel[np.argmax(bad)]:.3g} relative, the configuration "
                    "is at (or numerically next to) a Dirichlet eigenvalue"
                )
            allowed = min(1e-5, max(1e-9, 1e-11 / max(float(np.min(rel)), 1e-300)))
            if not np.all(np.isfinite(cur)) or err >= allowed:
                raise ResolutionError(
                    f"radial solve did not settle with {M} Chebyshev nodes "
                    f"(max relative change {err:.3g})"
                )
            lam[sel] = cur
    return lam


def solve_radial_mode(n, q, obstacle: ObstacleSpec | None = None) -> complex:
    """DtN multiplier ``lambda_n`` for one degree."""
    if n < 0 or int(n) != n:
        raise DomainError("degree must be a non-negative integer")
    q = RadialProfile.from_config(q)
    obstacle = ObstacleSpec() if obstacle is None else obstacle
    return complex(_multipliers(q, obstacle, [int(n)])[0])


def assemble_dtn(q, obstacle: ObstacleSpec | None = None, N=64) -> DtnOperator:
    """Multipliers ``lambda_0..lambda_N`` of the DtN map."""
    if N < 0:
        raise DomainError("degree cap must be non-negative")
    q = RadialProfile.from_config(q)
    obstacle = ObstacleSpec() if obstacle is None else obstacle
    return DtnOperator(N, _multipliers(q, obstacle, np.arange(N + 1)))


def apply_dtn(op: DtnOperator, f: HarmonicField) -> HarmonicField:
    if f.is_volume:
        raise DomainError("the DtN map acts on boundary traces")
    if f.max_degree > op.max_degree:
        raise DomainError(
            f"field degree {f.max_degree} exceeds the DtN degree cap {op.max_degree}"
        )
    return f.scale_degrees(op.multipliers[: f.max_degree + 1])


def closed_form_dirichlet(n, rho):
    """``lambda_n`` for ``q = 0`` and a Dirichlet ball of radius ``rho``."""
    p = rho ** (2 * n + 1)
    return (n + (n + 1) * p) / (1 - p)


def closed_form_constant_q0(k2):
    """``lambda_0`` for constant ``q = k2 > 0`` without obstacle."""
    k = math.sqrt(k2)
    return k / math.tan(k) - 1.0
