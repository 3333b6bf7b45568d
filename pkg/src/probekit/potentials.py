"""Layer and volume potentials on the unit ball, realised band by band.

Sign conventions (``nu`` is the outward normal of the unit sphere):

=========================  ==========================  ===================
operator                   multiplier on degree ``n``  interior extension
=========================  ==========================  ===================
single layer ``S``         ``1/(2n+1)``                ``r^n/(2n+1)``
double layer ``D``         (boundary part ``K``)       ``-(n+1) r^n/(2n+1)``
``K = K'``                 ``-1/(2(2n+1))``
hypersingular ``T``        ``-n(n+1)/(2n+1)``
=========================  ==========================  ===================

The interior traces obey ``(S phi)' = (K' + 1/2) phi`` and
``D phi = (K - 1/2) phi`` so that ``u = S[du/dnu] - D[u]`` for harmonic ``u``.

The volume potential ``G_q phi = int Phi(x, y) q(y) phi(y) dy`` expands as
``sum_n r_<^n / r_>^(n+1) / (2n+1)`` per band.  The kernel has a kink at
``r = r'`` so the radial integrals are split there: every Gauss panel is cut
at its own nodes and each piece gets its own Gauss rule, with the panel
interpolant supplying the integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError
from .radial import RadialGrid, RadialProfile, default_radial_grid, interpolation_matrix
from .spectral import HarmonicField, multiply, sobolev_norm

__all__ = [
    "PotentialConfig",
    "VolumePotential",
    "SmoothingReport",
    "multipliers",
    "single_layer",
    "dl_transpose",
    "double_layer",
    "hypersingular",
    "single_layer_volume",
    "double_layer_volume",
    "volume_potential",
    "volume_sobolev_bands",
    "volume_sobolev_norm",
    "smoothing_check",
]


def multipliers(op, N):
    """Degree multipliers of ``S``, ``K``, ``K'`` or ``T`` for ``n = 0..N``."""
    n = np.arange(N + 1, dtype=float)
    if op == "S":
        return 1.0 / (2 * n + 1)
    if op in ("K", "K'"):
        return -0.5 / (2 * n + 1)
    if op == "T":
        return -n * (n + 1) / (2 * n + 1)
    raise DomainError(f"unknown boundary operator {op!r}")


def _trace_only(f):
    if f.is_volume:
        raise DomainError("boundary operators act on traces")
    return f


def single_layer(density: HarmonicField) -> HarmonicField:
    return _trace_only(density).scale_degrees(multipliers("S", density.max_degree))


def dl_transpose(density: HarmonicField) -> HarmonicField:
    """``K'`` (equal to ``K`` on the sphere)."""
    return _trace_only(density).scale_degrees(multipliers("K'", density.max_degree))


double_layer = dl_transpose


def hypersingular(density: HarmonicField) -> HarmonicField:
    return _trace_only(density).scale_degrees(multipliers("T", density.max_degree))


def _extend(density, radii, profile):
    _trace_only(density)
    radii = np.asarray(radii, dtype=float)
    n = np.arange(density.max_degree + 1)
    bands = profile(n)[None, :] * radii[:, None] ** n[None, :]
    coeffs = bands[:, :, None] * density.coeffs[None]
    return HarmonicField(density.max_degree, coeffs, radii)


def single_layer_volume(density, radii):
    """Interior values of the single-layer potential on the given radii."""
    return _extend(density, radii, lambda n: 1.0 / (2 * n + 1.0))


def double_layer_volume(density, radii):
    """Interior values of the double-layer potential on the given radii."""
    return _extend(density, radii, lambda n: -(n + 1.0) / (2 * n + 1.0))


@dataclass(frozen=True)
class PotentialConfig:
    """Coefficient ``q(r, x) = q_r(|x|) * m(x/|x|)`` and its radial grid.

    ``modulation`` is an optional low-degree surface field ``m``; without it
    ``q`` is radial.
    """

    q: RadialProfile
    grid: RadialGrid = field(default_factory=default_radial_grid)
    modulation: HarmonicField | None = None

    def __post_init__(self):
        if not isinstance(self.q, RadialProfile):
            object.__setattr__(self, "q", RadialProfile.from_config(self.q))
        if self.modulation is not None and self.modulation.is_volume:
            raise ValidationError("modulation", "angular modulation must be a surface field")
        vals = self.q(self.grid.nodes)
        if not np.all(np.isfinite(vals)):
            raise ValidationError("q_profile", "q must be bounded on the grid")

    @property
    def radial_grid(self):
        return self.grid.nodes

    @property
    def is_zero(self):
        return not np.any(self.q(self.grid.nodes)) or (
            self.modulation is not None and self.modulation.energy() == 0.0
        )


@dataclass
class VolumePotential:
    volume: HarmonicField | None
    trace: HarmonicField
    normal_derivative: HarmonicField
    aliasing_tail: float = 0.0


class _SplitQuadrature:
    """Cached segment rules for the kink-split radial integrals of a grid."""

    _cache: dict = {}

    def __init__(self, grid: RadialGrid):
        o = grid.order
        x, _ = np.polynomial.legendre.leggauss(o)
        xs, ws = np.polynomial.legendre.leggauss(o)
        self.o = o
        self.breaks = []        # breakpoints t_0 = 0 < ... < t_S = 1
        self.node_break = []    # index of each grid node among the breakpoints
        self.seg_nodes = []     # per panel: (o+1, o) sub-nodes
        self.seg_weights = []
        self.seg_interp = []    # per panel: ((o+1) o, o)
        for p in range(grid.n_panels):
            a, b = grid.edges[p], grid.edges[p + 1]
            pn = 0.5 * (b - a) * x + 0.5 * (a + b)
            cuts = np.concatenate([[a], pn, [b]])
            if p == 0:
                self.breaks.append(a)
            for c in cuts[1:]:
                self.breaks.append(c)
            self.node_break.extend(range(len(self.breaks) - o - 1, len(self.breaks) - 1))
            lo, hi = cuts[:-1, None], cuts[1:, None]
            sub = 0.5 * (hi - lo) * xs + 0.5 * (hi + lo)
            self.seg_nodes.append(sub)
            self.seg_weights.append(0.5 * (hi - lo) * ws)
            ref = (2.0 * sub.ravel() - (a + b)) / (b - a)
            self.seg_interp.append(interpolation_matrix(x, ref))
        self.breaks = np.asarray(self.breaks)
        self.node_break = np.asarray(self.node_break)

    @classmethod
    def for_grid(cls, grid):
        key = (tuple(grid.edges), grid.order)
        if key not in cls._cache:
            cls._cache[key] = cls(grid)
        return cls._cache[key]

    def green(self, F, n):
        """Per-band radial Green integrals.

        ``F`` has shape ``(R, N+1, C)`` on the grid nodes.  Returns the
        potential at the nodes and ``A(1) = int_0^1 r^(n+2) F dr``.
        """
        o = self.o
        R, NN, C = F.shape
        nf = n.astype(float)
        S = self.breaks.size - 1
        incA = np.zeros((S, NN, C), dtype=complex)
        incB = np.zeros((S, NN, C), dtype=complex)
        s0 = 0
        for p, (sub, w, M) in enumerate(zip(self.seg_nodes, self.seg_weights, self.seg_interp)):
            Fp = F[p * o:(p + 1) * o].reshape(o, NN * C)
            Fs = (M @ Fp).reshape(o + 1, o, NN, C)
            t_lo = self.breaks[s0:s0 + o + 1]
            t_hi = self.breaks[s0 + 1:s0 + o + 2]
            ratio_a = sub / t_hi[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio_b = np.where(sub > 0, t_lo[:, None] / sub, 0.0)
            kA = np.power(ratio_a[..., None], nf + 1.0) * (w * sub)[..., None]
            kB = np.power(ratio_b[..., None], nf) * (w * sub)[..., None]
            incA[s0:s0 + o + 1] = np.einsum("sqn,sqnc->snc", kA, Fs)
            incB[s0:s0 + o + 1] = np.einsum("sqn,sqnc->snc", kB, Fs)
            s0 += o + 1
        A = np.zeros((S + 1, NN, C), dtype=complex)
        B = np.zeros((S + 1, NN, C), dtype=complex)
        t = self.breaks
        with np.errstate(divide="ignore", invalid="ignore"):
            for s in range(S):
                fac = np.power(t[s] / t[s + 1], nf + 1.0)
                A[s + 1] = fac[:, None] * A[s] + incA[s]
            for s in range(S - 1, -1, -1):
                fac = np.power(t[s] / t[s + 1], nf)
                B[s] = fac[:, None] * B[s + 1] + incB[s]
        denom = (2 * nf + 1.0)[None, :, None]
        idx = self.node_break
        V = (A[idx] + B[idx]) / denom
        return V, A[-1]


def _grid_check(source, cfg):
    if not source.is_volume:
        raise DomainError("volume_potential needs a volume field")
    if source.radial_grid.size != cfg.grid.size or not np.allclose(
        source.radial_grid, cfg.grid.nodes, rtol=0, atol=1e-15
    ):
        raise DomainError("source radial grid does not match the configuration grid")


def weighted_source(source: HarmonicField, cfg: PotentialConfig):
    """``q * source`` on the grid, with the aliasing tail of the product."""
    _grid_check(source, cfg)
    qr = np.asarray(cfg.q(cfg.grid.nodes), dtype=complex)
    tail = 0.0
    if cfg.modulation is not None:
        N_out = min(source.max_degree + cfg.modulation.max_degree, 2 * max(source.max_degree, 1))
        source, tail = multiply(source, cfg.modulation, N_out)
    return HarmonicField(source.max_degree, qr[:, None, None] * source.coeffs, source.radial_grid), tail


def volume_potential(source: HarmonicField, cfg: PotentialConfig, volume=True) -> VolumePotential:
    """``G_q`` applied to a volume field: interior values, trace and ``d/dnu``."""
    F, tail = weighted_source(source, cfg)
    N = F.max_degree
    n = np.arange(N + 1)
    quad = _SplitQuadrature.for_grid(cfg.grid)
    V, A1 = quad.green(F.coeffs, n)
    nf = n.astype(float)[:, None]
    trace = HarmonicField(N, A1 / (2 * nf + 1))
    dnu = HarmonicField(N, -(nf + 1) * A1 / (2 * nf + 1))
    vol = HarmonicField(N, V, cfg.grid.nodes) if volume else None
    return VolumePotential(vol, trace, dnu, tail)


def volume_sobolev_bands(f: HarmonicField, grid: RadialGrid, order):
    """Per-degree terms of the volume surrogate norm (squared)."""
    if not f.is_volume:
        raise DomainError("volume norm needs a volume field")
    vals = f.coeffs
    dr = grid.derivative(vals)
    dens = np.sum(np.abs(vals) ** 2 + np.abs(dr) ** 2, axis=-1)
    radial = grid.integrate(dens)
    n = np.arange(f.max_degree + 1)
    return (1.0 + n * (n + 1.0)) ** (order - 1.0) * radial


def volume_sobolev_norm(f: HarmonicField, grid: RadialGrid, order) -> float:
    """``(sum_n (1+n(n+1))^(order-1) int (|f_n|^2 + |f_n'|^2) r^2 dr)^(1/2)``."""
    return float(math.sqrt(np.sum(volume_sobolev_bands(f, grid, order))))


@dataclass
class SmoothingReport:
    op: str
    s: float
    gain: int
    degrees: np.ndarray
    ratios: np.ndarray
    random_ratio: float
    growth_exponent: float

    @property
    def max_ratio(self):
        return float(np.max(self.ratios))

    @property
    def bounded(self):
        return abs(self.growth_exponent) < 0.1


_GAINS = {"S": 1, "K": 1, "K'": 1, "T": -1, "G_q": 2}


def _growth(degrees, ratios):
    sel = degrees >= max(2, degrees[-1] // 2)
    return float(np.polyfit(np.log(degrees[sel]), np.log(ratios[sel]), 1)[0])


def smoothing_check(op, s, N=64, cfg: PotentialConfig | None = None, seed=0) -> SmoothingReport:
    """Measure how an operator shifts Sobolev order across degrees ``<= N``.

    ``gain`` is +1 for ``S, K, K'``, -1 for ``T`` and +2 for ``G_q``.  The
    ratios are per-degree operator norms between ``H^s`` and ``H^(s+gain)``;
    ``growth_exponent`` is their log-log slope over the upper half of the
    degree range, near zero when the mapping property holds.
    """
    if op not in _GAINS:
        raise DomainError(f"unknown operator {op!r}")
    s = float(getattr(s, "s", s))
    gain = _GAINS[op]
    rng = np.random.default_rng(seed)
    degrees = np.arange(1, N + 1)
    if op != "G_q":
        sig = np.abs(multipliers(op, N))
        w = 1.0 + degrees * (degrees + 1.0)
        ratios = sig[1:] * w ** (gain / 2.0)
        f = HarmonicField(N, rng.normal(size=(N + 1, 2 * N + 1)) + 1j * rng.normal(size=(N + 1, 2 * N + 1)))
        f = f.scale_degrees((1.0 + np.arange(N + 1) * (np.arange(N + 1) + 1.0)) ** (-s / 2 - 1))
        g = f.scale_degrees(multipliers(op, N))
        rr = sobolev_norm(g, s + gain) / sobolev_norm(f, s)
        return SmoothingReport(op, s, gain, degrees, ratios, rr, _growth(degrees, ratios))
    if cfg is None:
        cfg = PotentialConfig(RadialProfile.constant(1.0), default_radial_grid(N))
    r = cfg.grid.nodes
    n = np.arange(N + 1)
    bands = r[:, None] ** n[None, :]
    src = HarmonicField.zonal(bands, r)
    out = volume_potential(src, cfg).volume
    before = volume_sobolev_bands(src, cfg.grid, s)
    after = volume_sobolev_bands(out, cfg.grid, s + gain)
    ratios = np.sqrt(after[1:] / before[1:])
    weights = rng.normal(size=N + 1) * (1.0 + n * (n + 1.0)) ** (-s / 2 - 1)
    rr = math.sqrt(np.sum(after * np.abs(weights) ** 2) / np.sum(before * np.abs(weights) ** 2))
    return SmoothingReport(op, s, gain, degrees, ratios, rr, _growth(degrees, ratios))
