"""Recursive singularity expansion for the Cauchy difference of point sources.

With ``Phi_j = Phi(., z_j)`` and ``phi_{-1} = phi_0 = 0``, ``psi_{-1} =
psi_0 = 0``:

    phi_{m+1} = 2 K' phi_m + 2 d_nu G_q (Phi_j + psi_{m-1})
    psi_{m+1} = S phi_{m+1} + G_q (Phi_j + psi_{m-1})

``phi_m`` approximates ``d_nu (u_j - Phi_j)`` on the sphere and ``psi_m``
approximates ``u_j - Phi_j`` inside, each up to a remainder that stays
bounded in ``j`` in successively stronger norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import PreconditionError, TailToleranceError
from .forward import ObstacleSpec, assemble_dtn
from .model_integrals import fit_log_slope
from .potentials import (
    PotentialConfig,
    dl_transpose,
    single_layer_volume,
    volume_potential,
    volume_sobolev_norm,
)
from .radial import RadialProfile, default_radial_grid
from .schedule import ProbeSchedule
from .spectral import HarmonicField, point_source_trace, sobolev_norm

__all__ = [
    "ExpansionState",
    "initial_state",
    "expansion_step",
    "expand",
    "remainder_norms",
    "difference_boundedness",
    "summarize_slopes",
    "NormRow",
    "SlopeRow",
    "BOUNDED_NORMALIZED_SLOPE",
    "DECAY_RATIO",
    "increment_ratio",
]

BOUNDED_NORMALIZED_SLOPE = 0.05


@dataclass
class ExpansionState:
    j: int
    m: int
    phi: HarmonicField
    psi: HarmonicField
    phi_prev: HarmonicField
    psi_prev: HarmonicField
    source_trace: HarmonicField
    source_volume: HarmonicField
    aliasing_tail: float = 0.0


def _source_fields(z, N, grid_nodes, order_cap):
    trace = point_source_trace(z, N=N, order_cap=order_cap)
    n = np.arange(N + 1)
    radial = grid_nodes[:, None] ** n[None, :]
    volume = HarmonicField(N, radial[:, :, None] * trace.coeffs[None], grid_nodes)
    return trace, volume


def initial_state(j, schedule: ProbeSchedule, cfg: PotentialConfig, N=None) -> ExpansionState:
    """Order-0 state for probe index ``j`` (all corrections zero)."""
    N = schedule.degree(j) if N is None else N
    zonal = cfg.modulation is None or cfg.modulation.is_zonal
    if zonal:
        z, K = schedule.z_aligned(j), 0
        if cfg.modulation is not None and not np.allclose(schedule.x0, (0.0, 0.0, 1.0)):
            z, K = schedule.z(j), None
    else:
        z, K = schedule.z(j), None
    trace, volume = _source_fields(z, N, cfg.grid.nodes, K)
    Kc = trace.order_cap
    zt = HarmonicField.zeros(N, Kc)
    zv = HarmonicField.zeros(N, Kc, cfg.grid.nodes)
    return ExpansionState(j, 0, zt, zv, zt, zv, trace, volume)


def expansion_step(state: ExpansionState, cfg: PotentialConfig, tail_tol=1e-8) -> ExpansionState:
    """Advance the recursion from order ``m`` to ``m + 1``."""
    src = state.source_volume + state.psi_prev
    vp = volume_potential(src, cfg)
    energy = max(src.energy(), 1e-300)
    if vp.aliasing_tail > tail_tol * energy:
        raise TailToleranceError(
            f"product with the angular modulation leaves a tail of {vp.aliasing_tail:.3g}",
            vp.trace.max_degree,
        )
    phi = dl_transpose(state.phi) * 2.0 + vp.normal_derivative * 2.0
    psi = single_layer_volume(phi, cfg.grid.nodes) + vp.volume
    return ExpansionState(
        state.j,
        state.m + 1,
        phi,
        psi,
        state.phi,
        state.psi,
        state.source_trace,
        state.source_volume,
        state.aliasing_tail + vp.aliasing_tail,
    )


def expand(j, schedule, cfg, m_max, N=None):
    """States of orders ``0..m_max``."""
    states = [initial_state(j, schedule, cfg, N)]
    for _ in range(m_max):
        states.append(expansion_step(states[-1], cfg))
    return states


@dataclass(frozen=True)
class NormRow:
    j: int
    m: int
    norm_name: str
    value: float


@dataclass(frozen=True)
class SlopeRow:
    m: int
    norm_name: str
    slope: float
    intercept: float
    normalized_slope: float
    increment_ratio: float
    residual: float
    verdict: str


DECAY_RATIO = 0.9


def increment_ratio(pairs):
    """Geometric mean of the last two ratios of consecutive local slopes in ``ln j``.

    Divergence at least logarithmic keeps the local slopes from shrinking
    (ratio >= 1); a convergent sequence has them decay.  Returns 0 when the
    local slopes change sign or vanish.
    """
    js = np.log([float(j) for j, _ in pairs])
    v = np.array([abs(x) for _, x in pairs], dtype=float)
    loc = np.diff(v) / np.diff(js)
    if loc.size < 3:
        return float("nan")
    last = loc[-3:]
    if np.any(last == 0) or np.any(np.sign(last) != np.sign(last[-1])):
        return 0.0
    return float(math.sqrt((last[1] / last[0]) * (last[2] / last[1])))


def summarize_slopes(rows, limit=BOUNDED_NORMALIZED_SLOPE, decay=DECAY_RATIO):
    """Per ``(m, norm)`` slope against ``ln j`` and a verdict.

    Bounded iff the normalised slope is below ``limit`` or the local slopes
    decay (``increment_ratio < decay``).
    """
    groups = {}
    for r in rows:
        groups.setdefault((r.m, r.norm_name), []).append((r.j, r.value))
    out = []
    for (m, name), vals in groups.items():
        if len(vals) < 4:
            continue
        vals = sorted(vals)
        fit = fit_log_slope(vals)
        scale = float(np.mean([abs(v) for _, v in vals]))
        ns = abs(fit.slope) / scale if scale > 0 else 0.0
        ratio = increment_ratio(vals)
        bounded = ns < limit or (math.isfinite(ratio) and ratio < decay)
        out.append(
            SlopeRow(m, name, float(fit.slope), float(fit.intercept), ns, ratio, fit.residual_max,
                     "bounded" if bounded else "divergent")
        )
    return out


def _cfg_for(q, schedule, grid=None, modulation=None):
    grid = default_radial_grid(schedule.max_degree) if grid is None else grid
    return PotentialConfig(RadialProfile.from_config(q), grid, modulation)


def _fmt(s):
    return f"{s:g}"


def remainder_norms(q, obstacle=None, schedule: ProbeSchedule | None = None, m_max=1, s_list=None,
                    grid=None, extra_norms=False):
    """Sobolev norms of ``d_nu(u_j - Phi_j) - phi_{m,j}`` for ``m = -1..m_max``.

    With ``s_list`` omitted each order ``m`` is measured in ``H^{m+1/2}``.
    ``extra_norms`` adds ``|phi_m|_{H^{1/2}}`` and the order-2 volume norm of
    ``psi_m``.  Returns a list of :class:`NormRow`.
    """
    schedule = ProbeSchedule(j_list=(2, 4, 8, 16, 32, 64)) if schedule is None else schedule
    obstacle = ObstacleSpec() if obstacle is None else obstacle
    cfg = _cfg_for(q, schedule, grid)
    dtn = assemble_dtn(cfg.q, obstacle, schedule.max_degree)
    rows = []
    for j in schedule.j_list:
        states = expand(j, schedule, cfg, max(m_max, 0))
        trace = states[0].source_trace
        n = np.arange(trace.max_degree + 1)
        cauchy = trace.scale_degrees(dtn.multipliers[: n.size] - n)
        for m in range(-1, m_max + 1):
            phi = states[m].phi if m >= 1 else states[0].phi
            rem = cauchy - phi
            orders = [m + 0.5] if s_list is None else list(s_list)
            for s in orders:
                rows.append(NormRow(j, m, f"H^{_fmt(s)}", sobolev_norm(rem, s)))
            if extra_norms and m >= 1:
                rows.append(NormRow(j, m, "phi_H^0.5", sobolev_norm(phi, 0.5)))
                rows.append(NormRow(j, m, "psi_vol_2", volume_sobolev_norm(states[m].psi, cfg.grid, 2)))
    return rows


def _vanishing_check(q1, q2, m0, tol=1e-10):
    diff = q1 - q2
    jet = diff.jet(1.0, m0)
    scale = max(1.0, float(np.max(np.abs(q1.jet(1.0, m0)))), float(np.max(np.abs(q2.jet(1.0, m0)))))
    bad = [a for a in range(m0 + 1) if abs(jet[a]) > tol * scale]
    if bad:
        a = bad[0]
        raise PreconditionError(
            f"q1 - q2 has a non-zero radial derivative of order {a} at r = 1 "
            f"({complex(jet[a]):.3g}); the difference must vanish to order {m0}"
        )


def difference_boundedness(q1, q2, schedule: ProbeSchedule | None = None, m0=0, grid=None):
    """Volume norms of ``psi^(1) - psi^(2)`` at order ``m0 + 1`` across ``j``.

    Rows: ``psi_diff_H^{m0+3}`` and, for each radial derivative order
    ``a <= m0 + 2``, ``q^(a) psi`` differences in ``H^{m0+3-a}``.
    """
    schedule = ProbeSchedule(j_list=(2, 4, 8, 16, 32, 64)) if schedule is None else schedule
    q1 = RadialProfile.from_config(q1)
    q2 = RadialProfile.from_config(q2)
    _vanishing_check(q1, q2, m0)
    cfg1 = _cfg_for(q1, schedule, grid)
    cfg2 = replace(cfg1, q=q2)
    r = cfg1.grid.nodes
    order = m0 + 3
    rows = []
    for j in schedule.j_list:
        s1 = expand(j, schedule, cfg1, m0 + 1)[-1]
        s2 = expand(j, schedule, cfg2, m0 + 1)[-1]
        d = s1.psi - s2.psi
        rows.append(NormRow(j, m0 + 1, f"psi_diff_H^{order}", volume_sobolev_norm(d, cfg1.grid, order)))
        for a in range(m0 + 3):
            w1 = q1.derivative(r, a)[:, None, None]
            w2 = q2.derivative(r, a)[:, None, None]
            prod = HarmonicField(d.max_degree, w1 * s1.psi.coeffs - w2 * s2.psi.coeffs, r)
            rows.append(
                NormRow(j, m0 + 1, f"q{a}psi_diff_H^{order - a}",
                        volume_sobolev_norm(prod, cfg1.grid, order - a))
            )
    return rows
