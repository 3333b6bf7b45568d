"""Boundary determination by singular probing.

For each ``j`` the Dirichlet datum is ``f_j = eta * Phi(., z_j)`` with
``z_j`` approaching ``x0`` from outside and ``eta`` a smooth cutoff around
``x0``.  Two DtN maps produce Neumann data ``g_j``; the order-``k``
diagnostic is

    D_k(j) = [(-Delta_S)^(k/2) (eta * (g1_j - g2_j))](x0),

a pointwise surface-derivative of the windowed Cauchy difference at the
probed point.  When the coefficients agree to order ``k`` at the boundary
it stays bounded in ``j``; otherwise it grows like ``ln j`` with a
coefficient proportional to the first non-matching normal derivative.

Verdicts come from the slope of ``D_k`` against ``ln j``: a slope is
*divergent* when it exceeds five times the spread of slopes measured on a
null ensemble (equal ``q = 0`` with different hidden obstacles).  The
order-0 slope per unit gap is calibrated on ``q1 = 1, q2 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import DomainError, TailToleranceError
from .forward import DtnOperator, ObstacleSpec, apply_dtn, assemble_dtn
from .model_integrals import SlopeFit, fit_log_slope
from .radial import RadialProfile
from .schedule import ProbeSchedule, apply_cutoff
from .spectral import HarmonicField, point_source_trace

__all__ = [
    "ProbeSchedule",
    "CauchyPair",
    "Calibration",
    "OrderRow",
    "RecoveryReport",
    "probe_data",
    "diagnostic_functionals",
    "calibrate_constant",
    "calibration",
    "null_thresholds",
    "recover_boundary_value",
    "NULL_OBSTACLES",
    "THRESHOLD_FACTOR",
]

THRESHOLD_FACTOR = 5.0
NULL_OBSTACLES = (
    ObstacleSpec(),
    ObstacleSpec(0.3, "dirichlet"),
    ObstacleSpec(0.3, "robin", 1.0),
)


@dataclass
class CauchyPair:
    j: int
    f: HarmonicField
    g: HarmonicField


@lru_cache(maxsize=8)
def _boundary_data(schedule: ProbeSchedule):
    N = schedule.max_degree
    return tuple(
        apply_cutoff(point_source_trace(schedule.z_aligned(j), N=N), schedule.patch_radius)
        for j in schedule.j_list
    )


def probe_data(dtn: DtnOperator, schedule: ProbeSchedule) -> list[CauchyPair]:
    """Windowed point-source data and their images under ``dtn``.

    All ``j`` share the degree cap needed by the closest ``z_j``.
    """
    need = schedule.max_degree
    if dtn.max_degree < need:
        raise TailToleranceError(
            f"DtN degree cap {dtn.max_degree} is below the {need} required for "
            f"|z| - 1 = {schedule.delta / max(schedule.j_list):g} at tail {schedule.tail_tol:g}",
            need,
        )
    return [
        CauchyPair(j, f, apply_dtn(dtn, f))
        for j, f in zip(schedule.j_list, _boundary_data(schedule))
    ]


def _order_weights(N, k):
    n = np.arange(N + 1, dtype=float)
    return (n * (n + 1.0)) ** (k / 2.0) * np.sqrt((2.0 * n + 1.0) / (4.0 * math.pi))


def diagnostic_functionals(pairs1, pairs2, schedule: ProbeSchedule, k) -> list[tuple[int, complex]]:
    """``(j, D_k(j))`` for two probe datasets over the same schedule."""
    if k < 0 or int(k) != k:
        raise DomainError("order must be a non-negative integer")
    if [p.j for p in pairs1] != list(schedule.j_list) or [p.j for p in pairs2] != list(schedule.j_list):
        raise DomainError("probe data do not follow the schedule")
    out = []
    for a, b in zip(pairs1, pairs2):
        if a.f.max_degree != b.f.max_degree or not np.array_equal(a.f.coeffs, b.f.coeffs):
            raise DomainError(f"Dirichlet data differ at j = {a.j}")
        h = apply_cutoff(a.g - b.g, schedule.patch_radius)
        val = complex(np.sum(_order_weights(h.max_degree, k) * h.coeffs[:, 0]))
        out.append((a.j, val))
    return out


def _dtn(q, obstacle, schedule):
    return assemble_dtn(RadialProfile.from_config(q), obstacle, schedule.max_degree)


def _slope(d1, d2, schedule, k):
    p1 = probe_data(d1, schedule)
    p2 = probe_data(d2, schedule)
    return fit_log_slope(diagnostic_functionals(p1, p2, schedule, k))


@dataclass(frozen=True)
class Calibration:
    constant: float
    delta: float
    patch_radius: float
    j_list: tuple
    provenance: str = "derived: reference run q1 = 1, q2 = 0, no obstacle"

    def to_dict(self):
        return {
            "constant": self.constant,
            "provenance": self.provenance,
            "delta": self.delta,
            "patch_radius": self.patch_radius,
            "j_list": list(self.j_list),
        }


def calibrate_constant(schedule: ProbeSchedule, gap=1.0) -> float:
    """Order-0 slope per unit boundary gap on the reference configuration."""
    return calibration(schedule, gap).constant


@lru_cache(maxsize=8)
def calibration(schedule: ProbeSchedule, gap=1.0) -> Calibration:
    if gap == 0:
        raise DomainError("calibration needs a non-zero reference gap")
    fit = _slope(_dtn(gap, None, schedule), _dtn(0.0, None, schedule), schedule, 0)
    const = float(np.real(fit.slope)) / gap
    if const == 0.0 or not math.isfinite(const):
        raise DomainError("degenerate calibration fit")
    return Calibration(const, schedule.delta, schedule.patch_radius, schedule.j_list)


@lru_cache(maxsize=8)
def null_thresholds(schedule: ProbeSchedule, depth=2) -> tuple[float, ...]:
    """Divergence threshold per order: five times the null-ensemble slope spread."""
    dtns = [_dtn(0.0, ob, schedule) for ob in NULL_OBSTACLES]
    data = [probe_data(d, schedule) for d in dtns]
    out = []
    for k in range(depth + 1):
        spread = 0.0
        for a, b in combinations(range(len(dtns)), 2):
            fit = fit_log_slope(diagnostic_functionals(data[a], data[b], schedule, k))
            spread = max(spread, abs(fit.slope))
        out.append(THRESHOLD_FACTOR * spread)
    return tuple(out)


@dataclass
class OrderRow:
    order: int
    diagnostic: str
    slope: complex
    intercept: complex
    residual: float
    threshold: float
    verdict: str
    values: list = field(default_factory=list)

    def to_dict(self):
        def num(z):
            z = complex(z)
            return z.real if z.imag == 0 else [z.real, z.imag]

        return {
            "order": self.order,
            "diagnostic": self.diagnostic,
            "slope": num(self.slope),
            "intercept": num(self.intercept),
            "residual": self.residual,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "values": [[j, num(v)] for j, v in self.values],
        }


@dataclass
class RecoveryReport:
    rows: list
    estimated_q_gap: complex
    calibration_constant: float
    calibration_provenance: str
    schedule: dict
    thresholds: tuple

    @property
    def verdicts(self):
        return {r.order: r.verdict for r in self.rows}

    @property
    def first_divergent_order(self):
        for r in self.rows:
            if r.verdict == "divergent":
                return r.order
        return None

    def to_dict(self):
        g = complex(self.estimated_q_gap)
        return {
            "rows": [r.to_dict() for r in self.rows],
            "estimated_q_gap": [g.real, g.imag],
            "calibration_constant": self.calibration_constant,
            "calibration_provenance": self.calibration_provenance,
            "schedule": self.schedule,
            "thresholds": list(self.thresholds),
        }


def recover_boundary_value(
    dtn1: DtnOperator,
    dtn2: DtnOperator,
    schedule: ProbeSchedule,
    depth=2,
    calib: Calibration | None = None,
    thresholds=None,
) -> RecoveryReport:
    """Scan orders ``0..depth`` and stop at the first divergent one.

    A divergent order 0 also yields ``estimated_q_gap = slope / constant``.
    """
    calib = calibration(schedule) if calib is None else calib
    thresholds = null_thresholds(schedule, depth) if thresholds is None else tuple(thresholds)
    if len(thresholds) < depth + 1:
        raise DomainError("need one threshold per scanned order")
    p1 = probe_data(dtn1, schedule)
    p2 = probe_data(dtn2, schedule)
    rows = []
    gap = 0.0
    for k in range(depth + 1):
        fit: SlopeFit = fit_log_slope(diagnostic_functionals(p1, p2, schedule, k), thresholds[k])
        rows.append(
            OrderRow(k, f"pointwise_order_{k}", fit.slope, fit.intercept, fit.residual_max,
                     thresholds[k], fit.verdict, fit.pairs)
        )
        if fit.verdict == "divergent":
            if k == 0:
                gap = complex(fit.slope) / calib.constant
            break
    return RecoveryReport(rows, gap, calib.constant, calib.provenance, schedule.to_config(), thresholds)
