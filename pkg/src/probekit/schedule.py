"""Probe schedules: singular points ``z_j`` approaching a boundary point."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .spectral import SphereGrid, HarmonicField, required_degree

__all__ = ["ProbeSchedule", "smooth_step", "cutoff_values", "apply_cutoff"]


def smooth_step(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
        out = a / (a + b)
    return np.nan_to_num(out)


def cutoff_values(theta, eps):
    """``eta`` as a function of the angle from ``x0``: 1 below ``eps``, 0 above ``2 eps``."""
    return smooth_step((2.0 * eps - np.asarray(theta)) / eps)


@dataclass(frozen=True)
class ProbeSchedule:
    """Where and how to probe.

    ``z_j = x0 (1 + delta / j)`` for ``j`` in ``j_list``.  Fields are built in
    a frame where ``x0`` is the north pole; for radial configurations this is
    no loss of generality.
    """

    x0: tuple = (0.0, 0.0, 1.0)
    delta: float = 0.5
    j_list: tuple = (4, 8, 16, 32, 64)
    patch_radius: float = 0.3
    tail_tol: float = 1e-10

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (3,) or not np.all(np.isfinite(x0)) or abs(np.linalg.norm(x0) - 1.0) > 1e-9:
            raise ValidationError("schedule.x0", "must be a unit vector")
        object.__setattr__(self, "x0", tuple(float(v) for v in x0))
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValidationError("schedule.delta", "must be positive")
        js = tuple(int(j) for j in self.j_list)
        if len(js) < 1 or any(j < 1 for j in js) or any(b <= a for a, b in zip(js, js[1:])):
            raise ValidationError("schedule.j_list", "must be strictly increasing positive integers")
        object.__setattr__(self, "j_list", js)
        if not (0 < self.patch_radius and 2 * self.patch_radius < math.pi / 2):
            raise ValidationError("schedule.patch_radius", "need 0 < eps and 2 eps < pi/2")
        if not (0 < self.tail_tol < 1):
            raise ValidationError("schedule.tail_tol", "must lie in (0, 1)")

    @classmethod
    def from_config(cls, spec):
        if spec is None:
            return cls()
        if isinstance(spec, ProbeSchedule):
            return spec
        if not isinstance(spec, dict):
            raise ValidationError("schedule", "expected an object")
        allowed = {"x0", "delta", "j_list", "patch_radius", "tail_tol"}
        unknown = set(spec) - allowed
        if unknown:
            raise ValidationError(f"schedule.{sorted(unknown)[0]}", "unknown key")
        try:
            return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in spec.items()})
        except TypeError as exc:
            raise ValidationError("schedule", str(exc)) from None

    def to_config(self):
        return {
            "x0": list(self.x0),
            "delta": self.delta,
            "j_list": list(self.j_list),
            "patch_radius": self.patch_radius,
            "tail_tol": self.tail_tol,
        }

    def radius(self, j):
        return 1.0 + self.delta / j

    def z(self, j):
        return np.asarray(self.x0) * self.radius(j)

    def z_aligned(self, j):
        return np.array([0.0, 0.0, self.radius(j)])

    def degree(self, j):
        """Degree cap meeting the tail tolerance for ``z_j``."""
        return required_degree(self.radius(j), self.tail_tol)

    @property
    def max_degree(self):
        return max(self.degree(j) for j in self.j_list)


def apply_cutoff(f: HarmonicField, eps) -> HarmonicField:
    """``eta * f`` for a zonal trace, ``eta`` centred on the north pole."""
    if f.order_cap != 0:
        raise ValidationError("cutoff", "windowing is implemented for zonal traces")
    N = f.max_degree
    grid = SphereGrid.for_degree(N, 0)
    theta = np.arccos(np.clip(grid.x, -1.0, 1.0))
    vals = grid.synthesize(f)[..., 0] * cutoff_values(theta, eps)
    return grid.analyze(vals[..., None], N, 0)
