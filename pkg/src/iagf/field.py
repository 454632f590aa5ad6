"""Anisotropic guidance field: a circle-like field around the end-effector
whose radial length encodes the robot's directional preference.

The radial length along a unit direction u is d1 -/+ d2 * (u . v_r): minus in
passive (damping) mode, where the preferred direction offers least resistance,
and plus in active (stiffness) mode, where it attracts most strongly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

# Keeps d2 strictly below d1 (the schedules reach d2 = d1 at their endpoints,
# which would collapse the radial length to zero somewhere on the boundary).
EPS_D = 0.02


class FieldMode(enum.Enum):
    PASSIVE = "passive"
    ACTIVE = "active"


@dataclass(frozen=True)
class FieldSpec:
    """One instantiated guidance field."""

    mode: FieldMode
    d1: float
    d2: float
    v_r: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.d1) and self.d1 > 0.0):
            raise ValueError("d1 must be positive")
        if not (np.isfinite(self.d2) and self.d2 >= 0.0):
            raise ValueError("d2 must be non-negative")
        object.__setattr__(self, "d2", min(self.d2, (1.0 - EPS_D) * self.d1))
        v = np.asarray(self.v_r, dtype=float)
        n = float(np.hypot(v[0], v[1]))
        if not np.isfinite(n) or n < 1e-9:
            raise ValueError("v_r must be a nonzero direction")
        object.__setattr__(self, "v_r", v / n)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "d1": self.d1,
            "d2": self.d2,
            "v_r": [float(self.v_r[0]), float(self.v_r[1])],
        }

    @staticmethod
    def from_dict(d: dict) -> "FieldSpec":
        return FieldSpec(FieldMode(d["mode"]), d["d1"], d["d2"], np.asarray(d["v_r"]))


@dataclass(frozen=True)
class GuidanceGains:
    """Gains mapping radial length to physical stiffness/damping."""

    K_p: float = 80.0
    K_d: float = 10.0

    def __post_init__(self):
        if self.K_p < 0.0 or self.K_d < 0.0:
            raise ValueError("gains must be non-negative")


def radial_length(spec: FieldSpec, u: np.ndarray) -> float:
    """Field radius along unit direction u; always in [d1 - d2, d1 + d2]."""
    u = np.asarray(u, dtype=float)
    n = float(np.hypot(u[0], u[1]))
    if abs(n - 1.0) > 1e-6:
        raise ValueError("direction must be a unit vector")
    t = float(u @ spec.v_r) / n
    t = min(1.0, max(-1.0, t))
    if spec.mode is FieldMode.PASSIVE:
        return spec.d1 - spec.d2 * t
    return spec.d1 + spec.d2 * t


def passive_force(d_h: float, v: np.ndarray, gains: GuidanceGains) -> np.ndarray:
    """Damping force -K_d * d_h * v; strictly dissipative."""
    if d_h < 0.0:
        raise ValueError("radial length must be non-negative")
    return (-gains.K_d * d_h) * np.asarray(v, dtype=float)


def active_force(d_h: float, x_d: np.ndarray, x: np.ndarray, gains: GuidanceGains) -> np.ndarray:
    """Stiffness force K_p * d_h * (x_d - x) attracting toward the desired pose."""
    if d_h < 0.0:
        raise ValueError("radial length must be non-negative")
    return (gains.K_p * d_h) * (np.asarray(x_d, dtype=float) - np.asarray(x, dtype=float))


def field_boundary(spec: FieldSpec, n: int = 64) -> np.ndarray:
    """Polar sampling of the field boundary, shape (n, 2), for rendering/logs."""
    if n < 8:
        raise ValueError("need at least 8 samples")
    phi = -np.pi + 2.0 * np.pi * np.arange(n) / n
    ux = np.cos(phi)
    uy = np.sin(phi)
    t = ux * spec.v_r[0] + uy * spec.v_r[1]
    if spec.mode is FieldMode.PASSIVE:
        d = spec.d1 - spec.d2 * t
    else:
        d = spec.d1 + spec.d2 * t
    return np.column_stack((d * ux, d * uy))
