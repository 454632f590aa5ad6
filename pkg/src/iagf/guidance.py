"""The two field instantiations and their fusion into one guidance force.

IntGF follows the goal-inference confidence: damping while uncertain, active
stiffness once confidence clears its threshold. SinGF follows the
manipulability measure: inactive while well-conditioned, damping in the
warning band, active stiffness near a singularity. Same-mode fields fuse by a
power sum; mixed modes are stiffness-prioritized (damping suppressed).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import (
    EPS_D,
    FieldMode,
    FieldSpec,
    GuidanceGains,
    active_force,
    passive_force,
    radial_length,
)
from .impedance import RobotState


@dataclass(frozen=True)
class IntGFConfig:
    C_th: float = 0.4
    d1: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.C_th < 1.0:
            raise ValueError("confidence threshold must lie in (0, 1)")


@dataclass(frozen=True)
class SinGFConfig:
    m_th: float = 0.08
    m_crit: float = 0.03
    d1: float = 2.0

    def __post_init__(self):
        if not self.m_th > self.m_crit > 0.0:
            raise ValueError("need m_th > m_crit > 0")


@dataclass(frozen=True)
class GuidanceOutput:
    f_c: np.ndarray
    active_fields: list = dc_field(default_factory=list)  # (label, FieldSpec, d_h)


def intgf_d2(C: float, cfg: IntGFConfig) -> float:
    """Anisotropy schedule of the intent field: grows with confidence within
    each mode, resetting to 0 at the mode switch."""
    if not 0.0 <= C <= 1.0:
        raise ValueError("confidence out of range")
    if C < cfg.C_th:
        d2 = (cfg.d1 / cfg.C_th) * C
    else:
        d2 = cfg.d1 * (C - cfg.C_th) / (1.0 - cfg.C_th)
    return min(d2, (1.0 - EPS_D) * cfg.d1)


def intgf_spec(C: float, v_rI: np.ndarray, cfg: IntGFConfig) -> FieldSpec:
    """Intent field: passive below the confidence threshold, active above."""
    mode = FieldMode.PASSIVE if C < cfg.C_th else FieldMode.ACTIVE
    return FieldSpec(mode, cfg.d1, intgf_d2(C, cfg), v_rI)


def singf_direction(
    m_k: float,
    m_km1: float,
    x_k: np.ndarray,
    x_km1: np.ndarray,
) -> np.ndarray | None:
    """Preferred direction for singularity avoidance: the recent displacement,
    flipped when manipulability got worse. None when indeterminate."""
    dx = np.asarray(x_k, dtype=float) - np.asarray(x_km1, dtype=float)
    n = float(np.hypot(dx[0], dx[1]))
    dm = m_k - m_km1
    if n < 1e-6 or abs(dm) < 1e-9:
        return None
    s = 1.0 if dm > 0.0 else -1.0
    return (s / n) * dx


def singf_d2(m: float, cfg: SinGFConfig) -> float:
    """Anisotropy schedule of the singularity field: ramps up as m falls
    through the warning band, resetting at the critical threshold."""
    if m < 0.0:
        raise ValueError("manipulability must be non-negative")
    if m > cfg.m_th:
        d2 = 0.0
    elif m >= cfg.m_crit:
        d2 = cfg.d1 * (cfg.m_th - m) / (cfg.m_th - cfg.m_crit)
    else:
        d2 = cfg.d1 * (cfg.m_crit - m) / cfg.m_crit
    return min(d2, (1.0 - EPS_D) * cfg.d1)


def singf_spec(m: float, v_rS: np.ndarray | None, cfg: SinGFConfig) -> FieldSpec | None:
    """Singularity field for the current manipulability, or None when the arm
    is well-conditioned (or no avoidance direction is known yet)."""
    if m > cfg.m_th or v_rS is None:
        return None
    mode = FieldMode.PASSIVE if m > cfg.m_crit else FieldMode.ACTIVE
    return FieldSpec(mode, cfg.d1, singf_d2(m, cfg), v_rS)


def fuse_homogeneous(d_hI: float, d_hS: float, alpha: float) -> float:
    """Power-sum fusion (d_hI^a + d_hS^a)^(1/a); approaches max() for large a."""
    if d_hI < 0.0 or d_hS < 0.0:
        raise ValueError("radial lengths must be non-negative")
    if alpha < 1.0:
        raise ValueError("alpha must be >= 1")
    hi = max(d_hI, d_hS)
    if hi == 0.0:
        return 0.0
    lo = min(d_hI, d_hS)
    return hi * (1.0 + (lo / hi) ** alpha) ** (1.0 / alpha)


def compute_guidance(
    v_h: np.ndarray | None,
    int_spec: FieldSpec | None,
    sing_spec: FieldSpec | None,
    alpha: float,
    state: RobotState,
    x_d: np.ndarray,
    gains: GuidanceGains,
    f_max: float = 30.0,
) -> GuidanceOutput:
    """Evaluate the instantiated fields along the human direction v_h and
    produce the single guidance force for this tick.

    No human direction means no guidance. Same-mode fields fuse their radial
    lengths; with mixed modes only the stiffness field acts.
    """
    if alpha < 1.0:
        raise ValueError("alpha must be >= 1")
    if v_h is None:
        return GuidanceOutput(np.zeros(2))
    present = [(label, s) for label, s in (("intgf", int_spec), ("singf", sing_spec)) if s is not None]
    if not present:
        return GuidanceOutput(np.zeros(2))

    if len(present) == 1:
        label, spec = present[0]
        d_h = radial_length(spec, v_h)
        mode = spec.mode
        active = [(label, spec, d_h)]
    elif present[0][1].mode is present[1][1].mode:
        d_i = radial_length(present[0][1], v_h)
        d_s = radial_length(present[1][1], v_h)
        d_h = fuse_homogeneous(d_i, d_s, alpha)
        mode = present[0][1].mode
        active = [(present[0][0], present[0][1], d_i), (present[1][0], present[1][1], d_s)]
    else:
        # stiffness-prioritized: the damping field is suppressed entirely
        label, spec = next(p for p in present if p[1].mode is FieldMode.ACTIVE)
        d_h = radial_length(spec, v_h)
        mode = FieldMode.ACTIVE
        active = [(label, spec, d_h)]

    if mode is FieldMode.PASSIVE:
        f = passive_force(d_h, state.v, gains)
    else:
        f = active_force(d_h, x_d, state.x, gains)
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite guidance force")
    norm = float(np.hypot(f[0], f[1]))
    if norm > f_max:
        f = f * (f_max / norm)
    return GuidanceOutput(f, active)
