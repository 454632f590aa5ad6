"""Cartesian impedance dynamics of the simulated end-effector.

The commanded acceleration is M^-1 (K (x_d - x) + D (v_d - v) + f_c), i.e. a
spring-damper toward the desired pose plus the guidance-field force, and is
integrated with semi-implicit Euler so the spring-damper stays dissipative at
the simulation rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arm import ArmGeometry, ik_step


def _check_spd(name: str, mat: np.ndarray, strict: bool) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (2, 2):
        raise ValueError(f"{name} must be 2x2")
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} must be finite")
    if abs(mat[0, 1] - mat[1, 0]) > 1e-9:
        raise ValueError(f"{name} must be symmetric")
    eigs = np.linalg.eigvalsh(mat)
    if strict and eigs[0] <= 0.0:
        raise ValueError(f"{name} must be positive definite")
    if not strict and eigs[0] < -1e-12:
        raise ValueError(f"{name} must be positive semidefinite")
    return mat


@dataclass(frozen=True)
class ImpedanceParams:
    """Inertia, stiffness and damping matrices (2x2, symmetric)."""

    M: np.ndarray
    K: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M", _check_spd("M", self.M, strict=True))
        object.__setattr__(self, "K", _check_spd("K", self.K, strict=False))
        object.__setattr__(self, "D", _check_spd("D", self.D, strict=False))
        object.__setattr__(self, "M_inv", np.linalg.inv(self.M))

    @staticmethod
    def diagonal(m: float = 2.0, k: float = 150.0, d: float = 25.0) -> "ImpedanceParams":
        return ImpedanceParams(np.eye(2) * m, np.eye(2) * k, np.eye(2) * d)


@dataclass(frozen=True)
class RobotState:
    """End-effector position/velocity plus the shadow joint configuration."""

    x: np.ndarray
    v: np.ndarray
    q: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class DesiredCommand:
    x_d: np.ndarray
    v_d: np.ndarray


def impedance_accel(
    state: RobotState,
    des: DesiredCommand,
    f_c: np.ndarray,
    p: ImpedanceParams,
) -> np.ndarray:
    """Commanded Cartesian acceleration for the current tick."""
    f_c = np.asarray(f_c, dtype=float)
    if not np.all(np.isfinite(f_c)):
        raise ValueError("non-finite guidance force")
    spring = p.K @ (des.x_d - state.x)
    damper = p.D @ (des.v_d - state.v)
    return p.M_inv @ (spring + damper + f_c)


def clamp_speed(v: np.ndarray, v_max: float) -> np.ndarray:
    """Scale v down to v_max, preserving direction."""
    speed = float(np.hypot(v[0], v[1]))
    if speed > v_max:
        return v * (v_max / speed)
    return v


def step(
    state: RobotState,
    des: DesiredCommand,
    f_c: np.ndarray,
    p: ImpedanceParams,
    dt: float,
    geom: ArmGeometry,
    v_max: float = 0.5,
    ik_lambda: float = 0.05,
) -> RobotState:
    """One semi-implicit Euler step; the joint shadow follows via ik_step."""
    if not 0.0 < dt <= 0.02:
        raise ValueError("dt must be in (0, 0.02] s")
    a = impedance_accel(state, des, f_c, p)
    v2 = clamp_speed(state.v + a * dt, v_max)
    x2 = state.x + v2 * dt
    if not (np.all(np.isfinite(x2)) and np.all(np.isfinite(v2))):
        raise ValueError("non-finite state after step")
    q2 = ik_step(geom, state.q, x2 - state.x, lam=ik_lambda)
    return RobotState(x=x2, v=v2, q=q2, t=state.t + dt)
