"""Planar n-link revolute arm: forward kinematics, Jacobian, manipulability,
and a damped-least-squares differential IK step.

The arm is a shadow of the Cartesian state: the impedance loop owns the
end-effector position and ik_step keeps a joint configuration consistent
with it so the manipulability measure stays evaluable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArmGeometry:
    """Link lengths (m) of a planar revolute chain anchored at ``base``."""

    link_lengths: tuple[float, ...]
    base: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if len(self.link_lengths) < 2:
            raise ValueError("arm needs at least 2 links")
        if any(not np.isfinite(l) or l <= 0.0 for l in self.link_lengths):
            raise ValueError("link lengths must be positive and finite")

    @property
    def n_links(self) -> int:
        return len(self.link_lengths)

    @property
    def reach(self) -> float:
        return float(sum(self.link_lengths))


def joint_positions(geom: ArmGeometry, q: np.ndarray) -> np.ndarray:
    """Positions of the base and every joint/end point, shape (n+1, 2)."""
    q = np.asarray(q, dtype=float)
    th = np.cumsum(q)
    pts = np.empty((geom.n_links + 1, 2))
    pts[0] = geom.base
    pts[1:, 0] = geom.base[0] + np.cumsum(np.array(geom.link_lengths) * np.cos(th))
    pts[1:, 1] = geom.base[1] + np.cumsum(np.array(geom.link_lengths) * np.sin(th))
    return pts


def forward_kinematics(geom: ArmGeometry, q: np.ndarray) -> np.ndarray:
    """End-effector position for joint angles q (angles accumulate along the chain)."""
    q = np.asarray(q, dtype=float)
    th = np.cumsum(q)
    ll = np.asarray(geom.link_lengths)
    return np.array(
        [
            geom.base[0] + float(ll @ np.cos(th)),
            geom.base[1] + float(ll @ np.sin(th)),
        ]
    )


def jacobian(geom: ArmGeometry, q: np.ndarray) -> np.ndarray:
    """Analytic position Jacobian, shape (2, n).

    Column i is the partial derivative of the end-effector position with
    respect to joint i: the suffix sum of link vectors rotated 90 degrees.
    """
    q = np.asarray(q, dtype=float)
    th = np.cumsum(q)
    ll = np.asarray(geom.link_lengths)
    lx = ll * np.cos(th)
    ly = ll * np.sin(th)
    # suffix sums over links i..n-1
    sx = np.cumsum(lx[::-1])[::-1]
    sy = np.cumsum(ly[::-1])[::-1]
    return np.vstack((-sy, sx))


def manipulability(geom: ArmGeometry, q: np.ndarray) -> float:
    """sqrt(det(J J^T)); zero at kinematic singularities.

    Rounding can push det(J J^T) slightly negative near a singularity; the
    value is clamped at zero.
    """
    J = jacobian(geom, q)
    a = float(J[0] @ J[0])
    b = float(J[0] @ J[1])
    c = float(J[1] @ J[1])
    det = a * c - b * b
    return float(np.sqrt(det)) if det > 0.0 else 0.0


def ik_step(
    geom: ArmGeometry,
    q: np.ndarray,
    dx: np.ndarray,
    lam: float = 0.05,
    tol: float = 1e-4,
    max_iter: int = 8,
    max_step: float = 0.02,
) -> np.ndarray:
    """Damped-least-squares update of q toward a small Cartesian displacement dx.

    The update rule is q += J^T (J J^T + lam^2 I)^-1 e, re-linearized until the
    tracking error drops below ``tol`` or stops improving (which it does near
    singularities, where damping bounds the step instead of diverging).
    """
    if lam <= 0.0:
        raise ValueError("damping must be positive")
    dx = np.asarray(dx, dtype=float)
    if not np.all(np.isfinite(dx)):
        raise ValueError("non-finite displacement")
    if float(np.hypot(dx[0], dx[1])) > max_step:
        raise ValueError(f"per-step displacement exceeds cap {max_step}")
    qq = np.array(q, dtype=float)
    target = forward_kinematics(geom, q) + dx
    lam2 = lam * lam
    last_err = None
    for _ in range(max_iter):
        e = target - forward_kinematics(geom, qq)
        err = float(np.hypot(e[0], e[1]))
        if err <= tol or (last_err is not None and err >= 0.9 * last_err):
            break
        last_err = err
        J = jacobian(geom, qq)
        a = float(J[0] @ J[0]) + lam2
        b = float(J[0] @ J[1])
        c = float(J[1] @ J[1]) + lam2
        det = a * c - b * b  # > 0 by damping
        w0 = (c * e[0] - b * e[1]) / det
        w1 = (a * e[1] - b * e[0]) / det
        qq = qq + J[0] * w0 + J[1] * w1
    return qq


def solve_configuration(
    geom: ArmGeometry,
    x: np.ndarray,
    elbow: str = "up",
    q0: np.ndarray | None = None,
) -> np.ndarray:
    """Joint angles whose forward kinematics match x.

    Analytic two-link solution when the arm has 2 links; otherwise iterates
    ik_step from ``q0`` (or a gently bent default pose).
    """
    x = np.asarray(x, dtype=float)
    rel = x - np.asarray(geom.base)
    r = float(np.hypot(rel[0], rel[1]))
    if geom.n_links == 2:
        l1, l2 = geom.link_lengths
        if not abs(l1 - l2) < r < l1 + l2:
            raise ValueError("target outside the reachable annulus")
        c2 = (r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
        c2 = min(1.0, max(-1.0, c2))
        q2 = np.arccos(c2)
        if elbow == "up":
            q2 = -q2
        q1 = np.arctan2(rel[1], rel[0]) - np.arctan2(l2 * np.sin(q2), l1 + l2 * np.cos(q2))
        return np.array([q1, q2])
    if r >= geom.reach:
        raise ValueError("target outside the reachable workspace")
    q = np.array(q0, dtype=float) if q0 is not None else np.full(geom.n_links, 0.3)
    for _ in range(400):
        e = x - forward_kinematics(geom, q)
        n = float(np.hypot(e[0], e[1]))
        if n < 1e-10:
            break
        step = e if n <= 0.015 else e * (0.015 / n)
        q = ik_step(geom, q, step, tol=1e-10)
    return q
