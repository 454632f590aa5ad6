"""One shared-autonomy control tick, shared verbatim by the batch harness and
the live session service so interactive and scripted behavior cannot diverge.

Per tick: infer the goal posterior from the human command, mix the goal
policies into the robot command, blend by confidence, evaluate the guidance
fields, and advance the impedance dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .arm import ArmGeometry, forward_kinematics, manipulability, solve_configuration
from .config import SimConfig
from .field import FieldMode, FieldSpec, GuidanceGains
from .guidance import (
    GuidanceOutput,
    IntGFConfig,
    SinGFConfig,
    compute_guidance,
    intgf_spec,
    singf_direction,
    singf_spec,
)
from .impedance import DesiredCommand, ImpedanceParams, RobotState, step
from .inference import (
    CommandHistory,
    Encoder,
    GoalBelief,
    GoalSet,
    bayes_update,
    beta_schedule,
    blend,
    identity_encoder,
    likelihood,
    policy_actions,
    robot_action,
)

METHODS = ("na", "sa", "iagf")


@dataclass
class TickRecord:
    """Everything observable about one control tick; the unit of the JSONL logs."""

    t: float
    a_h: np.ndarray
    a_r: np.ndarray
    a_sa: np.ndarray
    beta: float
    f_c: np.ndarray
    posterior: np.ndarray
    confidence: float
    predicted: int
    m: float
    x: np.ndarray
    v: np.ndarray
    fields: list = field(default_factory=list)  # [{label, mode, d1, d2, v_r, d_h}]

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "a_h": [float(self.a_h[0]), float(self.a_h[1])],
            "a_r": [float(self.a_r[0]), float(self.a_r[1])],
            "a_sa": [float(self.a_sa[0]), float(self.a_sa[1])],
            "beta": self.beta,
            "f_c": [float(self.f_c[0]), float(self.f_c[1])],
            "posterior": [float(p) for p in self.posterior],
            "confidence": self.confidence,
            "predicted": self.predicted,
            "m": self.m,
            "x": [float(self.x[0]), float(self.x[1])],
            "v": [float(self.v[0]), float(self.v[1])],
            "fields": self.fields,
        }

    @staticmethod
    def from_dict(d: dict) -> "TickRecord":
        return TickRecord(
            t=d["t"],
            a_h=np.asarray(d["a_h"]),
            a_r=np.asarray(d["a_r"]),
            a_sa=np.asarray(d["a_sa"]),
            beta=d["beta"],
            f_c=np.asarray(d["f_c"]),
            posterior=np.asarray(d["posterior"]),
            confidence=d["confidence"],
            predicted=d["predicted"],
            m=d["m"],
            x=np.asarray(d["x"]),
            v=np.asarray(d["v"]),
            fields=d.get("fields", []),
        )


def _field_entry(label: str, spec: FieldSpec, d_h: float) -> dict:
    entry = spec.to_dict()
    entry["label"] = label
    entry["d_h"] = float(d_h)
    return entry


class SharedAutonomySim:
    """Owns the mutable per-session state (robot state, belief, histories) and
    advances it one tick at a time. Single-threaded by contract."""

    def __init__(self, cfg: SimConfig, method: str, encoder: Encoder = identity_encoder):
        if method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        self.cfg = cfg
        self.method = method
        self.encoder = encoder
        self.geom = ArmGeometry(tuple(cfg.arm.link_lengths), tuple(cfg.arm.base))
        self.params = ImpedanceParams.diagonal(
            cfg.impedance.mass, cfg.impedance.stiffness, cfg.impedance.damping
        )
        self.gains = GuidanceGains(cfg.guidance.K_p, cfg.guidance.K_d)
        self.int_cfg = IntGFConfig(cfg.guidance.C_th, cfg.guidance.d1)
        self.sing_cfg = SinGFConfig(cfg.guidance.m_th, cfg.guidance.m_crit, cfg.guidance.d1)
        ids = tuple(sorted(cfg.workspace.goals))
        self.goals = GoalSet(ids, np.array([cfg.workspace.goals[g] for g in ids]))
        x0 = np.asarray(cfg.workspace.start, dtype=float)
        q0 = solve_configuration(self.geom, x0, elbow="down")
        self.state = RobotState(x=x0, v=np.zeros(2), q=q0, t=0.0)
        self.belief = GoalBelief.uniform(self.goals.size)
        self.history = CommandHistory(self.goals.size, cfg.inference.history)
        self._prev_x = x0.copy()
        self._prev_m = manipulability(self.geom, q0)
        self._prev_v_rI: Optional[np.ndarray] = None
        self._prev_v_rS: Optional[np.ndarray] = None
        self._prev_int_mode: Optional[FieldMode] = None

    def tick(self, a_h: np.ndarray) -> TickRecord:
        cfg = self.cfg
        a_h = np.asarray(a_h, dtype=float)
        if not np.all(np.isfinite(a_h)):
            raise ValueError("non-finite human command")
        s = self.state
        m_now = manipulability(self.geom, s.q)

        # goal inference
        a_goals = policy_actions(
            self.goals, s.x, cfg.inference.policy_gain, cfg.inference.step_max
        )
        self.history.push(a_h, a_goals)
        w = likelihood(self.history, a_h, a_goals, cfg.inference.gamma, self.encoder)
        self.belief = bayes_update(self.belief.posterior, w, cfg.inference.eps_p)
        a_r = robot_action(self.belief, a_goals)

        # action blending (no assistance in pure teleoperation)
        if self.method == "na":
            beta = 0.0
            a_sa = a_h
        else:
            beta = beta_schedule(self.belief.confidence, cfg.inference.beta_max)
            a_sa = blend(a_h, a_r, beta)
        x_d = s.x + a_sa

        # guidance force (only the full method applies it)
        if self.method == "iagf":
            out = self._guidance(a_h, a_r, m_now, s, x_d)
        else:
            out = GuidanceOutput(np.zeros(2))

        self._prev_x = s.x
        self._prev_m = m_now
        self.state = step(
            s,
            DesiredCommand(x_d, np.zeros(2)),
            out.f_c,
            self.params,
            cfg.impedance.dt,
            self.geom,
            v_max=cfg.impedance.v_max,
            ik_lambda=cfg.arm.ik_lambda,
        )
        return TickRecord(
            t=s.t,
            a_h=a_h,
            a_r=a_r,
            a_sa=a_sa,
            beta=beta,
            f_c=out.f_c,
            posterior=self.belief.posterior,
            confidence=self.belief.confidence,
            predicted=self.belief.predicted,
            m=m_now,
            x=s.x,
            v=s.v,
            fields=[_field_entry(lbl, spec, d_h) for lbl, spec, d_h in out.active_fields],
        )

    def _guidance(
        self,
        a_h: np.ndarray,
        a_r: np.ndarray,
        m_now: float,
        s: RobotState,
        x_d: np.ndarray,
    ) -> GuidanceOutput:
        cfg = self.cfg
        nh = float(np.hypot(a_h[0], a_h[1]))
        v_h = a_h / nh if nh >= cfg.guidance.v_h_min else None

        nr = float(np.hypot(a_r[0], a_r[1]))
        if nr >= 1e-9:
            self._prev_v_rI = a_r / nr
        v_rI = self._prev_v_rI
        int_spec = None
        if v_rI is not None:
            C = self.belief.confidence
            int_spec = intgf_spec(C, v_rI, self.int_cfg)
            # optional mode hysteresis around C_th (off by default)
            h = cfg.guidance.confidence_hysteresis
            if (
                h > 0.0
                and self._prev_int_mode is not None
                and abs(C - self.int_cfg.C_th) < 0.5 * h
                and int_spec.mode is not self._prev_int_mode
            ):
                int_spec = FieldSpec(self._prev_int_mode, int_spec.d1, int_spec.d2, int_spec.v_r)
            self._prev_int_mode = int_spec.mode

        v_rS = singf_direction(m_now, self._prev_m, s.x, self._prev_x)
        if v_rS is not None:
            self._prev_v_rS = v_rS
        sing_spec = singf_spec(m_now, self._prev_v_rS, self.sing_cfg)

        return compute_guidance(
            v_h,
            int_spec,
            sing_spec,
            cfg.guidance.alpha,
            s,
            x_d,
            self.gains,
            cfg.guidance.f_max,
        )

    @property
    def manipulability_now(self) -> float:
        return manipulability(self.geom, self.state.q)

    @property
    def ee_position(self) -> np.ndarray:
        return self.state.x

    def fk(self, q: np.ndarray) -> np.ndarray:
        return forward_kinematics(self.geom, q)
