"""Recursive Bayesian goal inference and confidence-weighted action blending.

Each goal owns a scripted proportional policy (standing in for a learned
library; any state -> action map plugs in). The posterior over goals is
updated every tick from how well the human command matches each policy, both
instantaneously and over a short history window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Encoder = Callable[[np.ndarray], np.ndarray]


def identity_encoder(seq: np.ndarray) -> np.ndarray:
    """Default sequence encoder: flatten the (steps, 2) window to one vector."""
    return np.asarray(seq, dtype=float).ravel()


@dataclass(frozen=True)
class GoalSet:
    """Candidate goals: ids plus workspace positions, shape (G, 2)."""

    ids: tuple[str, ...]
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if len(self.ids) < 2:
            raise ValueError("need at least 2 goals")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("goal ids must be distinct")
        if pos.shape != (len(self.ids), 2):
            raise ValueError("positions must be (G, 2)")
        object.__setattr__(self, "positions", pos)

    @property
    def size(self) -> int:
        return len(self.ids)

    def index(self, goal_id: str) -> int:
        try:
            return self.ids.index(goal_id)
        except ValueError:
            raise KeyError(f"unknown goal id {goal_id!r}") from None

    def position(self, goal_id: str) -> np.ndarray:
        return self.positions[self.index(goal_id)]


@dataclass(frozen=True)
class GoalBelief:
    """Posterior over goals with its derived confidence and prediction."""

    posterior: np.ndarray
    confidence: float
    predicted: int

    @staticmethod
    def uniform(n: int) -> "GoalBelief":
        return GoalBelief(np.full(n, 1.0 / n), 0.0, 0)


class CommandHistory:
    """Ring buffer of the last `capacity` human commands and per-goal policy
    actions, zero-padded until filled; oldest first."""

    def __init__(self, n_goals: int, capacity: int = 6):
        self.capacity = capacity
        self.human = np.zeros((capacity, 2))
        self.policy = np.zeros((n_goals, capacity, 2))
        self.count = 0

    def push(self, a_h: np.ndarray, a_goals: np.ndarray) -> None:
        self.human[:-1] = self.human[1:]
        self.human[-1] = a_h
        self.policy[:, :-1] = self.policy[:, 1:]
        self.policy[:, -1] = a_goals
        self.count += 1


def policy_actions(gs: GoalSet, x: np.ndarray, gain: float = 1.0, step_max: float = 0.01) -> np.ndarray:
    """All goal-directed proportional commands at position x, shape (G, 2)."""
    vec = gain * (gs.positions - np.asarray(x, dtype=float))
    norms = np.hypot(vec[:, 0], vec[:, 1])
    scale = np.where(norms > step_max, step_max / np.maximum(norms, 1e-300), 1.0)
    return vec * scale[:, None]


def goal_policy(goal_id: str, x: np.ndarray, gs: GoalSet, gain: float = 1.0, step_max: float = 0.01) -> np.ndarray:
    """Proportional command toward one goal, magnitude capped at step_max."""
    return policy_actions(gs, x, gain, step_max)[gs.index(goal_id)]


def sim_dir(a_h: np.ndarray, a_g: np.ndarray) -> float:
    """Instantaneous directional cosine similarity; 0 for degenerate inputs."""
    a_h = np.asarray(a_h, dtype=float)
    a_g = np.asarray(a_g, dtype=float)
    nh = float(np.hypot(a_h[0], a_h[1]))
    ng = float(np.hypot(a_g[0], a_g[1]))
    if nh < 1e-9 or ng < 1e-9:
        return 0.0
    c = float(a_h @ a_g) / (nh * ng)
    return min(1.0, max(-1.0, c))


def sim_enc(hist: CommandHistory, goal_index: int, encoder: Encoder = identity_encoder) -> float:
    """Cosine similarity between encoded human and goal-policy histories."""
    e_h = np.asarray(encoder(hist.human), dtype=float)
    e_g = np.asarray(encoder(hist.policy[goal_index]), dtype=float)
    nh = float(np.linalg.norm(e_h))
    ng = float(np.linalg.norm(e_g))
    if nh < 1e-9 or ng < 1e-9:
        return 0.0
    c = float(e_h @ e_g) / (nh * ng)
    return min(1.0, max(-1.0, c))


def likelihood(
    hist: CommandHistory,
    a_h: np.ndarray,
    a_goals: np.ndarray,
    gamma: float = 0.5,
    encoder: Encoder = identity_encoder,
) -> np.ndarray:
    """Per-goal evidence exp(gamma*sim_enc + (1-gamma)*sim_dir); unnormalized,
    strictly positive."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    n = a_goals.shape[0]
    s = np.empty(n)
    for g in range(n):
        s[g] = gamma * sim_enc(hist, g, encoder) + (1.0 - gamma) * sim_dir(a_h, a_goals[g])
    return np.exp(s)


def bayes_update(prior: np.ndarray, weights: np.ndarray, eps_p: float = 1e-4) -> GoalBelief:
    """Posterior ~ prior * weights, floored at eps_p and renormalized.

    Confidence is the gap between the best and second-best posterior; ties on
    the argmax go to the lowest goal index.
    """
    prior = np.asarray(prior, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0.0):
        raise ValueError("weights must be positive")
    raw = prior * weights
    post = raw / raw.sum()
    post = np.maximum(post, eps_p)
    post = post / post.sum()
    order = np.sort(post)
    confidence = float(order[-1] - order[-2])
    predicted = int(np.argmax(post))
    return GoalBelief(post, confidence, predicted)


def robot_action(belief: GoalBelief, a_goals: np.ndarray) -> np.ndarray:
    """Posterior-weighted mixture of the goal-directed commands."""
    return belief.posterior @ a_goals


def beta_schedule(C: float, beta_max: float = 0.6) -> float:
    """Arbitration weight: linear in confidence, capped at beta_max."""
    return beta_max * min(1.0, max(0.0, C))


def blend(a_h: np.ndarray, a_r: np.ndarray, beta: float) -> np.ndarray:
    """Convex combination (1-beta)*a_h + beta*a_r of human and robot commands."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    return (1.0 - beta) * np.asarray(a_h, dtype=float) + beta * np.asarray(a_r, dtype=float)
