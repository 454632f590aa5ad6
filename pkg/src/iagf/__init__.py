"""Planar shared-autonomy teleoperation simulator with impedance-driven
anisotropic guidance fields."""

from .arm import ArmGeometry, forward_kinematics, ik_step, jacobian, manipulability
from .config import SimConfig
from .field import FieldMode, FieldSpec, GuidanceGains, active_force, field_boundary, passive_force, radial_length
from .guidance import (
    GuidanceOutput,
    IntGFConfig,
    SinGFConfig,
    compute_guidance,
    fuse_homogeneous,
    intgf_d2,
    intgf_spec,
    singf_d2,
    singf_direction,
    singf_spec,
)
from .impedance import DesiredCommand, ImpedanceParams, RobotState, impedance_accel, step
from .inference import (
    CommandHistory,
    GoalBelief,
    GoalSet,
    bayes_update,
    beta_schedule,
    blend,
    goal_policy,
    likelihood,
    robot_action,
    sim_dir,
    sim_enc,
)
from .pipeline import SharedAutonomySim, TickRecord
from .harness import EpisodeResult, run_episode, run_suite

__version__ = "0.1.0"
