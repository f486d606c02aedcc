"""Closed-loop alignment and open-loop trajectory replay.

The servo loop repeatedly observes, matches against the stored bottleneck
observation, back-projects, and solves for the rigid transform that maps
live-camera points onto bottleneck-camera points. The commanded correction
is the inverse of that transform, scaled by the step gain and applied as a
relative end-effector motion (conjugated through the hand-eye transform
when the camera is not at the EE frame). Once the keypoint residual falls
below threshold the loop stops without commanding further motion, and the
demonstration's velocity profile is replayed open loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Protocol, runtime_checkable

import numpy as np

from .alignment import (
    AlignmentMode,
    back_project,
    solve_alignment,
    weighted_rms,
)
from .errors import (
    ConfigError,
    DinobotError,
    EnvMotionFaultError,
    InsufficientMatchesError,
)
from .geometry import (
    Pose,
    RigidTransform,
    Twist,
    rotation_error_deg,
    rotation_log,
    se3_exp,
)
from .matching import MatchConfig, best_buddies
from .model import (
    CameraIntrinsics,
    DemonstrationRecord,
    FeatureBundle,
    GripperAction,
    MemoryBuffer,
    RgbdImage,
    Trajectory,
)
from .retrieval import RetrievalConfig, RetrievalResult, retrieve


class Observation(NamedTuple):
    image: RgbdImage
    features: FeatureBundle


@runtime_checkable
class Environment(Protocol):
    """Minimal robot-and-camera surface the loop drives.

    ``current_ee_pose`` exposes ground truth and exists for testing and
    diagnostics; control decisions use observations only.
    """

    def observe(self) -> Observation: ...

    def move_relative(self, motion: RigidTransform) -> None: ...

    def apply_twist(self, twist: Twist, dt: float) -> None: ...

    def current_ee_pose(self) -> Pose: ...


@dataclass(frozen=True)
class AlignmentGoal:
    """The stored bottleneck observation, reduced to what alignment needs."""

    features: FeatureBundle
    depth: np.ndarray
    intrinsics: CameraIntrinsics

    @staticmethod
    def from_record(record: DemonstrationRecord) -> "AlignmentGoal":
        return AlignmentGoal(
            features=record.bottleneck_features,
            depth=record.bottleneck_obs.depth,
            intrinsics=record.intrinsics,
        )


@dataclass(frozen=True)
class ServoConfig:
    mode: AlignmentMode = "4dof"
    residual_threshold: float = 0.003
    max_iterations: int = 50
    step_gain: float = 1.0
    min_pairs: int = 3
    match: MatchConfig = field(default_factory=MatchConfig)
    hand_eye: RigidTransform = field(default_factory=RigidTransform.identity)
    # consecutive InsufficientMatches tolerated before aborting
    match_failure_limit: int = 3

    def __post_init__(self):
        if not self.residual_threshold > 0:
            raise ConfigError("residual_threshold must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if not 0 < self.step_gain <= 1:
            raise ConfigError("step_gain must lie in (0, 1]")
        if self.min_pairs < 1:
            raise ConfigError("min_pairs must be at least 1")
        if self.match_failure_limit < 1:
            raise ConfigError("match_failure_limit must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    index: int
    residual: float
    translation: tuple[float, float, float]
    yaw_error_deg: float


@dataclass(frozen=True)
class AlignmentOutcome:
    converged: bool
    iterations: int
    final_residual: float
    pose_error_vs_truth: Optional[tuple[float, float]] = None
    history: tuple[IterationRecord, ...] = ()
    error: Optional[str] = None


def _measure(env: Environment, goal: AlignmentGoal, config: ServoConfig):
    """Observe and estimate the live-to-goal camera transform; no motion.

    Returns the solution together with the alignment residual: the weighted
    RMS distance between the live and goal correspondence lists as they
    stand, which is the quantity the loop drives to zero. The solution's
    own residual only says how rigidly consistent the match is, and stays
    near zero for any clean constant offset.
    """
    obs = env.observe()
    pairs = best_buddies(obs.features, goal.features, config.match)
    if len(pairs) < config.min_pairs:
        raise InsufficientMatchesError(
            f"{len(pairs)} mutual matches, need {config.min_pairs}"
        )
    c_live, c_goal = back_project(pairs, obs.image.depth, goal.depth, goal.intrinsics)
    if len(c_live) < config.min_pairs:
        raise InsufficientMatchesError(
            f"{len(c_live)} matches with valid depth, need {config.min_pairs}"
        )
    distance = weighted_rms(RigidTransform.identity(), c_live, c_goal)
    return solve_alignment(c_live, c_goal, config.mode), distance


def _correction(solution_transform: RigidTransform, config: ServoConfig) -> RigidTransform:
    """EE-frame motion command for one step: the scaled inverse estimate,
    conjugated through the hand-eye transform."""
    step = solution_transform.inverse().scaled(config.step_gain)
    x = config.hand_eye
    return x @ step @ x.inverse()


def servo_step(
    env: Environment, goal: AlignmentGoal, config: ServoConfig = ServoConfig()
) -> tuple[RigidTransform, float]:
    """One full iteration: observe, match, back-project, solve, move.

    Returns the solved live-to-goal transform and the correspondence-list
    distance residual (both describing the state before the commanded
    motion).
    """
    solution, residual = _measure(env, goal, config)
    env.move_relative(_correction(solution.transform, config))
    return solution.transform, residual


def _yaw_error_deg(transform: RigidTransform) -> float:
    return float(np.degrees(rotation_log(transform.rotation)[2]))


def align_loop(
    env: Environment,
    goal: AlignmentGoal,
    config: ServoConfig = ServoConfig(),
    true_goal_pose: Optional[Pose] = None,
) -> AlignmentOutcome:
    """Iterate servo steps until the residual drops below threshold.

    The convergence check runs on the freshly measured state, so no motion
    is commanded once (or after) the loop converges; starting at the goal
    converges in one iteration with zero commanded motion. Transient
    InsufficientMatches failures are retried up to the configured limit;
    other domain errors abort the loop and are reported on the outcome.
    """
    history: list[IterationRecord] = []
    consecutive_failures = 0
    residual = float("inf")
    for iteration in range(1, config.max_iterations + 1):
        try:
            solution, measured = _measure(env, goal, config)
        except InsufficientMatchesError as e:
            consecutive_failures += 1
            if consecutive_failures >= config.match_failure_limit:
                return AlignmentOutcome(
                    converged=False,
                    iterations=iteration,
                    final_residual=residual,
                    pose_error_vs_truth=_truth_error(env, true_goal_pose),
                    history=tuple(history),
                    error=f"{e.code}: {e}",
                )
            continue
        except DinobotError as e:
            return AlignmentOutcome(
                converged=False,
                iterations=iteration,
                final_residual=residual,
                pose_error_vs_truth=_truth_error(env, true_goal_pose),
                history=tuple(history),
                error=f"{e.code}: {e}",
            )
        consecutive_failures = 0
        residual = measured
        t = solution.transform.translation
        history.append(
            IterationRecord(
                index=iteration,
                residual=residual,
                translation=(float(t[0]), float(t[1]), float(t[2])),
                yaw_error_deg=_yaw_error_deg(solution.transform),
            )
        )
        if residual <= config.residual_threshold:
            return AlignmentOutcome(
                converged=True,
                iterations=iteration,
                final_residual=residual,
                pose_error_vs_truth=_truth_error(env, true_goal_pose),
                history=tuple(history),
            )
        try:
            env.move_relative(_correction(solution.transform, config))
        except EnvMotionFaultError as e:
            return AlignmentOutcome(
                converged=False,
                iterations=iteration,
                final_residual=residual,
                pose_error_vs_truth=_truth_error(env, true_goal_pose),
                history=tuple(history),
                error=f"{e.code}: {e}",
            )
    return AlignmentOutcome(
        converged=False,
        iterations=config.max_iterations,
        final_residual=residual,
        pose_error_vs_truth=_truth_error(env, true_goal_pose),
        history=tuple(history),
    )


def pose_error(a: Pose, b: Pose) -> tuple[float, float]:
    """(translation error in meters, rotation error in degrees)."""
    return (
        float(np.linalg.norm(a.translation - b.translation)),
        rotation_error_deg(a.rotation, b.rotation),
    )


def _truth_error(env: Environment, true_goal_pose: Optional[Pose]):
    if true_goal_pose is None:
        return None
    return pose_error(env.current_ee_pose(), true_goal_pose)


def integrate_trajectory(trajectory: Trajectory) -> RigidTransform:
    """Closed-form total displacement of a velocity profile: the product of
    per-step twist exponentials, in the body frame of the start pose."""
    total = RigidTransform.identity()
    for twist, _ in trajectory.steps():
        total = total @ se3_exp(twist, trajectory.dt)
    return total


def replay(env: Environment, trajectory: Trajectory) -> Pose:
    """Execute the recorded velocity profile open loop.

    Each step integrates the body twist for dt; gripper flags are passed
    through verbatim when the environment exposes ``set_gripper``. Returns
    the final EE pose. Deterministic: identical trajectories and start
    states yield identical final poses.
    """
    set_gripper = getattr(env, "set_gripper", None)
    for twist, action in trajectory.steps():
        env.apply_twist(twist, trajectory.dt)
        if action != GripperAction.NONE and set_gripper is not None:
            set_gripper(action)
    return env.current_ee_pose()


@dataclass(frozen=True)
class ExecuteConfig:
    servo: ServoConfig = field(default_factory=ServoConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    replay_on_failure: bool = False


@dataclass(frozen=True)
class TaskOutcome:
    retrieval: RetrievalResult
    alignment: AlignmentOutcome
    final_pose: Pose
    replayed: bool


def execute_task(
    env: Environment,
    task: str,
    buffer: MemoryBuffer,
    config: ExecuteConfig = ExecuteConfig(),
    true_goal_pose: Optional[Pose] = None,
) -> TaskOutcome:
    """Full pipeline: retrieve by CLS similarity, align, then replay.

    Replay is skipped when alignment fails to converge unless configured
    otherwise. Retrieval failures (empty task subset, novelty rejection)
    propagate before any motion is commanded.
    """
    live = env.observe()
    result = retrieve(live.features, task, buffer, config.retrieval)
    goal = AlignmentGoal.from_record(result.record)
    outcome = align_loop(env, goal, config.servo, true_goal_pose=true_goal_pose)
    replayed = False
    if outcome.converged or config.replay_on_failure:
        final_pose = replay(env, result.record.trajectory)
        replayed = True
    else:
        final_pose = env.current_ee_pose()
    return TaskOutcome(
        retrieval=result, alignment=outcome, final_pose=final_pose, replayed=replayed
    )
