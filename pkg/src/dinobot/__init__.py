"""Demonstration retrieval, correspondence alignment, and trajectory replay
for one-shot imitation at desk scale, with a synthetic feature harness."""

from .errors import (
    BufferIOError,
    ConfigError,
    CorruptRecordError,
    DegenerateConfigurationError,
    DimensionMismatchError,
    DinobotError,
    DuplicateIdError,
    EmptyTaskSubsetError,
    EmptyTestSetError,
    EnvMotionFaultError,
    FormatVersionMismatchError,
    IndexOutOfRangeError,
    InsufficientMatchesError,
    InvalidRecordError,
    NoValidPairsError,
    PoseOverlapError,
    TooFewPointsError,
    UnfamiliarObjectError,
    ZeroNormError,
)
from .geometry import (
    Frame,
    Pose,
    RigidTransform,
    Twist,
    rotation_about_z,
    rotation_angle,
    rotation_error_deg,
    rotation_exp,
    rotation_log,
    se3_exp,
)
from .model import (
    CameraIntrinsics,
    DemonstrationRecord,
    FeatureBundle,
    GripperAction,
    MemoryBuffer,
    RgbdImage,
    Trajectory,
    add_demonstration,
    task_subset,
)
from .persistence import (
    load_buffer,
    load_record_blob,
    read_feature_bundle,
    save_buffer,
    write_feature_bundle,
)
from .retrieval import (
    RetrievalConfig,
    RetrievalResult,
    cosine_similarity,
    retrieval_benchmark,
    retrieve,
)
from .matching import MatchConfig, MatchPair, best_buddies, patch_to_pixel
from .alignment import (
    AlignmentSolution,
    ErrorStats,
    KeypointSet,
    RansacConfig,
    ScenePair,
    alignment_benchmark,
    back_project,
    solve_alignment,
    solve_planar_4dof,
    solve_rigid_6dof,
    solve_with_ransac,
)
from .servoing import (
    AlignmentGoal,
    AlignmentOutcome,
    Environment,
    ExecuteConfig,
    Observation,
    ServoConfig,
    TaskOutcome,
    align_loop,
    execute_task,
    integrate_trajectory,
    pose_error,
    replay,
    servo_step,
)
from .sim import (
    DemonstrationSetup,
    NoiseModel,
    PoseRegion,
    Scene,
    SimEnvironment,
    SuiteConfig,
    SuiteEntry,
    SuiteResult,
    SyntheticFeatureBackend,
    SyntheticObject,
    bottleneck_offset,
    descend_trajectory,
    distractor_scene,
    make_cross_object_pairs,
    make_demonstration,
    make_same_object_pairs,
    overhead_pose,
    random_object,
    render,
    run_suite,
    run_trial,
    sample_test_pose,
    sibling_object,
)
from .config import (
    SceneSpec,
    demo_from_spec,
    load_scene_spec,
    object_from_spec,
    origin_pose,
    parse_scene_text,
    region_from_spec,
    scene_from_spec,
    servo_from_spec,
    suite_entries_from_spec,
    suite_from_spec,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
