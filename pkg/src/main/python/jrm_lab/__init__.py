"""JOINT RECONSTRUCTION LAB: SHAPES, SCENES, FLOW MATCHING, ALIGNMENT BASELINE AND METRICS"""

from jrm_lab.jrm_lab_exception import (JrmLabException, ParameterError, UnsupportedShapeError, InputError,
                                       PlacementError, ConfigurationError, CalibrationError, DimensionError,
                                       CapacityError, NonFiniteError, DegeneracyError, UndefinedMetricError,
                                       StorageError)
from jrm_lab.jrm_lab_config import PROJECT_ROOT, UNITTEST_DATA_PATH
from jrm_lab.seeding import derive_seed, make_rng
from jrm_lab.shape_spec import ShapeFamily, ShapeSpec, PARAM_RANGES
from jrm_lab.canonical_shape import CanonicalShape, Joint, JointKind, JOINT_RANGES
from jrm_lab.shape_corpus import (Descriptor, ShapeCorpus, articulate, descriptor, descriptor_from_points,
                                  farthest_point_indices, generate_shape, sample_surface)
from jrm_lab.scene_types import (CameraTrajectory, Observation, PlacementState, Scene, SceneInstance,
                                 yaw_matrix)
from jrm_lab.scene_layout import footprints_overlap, make_rescans, place_objects
from jrm_lab.scene_observer import camera_trajectory, observe, segment_hits_box
from jrm_lab.benchmark_builder import (BenchmarkScene, build_articulation_benchmark, build_spatial_benchmark,
                                       build_temporal_benchmark, read_benchmark, write_benchmark)
from jrm_lab.pair_sampler import (CalibrationResult, PairLabel, PairStream, TrainingPair,
                                  calibrate_thresholds, synthesize_view)
from jrm_lab.flow_matching import (FlowSample, interpolate, joint_loss, sample_joint, target_velocity,
                                   train_step)
from jrm_lab.model_config import CoupledVariant, ModelConfig
from jrm_lab.jrm_denoiser import (ConditionEncoder, JrmDenoiser, TokenBlock, coupled_fusion_block, init_params,
                                  single_stream_block)
from jrm_lab.checkpoint_store import load_into, read_checkpoint, save_checkpoint
from jrm_lab.flow_trainer import FlowTrainer
from jrm_lab.rigid_transform import RigidTransform, fit_rigid
from jrm_lab.align_baseline import (IcpResult, Matching, MatchMode, corrupt_matching, fuse_observations, icp,
                                    match_instances, perturb_transform, register_rigid)
from jrm_lab.geom_metrics import (MetricsReport, brute_force_nearest, chamfer, evaluate_reconstruction, fscore,
                                  nearest_neighbors, normal_consistency)
from jrm_lab.experiment_config import ExperimentConfig
from jrm_lab.evaluation_runner import EvaluationRunner, form_groups
from jrm_lab.lab_manager import LabManager
