"""Global constants for finding the paths and desk-scale defaults"""
import math
import os.path

# Get the absolute path to the project root directory
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "../../../../"))
UNITTEST_DATA_PATH = os.path.join(PROJECT_ROOT, "src/unittest/data/")

# shape corpus
SHAPE_POINT_COUNT = 2048
DESCRIPTOR_DISTANCE_BINS = 40
DESCRIPTOR_ELEVATION_BINS = 24
DESCRIPTOR_MIN_POINTS = 32
HINGE_RANGE = (0.0, math.pi / 2)
PRISMATIC_RANGE = (0.0, 0.4)

# scene layout and capture
PLACEMENT_STEP = 0.05
PLACEMENT_MAX_INCREMENTS = 10000
MAX_SCENE_OBJECTS = 16
VERTICAL_OFFSET_RANGE = (-0.5, 0.2)
CAMERA_RADIUS_INCREMENT = (0.5, 1.0)
CAMERA_HEIGHT_RANGE = (0.3, 1.0)
CAMERA_CONTROL_COUNT = (6, 8)
CAMERA_ARC_RANGE = (math.pi / 2, 3 * math.pi / 2)
TRAJECTORY_LENGTH = 100
DEFAULT_NOISE_SIGMA = 0.005
DEFAULT_DROPOUT = 0.3

# pairing
POSITIVE_PASS_RATE = 0.99
CROSS_FAMILY_PASS_RATE = 0.01
CALIBRATION_MIN_SHAPES = 100
CALIBRATION_JITTER = 0.005
NEG_RATIO_GRID = (0.0, 0.1, 0.5, 0.9, 1.0)

# flow matching
DEFAULT_SAMPLE_STEPS = 50
DEFAULT_LEARNING_RATE = 1e-3

# evaluation
DEFAULT_TAU = 0.05
MAX_GROUP_SIZE = 9
ICP_MAX_ITERATIONS = 50
ICP_TOLERANCE = 1e-6
