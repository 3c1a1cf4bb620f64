"""Chamfer distance, normal consistency and F-score with a brute-force oracle"""
import numpy as np
from scipy.spatial import cKDTree

from jrm_lab.jrm_lab_config import DEFAULT_TAU
from jrm_lab.jrm_lab_exception import InputError, ParameterError, UndefinedMetricError

TIE_TOLERANCE = 1e-12
UNIT_TOLERANCE = 1e-6


def _points(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64).reshape(-1, 3)
    if len(values) == 0:
        raise UndefinedMetricError("Metric undefined for an empty point set")
    return values


def _lowest_index(distances: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """per row, the smallest index among candidates tied with the row minimum"""
    nearest = distances.min(axis=1, keepdims=True)
    tied = distances <= nearest + TIE_TOLERANCE
    return np.where(tied, indices, np.iinfo(np.int64).max).min(axis=1)


def nearest_neighbors(query, reference):
    """(distances, indices) of each query point's nearest reference point via a k-d tree"""
    query, reference = _points(query), _points(reference)
    tree = cKDTree(reference)
    nearest, _ = tree.query(query)
    chosen = np.empty(len(query), dtype=np.int64)
    for row, candidates in enumerate(tree.query_ball_point(query, nearest + 1e-9)):
        candidates = np.asarray(candidates, dtype=np.int64)
        exact = np.linalg.norm(reference[candidates] - query[row], axis=1)
        chosen[row] = _lowest_index(exact[None, :], candidates[None, :])[0]
    return np.linalg.norm(reference[chosen] - query, axis=1), chosen


def brute_force_nearest(query, reference):
    """O(n m) oracle with the same tie rule as nearest_neighbors"""
    query, reference = _points(query), _points(reference)
    distances = np.linalg.norm(query[:, None, :] - reference[None, :, :], axis=2)
    indices = np.broadcast_to(np.arange(len(reference)), distances.shape)
    chosen = _lowest_index(distances, indices)
    return np.linalg.norm(reference[chosen] - query, axis=1), chosen


def chamfer(a, b) -> float:
    """100 * (mean_a min_b |a-b| + mean_b min_a |a-b|) / 2"""
    forward, _ = nearest_neighbors(a, b)
    backward, _ = nearest_neighbors(b, a)
    return float(100.0 * 0.5 * (forward.mean() + backward.mean()))


def _unit_normals(normals, count) -> np.ndarray:
    normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    if len(normals) != count:
        raise InputError("One normal per point is required")
    if np.any(np.abs(np.linalg.norm(normals, axis=1) - 1.0) > UNIT_TOLERANCE):
        raise InputError("Normals must be unit length")
    return normals


def normal_consistency(a, normals_a, b, normals_b) -> float:
    """100 * symmetric mean |cos| between each normal and its nearest neighbour's normal"""
    a, b = _points(a), _points(b)
    normals_a, normals_b = _unit_normals(normals_a, len(a)), _unit_normals(normals_b, len(b))
    _, forward = nearest_neighbors(a, b)
    _, backward = nearest_neighbors(b, a)
    forward_cos = np.abs(np.einsum("ij,ij->i", normals_a, normals_b[forward]))
    backward_cos = np.abs(np.einsum("ij,ij->i", normals_b, normals_a[backward]))
    return float(100.0 * 0.5 * (forward_cos.mean() + backward_cos.mean()))


def fscore(a, b, tau: float = DEFAULT_TAU) -> float:
    """100 * harmonic mean of precision and recall at distance tau"""
    if tau <= 0:
        raise ParameterError("F-score threshold must be positive")
    forward, _ = nearest_neighbors(a, b)
    backward, _ = nearest_neighbors(b, a)
    precision = float(np.mean(forward <= tau))
    recall = float(np.mean(backward <= tau))
    if precision + recall == 0.0:
        return 0.0
    return 100.0 * 2.0 * precision * recall / (precision + recall)


class MetricsReport:
    """Class representing the metrics of one reconstruction"""
    CSV_HEADER = ["cd", "nc", "f1", "tau", "sample_count"]

    # pylint: disable=too-many-arguments
    def __init__(self, cd: float, nc: float, f1: float, tau: float, sample_count: int):
        if cd < 0 or not 0 <= nc <= 100 + 1e-9 or not 0 <= f1 <= 100 + 1e-9:
            raise InputError("Metric values out of range")
        self.__cd = float(cd)
        self.__nc = float(min(nc, 100.0))
        self.__f1 = float(min(f1, 100.0))
        self.__tau = float(tau)
        self.__sample_count = int(sample_count)

    @property
    def cd(self) -> float:
        """chamfer distance x100"""
        return self.__cd

    @property
    def nc(self) -> float:
        """normal consistency in [0, 100]"""
        return self.__nc

    @property
    def f1(self) -> float:
        """F-score in [0, 100]"""
        return self.__f1

    @property
    def tau(self) -> float:
        """F-score threshold"""
        return self.__tau

    @property
    def sample_count(self) -> int:
        """number of generated points"""
        return self.__sample_count

    def to_row(self) -> list:
        """values in CSV_HEADER order"""
        return ["%.6f" % self.__cd, "%.6f" % self.__nc, "%.6f" % self.__f1, "%g" % self.__tau,
                str(self.__sample_count)]

    def to_json(self):
        """returns the report in json format"""
        return dict(zip(self.CSV_HEADER, [self.__cd, self.__nc, self.__f1, self.__tau, self.__sample_count]))


def renormalize_normals(normals: np.ndarray) -> np.ndarray:
    """unit normals; zero vectors become +y"""
    normals = np.asarray(normals, dtype=np.float64)
    length = np.linalg.norm(normals, axis=1, keepdims=True)
    safe = np.where(length > 1e-12, length, 1.0)
    return np.where(length > 1e-12, normals / safe, np.array([0.0, 1.0, 0.0]))


def evaluate_reconstruction(gen, gt_points, gt_normals, tau: float = DEFAULT_TAU) -> MetricsReport:
    """Metrics of generated point+normal tokens against dense ground truth"""
    tokens = np.asarray(gen.detach().cpu().numpy() if hasattr(gen, "detach") else gen, dtype=np.float64)
    tokens = tokens.reshape(-1, tokens.shape[-1])
    if tokens.shape[1] < 6:
        raise InputError("Tokens must carry a position and a normal")
    if not np.all(np.isfinite(tokens[:, :3])):
        raise InputError("Generated token positions must be finite")
    points, normals = tokens[:, :3], renormalize_normals(tokens[:, 3:6])
    return MetricsReport(chamfer(points, gt_points),
                         normal_consistency(points, normals, gt_points, renormalize_normals(gt_normals)),
                         fscore(points, gt_points, tau), tau, len(points))
