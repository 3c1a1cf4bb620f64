"""Pairing module: descriptor threshold calibration and the training pair stream"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from jrm_lab.canonical_shape import CanonicalShape, JOINT_RANGES
from jrm_lab.jrm_lab_config import (CALIBRATION_JITTER, CALIBRATION_MIN_SHAPES, CROSS_FAMILY_PASS_RATE,
                                    DEFAULT_DROPOUT, DEFAULT_NOISE_SIGMA, POSITIVE_PASS_RATE)
from jrm_lab.jrm_lab_exception import CalibrationError, ConfigurationError, ParameterError
from jrm_lab.scene_layout import place_objects
from jrm_lab.scene_observer import camera_trajectory, observe
from jrm_lab.scene_types import Observation
from jrm_lab.seeding import derive_seed, make_rng
from jrm_lab.shape_corpus import (ShapeCorpus, descriptor_from_points, farthest_point_indices,
                                  sample_surface)

logger = logging.getLogger(__name__)


class PairLabel(Enum):
    """Training pair label"""
    POSITIVE = "Positive"
    NEGATIVE = "Negative"


@dataclass(frozen=True)
class CalibrationResult:
    """Descriptor thresholds with the pass rates observed while fitting them"""
    positive_threshold: float
    similar_threshold: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __iter__(self):
        yield self.positive_threshold
        yield self.similar_threshold

    def to_json(self):
        """returns the thresholds and diagnostics in json format"""
        data = {"positive_threshold": self.positive_threshold,
                "similar_threshold": self.similar_threshold}
        data.update(self.diagnostics)
        return data


def _random_pairs(families, rng, count, same_family):
    firsts, seconds = [], []
    size = len(families)
    for _ in range(50 * count):
        if len(firsts) == count:
            break
        i, j = rng.integers(0, size, 2)
        if i != j and (families[i] == families[j]) == same_family:
            firsts.append(i)
            seconds.append(j)
    return np.array(firsts, dtype=np.int64), np.array(seconds, dtype=np.int64)


def calibrate_thresholds(corpus: ShapeCorpus, pair_count: int = 2000, seed: int = 0) -> CalibrationResult:
    """Positive threshold passes 99% of re-sampled identical shapes; similar threshold
    is exceeded by at most 1% of cross-family pairs"""
    if len(corpus) < CALIBRATION_MIN_SHAPES:
        raise CalibrationError("Calibration needs at least 100 shapes")
    rng = make_rng(seed, "calibration")
    matrix = corpus.descriptor_matrix()
    families = corpus.families()

    same_shape = []
    for index in range(min(pair_count, len(corpus))):
        shape = corpus[index]
        points, normals = sample_surface(shape, len(shape.points), derive_seed(seed, "resample", index))
        points = points + rng.normal(0.0, CALIBRATION_JITTER, points.shape)
        same_shape.append(float(descriptor_from_points(points, normals).vec @ matrix[index]))
    same_shape = np.array(same_shape)

    first, second = _random_pairs(families, rng, pair_count, same_family=False)
    cross = np.einsum("ij,ij->i", matrix[first], matrix[second])
    first, second = _random_pairs(families, rng, pair_count, same_family=True)
    within = np.einsum("ij,ij->i", matrix[first], matrix[second])
    if len(cross) == 0:
        raise CalibrationError("Calibration needs at least two families")

    positive = float(np.quantile(same_shape, 1.0 - POSITIVE_PASS_RATE, method="lower"))
    similar = float(np.quantile(cross, 1.0 - CROSS_FAMILY_PASS_RATE, method="higher"))
    diagnostics = {
        "identical_pass_rate": float(np.mean(same_shape >= positive)),
        "cross_family_pass_rate": float(np.mean(cross >= positive)),
        "cross_family_similar_rate": float(np.mean(cross > similar)),
        "same_family_similar_rate": float(np.mean(within > similar)) if len(within) else 0.0,
        "identical_median": float(np.median(same_shape)),
        "cross_family_median": float(np.median(cross)),
    }
    if diagnostics["cross_family_pass_rate"] > CROSS_FAMILY_PASS_RATE or similar > positive:
        raise CalibrationError("Descriptors cannot separate the corpus: " + repr(diagnostics))
    logger.info("Calibrated thresholds positive=%.4f similar=%.4f", positive, similar)
    return CalibrationResult(positive, similar, diagnostics)


@dataclass(frozen=True, eq=False)
class TrainingPair:
    """Two independently observed objects with their ground-truth tokens"""
    obs_a: Observation
    obs_b: Observation
    gt_a: np.ndarray
    gt_b: np.ndarray
    label: PairLabel
    shape_ids: tuple = ()

    @property
    def observations(self):
        """(obs_a, obs_b)"""
        return self.obs_a, self.obs_b

    @property
    def ground_truth(self):
        """(gt_a, gt_b)"""
        return self.gt_a, self.gt_b


def synthesize_view(shape: CanonicalShape, seed: int, token_count: int = 64,
                    noise_sigma: float = DEFAULT_NOISE_SIGMA, dropout: float = DEFAULT_DROPOUT,
                    theta: Optional[float] = None):
    """Observes one shape alone in a scene; returns (instance-frame observation, gt tokens n x 6)"""
    rng = np.random.default_rng(seed)
    if theta is None and shape.articulated and rng.random() < 0.5:
        theta = float(rng.uniform(*JOINT_RANGES[shape.joint.kind]))
    scene = place_objects([shape], derive_seed(seed, "layout"), [theta])
    trajectory = camera_trajectory(scene, derive_seed(seed, "camera"))
    observation = observe(scene, trajectory, noise_sigma, dropout, derive_seed(seed, "observe"))[0]
    observation = observation.to_instance_frame(scene.instances[0].position)
    points, normals = scene.instance_frame(0)
    chosen = farthest_point_indices(points, token_count)
    return observation, np.concatenate([points[chosen], normals[chosen]], axis=1)


class PairStream:
    """Reproducible stream of positive and negative training pairs"""

    # pylint: disable=too-many-arguments
    def __init__(self, corpus: ShapeCorpus, neg_ratio: float, seed: int, positive_threshold: float,
                 token_count: int = 64, noise_sigma: float = DEFAULT_NOISE_SIGMA,
                 dropout: float = DEFAULT_DROPOUT):
        if not 0.0 <= neg_ratio <= 1.0:
            raise ParameterError("Negative ratio must lie in [0, 1]")
        if len(corpus) == 0:
            raise ConfigurationError("Pair stream needs a non-empty corpus")
        self.__corpus = corpus
        self.__neg_ratio = neg_ratio
        self.__seed = seed
        self.__token_count = token_count
        self.__noise_sigma = noise_sigma
        self.__dropout = dropout
        cosine = corpus.cosine_matrix()
        families = corpus.families()
        self.__positives = [np.flatnonzero(cosine[i] >= positive_threshold) for i in range(len(corpus))]
        self.__negatives = [np.flatnonzero(families != families[i]) for i in range(len(corpus))]
        if any(len(candidates) == 0 for candidates in self.__positives):
            raise ConfigurationError("A shape has no positive candidate")
        if neg_ratio > 0.0 and all(len(candidates) == 0 for candidates in self.__negatives):
            raise ConfigurationError("Negative pairs need at least two families")
        self.__identical = 0
        self.__distinct = 0
        self.__negative = 0

    @property
    def neg_ratio(self) -> float:
        """probability of a negative draw"""
        return self.__neg_ratio

    @property
    def counts(self) -> dict:
        """label mix of the pairs drawn so far"""
        return {"identical_positive": self.__identical,
                "distinct_positive": self.__distinct,
                "negative": self.__negative}

    def draw_indices(self, index: int):
        """(label, shape index a, shape index b) of draw number index"""
        rng = make_rng(self.__seed, "pair", index)
        negative = rng.random() < self.__neg_ratio
        first = int(rng.integers(0, len(self.__corpus)))
        if negative and len(self.__negatives[first]) == 0:
            first = int(rng.choice([i for i, c in enumerate(self.__negatives) if len(c)]))
        candidates = self.__negatives[first] if negative else self.__positives[first]
        second = int(rng.choice(candidates))
        return (PairLabel.NEGATIVE if negative else PairLabel.POSITIVE), first, second

    def draw(self, index: int) -> TrainingPair:
        """Pair number index; a pure function of (seed, index)"""
        label, first, second = self.draw_indices(index)
        if label is PairLabel.NEGATIVE:
            self.__negative += 1
        elif first == second:
            self.__identical += 1
        else:
            self.__distinct += 1
        views = [synthesize_view(self.__corpus[shape_index], derive_seed(self.__seed, "view", index, side),
                                 self.__token_count, self.__noise_sigma, self.__dropout)
                 for side, shape_index in enumerate((first, second))]
        return TrainingPair(views[0][0], views[1][0], views[0][1], views[1][1], label,
                            (self.__corpus[first].shape_id, self.__corpus[second].shape_id))

    def __iter__(self):
        index = 0
        while True:
            yield self.draw(index)
            index += 1
