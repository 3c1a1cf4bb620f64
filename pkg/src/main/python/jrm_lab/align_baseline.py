"""Explicit alignment baseline: instance matching, rigid registration, fusion and error injection"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from jrm_lab.jrm_lab_config import ICP_MAX_ITERATIONS, ICP_TOLERANCE
from jrm_lab.jrm_lab_exception import DegeneracyError, InputError, ParameterError
from jrm_lab.rigid_transform import RigidTransform, fit_rigid
from jrm_lab.scene_types import Observation

logger = logging.getLogger(__name__)


class MatchMode(Enum):
    """How instances are associated"""
    ORACLE = "oracle"
    PREDICTED = "predicted"


@dataclass(frozen=True)
class Matching:
    """Injective (target, source) pairs with a score per pair"""
    pairs: tuple
    scores: tuple = field(default=(), compare=False)

    def __post_init__(self):
        pairs = tuple((int(target), int(source)) for target, source in self.pairs)
        targets = [target for target, _ in pairs]
        sources = [source for _, source in pairs]
        if len(set(targets)) != len(targets) or len(set(sources)) != len(sources):
            raise InputError("Matching must be injective on both sides")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores) or (math.nan,) * len(pairs))

    def __len__(self):
        return len(self.pairs)

    def as_dict(self) -> dict:
        """target -> source"""
        return dict(self.pairs)

    def source_for(self, target: int) -> Optional[int]:
        """matched source of a target, if any"""
        return self.as_dict().get(target)


def _descriptor_rows(descriptors) -> np.ndarray:
    return np.stack([np.asarray(getattr(item, "vec", item), dtype=np.float64) for item in descriptors])


def match_instances(targets, sources, mode: MatchMode, table: Sequence = None) -> Matching:
    """Oracle returns the ground-truth table; Predicted maximises total descriptor cosine one-to-one"""
    target_rows, source_rows = _descriptor_rows(targets), _descriptor_rows(sources)
    cosine = target_rows @ source_rows.T
    if MatchMode(mode) is MatchMode.ORACLE:
        if table is None:
            raise InputError("Oracle matching needs the ground-truth table")
        pairs = [(int(t), int(s)) for t, s in table]
        if any(not 0 <= t < len(target_rows) or not 0 <= s < len(source_rows) for t, s in pairs):
            raise InputError("Oracle table does not fit the instance counts")
        return Matching(tuple(pairs), tuple(cosine[t, s] for t, s in pairs))
    rows, cols = linear_sum_assignment(cosine, maximize=True)
    return Matching(tuple(zip(rows.tolist(), cols.tolist())), tuple(cosine[rows, cols]))


@dataclass(frozen=True, eq=False)
class IcpResult:
    """Outcome of an ICP run; transform is the best iterate"""
    transform: RigidTransform
    converged: bool
    iterations: int
    errors: List[float]

    @property
    def final_error(self) -> float:
        """lowest RMS nearest-neighbour distance reached"""
        return min(self.errors) if self.errors else math.inf


def icp(src: np.ndarray, dst: np.ndarray, init: RigidTransform = None,
        max_iterations: int = ICP_MAX_ITERATIONS, tolerance: float = ICP_TOLERANCE) -> IcpResult:
    """Point-to-point ICP with full nearest-neighbour re-association each iteration"""
    src, dst = np.asarray(src, dtype=np.float64), np.asarray(dst, dtype=np.float64)
    if len(src) == 0 or len(dst) == 0:
        raise InputError("ICP needs non-empty point sets")
    tree = cKDTree(dst)
    current = init or RigidTransform.identity()
    best, best_error = current, math.inf
    errors, previous, converged = [], None, False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        moved = current.apply(src)
        distances, indices = tree.query(moved)
        rms = float(np.sqrt(np.mean(distances ** 2)))
        errors.append(rms)
        if rms < best_error:
            best, best_error = current, rms
        mean = float(np.mean(distances))
        if previous is not None and abs(previous - mean) < tolerance:
            converged = True
            break
        previous = mean
        try:
            current = fit_rigid(moved, dst[indices]).compose(current)
        except DegeneracyError:
            break
    return IcpResult(best, converged, iterations, errors)


def register_rigid(src: np.ndarray, dst: np.ndarray, correspondences=None) -> RigidTransform:
    """Closed-form fit on (src_index, dst_index) pairs when given, otherwise ICP from identity"""
    src, dst = np.asarray(src, dtype=np.float64), np.asarray(dst, dtype=np.float64)
    if correspondences is not None:
        pairs = np.asarray(correspondences, dtype=np.int64).reshape(-1, 2)
        return fit_rigid(src[pairs[:, 0]], dst[pairs[:, 1]])
    result = icp(src, dst)
    if not result.converged:
        logger.warning("ICP stopped after %d iterations without converging", result.iterations)
    return result.transform


def multi_start_icp(src: np.ndarray, dst: np.ndarray, yaw_starts: int) -> IcpResult:
    """ICP from evenly spaced yaw initialisations with centroids aligned; lowest final error wins"""
    src, dst = np.asarray(src, dtype=np.float64), np.asarray(dst, dtype=np.float64)
    best = None
    for index in range(yaw_starts):
        rotation = RigidTransform.from_yaw(2.0 * math.pi * index / yaw_starts)
        init = RigidTransform(rotation.rotation, dst.mean(axis=0) - rotation.rotation @ src.mean(axis=0))
        result = icp(src, dst, init)
        if best is None or result.final_error < best.final_error:
            best = result
    return best


def fuse_observations(target_obs: Observation, source_obs_list: Sequence[Observation],
                      transforms: Sequence[RigidTransform]) -> Observation:
    """Target points followed by every source moved into the target frame"""
    if len(source_obs_list) != len(transforms):
        raise InputError("One transform per source observation is required")
    points, normals, counts = [target_obs.points], [target_obs.normals], [target_obs.visibility_count]
    for observation, transform in zip(source_obs_list, transforms):
        points.append(transform.apply(observation.points).reshape(-1, 3))
        normals.append(transform.apply_normals(observation.normals).reshape(-1, 3))
        counts.append(observation.visibility_count)
    return Observation(target_obs.instance_id, np.concatenate(points), np.concatenate(normals),
                       np.concatenate(counts))


def _unit(rng: np.random.Generator) -> np.ndarray:
    vector = rng.normal(size=3)
    return vector / np.linalg.norm(vector)


def perturb_transform(transform: RigidTransform, rot_err_deg: float, trans_err: float,
                      seed: int) -> RigidTransform:
    """Applies a rotation of exactly rot_err_deg about a random axis and a translation of norm trans_err"""
    if rot_err_deg < 0 or trans_err < 0:
        raise ParameterError("Alignment errors must be non-negative")
    rng = np.random.default_rng(seed)
    axis, direction = _unit(rng), _unit(rng)
    if rot_err_deg == 0 and trans_err == 0:
        return transform
    delta = RigidTransform(Rotation.from_rotvec(axis * math.radians(rot_err_deg)).as_matrix(),
                           direction * trans_err)
    return delta.compose(transform)


def corrupt_matching(matching: Matching, n_wrong: int, seed: int, source_count: int = None) -> Matching:
    """Re-pairs exactly n_wrong targets with wrong sources; a single wrong pair takes a free source"""
    if not 0 <= n_wrong <= len(matching):
        raise ParameterError("Number of wrong matches must lie between 0 and the matching size")
    if n_wrong == 0:
        return matching
    rng = np.random.default_rng(seed)
    pairs, scores = list(matching.pairs), list(matching.scores)
    chosen = sorted(rng.choice(len(pairs), n_wrong, replace=False).tolist())
    if n_wrong == 1:
        used = {source for _, source in pairs}
        free = sorted(set(range(source_count or 0)) - used)
        if not free:
            raise InputError("A single wrong match needs a free source")
        target, _ = pairs[chosen[0]]
        pairs[chosen[0]] = (target, int(rng.choice(free)))
        scores[chosen[0]] = math.nan
        return Matching(tuple(pairs), tuple(scores))
    sources = [pairs[i][1] for i in chosen]
    # Sattolo's algorithm yields a single cycle, hence no fixed point
    for i in range(len(sources) - 1, 0, -1):
        j = int(rng.integers(0, i))
        sources[i], sources[j] = sources[j], sources[i]
    for slot, source in zip(chosen, sources):
        pairs[slot] = (pairs[slot][0], source)
        scores[slot] = math.nan
    return Matching(tuple(pairs), tuple(scores))
