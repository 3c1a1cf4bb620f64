"""Iterative collision-free placement of shapes and temporal rescans"""
import logging
from typing import List, Optional, Sequence

import numpy as np

from jrm_lab.canonical_shape import CanonicalShape
from jrm_lab.jrm_lab_config import (MAX_SCENE_OBJECTS, PLACEMENT_MAX_INCREMENTS,
                                    VERTICAL_OFFSET_RANGE)
from jrm_lab.jrm_lab_exception import InputError, PlacementError
from jrm_lab.scene_types import PlacementState, Scene, SceneInstance, yaw_matrix
from jrm_lab.seeding import derive_seed
from jrm_lab.shape_corpus import articulate

logger = logging.getLogger(__name__)


def footprints_overlap(first: np.ndarray, second: np.ndarray) -> bool:
    """Strict overlap of two (x_min, z_min, x_max, z_max) rectangles; touching edges do not count"""
    return bool(first[0] < second[2] and second[0] < first[2]
                and first[1] < second[3] and second[1] < first[3])


def _local_footprint(shape: CanonicalShape, yaw: float) -> np.ndarray:
    points = shape.points @ yaw_matrix(yaw).T
    return np.array([points[:, 0].min(), points[:, 2].min(), points[:, 0].max(), points[:, 2].max()])


def _short_side(footprint: np.ndarray) -> float:
    return float(min(footprint[2] - footprint[0], footprint[3] - footprint[1]))


def _search(local, placed, p0, direction, d0) -> PlacementState:
    for increments in range(PLACEMENT_MAX_INCREMENTS + 1):
        state = PlacementState(p0=p0, v=direction, d0=d0, iterations=increments)
        centre = state.position
        candidate = local + np.array([centre[0], centre[2], centre[0], centre[2]])
        if not any(footprints_overlap(candidate, other) for other in placed):
            return state
    raise PlacementError("Placement did not terminate within the increment guard")


def place_objects(shapes: Sequence[CanonicalShape], seed: int,
                  thetas: Optional[Sequence[Optional[float]]] = None) -> Scene:
    """Places shapes one by one, pushing each outward until its footprint is free"""
    if not 1 <= len(shapes) <= MAX_SCENE_OBJECTS:
        raise InputError("A scene holds between 1 and 16 shapes")
    thetas = list(thetas) if thetas is not None else [None] * len(shapes)
    if len(thetas) != len(shapes):
        raise InputError("One articulation state per shape is required")
    rng = np.random.default_rng(seed)
    instances, placed, iterations = [], [], []
    for shape, theta in zip(shapes, thetas):
        posed_shape = shape if theta is None else articulate(shape, theta)
        yaw = float(rng.uniform(0.0, 2.0 * np.pi))
        local = _local_footprint(posed_shape, yaw)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        direction = np.array([np.cos(angle), 0.0, np.sin(angle)])
        if instances:
            p0 = np.mean([instance.position for instance in instances], axis=0)
            p0[1] = 0.0
            d0 = sum(_short_side(footprint) for footprint in placed)
        else:
            p0, d0 = np.zeros(3), 0.0
        state = _search(local, placed, p0, direction, d0)
        position = state.position.copy()
        position[1] = rng.uniform(*VERTICAL_OFFSET_RANGE)
        instances.append(SceneInstance(shape.shape_id, yaw, position, theta))
        placed.append(local + np.array([position[0], position[2], position[0], position[2]]))
        iterations.append(state.iterations)
        logger.debug("Placed %s after %d increments", shape.shape_id, state.iterations)
    return Scene(instances, seed, {shape.shape_id: shape for shape in shapes}, iterations)


def scene_shapes(scene: Scene) -> List[CanonicalShape]:
    """rest-state shapes in scene order"""
    return [scene.shapes[shape_id] for shape_id in scene.shape_ids]


def make_rescans(scene: Scene, count: int, seed: int) -> List[Scene]:
    """Re-runs the layout on the same shapes with derived seeds"""
    if count < 1:
        raise InputError("Rescan count must be at least 1")
    shapes = scene_shapes(scene)
    thetas = [instance.theta for instance in scene.instances]
    return [place_objects(shapes, derive_seed(seed, "rescan", index), thetas)
            for index in range(count)]
