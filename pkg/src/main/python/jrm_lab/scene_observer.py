"""Camera trajectories and visibility-based partial observations"""
import logging
from typing import List

import numpy as np

from jrm_lab.jrm_lab_config import (CAMERA_ARC_RANGE, CAMERA_CONTROL_COUNT, CAMERA_HEIGHT_RANGE,
                                    CAMERA_RADIUS_INCREMENT, TRAJECTORY_LENGTH)
from jrm_lab.jrm_lab_exception import InputError, PlacementError
from jrm_lab.scene_types import CameraTrajectory, Observation, Scene
from jrm_lab.seeding import make_rng

logger = logging.getLogger(__name__)


def _interpolate(controls: np.ndarray, count: int) -> np.ndarray:
    knots = np.arange(len(controls))
    samples = np.linspace(0.0, len(controls) - 1, count)
    return np.stack([np.interp(samples, knots, controls[:, axis]) for axis in range(3)], axis=1)


def scene_bounds(scene: Scene):
    """world axis-aligned (min, max) over all instances"""
    boxes = [scene.bbox(index) for index in range(len(scene))]
    return (np.min([low for low, _ in boxes], axis=0),
            np.max([high for _, high in boxes], axis=0))


def camera_trajectory(scene: Scene, seed: int) -> CameraTrajectory:
    """Arc of control viewpoints around the scene, linearly interpolated"""
    if len(scene) == 0:
        raise InputError("Cannot build a trajectory for an empty scene")
    rng = np.random.default_rng(seed)
    low, high = scene_bounds(scene)
    centre = (low + high) / 2.0
    extent = float(np.max(high - low))

    count = int(rng.integers(CAMERA_CONTROL_COUNT[0], CAMERA_CONTROL_COUNT[1] + 1))
    span = rng.uniform(*CAMERA_ARC_RANGE)
    start = rng.uniform(0.0, 2.0 * np.pi)
    spacing = span / (count - 1)
    angles = start + spacing * np.arange(count) + rng.uniform(-0.1, 0.1, count) * spacing
    radii = extent + rng.uniform(*CAMERA_RADIUS_INCREMENT, count)
    heights = centre[1] + rng.uniform(*CAMERA_HEIGHT_RANGE, count)
    controls = np.stack([centre[0] + radii * np.cos(angles), heights,
                         centre[2] + radii * np.sin(angles)], axis=1)
    positions = _interpolate(controls, TRAJECTORY_LENGTH)

    centres = np.array([(scene.bbox(index)[0] + scene.bbox(index)[1]) / 2.0
                        for index in range(len(scene))])
    lookats = _interpolate(centres, TRAJECTORY_LENGTH)

    footprints = [scene.footprint(index) for index in range(len(scene))]
    for position in positions:
        for footprint in footprints:
            if footprint[0] <= position[0] <= footprint[2] and footprint[1] <= position[2] <= footprint[3]:
                raise PlacementError("Camera viewpoint falls inside an instance footprint")
    return CameraTrajectory(positions, lookats, radii, seed)


def segment_hits_box(starts: np.ndarray, end: np.ndarray, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    """Slab test of the segments starts->end against one axis-aligned box"""
    direction = end - starts
    t_near = np.zeros(len(starts))
    t_far = np.ones(len(starts))
    hit = np.ones(len(starts), dtype=bool)
    for axis in range(3):
        d = direction[:, axis]
        origin = starts[:, axis]
        parallel = np.abs(d) < 1e-15
        hit &= ~(parallel & ((origin < low[axis]) | (origin > high[axis])))
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (low[axis] - origin) / d
            t2 = (high[axis] - origin) / d
        entering = np.where(parallel, -np.inf, np.minimum(t1, t2))
        leaving = np.where(parallel, np.inf, np.maximum(t1, t2))
        t_near = np.maximum(t_near, entering)
        t_far = np.minimum(t_far, leaving)
    return hit & (t_near <= t_far)


def visibility_counts(scene: Scene, trajectory: CameraTrajectory) -> List[np.ndarray]:
    """Per instance, the number of viewpoints from which each surface sample is seen"""
    boxes = [scene.bbox(index) for index in range(len(scene))]
    counts = []
    for index in range(len(scene)):
        points, normals = scene.posed(index)
        seen = np.zeros(len(points), dtype=np.int64)
        for camera in trajectory.positions:
            visible = np.einsum("ij,ij->i", normals, camera - points) > 0.0
            for other, (low, high) in enumerate(boxes):
                if other == index or not visible.any():
                    continue
                blocked = segment_hits_box(points[visible], camera, low, high)
                visible[np.flatnonzero(visible)[blocked]] = False
            seen += visible
        counts.append(seen)
    return counts


def observe(scene: Scene, trajectory: CameraTrajectory, noise_sigma: float, dropout: float,
            seed: int) -> List[Observation]:
    """Pooled visible samples per instance with Gaussian jitter and random dropout"""
    if noise_sigma < 0.0:
        raise InputError("Noise sigma must be non-negative")
    if not 0.0 <= dropout < 1.0:
        raise InputError("Dropout must lie in [0, 1)")
    observations = []
    for index, seen in enumerate(visibility_counts(scene, trajectory)):
        rng = make_rng(seed, "observe", index)
        points, normals = scene.posed(index)
        mask = seen > 0
        points, normals, seen = points[mask], normals[mask], seen[mask]
        points = points + rng.normal(0.0, noise_sigma, points.shape)
        keep = rng.random(len(points)) >= dropout
        observation = Observation(index, points[keep], normals[keep], seen[keep])
        if observation.empty:
            logger.warning("Instance %d (%s) has no visible points", index, scene.instances[index].shape_id)
        observations.append(observation)
    return observations
