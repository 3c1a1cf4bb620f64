"""Contains the scene data classes: SceneInstance, Scene, PlacementState, CameraTrajectory, Observation"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from jrm_lab.canonical_shape import CanonicalShape
from jrm_lab.jrm_lab_config import PLACEMENT_STEP
from jrm_lab.jrm_lab_exception import InputError
from jrm_lab.shape_corpus import articulate


def yaw_matrix(yaw: float) -> np.ndarray:
    """Rotation about the vertical (y) axis"""
    return Rotation.from_euler("y", yaw).as_matrix()


@dataclass(frozen=True, eq=False)
class SceneInstance:
    """One placed shape"""
    shape_id: str
    yaw: float
    position: np.ndarray
    theta: Optional[float] = None

    def to_json(self):
        """returns the instance data in json format"""
        return {"shape_id": self.shape_id,
                "yaw": float(self.yaw),
                "position": [float(v) for v in self.position],
                "theta": None if self.theta is None else float(self.theta)}


@dataclass(frozen=True)
class PlacementState:
    """Search state of the placement heuristic for one object"""
    p0: np.ndarray = field(compare=False)
    v: np.ndarray = field(compare=False)
    d0: float
    iterations: int

    @property
    def position(self) -> np.ndarray:
        """horizontal position reached after the recorded increments"""
        return self.p0 + (self.d0 + PLACEMENT_STEP * self.iterations) * self.v


@dataclass(frozen=True, eq=False)
class Scene:
    """Ordered placed instances plus the shapes they refer to"""
    instances: List[SceneInstance]
    seed: int
    shapes: Dict[str, CanonicalShape]
    placement_iterations: List[int] = field(default_factory=list)

    def __len__(self):
        return len(self.instances)

    @property
    def shape_ids(self) -> List[str]:
        """shape id per instance, in scene order"""
        return [instance.shape_id for instance in self.instances]

    def instance_shape(self, index: int) -> CanonicalShape:
        """canonical shape of an instance at its articulation state"""
        instance = self.instances[index]
        shape = self.shapes[instance.shape_id]
        if instance.theta is None:
            return shape
        return articulate(shape, instance.theta)

    def instance_frame(self, index: int):
        """(points, normals) with yaw and articulation applied, no translation"""
        shape = self.instance_shape(index)
        rotation = yaw_matrix(self.instances[index].yaw)
        return shape.points @ rotation.T, shape.normals @ rotation.T

    def posed(self, index: int):
        """(points, normals) of an instance in the world frame"""
        points, normals = self.instance_frame(index)
        return points + self.instances[index].position, normals

    def bbox(self, index: int):
        """world axis-aligned (min, max) of an instance"""
        points, _ = self.posed(index)
        return points.min(axis=0), points.max(axis=0)

    def footprint(self, index: int) -> np.ndarray:
        """top-down rectangle (x_min, z_min, x_max, z_max)"""
        low, high = self.bbox(index)
        return np.array([low[0], low[2], high[0], high[2]])

    def permuted(self, order: Sequence[int]) -> "Scene":
        """Scene with instances listed in the given order"""
        if sorted(order) != list(range(len(self.instances))):
            raise InputError("Scene order must be a permutation of the instances")
        iterations = ([self.placement_iterations[i] for i in order]
                      if self.placement_iterations else [])
        return Scene([self.instances[i] for i in order], self.seed, self.shapes, iterations)

    def to_json(self):
        """returns the scene data in json format"""
        return {"seed": int(self.seed),
                "instances": [instance.to_json() for instance in self.instances],
                "placement_iterations": [int(n) for n in self.placement_iterations]}


@dataclass(frozen=True, eq=False)
class CameraTrajectory:
    """Interpolated camera path around a scene"""
    positions: np.ndarray
    lookats: np.ndarray
    control_radii: np.ndarray
    seed: int

    def __len__(self):
        return len(self.positions)

    @property
    def viewpoints(self):
        """list of (position, lookat)"""
        return list(zip(self.positions, self.lookats))

    def subset(self, indices: Sequence[int]) -> "CameraTrajectory":
        """trajectory restricted to some viewpoints"""
        indices = list(indices)
        return CameraTrajectory(self.positions[indices], self.lookats[indices],
                                self.control_radii, self.seed)


@dataclass(frozen=True, eq=False)
class Observation:
    """Partial noisy point cloud of one instance"""
    instance_id: int
    points: np.ndarray
    normals: np.ndarray
    visibility_count: np.ndarray

    @classmethod
    def empty_for(cls, instance_id: int) -> "Observation":
        """observation with no points"""
        return cls(instance_id, np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0, dtype=np.int64))

    @property
    def empty(self) -> bool:
        """True when nothing was seen"""
        return len(self.points) == 0

    def __len__(self):
        return len(self.points)

    def to_instance_frame(self, position: np.ndarray) -> "Observation":
        """Subtracts the instance position (the detected box centre)"""
        return Observation(self.instance_id, self.points - np.asarray(position),
                           self.normals, self.visibility_count)
