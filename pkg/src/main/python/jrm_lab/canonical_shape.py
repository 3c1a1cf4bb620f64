"""Contains the CanonicalShape and Joint classes"""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from jrm_lab.jrm_lab_config import HINGE_RANGE, PRISMATIC_RANGE
from jrm_lab.shape_spec import ShapeSpec


class JointKind(Enum):
    """Articulation joint types"""
    HINGE = "Hinge"
    PRISMATIC = "Prismatic"


JOINT_RANGES = {JointKind.HINGE: HINGE_RANGE, JointKind.PRISMATIC: PRISMATIC_RANGE}


@dataclass(frozen=True, eq=False)
class Joint:
    """Single joint moving the masked part of a shape"""
    axis: np.ndarray
    pivot: np.ndarray
    kind: JointKind
    part_mask: np.ndarray

    @property
    def joint_range(self):
        """closed interval of admissible joint states"""
        return JOINT_RANGES[self.kind]

    def transform(self, points: np.ndarray, normals: Optional[np.ndarray], delta: float):
        """Moves points (and normals) by a joint displacement of delta"""
        if self.kind is JointKind.PRISMATIC:
            return points + delta * self.axis, normals
        rotation = Rotation.from_rotvec(self.axis * delta).as_matrix()
        moved = (points - self.pivot) @ rotation.T + self.pivot
        return moved, (None if normals is None else normals @ rotation.T)

    def to_json(self):
        """returns the joint data in json format"""
        return {"kind": self.kind.value,
                "axis": [float(v) for v in self.axis],
                "pivot": [float(v) for v in self.pivot]}


@dataclass(frozen=True, eq=False)
class CanonicalShape:
    """Surface samples of a procedural shape in its unit-diagonal canonical frame"""
    spec: ShapeSpec
    points: np.ndarray
    normals: np.ndarray
    triangles: np.ndarray
    face_normals: np.ndarray
    face_part: np.ndarray
    joint: Optional[Joint] = None
    theta: float = 0.0

    @property
    def shape_id(self) -> str:
        """id shared by every instance of this shape"""
        return self.spec.shape_id

    @property
    def family(self):
        """shape family"""
        return self.spec.family

    @property
    def bbox(self):
        """axis-aligned (min, max) of the surface"""
        vertices = self.triangles.reshape(-1, 3)
        return vertices.min(axis=0), vertices.max(axis=0)

    @property
    def diagonal(self) -> float:
        """bbox diagonal length"""
        low, high = self.bbox
        return float(np.linalg.norm(high - low))

    @property
    def articulated(self) -> bool:
        """True when the shape carries a joint"""
        return self.joint is not None

    def with_geometry(self, **changes) -> "CanonicalShape":
        """copy with replaced arrays"""
        return replace(self, **changes)
