"""Contains the RigidTransform class and the closed-form rigid fit"""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from jrm_lab.jrm_lab_exception import DegeneracyError, InputError

ORTHONORMAL_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """x -> R x + t with R a proper rotation"""
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=np.float64)
        translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if rotation.shape != (3, 3):
            raise InputError("Rotation must be a 3x3 matrix")
        if (np.max(np.abs(rotation.T @ rotation - np.eye(3))) > ORTHONORMAL_TOLERANCE
                or abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOLERANCE):
            raise InputError("Rotation must be orthonormal with determinant 1")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "RigidTransform":
        """no motion"""
        return cls()

    @classmethod
    def from_yaw(cls, yaw: float, translation=None) -> "RigidTransform":
        """rotation about the vertical axis"""
        return cls(Rotation.from_euler("y", yaw).as_matrix(),
                   np.zeros(3) if translation is None else translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """moves points"""
        return np.asarray(points) @ self.rotation.T + self.translation

    def apply_normals(self, normals: np.ndarray) -> np.ndarray:
        """rotates normals"""
        return np.asarray(normals) @ self.rotation.T

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other"""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        """inverse motion"""
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def rotation_angle(self) -> float:
        """rotation magnitude in radians"""
        return float(Rotation.from_matrix(self.rotation).magnitude())

    def angle_to(self, other: "RigidTransform") -> float:
        """angle between the two rotations, stable near zero"""
        chord = np.linalg.norm(self.rotation - other.rotation) / (2.0 * np.sqrt(2.0))
        return float(2.0 * np.arcsin(min(1.0, chord)))

    def to_json(self):
        """returns the transform in json format"""
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}


def fit_rigid(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares rotation and translation mapping src rows onto dst rows, without scale"""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise InputError("Corresponding point sets must both be (n, 3)")
    if len(src) < 3:
        raise DegeneracyError("A rigid fit needs at least three points")
    src_centre, dst_centre = src.mean(axis=0), dst.mean(axis=0)
    src_centred = src - src_centre
    spread = np.linalg.svd(src_centred, compute_uv=False)
    if spread[0] == 0.0 or spread[1] <= 1e-9 * spread[0]:
        raise DegeneracyError("Points are collinear or coincident")
    u, _, vt = np.linalg.svd(src_centred.T @ (dst - dst_centre))
    reflection = np.sign(np.linalg.det(vt.T @ u.T)) or 1.0
    rotation = vt.T @ np.diag([1.0, 1.0, reflection]) @ u.T
    return RigidTransform(rotation, dst_centre - rotation @ src_centre)
