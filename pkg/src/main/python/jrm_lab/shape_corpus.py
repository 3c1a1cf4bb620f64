"""Shape corpus module: procedural generation, surface sampling, articulation and descriptors"""
import logging
import os
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from jrm_lab.canonical_shape import CanonicalShape, Joint, JointKind, JOINT_RANGES
from jrm_lab.dataset_store import write_meta, write_point_rows
from jrm_lab.jrm_lab_config import (DESCRIPTOR_DISTANCE_BINS, DESCRIPTOR_ELEVATION_BINS,
                                    DESCRIPTOR_MIN_POINTS, SHAPE_POINT_COUNT)
from jrm_lab.jrm_lab_exception import (InputError, ParameterError, UnsupportedShapeError)
from jrm_lab.shape_primitives import TriangleSoup, cuboid, cylinder, ellipsoid, triangle_areas
from jrm_lab.shape_spec import ShapeFamily, ShapeSpec

logger = logging.getLogger(__name__)


def _lerp(low, high, value):
    return low + (high - low) * value


def _legs(soup, width, depth, height, thickness, inset=0.02):
    for sx in (-1.0, 1.0):
        for sz in (-1.0, 1.0):
            soup.add(*cuboid((sx * (width / 2 - thickness / 2 - inset), height / 2,
                              sz * (depth / 2 - thickness / 2 - inset)),
                             (thickness, height, thickness)))


def _build_box(p):
    soup = TriangleSoup()
    soup.add(*cuboid((0.0, p[1] / 2, 0.0), (p[0], p[1], p[2])))
    return soup, None


def _build_table(p):
    width, depth = _lerp(0.6, 1.2, p[0]), _lerp(0.4, 1.0, p[1])
    height, top = _lerp(0.4, 0.9, p[2]), _lerp(0.03, 0.08, p[3])
    soup = TriangleSoup()
    soup.add(*cuboid((0.0, height - top / 2, 0.0), (width, top, depth)))
    _legs(soup, width, depth, height - top, _lerp(0.03, 0.08, p[4]))
    return soup, None


def _build_chair(p):
    width, depth = _lerp(0.4, 0.6, p[0]), _lerp(0.4, 0.6, p[1])
    seat_height, back_height = _lerp(0.4, 0.5, p[2]), _lerp(0.3, 0.7, p[3])
    seat = 0.05
    soup = TriangleSoup()
    soup.add(*cuboid((0.0, seat_height - seat / 2, 0.0), (width, seat, depth)))
    _legs(soup, width, depth, seat_height - seat, _lerp(0.03, 0.06, p[4]))
    soup.add(*cuboid((0.0, seat_height + back_height / 2, -depth / 2 + 0.025),
                     (width, back_height, 0.05)))
    return soup, None


def _build_sofa(p):
    length, depth = _lerp(1.2, 2.0, p[0]), _lerp(0.6, 0.9, p[1])
    seat_height, back_height = _lerp(0.35, 0.5, p[2]), _lerp(0.3, 0.6, p[3])
    arm_width, arm_height = _lerp(0.1, 0.25, p[4]), _lerp(0.15, 0.35, p[5])
    soup = TriangleSoup()
    soup.add(*cuboid((0.0, seat_height / 2, 0.0), (length, seat_height, depth)))
    soup.add(*cuboid((0.0, seat_height + back_height / 2, -depth / 2 + 0.1),
                     (length, back_height, 0.2)))
    for side in (-1.0, 1.0):
        soup.add(*cuboid((side * (length / 2 - arm_width / 2), seat_height + arm_height / 2, 0.1),
                         (arm_width, arm_height, depth - 0.2)))
    return soup, None


def _build_lamp(p):
    pole_height = _lerp(0.8, 1.6, p[2])
    soup = TriangleSoup()
    soup.add(*cylinder((0.0, 0.015, 0.0), _lerp(0.12, 0.22, p[0]), 0.03))
    soup.add(*cylinder((0.0, 0.03 + pole_height / 2, 0.0), _lerp(0.015, 0.03, p[1]), pole_height))
    soup.add(*cylinder((0.0, 0.03 + pole_height, 0.0), _lerp(0.15, 0.3, p[3]),
                       _lerp(0.2, 0.4, p[4])))
    return soup, None


def _build_pillow(p):
    soup = TriangleSoup()
    soup.add(*ellipsoid((0.0, 0.0, 0.0),
                        (_lerp(0.3, 0.5, p[0]), _lerp(0.08, 0.15, p[1]), _lerp(0.2, 0.4, p[2]))))
    return soup, None


def _build_cabinet(p):
    width, height, depth = _lerp(0.4, 0.7, p[0]), _lerp(0.9, 1.6, p[1]), _lerp(0.3, 0.55, p[2])
    soup = TriangleSoup()
    soup.add(*cuboid((0.0, height / 2, 0.0), (width, height, depth)))
    if p[3] < 0.5:
        door = height * _lerp(0.4, 0.95, p[4])
        soup.add(*cuboid((0.0, height - door / 2, depth / 2 + 0.01), (width, door, 0.02)), part=True)
        joint = (JointKind.HINGE, np.array([0.0, -1.0, 0.0]),
                 np.array([-width / 2, height - door / 2, depth / 2 + 0.02]))
    else:
        drawer = height * _lerp(0.15, 0.35, p[4])
        center_z = depth / 2 + 0.02 - 0.45 * depth
        soup.add(*cuboid((0.0, height - drawer / 2 - 0.02, center_z), (0.9 * width, drawer, 0.9 * depth)),
                 part=True)
        joint = (JointKind.PRISMATIC, np.array([0.0, 0.0, 1.0]),
                 np.array([0.0, height - drawer / 2 - 0.02, depth / 2 + 0.02]))
    return soup, joint


_FAMILY_BUILDERS = {
    ShapeFamily.BOX: _build_box,
    ShapeFamily.TABLE: _build_table,
    ShapeFamily.CHAIR: _build_chair,
    ShapeFamily.SOFA: _build_sofa,
    ShapeFamily.LAMP: _build_lamp,
    ShapeFamily.PILLOW: _build_pillow,
    ShapeFamily.CABINET: _build_cabinet,
}


def _sample_triangles(triangles, face_normals, count, rng):
    areas = triangle_areas(triangles)
    index = rng.choice(len(triangles), size=count, p=areas / areas.sum())
    u = rng.random(count)
    v = rng.random(count)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    chosen = triangles[index]
    points = (chosen[:, 0] + u[:, None] * (chosen[:, 1] - chosen[:, 0])
              + v[:, None] * (chosen[:, 2] - chosen[:, 0]))
    return points, face_normals[index].copy(), index


def generate_shape(spec: ShapeSpec, point_count: int = SHAPE_POINT_COUNT) -> CanonicalShape:
    """Builds the shape of a spec, normalised to unit bbox diagonal and zero centroid"""
    if not isinstance(spec, ShapeSpec):
        raise ParameterError("generate_shape expects a ShapeSpec")
    soup, joint_def = _FAMILY_BUILDERS[spec.family](spec.params)
    triangles, face_normals, face_part = soup.arrays()
    vertices = triangles.reshape(-1, 3)
    low, high = vertices.min(axis=0), vertices.max(axis=0)
    middle = (low + high) / 2.0
    scale = 1.0 / np.linalg.norm(high - low)
    triangles = (triangles - middle) * scale

    rng = np.random.default_rng(spec.seed)
    points, normals, index = _sample_triangles(triangles, face_normals, point_count, rng)
    offset = points.mean(axis=0)
    points = points - offset
    triangles = triangles - offset

    joint = None
    if joint_def is not None:
        kind, axis, pivot = joint_def
        joint = Joint(axis=axis / np.linalg.norm(axis),
                      pivot=(pivot - middle) * scale - offset,
                      kind=kind,
                      part_mask=face_part[index])
    return CanonicalShape(spec=spec, points=points, normals=normals, triangles=triangles,
                          face_normals=face_normals, face_part=face_part, joint=joint)


def sample_surface(shape: CanonicalShape, count: int, seed: int):
    """Area-weighted uniform samples of the shape surface with face normals"""
    if count < 1:
        raise InputError("Sample count must be at least 1")
    points, normals, _ = _sample_triangles(shape.triangles, shape.face_normals, count,
                                           np.random.default_rng(seed))
    return points, normals


def articulate(shape: CanonicalShape, theta: float) -> CanonicalShape:
    """Returns the shape at joint state theta (absolute, measured from rest)"""
    if shape.joint is None:
        raise UnsupportedShapeError("Shape has no articulation joint")
    low, high = JOINT_RANGES[shape.joint.kind]
    if not low <= theta <= high:
        raise ParameterError("Joint state out of range")
    delta = float(theta) - shape.theta
    if delta == 0.0:
        return shape.with_geometry(theta=float(theta))
    joint = shape.joint
    points, normals = shape.points.copy(), shape.normals.copy()
    mask = joint.part_mask
    points[mask], normals[mask] = joint.transform(points[mask], normals[mask], delta)
    triangles, face_normals = shape.triangles.copy(), shape.face_normals.copy()
    part = shape.face_part
    moved, _ = joint.transform(triangles[part].reshape(-1, 3), None, delta)
    triangles[part] = moved.reshape(-1, 3, 3)
    _, face_normals[part] = joint.transform(np.zeros((int(part.sum()), 3)), face_normals[part], delta)
    return shape.with_geometry(points=points, normals=normals, triangles=triangles,
                               face_normals=face_normals, theta=float(theta))


@dataclass(frozen=True, eq=False)
class Descriptor:
    """L2-normalised rotation-invariant geometric signature"""
    vec: np.ndarray

    def cosine(self, other: "Descriptor") -> float:
        """cosine similarity"""
        return float(np.dot(self.vec, other.vec))


def descriptor_from_points(points: np.ndarray, normals: np.ndarray) -> Descriptor:
    """Pairwise-distance histogram joined with a normal-elevation histogram"""
    points = np.asarray(points, dtype=np.float64)
    if len(points) < DESCRIPTOR_MIN_POINTS:
        raise InputError("Too few points for a descriptor")
    distances, _ = np.histogram(np.minimum(pdist(points), 1.0), bins=DESCRIPTOR_DISTANCE_BINS,
                                range=(0.0, 1.0))
    elevations, _ = np.histogram(np.clip(np.asarray(normals)[:, 1], -1.0, 1.0),
                                 bins=DESCRIPTOR_ELEVATION_BINS, range=(-1.0, 1.0))
    parts = []
    for histogram in (distances, elevations):
        histogram = histogram.astype(np.float64)
        parts.append(histogram / np.linalg.norm(histogram))
    vec = np.concatenate(parts)
    return Descriptor(vec / np.linalg.norm(vec))


def descriptor(shape: CanonicalShape) -> Descriptor:
    """Descriptor of a shape's surface samples"""
    return descriptor_from_points(shape.points, shape.normals)


def farthest_point_indices(points: np.ndarray, count: int) -> np.ndarray:
    """Greedy farthest point sampling starting from index 0"""
    count = min(count, len(points))
    chosen = np.zeros(count, dtype=np.int64)
    distance = np.linalg.norm(points - points[0], axis=1)
    for i in range(1, count):
        chosen[i] = int(np.argmax(distance))
        distance = np.minimum(distance, np.linalg.norm(points - points[chosen[i]], axis=1))
    return chosen


class ShapeCorpus:
    """Family-balanced collection of generated shapes with cached descriptors"""

    def __init__(self, shapes: Sequence[CanonicalShape]):
        self.__shapes = list(shapes)
        self.__by_id = {shape.shape_id: shape for shape in self.__shapes}
        self.__descriptors = None

    @classmethod
    def generate(cls, count: int, seed: int, point_count: int = SHAPE_POINT_COUNT,
                 families: Sequence[ShapeFamily] = tuple(ShapeFamily)) -> "ShapeCorpus":
        """Round-robin over families, parameters drawn uniformly in range"""
        rng = np.random.default_rng(seed)
        specs = [ShapeSpec.random(families[i % len(families)], rng) for i in range(count)]
        return cls.from_specs(specs, point_count)

    @classmethod
    def from_specs(cls, specs: Sequence[ShapeSpec], point_count: int = SHAPE_POINT_COUNT):
        """Regenerates shapes from their specs"""
        return cls([generate_shape(spec, point_count) for spec in specs])

    def __len__(self):
        return len(self.__shapes)

    def __getitem__(self, index) -> CanonicalShape:
        return self.__shapes[index]

    def __iter__(self):
        return iter(self.__shapes)

    @property
    def shapes(self) -> List[CanonicalShape]:
        """shapes in generation order"""
        return list(self.__shapes)

    def by_id(self, shape_id: str) -> CanonicalShape:
        """Looks a shape up by id"""
        try:
            return self.__by_id[shape_id]
        except KeyError as ex:
            raise InputError("Unknown shape id " + shape_id) from ex

    def families(self) -> np.ndarray:
        """family value per shape"""
        return np.array([shape.family.value for shape in self.__shapes])

    def descriptor_matrix(self) -> np.ndarray:
        """descriptors stacked row-wise"""
        if self.__descriptors is None:
            self.__descriptors = np.stack([descriptor(shape).vec for shape in self.__shapes])
        return self.__descriptors

    def cosine_matrix(self) -> np.ndarray:
        """pairwise descriptor cosine similarities"""
        matrix = self.descriptor_matrix()
        return matrix @ matrix.T

    def split(self, held_out: int):
        """(training corpus, held-out corpus); the held-out part is the tail"""
        if not 0 <= held_out < len(self.__shapes):
            raise ParameterError("Held-out count must leave a training corpus")
        cut = len(self.__shapes) - held_out
        return ShapeCorpus(self.__shapes[:cut]), ShapeCorpus(self.__shapes[cut:])

    def export(self, directory: str) -> List[str]:
        """Writes shape.meta and shape.bin per shape; returns the written paths"""
        written = []
        for shape in self.__shapes:
            shape_dir = os.path.join(directory, shape.shape_id)
            os.makedirs(shape_dir, exist_ok=True)
            meta = dict(shape.spec.to_json())
            meta["shape_id"] = shape.shape_id
            meta["point_count"] = int(len(shape.points))
            meta["joint"] = None if shape.joint is None else shape.joint.to_json()
            meta_path = os.path.join(shape_dir, "shape.meta")
            bin_path = os.path.join(shape_dir, "shape.bin")
            write_meta(meta_path, meta)
            write_point_rows(bin_path, shape.points, shape.normals)
            written += [meta_path, bin_path]
        logger.info("Exported %d shapes to %s", len(self.__shapes), directory)
        return written
