"""Convex primitives expressed as triangle soups with outward face normals"""
import numpy as np


class TriangleSoup:
    """Accumulates triangles, face normals and the movable-part flag"""

    def __init__(self):
        self.__triangles = []
        self.__normals = []
        self.__part = []

    def add(self, triangles: np.ndarray, normals: np.ndarray, part: bool = False):
        """Appends a primitive"""
        self.__triangles.append(np.asarray(triangles, dtype=np.float64))
        self.__normals.append(np.asarray(normals, dtype=np.float64))
        self.__part.append(np.full(len(triangles), part, dtype=bool))

    def arrays(self):
        """returns (triangles T×3×3, normals T×3, part flags T)"""
        return (np.concatenate(self.__triangles),
                np.concatenate(self.__normals),
                np.concatenate(self.__part))


def triangle_areas(triangles: np.ndarray) -> np.ndarray:
    """Area of every triangle"""
    edges_a = triangles[:, 1] - triangles[:, 0]
    edges_b = triangles[:, 2] - triangles[:, 0]
    return 0.5 * np.linalg.norm(np.cross(edges_a, edges_b), axis=1)


def _outward_normals(triangles: np.ndarray, center: np.ndarray) -> np.ndarray:
    normals = np.cross(triangles[:, 1] - triangles[:, 0], triangles[:, 2] - triangles[:, 0])
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    outward = triangles.mean(axis=1) - center
    flip = np.einsum("ij,ij->i", normals, outward) < 0
    normals[flip] *= -1.0
    return normals


def cuboid(center, size):
    """Axis-aligned box; one quad per face split in two triangles"""
    center = np.asarray(center, dtype=np.float64)
    half = np.asarray(size, dtype=np.float64) / 2.0
    triangles, normals = [], []
    for axis in range(3):
        u_axis, v_axis = [other for other in range(3) if other != axis]
        for sign in (-1.0, 1.0):
            face_center = center.copy()
            face_center[axis] += sign * half[axis]
            corners = []
            for du, dv in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
                corner = face_center.copy()
                corner[u_axis] += du * half[u_axis]
                corner[v_axis] += dv * half[v_axis]
                corners.append(corner)
            normal = np.zeros(3)
            normal[axis] = sign
            triangles += [[corners[0], corners[1], corners[2]], [corners[0], corners[2], corners[3]]]
            normals += [normal, normal]
    return np.array(triangles), np.array(normals)


def cylinder(center, radius: float, height: float, segments: int = 24):
    """Closed cylinder around the vertical axis"""
    center = np.asarray(center, dtype=np.float64)
    angles = np.linspace(0.0, 2.0 * np.pi, segments + 1)
    rim = np.stack([radius * np.cos(angles), np.zeros_like(angles), radius * np.sin(angles)], axis=1)
    bottom = center + rim + np.array([0.0, -height / 2.0, 0.0])
    top = center + rim + np.array([0.0, height / 2.0, 0.0])
    triangles = []
    for i in range(segments):
        triangles.append([bottom[i], bottom[i + 1], top[i + 1]])
        triangles.append([bottom[i], top[i + 1], top[i]])
    side = np.array(triangles)
    side_normals = _outward_normals(side, np.array([center[0], side[:, :, 1].mean(), center[2]]))
    side_normals[:, 1] = 0.0
    side_normals /= np.linalg.norm(side_normals, axis=1, keepdims=True)
    caps, cap_normals = [], []
    for ring, sign in ((bottom, -1.0), (top, 1.0)):
        hub = center + np.array([0.0, sign * height / 2.0, 0.0])
        for i in range(segments):
            caps.append([hub, ring[i], ring[i + 1]])
            cap_normals.append([0.0, sign, 0.0])
    return (np.concatenate([side, np.array(caps)]),
            np.concatenate([side_normals, np.array(cap_normals)]))


def ellipsoid(center, semi_axes, rings: int = 12, segments: int = 24):
    """UV-sphere tessellation scaled to the semi-axes"""
    center = np.asarray(center, dtype=np.float64)
    semi_axes = np.asarray(semi_axes, dtype=np.float64)
    polar = np.linspace(0.0, np.pi, rings + 1)
    azimuth = np.linspace(0.0, 2.0 * np.pi, segments + 1)
    grid = np.stack([np.sin(polar)[:, None] * np.cos(azimuth)[None, :],
                     np.repeat(np.cos(polar)[:, None], segments + 1, axis=1),
                     np.sin(polar)[:, None] * np.sin(azimuth)[None, :]], axis=-1)
    grid = center + grid * semi_axes
    triangles = []
    for i in range(rings):
        for j in range(segments):
            triangles.append([grid[i, j], grid[i + 1, j], grid[i + 1, j + 1]])
            triangles.append([grid[i, j], grid[i + 1, j + 1], grid[i, j + 1]])
    triangles = np.array(triangles)
    triangles = triangles[triangle_areas(triangles) > 1e-12]
    return triangles, _outward_normals(triangles, center)
