"""Spatial, temporal and articulated benchmark construction and their on-disk layout"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from jrm_lab.canonical_shape import JOINT_RANGES
from jrm_lab.dataset_store import (read_meta, read_point_rows, write_manifest, write_meta,
                                   write_point_rows)
from jrm_lab.jrm_lab_config import DEFAULT_DROPOUT, DEFAULT_NOISE_SIGMA
from jrm_lab.jrm_lab_exception import ConfigurationError, StorageError
from jrm_lab.scene_layout import make_rescans, place_objects
from jrm_lab.scene_observer import camera_trajectory, observe
from jrm_lab.scene_types import Observation, Scene, SceneInstance
from jrm_lab.seeding import derive_seed, make_rng
from jrm_lab.shape_corpus import ShapeCorpus, generate_shape
from jrm_lab.shape_spec import ShapeSpec

logger = logging.getLogger(__name__)

BENCHMARK_KINDS = ("spatial", "temporal", "articulated")
TEMPORAL_ARRANGEMENTS = 4
SIMILAR_RESAMPLE_GUARD = 200


@dataclass(frozen=True, eq=False)
class BenchmarkScene:
    """One benchmark scene: its arrangements, roles, matchings and captured data"""
    scene_id: str
    kind: str
    arrangements: List[Scene]
    roles: Dict[str, int]
    matchings: List[List[List[int]]]
    observations: List[List[Observation]]
    ground_truth: List[List[tuple]]
    shape_specs: Dict[str, dict] = field(default_factory=dict)

    @property
    def object_count(self) -> int:
        """instances per arrangement"""
        return len(self.arrangements[0])

    def flat_index(self, arrangement: int, instance: int) -> int:
        """file index of an observation"""
        return arrangement * self.object_count + instance

    def instance_observation(self, arrangement: int, instance: int) -> Observation:
        """observation moved to the instance frame"""
        position = self.arrangements[arrangement].instances[instance].position
        return self.observations[arrangement][instance].to_instance_frame(position)

    def family_of(self, arrangement: int, instance: int) -> str:
        """family name of an instance"""
        shape_id = self.arrangements[arrangement].instances[instance].shape_id
        return self.shape_specs[shape_id]["family"]

    def source_index(self, arrangement: int, target: int) -> int:
        """ground-truth index in an arrangement of arrangement-0 instance target"""
        if arrangement == 0:
            return target
        return dict(self.matchings[arrangement - 1])[target]


def _capture(scene: Scene, seed: int, noise_sigma: float, dropout: float):
    trajectory = camera_trajectory(scene, derive_seed(seed, "camera"))
    observations = observe(scene, trajectory, noise_sigma, dropout, derive_seed(seed, "observe"))
    return observations, [scene.instance_frame(index) for index in range(len(scene))]


def _assemble(scene_id, kind, arrangements, roles, matchings, seed, noise_sigma, dropout):
    observations, ground_truth = [], []
    for number, arrangement in enumerate(arrangements):
        captured, truth = _capture(arrangement, derive_seed(seed, "capture", number), noise_sigma, dropout)
        observations.append(captured)
        ground_truth.append(truth)
    specs = {shape_id: shape.spec.to_json() for shape_id, shape in arrangements[0].shapes.items()}
    return BenchmarkScene(scene_id, kind, arrangements, roles, matchings, observations, ground_truth, specs)


def _spatial_scene(corpus, number, seed, thresholds, noise_sigma, dropout):
    positive_threshold, similar_threshold = thresholds
    rng = make_rng(seed, "spatial", number)
    cosine = corpus.cosine_matrix()
    families = corpus.families()
    for _ in range(SIMILAR_RESAMPLE_GUARD):
        target = int(rng.integers(0, len(corpus)))
        similar = np.flatnonzero((families == families[target]) & (cosine[target] > similar_threshold)
                                 & (cosine[target] < positive_threshold))
        negative = np.flatnonzero(families != families[target])
        if len(similar) and len(negative):
            break
    else:
        raise ConfigurationError("No similar candidate found for any sampled target")
    others = np.array([i for i in range(len(corpus)) if i != target])
    occluders = rng.choice(others, 2, replace=False)
    picks = [("target", target), ("identical", target), ("similar", int(rng.choice(similar))),
             ("negative", int(rng.choice(negative))), ("occluder_0", int(occluders[0])),
             ("occluder_1", int(occluders[1]))]
    order = rng.permutation(len(picks))
    roles = {picks[slot][0]: position for position, slot in enumerate(order)}
    shapes = [corpus[picks[slot][1]] for slot in order]
    scene = place_objects(shapes, derive_seed(seed, "spatial", number, "layout"))
    return _assemble("spatial_%04d" % number, "spatial", [scene], roles, [], seed, noise_sigma, dropout)


def _temporal_scene(corpus, number, seed, noise_sigma, dropout):
    rng = make_rng(seed, "temporal", number)
    count = int(rng.integers(4, 9))
    picks = rng.choice(len(corpus), count, replace=False)
    scene = place_objects([corpus[int(i)] for i in picks], derive_seed(seed, "temporal", number, "layout"))
    arrangements, matchings = [scene], []
    for rescan in make_rescans(scene, TEMPORAL_ARRANGEMENTS - 1, derive_seed(seed, "temporal", number)):
        order = rng.permutation(count)
        arrangements.append(rescan.permuted(order))
        matchings.append(sorted([int(order[j]), j] for j in range(count)))
    roles = {"target_%d" % i: i for i in range(count)}
    return _assemble("temporal_%04d" % number, "temporal", arrangements, roles, matchings, seed,
                     noise_sigma, dropout)


def _articulated_scene(corpus, number, seed, noise_sigma, dropout):
    rng = make_rng(seed, "articulated", number)
    articulated = [i for i, shape in enumerate(corpus) if shape.articulated]
    if not articulated:
        raise ConfigurationError("Articulated benchmark needs an articulated shape in the corpus")
    target = corpus[int(rng.choice(articulated))]
    others = [i for i in range(len(corpus)) if corpus[i].shape_id != target.shape_id]
    occluders = [corpus[int(i)] for i in rng.choice(others, 2, replace=False)]
    low, high = JOINT_RANGES[target.joint.kind]
    thetas = [0.0, float(rng.uniform(low, high)), float(rng.uniform(low, high)), None, None]
    scene = place_objects([target] * 3 + occluders, derive_seed(seed, "articulated", number, "layout"),
                          thetas)
    roles = {"copy_0": 0, "copy_1": 1, "copy_2": 2, "occluder_0": 3, "occluder_1": 4}
    return _assemble("articulated_%04d" % number, "articulated", [scene], roles, [], seed,
                     noise_sigma, dropout)


def _run(builder, n_scenes, threads):
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        scenes = list(pool.map(builder, range(n_scenes)))
    logger.info("Built %d benchmark scenes", len(scenes))
    return scenes


# pylint: disable=too-many-arguments
def build_spatial_benchmark(corpus: ShapeCorpus, n_scenes: int, seed: int, thresholds,
                            noise_sigma: float = DEFAULT_NOISE_SIGMA, dropout: float = DEFAULT_DROPOUT,
                            threads: int = 1) -> List[BenchmarkScene]:
    """Six-object scenes: target, identical, similar and negative sources, two occluders"""
    if len(corpus) < 3:
        raise ConfigurationError("Spatial benchmark needs at least three shapes")
    return _run(lambda n: _spatial_scene(corpus, n, seed, thresholds, noise_sigma, dropout),
                n_scenes, threads)


def build_temporal_benchmark(corpus: ShapeCorpus, n_scenes: int, seed: int,
                             noise_sigma: float = DEFAULT_NOISE_SIGMA, dropout: float = DEFAULT_DROPOUT,
                             threads: int = 1) -> List[BenchmarkScene]:
    """Four arrangements of 4 to 8 objects with ground-truth matching tables"""
    if len(corpus) < 8:
        raise ConfigurationError("Temporal benchmark needs at least eight shapes")
    return _run(lambda n: _temporal_scene(corpus, n, seed, noise_sigma, dropout), n_scenes, threads)


def build_articulation_benchmark(corpus: ShapeCorpus, n_scenes: int, seed: int,
                                 noise_sigma: float = DEFAULT_NOISE_SIGMA, dropout: float = DEFAULT_DROPOUT,
                                 threads: int = 1) -> List[BenchmarkScene]:
    """Three copies of an articulated shape at rest and two random states, plus two occluders"""
    return _run(lambda n: _articulated_scene(corpus, n, seed, noise_sigma, dropout), n_scenes, threads)


def write_benchmark(scenes: List[BenchmarkScene], directory: str) -> str:
    """Writes scenes/<id>/ files and the checksum manifest; returns the manifest path"""
    for bench in scenes:
        scene_dir = os.path.join(directory, "scenes", bench.scene_id)
        meta = {"scene_id": bench.scene_id,
                "kind": bench.kind,
                "object_count": bench.object_count,
                "roles": bench.roles,
                "matchings": bench.matchings,
                "shape_specs": bench.shape_specs,
                "arrangements": [arrangement.to_json() for arrangement in bench.arrangements]}
        write_meta(os.path.join(scene_dir, "scene.meta"), meta)
        for number, arrangement in enumerate(bench.arrangements):
            for index in range(len(arrangement)):
                flat = bench.flat_index(number, index)
                observation = bench.observations[number][index]
                write_point_rows(os.path.join(scene_dir, "obs_%d.bin" % flat),
                                 observation.points, observation.normals)
                points, normals = bench.ground_truth[number][index]
                write_point_rows(os.path.join(scene_dir, "gt_%d.bin" % flat), points, normals)
    return write_manifest(directory)


def _scene_from_json(data: dict, shapes: dict) -> Scene:
    instances = [SceneInstance(item["shape_id"], item["yaw"], np.array(item["position"]), item["theta"])
                 for item in data["instances"]]
    return Scene(instances, data["seed"], shapes, data["placement_iterations"])


def read_benchmark(directory: str, kind: str = None) -> List[BenchmarkScene]:
    """Loads every scene written by write_benchmark, sorted by scene id"""
    scenes_dir = os.path.join(directory, "scenes")
    if not os.path.isdir(scenes_dir):
        raise StorageError("Benchmark directory not found: " + scenes_dir)
    scenes, shape_cache = [], {}
    for scene_id in sorted(os.listdir(scenes_dir)):
        scene_dir = os.path.join(scenes_dir, scene_id)
        meta = read_meta(os.path.join(scene_dir, "scene.meta"))
        if kind is not None and meta["kind"] != kind:
            continue
        for shape_id, spec in meta["shape_specs"].items():
            if shape_id not in shape_cache:
                shape_cache[shape_id] = generate_shape(ShapeSpec.from_json(spec))
        shapes = {shape_id: shape_cache[shape_id] for shape_id in meta["shape_specs"]}
        arrangements = [_scene_from_json(item, shapes) for item in meta["arrangements"]]
        count = meta["object_count"]
        observations, ground_truth = [], []
        for number in range(len(arrangements)):
            captured, truth = [], []
            for index in range(count):
                flat = number * count + index
                points, normals = read_point_rows(os.path.join(scene_dir, "obs_%d.bin" % flat))
                captured.append(Observation(index, points, normals, np.ones(len(points), dtype=np.int64)))
                truth.append(read_point_rows(os.path.join(scene_dir, "gt_%d.bin" % flat)))
            observations.append(captured)
            ground_truth.append(truth)
        scenes.append(BenchmarkScene(meta["scene_id"], meta["kind"], arrangements, meta["roles"],
                                     meta["matchings"], observations, ground_truth, meta["shape_specs"]))
    logger.info("Loaded %d scenes from %s", len(scenes), directory)
    return scenes
