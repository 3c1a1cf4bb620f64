"""Evaluation protocols: joint reconstruction against independent and explicitly aligned baselines"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

from jrm_lab.align_baseline import (MatchMode, Matching, fuse_observations, match_instances,
                                    multi_start_icp)
from jrm_lab.benchmark_builder import BenchmarkScene
from jrm_lab.flow_matching import sample_joint
from jrm_lab.geom_metrics import MetricsReport, evaluate_reconstruction
from jrm_lab.jrm_denoiser import normalize_tokens
from jrm_lab.jrm_lab_config import DESCRIPTOR_DISTANCE_BINS, DESCRIPTOR_ELEVATION_BINS, MAX_GROUP_SIZE
from jrm_lab.jrm_lab_exception import InputError
from jrm_lab.rigid_transform import RigidTransform
from jrm_lab.scene_types import Observation
from jrm_lab.seeding import derive_seed
from jrm_lab.shape_corpus import descriptor_from_points

logger = logging.getLogger(__name__)

METHOD_JOINT = "jrm"
METHOD_INDEPENDENT = "fm-ind"
METHOD_ALIGN_ORACLE = "fm-align-oracle"
METHOD_ALIGN_PREDICTED = "fm-align-pred"
METHODS = (METHOD_JOINT, METHOD_INDEPENDENT, METHOD_ALIGN_ORACLE, METHOD_ALIGN_PREDICTED)

SPATIAL_CONDITIONS = ("target-only", "identical-pair", "similar-pair", "negative-pair")
TEMPORAL_CONDITIONS = ("target-only", "1-rescan", "3-rescans")
ARTICULATED_CONDITIONS = ("rest", "state-1", "state-2")

ROW_HEADER = ["config_hash", "seed", "benchmark", "matching_mode", "scene_id", "method", "condition",
              "object", "group_size", "rot_err", "trans_err", "n_wrong", "neg_ratio",
              "variant"] + MetricsReport.CSV_HEADER


def form_groups(members: Sequence[int], max_size: int = MAX_GROUP_SIZE) -> List[List[int]]:
    """Splits matched members into the fewest balanced groups of at most max_size"""
    members = list(members)
    if max_size < 1:
        raise InputError("Group size must be at least 1")
    if not members:
        return []
    count = math.ceil(len(members) / max_size)
    return [chunk.tolist() for chunk in np.array_split(np.array(members), count)]


def relative_pose(bench: BenchmarkScene, target, source) -> RigidTransform:
    """Ground-truth map from a source instance frame into a target instance frame;
    target and source are (arrangement, instance)"""
    target_yaw = bench.arrangements[target[0]].instances[target[1]].yaw
    source_yaw = bench.arrangements[source[0]].instances[source[1]].yaw
    return RigidTransform.from_yaw(target_yaw - source_yaw)


def observation_descriptor(observation: Observation) -> np.ndarray:
    """descriptor vector of a partial cloud; too few points give the zero vector"""
    try:
        return descriptor_from_points(observation.points, observation.normals).vec
    except InputError:
        return np.zeros(DESCRIPTOR_DISTANCE_BINS + DESCRIPTOR_ELEVATION_BINS)


class EvaluationRunner:
    """Runs every method and condition of a benchmark with one model"""

    def __init__(self, model, config, mode: str = None):
        self.model = model
        self.config = config
        self.mode = MatchMode(mode or config.matching_mode)
        self.model.eval()

    # reconstruction primitives

    def reconstruct(self, observations: Sequence[Observation], seed: int) -> List[np.ndarray]:
        """Joint sampling of one group; object 0 always draws the same noise for a given seed"""
        with torch.no_grad():
            conditions = [self.model.encode_condition(observation) for observation in observations]
        tokens = sample_joint(self.model, conditions, self.config.sample_steps, seed)
        return [normalize_tokens(item).cpu().numpy().astype(np.float64) for item in tokens]

    def joint(self, target: Observation, sources: Sequence[Observation], seed: int) -> np.ndarray:
        """target tokens from the group of the target and its matched sources"""
        group = form_groups(range(1 + len(sources)), self.model.config.max_k)[0]
        members = [target] + list(sources)
        return self.reconstruct([members[i] for i in group], seed)[0]

    def aligned(self, target: Observation, sources: Sequence[Observation],
                transforms: Sequence[RigidTransform], seed: int) -> np.ndarray:
        """target tokens after fusing transformed sources into the target observation"""
        return self.reconstruct([fuse_observations(target, sources, transforms)], seed)[0]

    def predicted_transforms(self, target: Observation, sources: Sequence[Observation]):
        """ICP estimates of source-to-target motion; empty clouds fall back to identity"""
        transforms = []
        for source in sources:
            if source.empty or target.empty:
                transforms.append(RigidTransform.identity())
                continue
            result = multi_start_icp(source.points, target.points, self.config.icp_yaw_starts)
            if not result.converged:
                logger.warning("ICP did not converge for observation %d", source.instance_id)
            transforms.append(result.transform)
        return transforms

    # rows

    def row(self, bench: BenchmarkScene, method: str, condition: str, obj: int, group_size: int,
            report: MetricsReport, **sweep) -> Dict[str, str]:
        """one CSV row"""
        values = {"config_hash": self.config.config_hash, "seed": str(self.config.seed),
                  "benchmark": bench.kind, "matching_mode": self.mode.value, "scene_id": bench.scene_id,
                  "method": method, "condition": condition, "object": str(obj), "group_size": str(group_size),
                  "rot_err": "", "trans_err": "", "n_wrong": "", "neg_ratio": "",
                  "variant": self.model.config.variant.value}
        values.update({key: ("%g" % value) for key, value in sweep.items()})
        values.update(dict(zip(MetricsReport.CSV_HEADER, report.to_row())))
        return values

    def score(self, bench: BenchmarkScene, tokens: np.ndarray, arrangement: int, obj: int) -> MetricsReport:
        """metrics against an instance's own dense ground truth"""
        points, normals = bench.ground_truth[arrangement][obj]
        return evaluate_reconstruction(tokens, points, normals, self.config.tau)

    # dispatch

    def evaluate(self, scenes: Sequence[BenchmarkScene], methods: Sequence[str] = METHODS) -> List[dict]:
        """rows for every scene, in scene order"""
        handlers = {"spatial": self.spatial_rows, "temporal": self.temporal_rows,
                    "articulated": self.articulated_rows}
        with ThreadPoolExecutor(max_workers=max(1, self.config.threads)) as pool:
            chunks = list(pool.map(lambda bench: handlers[bench.kind](bench, methods), scenes))
        rows = [row for chunk in chunks for row in chunk]
        logger.info("Evaluated %d scenes into %d rows", len(scenes), len(rows))
        return rows

    def spatial_sources(self, bench: BenchmarkScene, condition: str) -> List[int]:
        """instance indices used as sources under a spatial condition"""
        role = {"identical-pair": "identical", "similar-pair": "similar", "negative-pair": "negative"}
        return [] if condition == "target-only" else [bench.roles[role[condition]]]

    def spatial_rows(self, bench: BenchmarkScene, methods: Sequence[str] = METHODS) -> List[dict]:
        """target metrics for target-only and the three single-source pairings"""
        target = bench.roles["target"]
        seed = derive_seed(self.config.seed, bench.scene_id, target, "sample")
        target_obs = bench.instance_observation(0, target)
        independent = self.joint(target_obs, [], seed)
        rows = []
        for condition in SPATIAL_CONDITIONS:
            sources = self.spatial_sources(bench, condition)
            source_obs = [bench.instance_observation(0, index) for index in sources]
            oracle = [relative_pose(bench, (0, target), (0, index)) for index in sources]
            rows += self.method_rows(bench, condition, target, 0, target_obs, source_obs, oracle,
                                     independent, seed, methods)
        return rows

    def method_rows(self, bench, condition, obj, arrangement, target_obs, source_obs, oracle,
                    independent, seed, methods):
        """one row per requested method for a target and its sources"""
        # pylint: disable=too-many-arguments
        rows = []
        for method in methods:
            if method == METHOD_JOINT:
                tokens = self.joint(target_obs, source_obs, seed) if source_obs else independent
            elif method == METHOD_INDEPENDENT:
                tokens = independent
            elif method == METHOD_ALIGN_ORACLE:
                tokens = self.aligned(target_obs, source_obs, oracle, seed) if source_obs else independent
            else:
                predicted = self.predicted_transforms(target_obs, source_obs)
                tokens = self.aligned(target_obs, source_obs, predicted, seed) if source_obs else independent
            group = 1 + len(source_obs) if method == METHOD_JOINT else 1
            rows.append(self.row(bench, method, condition, obj, min(group, self.model.config.max_k),
                                 self.score(bench, tokens, arrangement, obj)))
        return rows

    def temporal_matchings(self, bench: BenchmarkScene) -> List[Matching]:
        """matching of arrangement 0 against every rescan under the configured mode"""
        matchings = []
        targets = [observation_descriptor(bench.instance_observation(0, i)) for i in range(bench.object_count)]
        for rescan in range(1, len(bench.arrangements)):
            sources = [observation_descriptor(bench.instance_observation(rescan, i))
                       for i in range(bench.object_count)]
            matchings.append(match_instances(targets, sources, self.mode, bench.matchings[rescan - 1]))
        return matchings

    def temporal_rows(self, bench: BenchmarkScene, methods: Sequence[str] = METHODS,
                      matchings: Optional[List[Matching]] = None, **sweep) -> List[dict]:
        """every arrangement-0 object as target with 0, 1 and 3 matched rescans"""
        matchings = matchings if matchings is not None else self.temporal_matchings(bench)
        conditions = {"target-only": 0, "1-rescan": 1, "3-rescans": 3}
        if sweep:
            conditions = {"3-rescans": 3}
        rows = []
        for obj in range(bench.object_count):
            seed = derive_seed(self.config.seed, bench.scene_id, obj, "sample")
            target_obs = bench.instance_observation(0, obj)
            independent = self.joint(target_obs, [], seed)
            for condition, rescans in conditions.items():
                pairs = [(rescan, matchings[rescan - 1].source_for(obj)) for rescan in range(1, rescans + 1)]
                pairs = [(rescan, source) for rescan, source in pairs if source is not None]
                source_obs = [bench.instance_observation(rescan, source) for rescan, source in pairs]
                oracle = [relative_pose(bench, (0, obj), pair) for pair in pairs]
                for row in self.method_rows(bench, condition, obj, 0, target_obs, source_obs, oracle,
                                            independent, seed, methods):
                    row.update({key: ("%g" % value) for key, value in sweep.items()})
                    rows.append(row)
        return rows

    def articulated_rows(self, bench: BenchmarkScene, methods: Sequence[str] = METHODS) -> List[dict]:
        """each copy reconstructed jointly with the other two and scored on its own geometry"""
        copies = [bench.roles["copy_%d" % index] for index in range(3)]
        rows = []
        for condition, obj in zip(ARTICULATED_CONDITIONS, copies):
            seed = derive_seed(self.config.seed, bench.scene_id, obj, "sample")
            target_obs = bench.instance_observation(0, obj)
            others = [index for index in copies if index != obj]
            source_obs = [bench.instance_observation(0, index) for index in others]
            oracle = [relative_pose(bench, (0, obj), (0, index)) for index in others]
            rows += self.method_rows(bench, condition, obj, 0, target_obs, source_obs, oracle,
                                     self.joint(target_obs, [], seed), seed, methods)
        return rows
