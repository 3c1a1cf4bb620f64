"""Robustness sweeps over alignment error, matching error, the negative-pair ratio and the coupled block variant"""
import csv
import logging
import os
from typing import Dict, List, Sequence

from jrm_lab.align_baseline import Matching, corrupt_matching, perturb_transform
from jrm_lab.benchmark_builder import BenchmarkScene
from jrm_lab.dataset_store import replace_atomically
from jrm_lab.evaluation_runner import (METHOD_ALIGN_ORACLE, METHOD_JOINT, ROW_HEADER, EvaluationRunner,
                                       relative_pose)
from jrm_lab.geom_metrics import MetricsReport
from jrm_lab.jrm_lab_exception import InputError
from jrm_lab.seeding import derive_seed

logger = logging.getLogger(__name__)

SWEEP_KINDS = ("align", "match", "negratio", "variant")
SWEEP_PARAMETERS = {"align": "rot_err", "match": "n_wrong", "negratio": "neg_ratio", "variant": "variant"}
LONG_HEADER = ["sweep", "scene_id", "method", "condition", "object", "parameter", "parameter_value",
               "metric", "value"]


def align_sweep(runner: EvaluationRunner, scenes: Sequence[BenchmarkScene]) -> List[dict]:
    """Identical-pair scenes with the oracle transform perturbed along the paired rotation/translation grid"""
    config = runner.config
    rows = []
    for bench in scenes:
        target, source = bench.roles["target"], bench.roles["identical"]
        seed = derive_seed(config.seed, bench.scene_id, target, "sample")
        target_obs = bench.instance_observation(0, target)
        source_obs = bench.instance_observation(0, source)
        oracle = relative_pose(bench, (0, target), (0, source))
        joint = runner.score(bench, runner.joint(target_obs, [source_obs], seed), 0, target)
        perturb_seed = derive_seed(config.seed, bench.scene_id, "perturb")
        for rot_err, trans_err in zip(config.align_rot_grid, config.align_trans_grid):
            transform = perturb_transform(oracle, rot_err, trans_err, perturb_seed)
            aligned = runner.score(bench, runner.aligned(target_obs, [source_obs], [transform], seed), 0, target)
            for method, report, group in ((METHOD_JOINT, joint, 2), (METHOD_ALIGN_ORACLE, aligned, 1)):
                rows.append(runner.row(bench, method, "identical-pair", target, group, report,
                                       rot_err=rot_err, trans_err=trans_err))
    logger.info("Alignment sweep produced %d rows", len(rows))
    return rows


def match_sweep(runner: EvaluationRunner, scenes: Sequence[BenchmarkScene]) -> List[dict]:
    """Three-rescan temporal groups with 0..K wrongly matched instances per rescan"""
    config = runner.config
    rows = []
    for bench in scenes:
        count = bench.object_count
        oracle = [Matching(tuple(tuple(pair) for pair in table)) for table in bench.matchings]
        for n_wrong in range(count + 1):
            try:
                matchings = [corrupt_matching(matching, n_wrong,
                                              derive_seed(config.seed, bench.scene_id, rescan, n_wrong), count)
                             for rescan, matching in enumerate(oracle, start=1)]
            except InputError as ex:
                logger.warning("Skipping %s with %d wrong matches: %s", bench.scene_id, n_wrong, ex.message)
                continue
            rows += runner.temporal_rows(bench, (METHOD_JOINT, METHOD_ALIGN_ORACLE), matchings, n_wrong=n_wrong)
    logger.info("Matching sweep produced %d rows", len(rows))
    return rows


def negratio_rows(runners: Dict[float, EvaluationRunner], scenes: Sequence[BenchmarkScene]) -> List[dict]:
    """Joint reconstruction rows of the spatial conditions for one model per negative ratio"""
    rows = []
    for ratio in sorted(runners):
        for row in runners[ratio].evaluate(scenes, (METHOD_JOINT,)):
            row["neg_ratio"] = "%g" % ratio
            rows.append(row)
    return rows


def variant_rows(runners: Dict[str, EvaluationRunner], scenes: Sequence[BenchmarkScene]) -> List[dict]:
    """Joint reconstruction rows of the spatial conditions for one model per coupled block variant"""
    rows = []
    for variant in runners:
        rows += runners[variant].evaluate(scenes, (METHOD_JOINT,))
    return rows


def write_rows(path: str, rows: Sequence[dict]):
    """fixed-header CSV"""
    lines = [",".join(ROW_HEADER)] + [",".join(row[key] for key in ROW_HEADER) for row in rows]
    replace_atomically(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_rows(path: str) -> List[dict]:
    """rows of a fixed-header CSV"""
    with open(path, "r", encoding="utf-8", newline="") as file:
        return list(csv.DictReader(file))


def write_long_format(path: str, rows: Sequence[dict], sweep: str):
    """one line per (row, metric) for plotting"""
    parameter = SWEEP_PARAMETERS[sweep]
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(LONG_HEADER)
        for row in rows:
            for metric in MetricsReport.CSV_HEADER[:3]:
                writer.writerow([sweep, row["scene_id"], row["method"], row["condition"], row["object"],
                                 parameter, row[parameter], metric, row[metric]])
