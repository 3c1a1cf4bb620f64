"""Markdown summary tables and SVG sweep plots aggregated from the CSV outputs"""
import logging
import os
from collections import OrderedDict
from typing import Dict, List, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # pylint: disable=wrong-import-position
import numpy as np

from jrm_lab.evaluation_runner import (ARTICULATED_CONDITIONS, METHODS, METHOD_ALIGN_ORACLE, METHOD_JOINT,
                                       SPATIAL_CONDITIONS, TEMPORAL_CONDITIONS)

logger = logging.getLogger(__name__)

METRICS = ("cd", "nc", "f1")
BENCHMARK_CONDITIONS = OrderedDict([("temporal", TEMPORAL_CONDITIONS),
                                    ("spatial", SPATIAL_CONDITIONS),
                                    ("articulated", ARTICULATED_CONDITIONS)])
MISSING = "missing"


def scene_mean_sem(rows: Sequence[dict], metric: str):
    """(mean, standard error, scene count) over per-scene means"""
    per_scene: Dict[str, List[float]] = OrderedDict()
    for row in rows:
        per_scene.setdefault(row["scene_id"], []).append(float(row[metric]))
    means = np.array([np.mean(values) for values in per_scene.values()])
    if len(means) == 0:
        return None
    sem = float(np.std(means, ddof=1) / np.sqrt(len(means))) if len(means) > 1 else 0.0
    return float(np.mean(means)), sem, len(means)


def format_cell(stats) -> str:
    """'mean ± sem' or the missing flag"""
    if stats is None:
        return MISSING
    return "%.3f ± %.3f" % (stats[0], stats[1])


def _ordered(values) -> List[str]:
    """numeric parameter values in numeric order, labels alphabetically"""
    values = set(values)
    try:
        return sorted(values, key=float)
    except ValueError:
        return sorted(values)


def _select(rows, **criteria):
    return [row for row in rows if all(row[key] == value for key, value in criteria.items())]


def _table(header: Sequence[str], lines: Sequence[Sequence[str]]) -> List[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    return out + ["| " + " | ".join(line) + " |" for line in lines]


class ReportWriter:
    """Collects rows and renders the summary"""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.missing = []

    def __cells(self, rows, label, **criteria):
        selected = _select(rows, **criteria)
        if not selected:
            self.missing.append(label)
            logger.warning("No rows for %s", label)
        return [format_cell(scene_mean_sem(selected, metric) if selected else None) for metric in METRICS]

    def benchmark_table(self, kind: str, rows: Sequence[dict]) -> List[str]:
        """method x condition grid of one benchmark"""
        lines = []
        for method in METHODS:
            for condition in BENCHMARK_CONDITIONS[kind]:
                label = "%s/%s/%s" % (kind, method, condition)
                lines.append([method, condition] + self.__cells(rows, label, method=method, condition=condition))
        return _table(["method", "condition", "CD", "NC", "F1"], lines)

    def sweep_table(self, sweep: str, rows: Sequence[dict], parameter: str, methods: Sequence[str],
                    conditions: Sequence[str]) -> List[str]:
        """parameter value x method (x condition) grid of one sweep"""
        values = _ordered(row[parameter] for row in rows)
        lines = []
        for value in values:
            for method in methods:
                for condition in conditions:
                    label = "%s/%s=%s/%s/%s" % (sweep, parameter, value, method, condition)
                    lines.append([value, method, condition]
                                 + self.__cells(rows, label, method=method, condition=condition,
                                                **{parameter: value}))
        return _table([parameter, "method", "condition", "CD", "NC", "F1"], lines)

    def plot(self, path: str, rows: Sequence[dict], parameter: str, series: str, title: str) -> str:
        """mean CD per series against the swept parameter, as SVG; label parameters get one tick each"""
        plt.rcParams["svg.hashsalt"] = "jrm-lab"
        figure, axes = plt.subplots(figsize=(5, 3.5))
        values = _ordered(row[parameter] for row in rows)
        try:
            position = {value: float(value) for value in values}
        except ValueError:
            position = {value: float(index) for index, value in enumerate(values)}
            axes.set_xticks(list(position.values()))
            axes.set_xticklabels(values)
        for name in sorted({row[series] for row in rows}):
            selected = _select(rows, **{series: name})
            xs = _ordered(row[parameter] for row in selected)
            ys = [scene_mean_sem(_select(selected, **{parameter: x}), "cd")[0] for x in xs]
            axes.plot([position[x] for x in xs], ys, marker="o", label=name)
        axes.set_xlabel(parameter)
        axes.set_ylabel("CD (x100)")
        axes.set_title(title)
        axes.legend()
        figure.tight_layout()
        figure.savefig(path, format="svg", metadata={"Date": None})
        plt.close(figure)
        return path

    def write(self, eval_rows: Dict[str, List[dict]], sweep_rows: Dict[str, List[dict]]) -> List[str]:
        """report.md plus one SVG per available sweep; returns written paths"""
        os.makedirs(self.out_dir, exist_ok=True)
        self.missing = []
        lines = ["# Joint reconstruction report", ""]
        written = []
        for name in sorted(eval_rows):
            kind = eval_rows[name][0]["benchmark"] if eval_rows[name] else name.split("_")[1]
            lines += ["## " + name, ""] + self.benchmark_table(kind, eval_rows[name]) + [""]
        specs = {"align": ("rot_err", (METHOD_JOINT, METHOD_ALIGN_ORACLE), ("identical-pair",), "method"),
                 "match": ("n_wrong", (METHOD_JOINT, METHOD_ALIGN_ORACLE), ("3-rescans",), "method"),
                 "negratio": ("neg_ratio", (METHOD_JOINT,), SPATIAL_CONDITIONS, "condition"),
                 "variant": ("variant", (METHOD_JOINT,), SPATIAL_CONDITIONS, "condition")}
        for sweep in ("align", "match", "negratio", "variant"):
            rows = sweep_rows.get(sweep)
            if not rows:
                continue
            parameter, methods, conditions, series = specs[sweep]
            lines += ["## sweep " + sweep, ""] + self.sweep_table(sweep, rows, parameter, methods, conditions)
            lines.append("")
            written.append(self.plot(os.path.join(self.out_dir, "sweep_%s.svg" % sweep), rows, parameter,
                                     series, "sweep " + sweep))
        if self.missing:
            lines += ["## missing cells", ""] + ["- " + label for label in self.missing] + [""]
        report_path = os.path.join(self.out_dir, "report.md")
        with open(report_path, "w", encoding="utf-8") as file:
            file.write("\n".join(lines))
        logger.info("Report written to %s", report_path)
        return [report_path] + written
