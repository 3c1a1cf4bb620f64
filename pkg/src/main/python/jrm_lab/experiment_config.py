"""Contains the ExperimentConfig class read from flat key = value files"""
import hashlib
import json
from dataclasses import dataclass, fields, replace
from typing import Optional, Tuple

from jrm_lab.jrm_lab_config import (DEFAULT_DROPOUT, DEFAULT_LEARNING_RATE, DEFAULT_NOISE_SIGMA,
                                    DEFAULT_SAMPLE_STEPS, DEFAULT_TAU, NEG_RATIO_GRID, SHAPE_POINT_COUNT)
from jrm_lab.jrm_lab_exception import ConfigurationError
from jrm_lab.model_config import ModelConfig

# keys that never change results
_UNHASHED = ("out", "threads")
MATCHING_MODES = ("oracle", "predicted")


@dataclass(frozen=True)
class ExperimentConfig:
    """Every setting of a run; together with the code version it determines all outputs"""
    # pylint: disable=too-many-instance-attributes
    seed: int = 0
    out: str = "runs/default"
    threads: int = 1
    corpus_size: int = 200
    held_out: int = 20
    shape_points: int = SHAPE_POINT_COUNT
    calibration_pairs: int = 2000
    positive_threshold: Optional[float] = None
    similar_threshold: Optional[float] = None
    n_scenes: int = 50
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    dropout: float = DEFAULT_DROPOUT
    model_depth_single: int = 6
    model_variant: str = "Replace"
    model_width: int = 128
    model_heads: int = 4
    model_token_count: int = 64
    model_cond_tokens: int = 17
    model_max_k: int = 9
    model_time_embed_dim: int = 64
    model_mlp_ratio: int = 4
    neg_ratio: float = 0.1
    train_steps: int = 20000
    batch_size: int = 8
    learning_rate: float = DEFAULT_LEARNING_RATE
    log_every: int = 50
    checkpoint_every: int = 1000
    resume: bool = False
    overfit_one_pair: bool = False
    sample_steps: int = DEFAULT_SAMPLE_STEPS
    tau: float = DEFAULT_TAU
    matching_mode: str = "oracle"
    eval_benchmarks: Tuple[str, ...] = ("spatial", "temporal", "articulated")
    icp_yaw_starts: int = 8
    align_rot_grid: Tuple[float, ...] = (0.0, 5.0, 10.0, 20.0, 30.0, 45.0)
    align_trans_grid: Tuple[float, ...] = (0.0, 0.05, 0.1, 0.15, 0.2, 0.3)
    negratio_grid: Tuple[float, ...] = NEG_RATIO_GRID

    def __post_init__(self):
        for item in fields(self):
            object.__setattr__(self, item.name, _coerce(item.name, item.type, getattr(self, item.name)))
        self.__validate()

    def __validate(self):
        positive = ("threads", "corpus_size", "shape_points", "calibration_pairs", "n_scenes", "train_steps",
                    "batch_size", "log_every", "checkpoint_every", "sample_steps", "icp_yaw_starts")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigurationError("Setting " + name + " must be at least 1")
        if not 0 <= self.held_out < self.corpus_size:
            raise ConfigurationError("Setting held_out must be smaller than corpus_size")
        if not 0.0 <= self.neg_ratio <= 1.0:
            raise ConfigurationError("Setting neg_ratio must lie in [0, 1]")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("Setting dropout must lie in [0, 1)")
        if self.noise_sigma < 0.0 or self.tau <= 0.0 or self.learning_rate < 0.0:
            raise ConfigurationError("Settings noise_sigma, tau and learning_rate must be non-negative")
        if self.matching_mode not in MATCHING_MODES:
            raise ConfigurationError("Setting matching_mode must be oracle or predicted")
        if any(kind not in ("spatial", "temporal", "articulated") for kind in self.eval_benchmarks):
            raise ConfigurationError("Setting eval_benchmarks names an unknown benchmark")
        for name in ("align_rot_grid", "align_trans_grid", "negratio_grid"):
            grid = getattr(self, name)
            if not grid or min(grid) < 0:
                raise ConfigurationError("Setting " + name + " must be a non-empty non-negative list")
        if len(self.align_rot_grid) != len(self.align_trans_grid):
            raise ConfigurationError("Alignment grids must have the same length")
        if max(self.negratio_grid) > 1.0:
            raise ConfigurationError("Setting negratio_grid must lie in [0, 1]")
        self.model_config()

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        """Parses key = value lines; values are json literals or bare strings"""
        known = {item.name for item in fields(cls)}
        values = {}
        for number, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if not sep:
                raise ConfigurationError("Line %d is not a key = value pair" % number)
            if key not in known:
                raise ConfigurationError("Unknown setting " + key)
            try:
                values[key] = json.loads(raw)
            except json.JSONDecodeError:
                values[key] = raw
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    @classmethod
    def from_file(cls, path: Optional[str], **overrides) -> "ExperimentConfig":
        """Reads a config file; a missing path means all defaults"""
        if path is None:
            return cls.from_text("", **overrides)
        try:
            with open(path, "r", encoding="utf-8") as file:
                text = file.read()
        except OSError as ex:
            raise ConfigurationError("Cannot read config file " + path) from ex
        return cls.from_text(text, **overrides)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """copy with some settings replaced"""
        return replace(self, **changes)

    def to_json(self):
        """returns the settings in json format"""
        return {item.name: (list(value) if isinstance(value, tuple) else value)
                for item in fields(self) for value in [getattr(self, item.name)]}

    def echo(self) -> str:
        """canonical key = value text of the config"""
        return "".join(key + " = " + json.dumps(value) + "\n" for key, value in self.to_json().items())

    @property
    def config_hash(self) -> str:
        """sha256 of the echo without the settings that cannot change results"""
        hashed = {key: value for key, value in self.to_json().items() if key not in _UNHASHED}
        return hashlib.sha256(json.dumps(hashed, sort_keys=True).encode("utf-8")).hexdigest()[:16]

    def model_config(self) -> ModelConfig:
        """model hyper-parameters"""
        return ModelConfig(depth_single=self.model_depth_single, variant=self.model_variant,
                           width=self.model_width, heads=self.model_heads,
                           token_count=self.model_token_count, cond_tokens=self.model_cond_tokens,
                           max_k=self.model_max_k, time_embed_dim=self.model_time_embed_dim,
                           mlp_ratio=self.model_mlp_ratio)


def _coerce(name, annotation, value):
    """Checks a value against a field annotation, widening ints to floats"""
    # pylint: disable=too-many-return-statements
    if annotation in (int, "int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError("Setting " + name + " must be an integer")
        return value
    if annotation in (float, "float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError("Setting " + name + " must be a number")
        return float(value)
    if annotation in (bool, "bool"):
        if not isinstance(value, bool):
            raise ConfigurationError("Setting " + name + " must be true or false")
        return value
    if annotation in (str, "str"):
        if not isinstance(value, str):
            raise ConfigurationError("Setting " + name + " must be a string")
        return value
    if annotation == Optional[float] or annotation == "Optional[float]":
        return None if value is None else _coerce(name, float, value)
    if not isinstance(value, (list, tuple)):
        raise ConfigurationError("Setting " + name + " must be a list")
    if name == "eval_benchmarks":
        return tuple(_coerce(name, str, item) for item in value)
    return tuple(_coerce(name, float, item) for item in value)
