"""Lab manager module"""
import logging
import os
from typing import Dict, List

import torch

from jrm_lab.benchmark_builder import (BENCHMARK_KINDS, build_articulation_benchmark, build_spatial_benchmark,
                                       build_temporal_benchmark, read_benchmark, write_benchmark)
from jrm_lab.checkpoint_store import latest_checkpoint, load_into, read_checkpoint
from jrm_lab.dataset_store import read_meta, write_manifest, write_meta
from jrm_lab.evaluation_runner import EvaluationRunner
from jrm_lab.experiment_config import ExperimentConfig
from jrm_lab.flow_trainer import FlowTrainer
from jrm_lab.jrm_denoiser import JrmDenoiser, init_params
from jrm_lab.jrm_lab_exception import ConfigurationError, StorageError
from jrm_lab.model_config import CoupledVariant, ModelConfig
from jrm_lab.pair_sampler import CalibrationResult, PairStream, calibrate_thresholds
from jrm_lab.report_writer import ReportWriter
from jrm_lab.seeding import derive_seed
from jrm_lab.shape_corpus import ShapeCorpus
from jrm_lab.shape_spec import ShapeSpec
from jrm_lab.sweep_runner import (SWEEP_KINDS, align_sweep, match_sweep, negratio_rows, read_rows,
                                  variant_rows, write_long_format, write_rows)

logger = logging.getLogger(__name__)


class LabManager:
    """Class providing one method per command of the lab"""
    # Applied Singleton pattern to LabManager
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(LabManager, cls).__new__(cls)
        return cls._instance

    def __init__(self):
        pass

    # output layout

    @staticmethod
    def path(config: ExperimentConfig, *parts) -> str:
        """path below the run's output directory"""
        return os.path.join(config.out, *parts)

    @staticmethod
    def _prepare(config: ExperimentConfig):
        # fixed intra-op threads keep float reductions identical whatever --threads says
        torch.set_num_threads(1)
        os.makedirs(config.out, exist_ok=True)

    # corpus

    @staticmethod
    def thresholds(config: ExperimentConfig, corpus: ShapeCorpus) -> CalibrationResult:
        """calibrated thresholds, with config overrides taking precedence"""
        positive, similar = config.positive_threshold, config.similar_threshold
        diagnostics = {"source": "config"}
        if positive is None or similar is None:
            calibrated = calibrate_thresholds(corpus, config.calibration_pairs, config.seed)
            positive = calibrated.positive_threshold if positive is None else positive
            similar = calibrated.similar_threshold if similar is None else similar
            diagnostics = calibrated.diagnostics
        if similar > positive:
            raise ConfigurationError("similar_threshold cannot exceed positive_threshold")
        return CalibrationResult(positive, similar, diagnostics)

    def cmd_corpus(self, config: ExperimentConfig) -> str:
        """Generates, calibrates and exports the shape corpus; returns the manifest path"""
        self._prepare(config)
        corpus = ShapeCorpus.generate(config.corpus_size, derive_seed(config.seed, "corpus"), config.shape_points)
        thresholds = self.thresholds(config, corpus)
        directory = self.path(config, "corpus")
        corpus.export(os.path.join(directory, "shapes"))
        write_meta(os.path.join(directory, "corpus.meta"),
                   {"config_hash": config.config_hash,
                    "seed": config.seed,
                    "held_out": config.held_out,
                    "thresholds": thresholds.to_json(),
                    "specs": [shape.spec.to_json() for shape in corpus]})
        logger.info("Corpus of %d shapes written to %s", len(corpus), directory)
        return write_manifest(directory)

    def load_corpus(self, config: ExperimentConfig):
        """(training corpus, held-out corpus, thresholds) from the exported corpus"""
        meta_path = self.path(config, "corpus", "corpus.meta")
        if not os.path.exists(meta_path):
            raise StorageError("Corpus not found at " + meta_path + "; run the corpus command first")
        meta = read_meta(meta_path)
        corpus = ShapeCorpus.from_specs([ShapeSpec.from_json(spec) for spec in meta["specs"]], config.shape_points)
        train, held_out = corpus.split(meta["held_out"])
        thresholds = CalibrationResult(meta["thresholds"]["positive_threshold"],
                                       meta["thresholds"]["similar_threshold"])
        return train, held_out, thresholds

    # benchmarks

    def cmd_scenes(self, config: ExperimentConfig, kind: str) -> str:
        """Builds one benchmark from the held-out shapes; returns the manifest path"""
        if kind not in BENCHMARK_KINDS:
            raise ConfigurationError("Unknown benchmark kind " + kind)
        self._prepare(config)
        _, held_out, thresholds = self.load_corpus(config)
        seed = derive_seed(config.seed, "benchmark", kind)
        options = {"noise_sigma": config.noise_sigma, "dropout": config.dropout, "threads": config.threads}
        if kind == "spatial":
            scenes = build_spatial_benchmark(held_out, config.n_scenes, seed, thresholds, **options)
        elif kind == "temporal":
            scenes = build_temporal_benchmark(held_out, config.n_scenes, seed, **options)
        else:
            scenes = build_articulation_benchmark(held_out, config.n_scenes, seed, **options)
        return write_benchmark(scenes, self.path(config, "benchmarks", kind))

    def load_benchmark(self, config: ExperimentConfig, kind: str):
        """scenes of a written benchmark"""
        return read_benchmark(self.path(config, "benchmarks", kind), kind)

    # training

    def train_into(self, config: ExperimentConfig, directory: str) -> str:
        """Trains a model into directory; returns the last checkpoint path"""
        train, _, thresholds = self.load_corpus(config)
        model_config = config.model_config()
        stream = PairStream(train, config.neg_ratio, derive_seed(config.seed, "pairs"),
                            thresholds.positive_threshold, model_config.token_count,
                            config.noise_sigma, config.dropout)
        model = init_params(model_config, derive_seed(config.seed, "init"))
        meta = {"config_hash": config.config_hash, "seed": config.seed, "neg_ratio": config.neg_ratio,
                "config": config.to_json()}
        trainer = FlowTrainer(model, stream, directory, config.seed, config.train_steps, config.batch_size,
                              config.learning_rate, config.log_every, config.checkpoint_every,
                              config.overfit_one_pair, meta)
        trainer.train(resume=config.resume)
        return latest_checkpoint(directory)

    def cmd_train(self, config: ExperimentConfig) -> str:
        """Trains the main model under out/train"""
        self._prepare(config)
        return self.train_into(config, self.path(config, "train"))

    @staticmethod
    def load_model(directory: str) -> JrmDenoiser:
        """model restored from the latest checkpoint of a directory"""
        path = latest_checkpoint(directory)
        if path is None:
            raise StorageError("No checkpoint found in " + directory)
        checkpoint = read_checkpoint(path)
        model = JrmDenoiser(ModelConfig.from_json(checkpoint.meta["model_config"]))
        load_into(checkpoint, model)
        return model

    # evaluation

    def cmd_eval(self, config: ExperimentConfig) -> List[str]:
        """Evaluates every configured benchmark; returns the CSV paths"""
        self._prepare(config)
        runner = EvaluationRunner(self.load_model(self.path(config, "train")), config)
        written = []
        for kind in config.eval_benchmarks:
            rows = runner.evaluate(self.load_benchmark(config, kind))
            path = self.path(config, "eval", "eval_%s_%s.csv" % (kind, config.matching_mode))
            write_rows(path, rows)
            written.append(path)
        return written

    def sweep_runner(self, config: ExperimentConfig, kind: str, name: str, **changes) -> EvaluationRunner:
        """Runner over the model trained with some settings changed, reusing an existing checkpoint"""
        directory = self.path(config, "sweeps", kind, name)
        if latest_checkpoint(directory) is None:
            logger.info("Training the %s sweep model %s", kind, name)
            self.train_into(config.with_overrides(**changes), directory)
        return EvaluationRunner(self.load_model(directory), config)

    def cmd_sweep(self, config: ExperimentConfig, kind: str) -> List[str]:
        """Runs one robustness sweep; returns the table and long-format paths"""
        if kind not in SWEEP_KINDS:
            raise ConfigurationError("Unknown sweep kind " + kind)
        self._prepare(config)
        if kind == "negratio":
            runners = {ratio: self.sweep_runner(config, "negratio", "ratio_%g" % ratio, neg_ratio=ratio)
                       for ratio in config.negratio_grid}
            rows = negratio_rows(runners, self.load_benchmark(config, "spatial"))
        elif kind == "variant":
            runners = {variant.value: self.sweep_runner(config, "variant", variant.value.lower(),
                                                        model_variant=variant.value)
                       for variant in CoupledVariant}
            rows = variant_rows(runners, self.load_benchmark(config, "spatial"))
        else:
            runner = EvaluationRunner(self.load_model(self.path(config, "train")), config, "oracle")
            if kind == "align":
                rows = align_sweep(runner, self.load_benchmark(config, "spatial"))
            else:
                rows = match_sweep(runner, self.load_benchmark(config, "temporal"))
        table = self.path(config, "sweeps", "sweep_%s.csv" % kind)
        long_format = self.path(config, "sweeps", "sweep_%s_long.csv" % kind)
        write_rows(table, rows)
        write_long_format(long_format, rows, kind)
        return [table, long_format]

    def cmd_report(self, config: ExperimentConfig) -> List[str]:
        """Aggregates the available CSVs into report.md and SVG plots"""
        self._prepare(config)
        eval_rows: Dict[str, list] = {}
        eval_dir = self.path(config, "eval")
        if os.path.isdir(eval_dir):
            for name in sorted(os.listdir(eval_dir)):
                if name.endswith(".csv"):
                    eval_rows[name[:-4]] = read_rows(os.path.join(eval_dir, name))
        sweep_rows = {}
        for kind in SWEEP_KINDS:
            path = self.path(config, "sweeps", "sweep_%s.csv" % kind)
            if os.path.exists(path):
                sweep_rows[kind] = read_rows(path)
        if not eval_rows and not sweep_rows:
            raise StorageError("Nothing to report under " + config.out)
        return ReportWriter(self.path(config, "report")).write(eval_rows, sweep_rows)
