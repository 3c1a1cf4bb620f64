"""Command-line entry point of the joint reconstruction lab"""
import argparse
import logging
import sys

from jrm_lab.benchmark_builder import BENCHMARK_KINDS
from jrm_lab.experiment_config import ExperimentConfig
from jrm_lab.jrm_lab_exception import JrmLabException
from jrm_lab.lab_manager import LabManager
from jrm_lab.sweep_runner import SWEEP_KINDS

logger = logging.getLogger("jrm_lab")


def build_parser() -> argparse.ArgumentParser:
    """argument parser with one subcommand per lab command"""
    parser = argparse.ArgumentParser(prog="jrm-lab", description="Joint reconstruction lab")
    parser.add_argument("--config", default=None, help="flat key = value config file")
    parser.add_argument("--seed", type=int, default=None, help="root seed (u64)")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="scene-level worker threads")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("corpus", help="generate and export the shape corpus")
    scenes = commands.add_parser("scenes", help="build a benchmark")
    scenes.add_argument("kind", choices=BENCHMARK_KINDS)
    commands.add_parser("train", help="train the joint denoiser")
    commands.add_parser("eval", help="evaluate methods on the benchmarks")
    sweep = commands.add_parser("sweep", help="run a robustness sweep")
    sweep.add_argument("kind", choices=SWEEP_KINDS)
    commands.add_parser("report", help="aggregate CSVs into report.md and plots")
    return parser


def main(argv=None) -> int:
    """Parses arguments, runs one command and returns the exit status"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    manager = LabManager()
    try:
        config = ExperimentConfig.from_file(args.config, seed=args.seed, out=args.out, threads=args.threads)
        if args.command == "scenes":
            result = manager.cmd_scenes(config, args.kind)
        elif args.command == "sweep":
            result = manager.cmd_sweep(config, args.kind)
        else:
            result = getattr(manager, "cmd_" + args.command)(config)
    except JrmLabException as ex:
        logger.error("%s failed: %s", args.command, ex.message)
        return 1
    for path in result if isinstance(result, list) else [result]:
        logger.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
