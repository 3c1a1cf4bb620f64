"""End-to-end lab command test cases"""
import csv
import os
import tempfile
from unittest import TestCase

from jrm_lab import UNITTEST_DATA_PATH, ConfigurationError, ExperimentConfig, LabManager, StorageError
from jrm_lab.cli import main
from jrm_lab.evaluation_runner import METHODS, ROW_HEADER, SPATIAL_CONDITIONS

CONFIG_FILE = UNITTEST_DATA_PATH + "tiny_lab.cfg"


def _rows(path):
    with open(path, newline="", encoding="utf-8") as file:
        return list(csv.DictReader(file))


class TestLabManager(TestCase):
    """Class for testing the lab commands on a tiny run"""

    @classmethod
    def setUpClass(cls):
        cls.directory = tempfile.TemporaryDirectory()
        cls.config = ExperimentConfig.from_file(CONFIG_FILE, out=cls.directory.name)
        cls.manager = LabManager()
        cls.manager.cmd_corpus(cls.config)
        for kind in ("spatial", "temporal", "articulated"):
            cls.manager.cmd_scenes(cls.config, kind)
        cls.manager.cmd_train(cls.config)

    @classmethod
    def tearDownClass(cls):
        cls.directory.cleanup()

    def test_singleton(self):
        """one manager instance"""
        self.assertIs(LabManager(), self.manager)

    def test_corpus_layout(self):
        """manifest lists every shape file; the held-out split comes from the meta"""
        corpus_dir = self.manager.path(self.config, "corpus")
        with open(os.path.join(corpus_dir, "manifest.txt"), encoding="utf-8") as file:
            entries = file.read().splitlines()
        self.assertEqual(len(entries), 2 * 28 + 1)
        train, held_out, thresholds = self.manager.load_corpus(self.config)
        self.assertEqual((len(train), len(held_out)), (14, 14))
        self.assertEqual(tuple(thresholds), (0.9999, 0.0))

    def test_threshold_overrides(self):
        """config thresholds skip calibration; contradictory ones are rejected"""
        train, _, _ = self.manager.load_corpus(self.config)
        result = self.manager.thresholds(self.config, train)
        self.assertEqual(result.diagnostics, {"source": "config"})
        config = self.config.with_overrides(positive_threshold=0.5, similar_threshold=0.9)
        with self.assertRaises(ConfigurationError) as cm:
            self.manager.thresholds(config, train)
        self.assertEqual(cm.exception.message, "similar_threshold cannot exceed positive_threshold")

    def test_eval_is_reproducible(self):
        """identical CSV bytes on a rerun, fixed header, every method and condition"""
        first = self.manager.cmd_eval(self.config)
        with open(first[0], "rb") as file:
            before = file.read()
        second = self.manager.cmd_eval(self.config.with_overrides(threads=2))
        with open(second[0], "rb") as file:
            self.assertEqual(file.read(), before)
        self.assertEqual([os.path.basename(path) for path in first],
                         ["eval_spatial_oracle.csv", "eval_temporal_oracle.csv", "eval_articulated_oracle.csv"])
        spatial = _rows(first[0])
        self.assertEqual(list(spatial[0].keys()), ROW_HEADER)
        self.assertEqual(len(spatial), len(METHODS) * len(SPATIAL_CONDITIONS))
        self.assertEqual({row["method"] for row in spatial}, set(METHODS))
        self.assertEqual({row["variant"] for row in spatial}, {"Replace"})
        target_only = [row for row in spatial if row["condition"] == "target-only"]
        self.assertEqual(len({row["cd"] for row in target_only}), 1)

    def test_align_sweep_leaves_joint_rows_alone(self):
        """JRM ignores the perturbed transform"""
        table, long_format = self.manager.cmd_sweep(self.config, "align")
        rows = _rows(table)
        self.assertEqual(len(rows), 4)
        joint = [row["cd"] for row in rows if row["method"] == "jrm"]
        self.assertEqual(len(set(joint)), 1)
        self.assertEqual({row["rot_err"] for row in rows}, {"0", "10"})
        self.assertEqual(len(_rows(long_format)), 12)

    def test_match_and_negratio_sweeps_and_report(self):
        """sweeps feed the report"""
        match_table, _ = self.manager.cmd_sweep(self.config, "match")
        self.assertTrue(all(row["condition"] == "3-rescans" for row in _rows(match_table)))
        self.assertNotIn("1", {row["n_wrong"] for row in _rows(match_table)})
        negratio_table, _ = self.manager.cmd_sweep(self.config, "negratio")
        self.assertEqual({row["neg_ratio"] for row in _rows(negratio_table)}, {"0", "0.5"})
        written = self.manager.cmd_report(self.config)
        self.assertTrue(written[0].endswith("report.md"))
        self.assertTrue(any(path.endswith("sweep_negratio.svg") for path in written))
        with open(written[0], encoding="utf-8") as file:
            self.assertIn("## sweep match", file.read())

    def test_variant_sweep_and_report(self):
        """one model per coupled block layout, shown side by side in the report"""
        table, long_format = self.manager.cmd_sweep(self.config, "variant")
        rows = _rows(table)
        self.assertEqual({row["variant"] for row in rows}, {"Replace", "Insert"})
        self.assertEqual({row["method"] for row in rows}, {"jrm"})
        self.assertEqual(len(rows), 2 * len(SPATIAL_CONDITIONS))
        self.assertEqual(len(_rows(long_format)), 3 * len(rows))
        for variant in ("replace", "insert"):
            self.assertTrue(os.path.isdir(self.manager.path(self.config, "sweeps", "variant", variant)))
        written = self.manager.cmd_report(self.config)
        self.assertTrue(any(path.endswith("sweep_variant.svg") for path in written))
        with open(written[0], encoding="utf-8") as file:
            report = file.read()
        self.assertIn("## sweep variant", report)
        self.assertIn("| Insert | jrm | identical-pair |", report)

    def test_unknown_kinds(self):
        """scenes and sweeps check their kind"""
        with self.assertRaises(ConfigurationError):
            self.manager.cmd_scenes(self.config, "outdoor")
        with self.assertRaises(ConfigurationError):
            self.manager.cmd_sweep(self.config, "noise")


class TestCli(TestCase):
    """Class for testing the command-line entry point"""

    def test_missing_corpus_fails(self):
        """errors become exit status 1"""
        with tempfile.TemporaryDirectory() as directory:
            with self.assertLogs("jrm_lab", level="ERROR"):
                status = main(["--config", CONFIG_FILE, "--out", directory, "scenes", "spatial"])
            self.assertEqual(status, 1)

    def test_corpus_command(self):
        """writes the corpus and exits 0"""
        with tempfile.TemporaryDirectory() as directory:
            status = main(["--config", CONFIG_FILE, "--out", directory, "--seed", "3", "corpus"])
            self.assertEqual(status, 0)
            self.assertTrue(os.path.isfile(os.path.join(directory, "corpus", "manifest.txt")))

    def test_report_without_results_fails(self):
        """nothing to report"""
        with tempfile.TemporaryDirectory() as directory:
            with self.assertLogs("jrm_lab", level="ERROR"):
                self.assertEqual(main(["--out", directory, "report"]), 1)
        with self.assertRaises(StorageError):
            LabManager.load_model(os.path.join(tempfile.gettempdir(), "jrm-no-such-run"))
