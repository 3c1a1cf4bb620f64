"""Experiment configuration test cases"""
import csv
import os
import tempfile
from unittest import TestCase

from jrm_lab import UNITTEST_DATA_PATH, ConfigurationError, CoupledVariant, ExperimentConfig


class TestExperimentConfig(TestCase):
    """Class for testing config parsing, overrides and hashing"""

    def test_parametrized_config_cases(self):
        """Parametrized cases read from config_cases.csv"""
        with open(UNITTEST_DATA_PATH + "config_cases.csv", newline="", encoding="utf-8") as csvfile:
            for row in csv.DictReader(csvfile, delimiter=";"):
                test_id, valid = row["ID_TEST"], row["VALID"]
                with self.subTest(test_id + valid):
                    if valid == "VALID":
                        config = ExperimentConfig.from_text(row["text"])
                        key = row["text"].split("=")[0].strip()
                        self.assertEqual(str(getattr(config, key)), row["RESULT"])
                    else:
                        with self.assertRaises(ConfigurationError) as cm:
                            ExperimentConfig.from_text(row["text"])
                        self.assertEqual(cm.exception.message, row["RESULT"])

    def test_comments_and_overrides(self):
        """comments are skipped, overrides win and None overrides are ignored"""
        text = "# small run\n\nseed = 3\nneg_ratio = 0.5\nalign_rot_grid = [0, 10]\nalign_trans_grid = [0, 0.1]\n"
        config = ExperimentConfig.from_text(text, seed=9, neg_ratio=None)
        self.assertEqual(config.seed, 9)
        self.assertEqual(config.neg_ratio, 0.5)
        self.assertEqual(config.align_rot_grid, (0.0, 10.0))

    def test_echo_round_trip(self):
        """the echo parses back to the same config"""
        config = ExperimentConfig(seed=4, positive_threshold=0.97, similar_threshold=0.9, resume=True)
        self.assertEqual(ExperimentConfig.from_text(config.echo()), config)

    def test_hash_ignores_output_settings(self):
        """out and threads never change the hash"""
        config = ExperimentConfig()
        self.assertEqual(config.config_hash, config.with_overrides(out="elsewhere", threads=8).config_hash)
        self.assertNotEqual(config.config_hash, config.with_overrides(seed=1).config_hash)
        self.assertEqual(len(config.config_hash), 16)

    def test_from_file(self):
        """files, missing files and defaults"""
        self.assertEqual(ExperimentConfig.from_file(None), ExperimentConfig())
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "run.cfg")
            with open(path, "w", encoding="utf-8") as file:
                file.write("train_steps = 12\nmodel_variant = Insert\n")
            config = ExperimentConfig.from_file(path, seed=2)
            self.assertEqual((config.train_steps, config.seed), (12, 2))
            self.assertIs(config.model_config().variant, CoupledVariant.INSERT)
            with self.assertRaises(ConfigurationError):
                ExperimentConfig.from_file(os.path.join(directory, "missing.cfg"))

    def test_numbers_are_widened(self):
        """integers are accepted for float settings"""
        config = ExperimentConfig.from_text("learning_rate = 1\n")
        self.assertIsInstance(config.learning_rate, float)
        with self.assertRaises(ConfigurationError):
            ExperimentConfig.from_text("learning_rate = fast\n")
