"""Checkpoint storage and training loop test cases"""
import csv
import os
import tempfile
from unittest import TestCase

import torch
from freezegun import freeze_time

from jrm_lab import (FlowTrainer,
                     ModelConfig,
                     PairStream,
                     ShapeCorpus,
                     StorageError,
                     init_params,
                     load_into,
                     read_checkpoint,
                     save_checkpoint)
from jrm_lab.checkpoint_store import MAGIC, checkpoint_path, latest_checkpoint

TINY = ModelConfig(depth_single=2, width=32, heads=2, token_count=8, cond_tokens=5, time_embed_dim=16)


def _stream():
    corpus = ShapeCorpus.generate(7, 5, point_count=256)
    return PairStream(corpus, 0.5, 3, 0.999999, token_count=8)


class TestCheckpointStore(TestCase):
    """Class for testing the binary checkpoint format"""

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.model = init_params(TINY, 1)
        with torch.no_grad():
            for param in self.model.parameters():
                param.add_(0.01)

    def tearDown(self):
        self.directory.cleanup()

    @freeze_time("2026-03-04 05:06:07")
    def test_round_trip(self):
        """parameters and meta come back unchanged"""
        path = checkpoint_path(self.directory.name, 3)
        save_checkpoint(path, self.model, None, 3, {"seed": 11})
        checkpoint = read_checkpoint(path)
        self.assertEqual(os.path.basename(path), "checkpoint_00000003.ckpt")
        self.assertEqual(checkpoint.step, 3)
        self.assertEqual(checkpoint.meta["seed"], 11)
        self.assertEqual(checkpoint.meta["created_utc"], "2026-03-04T05:06:07+00:00")
        self.assertEqual(checkpoint.meta["model_config"], TINY.to_json())
        self.assertEqual(len(checkpoint.params), TINY.parameter_count())
        self.assertEqual(len(checkpoint.moments), 0)
        restored = init_params(TINY, 2)
        load_into(checkpoint, restored)
        for first, second in zip(self.model.parameters(), restored.parameters()):
            self.assertTrue(torch.equal(first, second))

    def test_adam_moments_are_stored(self):
        """two moments per parameter once the optimiser has stepped"""
        optimizer = torch.optim.Adam(self.model.parameters(), lr=1e-3)
        sum(p.sum() for p in self.model.parameters()).backward()
        optimizer.step()
        path = checkpoint_path(self.directory.name, 1)
        save_checkpoint(path, self.model, optimizer, 1, {})
        checkpoint = read_checkpoint(path)
        self.assertEqual(checkpoint.meta["optimizer_step"], 1)
        self.assertEqual(len(checkpoint.moments), 2 * TINY.parameter_count())

    def test_rejects_bad_files(self):
        """magic, trailing bytes and layout are checked"""
        path = checkpoint_path(self.directory.name, 1)
        save_checkpoint(path, self.model, None, 1, {})
        with open(path, "rb") as file:
            payload = file.read()
        self.assertEqual(payload[:8], MAGIC)
        cases = {"magic": b"XXXXXXXX" + payload[8:], "trailing": payload + b"\x00"}
        for name, content in cases.items():
            with self.subTest(name):
                broken = os.path.join(self.directory.name, name + ".ckpt")
                with open(broken, "wb") as file:
                    file.write(content)
                with self.assertRaises(StorageError):
                    read_checkpoint(broken)
        with self.assertRaises(StorageError):
            load_into(read_checkpoint(path), init_params(ModelConfig(depth_single=2, width=32, heads=2), 0))
        with self.assertRaises(StorageError):
            read_checkpoint(os.path.join(self.directory.name, "missing.ckpt"))

    def test_latest_checkpoint(self):
        """highest step wins, other files are ignored"""
        self.assertIsNone(latest_checkpoint(os.path.join(self.directory.name, "nowhere")))
        for step in (2, 10, 4):
            save_checkpoint(checkpoint_path(self.directory.name, step), self.model, None, step, {})
        with open(os.path.join(self.directory.name, "checkpoint_latest.ckpt"), "wb") as file:
            file.write(b"")
        self.assertEqual(latest_checkpoint(self.directory.name), checkpoint_path(self.directory.name, 10))


class TestFlowTrainer(TestCase):
    """Class for testing the training loop"""

    def setUp(self):
        torch.set_num_threads(1)
        self.directory = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.directory.cleanup()

    def _trainer(self, name, steps):
        return FlowTrainer(init_params(TINY, 6), _stream(), os.path.join(self.directory.name, name), 9, steps,
                           batch_size=2, log_every=1, checkpoint_every=2)

    def test_resume_matches_uninterrupted_run(self):
        """stopping at a checkpoint and resuming reproduces the same weights and loss log"""
        straight = self._trainer("straight", 4)
        straight_losses = straight.train()
        interrupted = self._trainer("resumed", 2)
        first_losses = interrupted.train()
        resumed = self._trainer("resumed", 4)
        rest = resumed.train(resume=True)
        self.assertEqual(len(rest), 2)
        self.assertEqual(first_losses + rest, straight_losses)
        for first, second in zip(straight.model.parameters(), resumed.model.parameters()):
            self.assertTrue(torch.equal(first, second))
        with open(resumed.loss_log_path, newline="", encoding="utf-8") as file:
            steps = [int(row["step"]) for row in csv.DictReader(file)]
        self.assertEqual(steps, [1, 2, 3, 4])
        self.assertEqual(read_checkpoint(latest_checkpoint(resumed.directory)).step, 4)

    def test_overfit_one_pair_reuses_the_batch(self):
        """the fixed batch is drawn once"""
        trainer = FlowTrainer(init_params(TINY, 6), _stream(), self.directory.name, 1, 3, batch_size=2,
                              overfit_one_pair=True)
        self.assertIs(trainer.batch(0), trainer.batch(5))
        losses = trainer.train()
        self.assertEqual(len(losses), 3)
        self.assertEqual(trainer.stream.counts["negative"] + trainer.stream.counts["identical_positive"]
                         + trainer.stream.counts["distinct_positive"], 1)
