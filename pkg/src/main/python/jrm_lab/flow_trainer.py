"""Training loop with loss log, periodic atomic checkpoints and resume"""
import csv
import logging
import os

import torch

from jrm_lab.checkpoint_store import checkpoint_path, latest_checkpoint, load_into, read_checkpoint, save_checkpoint
from jrm_lab.flow_matching import train_step
from jrm_lab.jrm_lab_exception import NonFiniteError
from jrm_lab.seeding import derive_seed

logger = logging.getLogger(__name__)

LOSS_HEADER = ["step", "loss"]


class FlowTrainer:
    """Runs train_step over a pair stream"""

    # pylint: disable=too-many-arguments,too-many-instance-attributes
    def __init__(self, model, stream, directory: str, seed: int, steps: int, batch_size: int = 8,
                 learning_rate: float = 1e-3, log_every: int = 50, checkpoint_every: int = 1000,
                 overfit_one_pair: bool = False, meta: dict = None):
        self.model = model
        self.stream = stream
        self.directory = directory
        self.seed = seed
        self.steps = steps
        self.batch_size = batch_size
        self.log_every = log_every
        self.checkpoint_every = checkpoint_every
        self.overfit_one_pair = overfit_one_pair
        self.meta = dict(meta or {})
        self.meta.setdefault("neg_ratio", stream.neg_ratio)
        self.optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate)
        self.__fixed_batch = None
        self.losses = []

    @property
    def loss_log_path(self) -> str:
        """machine-readable loss log"""
        return os.path.join(self.directory, "loss.csv")

    def batch(self, step: int):
        """pairs of one step"""
        if self.overfit_one_pair:
            if self.__fixed_batch is None:
                self.__fixed_batch = [self.stream.draw(0)] * self.batch_size
            return self.__fixed_batch
        return [self.stream.draw(step * self.batch_size + j) for j in range(self.batch_size)]

    def resume(self) -> int:
        """Loads the latest checkpoint; returns its step (0 when there is none)"""
        path = latest_checkpoint(self.directory)
        if path is None:
            return 0
        checkpoint = read_checkpoint(path)
        load_into(checkpoint, self.model, self.optimizer)
        logger.info("Resumed from %s at step %d", path, checkpoint.step)
        return checkpoint.step

    def __rewrite_log(self, start: int):
        rows = []
        if start and os.path.exists(self.loss_log_path):
            with open(self.loss_log_path, "r", encoding="utf-8", newline="") as file:
                rows = [row for row in csv.DictReader(file) if int(row["step"]) <= start]
        with open(self.loss_log_path, "w", encoding="utf-8", newline="") as file:
            writer = csv.DictWriter(file, fieldnames=LOSS_HEADER)
            writer.writeheader()
            writer.writerows(rows)

    def __log(self, step: int, loss: float):
        with open(self.loss_log_path, "a", encoding="utf-8", newline="") as file:
            csv.writer(file).writerow([step, repr(loss)])

    def save(self, step: int) -> str:
        """Writes the checkpoint after step"""
        path = checkpoint_path(self.directory, step)
        save_checkpoint(path, self.model, self.optimizer, step, self.meta)
        logger.info("Checkpoint written to %s", path)
        return path

    def train(self, resume: bool = False) -> list:
        """Runs to the configured step count; returns the losses of this call"""
        os.makedirs(self.directory, exist_ok=True)
        start = self.resume() if resume else 0
        self.__rewrite_log(start)
        self.losses = []
        for step in range(start, self.steps):
            try:
                _, loss = train_step(self.model, self.batch(step), self.optimizer,
                                     derive_seed(self.seed, "train", step))
            except NonFiniteError as ex:
                logger.error("Training aborted at step %d: %s; last checkpoint kept", step + 1, ex.message)
                raise
            self.losses.append(loss)
            done = step + 1
            if done % self.log_every == 0 or done == 1:
                self.__log(done, loss)
            if done % self.checkpoint_every == 0 or done == self.steps:
                self.save(done)
        logger.info("Training finished after %d steps; pair mix %s", self.steps, self.stream.counts)
        return self.losses
