"""
Adversarial training of the generator, and evaluation-stream emission.

One training *step* is one round of mini-batch updates: the adversary takes
``adversary_updates_per_generator_update`` Adam updates, then the generator
takes one.  The "epochs" of the original experiments are steps in this sense
(200,000 rounds of 2,048-sample mini-batches).

Two modes:

discriminative
    The discriminator sees half generated, half reference sequences labelled
    0 and 1 and minimises least-squares loss.  The generator minimises the
    least-squares distance of ``D(G(x))`` from 1.
predictive
    The predictor sees the first 7 values of each generated sequence and
    minimises the absolute difference to the 8th (in normalised space).  The
    generator minimises the negated predictor loss.  By default the difference
    is measured around the circle of residues mod ``2**16`` (``0`` and
    ``65535`` are neighbours); ``predictive_distance="linear"`` uses the plain
    ``|p - t|``, whose best generator response is to pin the 8th value at
    either end of the range.

In both cases the adversary's parameters are frozen during the generator
update, but gradients still flow through its computation.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from . import models
from . import nncore as nn
from .errors import NumericalAbort, RejectedInputError, SourceUnavailableError
from .models import INPUT_SCALE, SEQUENCE_LENGTH, WORD_RANGE

MODES = ("discriminative", "predictive")
DISTANCES = ("circular", "linear")
REFERENCE_SOURCES = ("seeded-internal", "os-entropy")
CSV_HEADER = ("step", "generator_loss", "adversary_loss")


@dataclass
class TrainConfig:
    mode: str = "predictive"
    steps: int = 5000
    batch_size: int = 256
    learning_rate: float = 0.02
    adversary_updates_per_generator_update: int = 3
    rng_seed: int = 0
    reference_source: str = "seeded-internal"
    predictive_distance: str = "circular"
    output_gain: float = models.DEFAULT_OUTPUT_GAIN
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None
    dump_dir: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise RejectedInputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.reference_source not in REFERENCE_SOURCES:
            raise RejectedInputError(
                f"reference_source must be one of {REFERENCE_SOURCES}, got {self.reference_source!r}"
            )
        if self.predictive_distance not in DISTANCES:
            raise RejectedInputError(
                f"predictive_distance must be one of {DISTANCES}, got {self.predictive_distance!r}"
            )
        if not self.output_gain > 0:
            raise RejectedInputError("output_gain must be positive")
        for name in ("steps", "batch_size", "adversary_updates_per_generator_update"):
            if int(getattr(self, name)) < 1:
                raise RejectedInputError(f"{name} must be a positive integer")
        if self.checkpoint_every < 0:
            raise RejectedInputError("checkpoint_every must be non-negative")
        if not self.learning_rate > 0:
            raise RejectedInputError("learning_rate must be positive")
        if self.mode == "discriminative" and self.batch_size < 2:
            raise RejectedInputError("discriminative mode needs batch_size >= 2")

    @property
    def ratio(self) -> int:
        return self.adversary_updates_per_generator_update

    @classmethod
    def full_scale(cls, mode: str = "predictive", **overrides) -> "TrainConfig":
        """The full-scale schedule: 200,000 steps of 2,048 samples."""
        base = dict(mode=mode, steps=200_000, batch_size=2048, learning_rate=0.02,
                    adversary_updates_per_generator_update=3)
        return cls(**{**base, **overrides})

    @classmethod
    def desk(cls, mode: str = "predictive", **overrides) -> "TrainConfig":
        """A laptop-sized schedule: 5,000 steps of 256 samples."""
        base = dict(mode=mode, steps=5000, batch_size=256, learning_rate=0.02,
                    adversary_updates_per_generator_update=3)
        return cls(**{**base, **overrides})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainLog:
    """One ``(step, generator_loss, adversary_loss)`` record per generator update.

    For predictive runs the adversary loss is the predictor's loss on the
    generator's batch, so ``generator_loss == -adversary_loss`` exactly.  For
    discriminative runs it is the discriminator's loss on its last update of
    the step.
    """

    steps: list = field(default_factory=list)
    generator_loss: list = field(default_factory=list)
    adversary_loss: list = field(default_factory=list)
    generator_updates: int = 0
    adversary_updates: int = 0

    def record(self, step: int, gen_loss: float, adv_loss: float) -> None:
        self.steps.append(step)
        self.generator_loss.append(gen_loss)
        self.adversary_loss.append(adv_loss)

    def __len__(self):
        return len(self.steps)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in zip(self.steps, self.generator_loss, self.adversary_loss):
                writer.writerow((row[0], repr(row[1]), repr(row[2])))

    @classmethod
    def from_csv(cls, path) -> "TrainLog":
        log = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != CSV_HEADER:
                raise RejectedInputError(f"unexpected loss log header {header}")
            for step, g, a in reader:
                log.record(int(step), float(g), float(a))
        return log


@dataclass
class EvalDataset:
    """Rows ``[seed, 0], [seed, 1], ..., [seed, count - 1]``."""

    seed: int
    count: int

    def rows(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = self.count if stop is None else min(stop, self.count)
        offsets = np.arange(start, stop, dtype=np.float64)
        return np.column_stack([np.full(offsets.size, float(self.seed)), offsets])

    def __len__(self):
        return self.count


def build_eval_dataset(seed: int, count: int) -> EvalDataset:
    if count < 1:
        raise RejectedInputError("evaluation dataset needs at least one row")
    if not 0 <= seed < WORD_RANGE:
        raise RejectedInputError("seed must be a 16-bit value")
    return EvalDataset(int(seed), int(count))


def emit_evaluation_stream(gen: models.GeneratorNet, dataset: EvalDataset,
                           chunk_rows: int = 2048) -> Iterator[np.ndarray]:
    """Yield ``(rows, 8)`` generator outputs for the dataset, in order."""
    for start in range(0, dataset.count, chunk_rows):
        yield gen.forward(dataset.rows(start, start + chunk_rows))


# ----------------------------------------------------------------------------
# Sampling
# ----------------------------------------------------------------------------


def make_rngs(cfg: TrainConfig) -> dict[str, np.random.Generator]:
    """Independent, reproducible streams for every random choice of a run."""
    names = ("generator_init", "adversary_init", "inputs", "reference")
    children = np.random.SeedSequence(cfg.rng_seed).spawn(len(names))
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


def build_networks(cfg: TrainConfig):
    rngs = make_rngs(cfg)
    gen = models.GeneratorNet(rngs["generator_init"], output_gain=cfg.output_gain)
    if cfg.mode == "discriminative":
        adversary = models.DiscriminatorNet(rngs["adversary_init"])
    else:
        adversary = models.PredictorNet(rngs["adversary_init"])
    return gen, adversary


def sample_training_inputs(cfg: TrainConfig, rng: np.random.Generator) -> np.ndarray:
    """``(batch_size, 2)`` integer-valued (seed, offset) pairs, uniform on [0, 65536)."""
    return rng.integers(0, WORD_RANGE, size=(cfg.batch_size, 2)).astype(np.float64)


def reference_random_batch(cfg: TrainConfig, batch: int,
                           rng: np.random.Generator | None = None) -> np.ndarray:
    """``(batch, 8)`` reals uniform on [0, 65536) from the configured source."""
    shape = (batch, SEQUENCE_LENGTH)
    if cfg.reference_source == "seeded-internal":
        if rng is None:
            raise RejectedInputError("seeded-internal reference source needs an rng")
        return rng.random(shape) * WORD_RANGE
    try:
        raw = os.urandom(8 * batch * SEQUENCE_LENGTH)
    except NotImplementedError as exc:
        raise SourceUnavailableError("operating system entropy source unavailable") from exc
    words = np.frombuffer(raw, dtype="<u8").reshape(shape)
    # top 53 bits -> uniform double in [0, 1)
    return (words >> np.uint64(11)).astype(np.float64) * (WORD_RANGE / 2.0**53)


# ----------------------------------------------------------------------------
# Training loops
# ----------------------------------------------------------------------------


def _dump_state(cfg, step, gen, adversary, losses) -> str:
    dump_dir = Path(cfg.dump_dir) if cfg.dump_dir else Path(tempfile.mkdtemp(prefix="ganprng-abort-"))
    dump_dir.mkdir(parents=True, exist_ok=True)
    models.save_params(gen, dump_dir / "generator.bin")
    models.save_params(adversary, dump_dir / "adversary.bin")
    state = {"step": step, "losses": [repr(x) for x in losses], "config": cfg.to_dict()}
    (dump_dir / "state.json").write_text(json.dumps(state, indent=2))
    return str(dump_dir)


def _check_finite(cfg, step, gen, adversary, *losses):
    if all(np.isfinite(x) for x in losses):
        return
    path = _dump_state(cfg, step, gen, adversary, losses)
    raise NumericalAbort(
        f"non-finite loss at step {step}: {losses}; state dumped to {path}",
        dump_path=path,
        step=step,
    )


def _maybe_checkpoint(cfg, step, gen, adversary):
    if not cfg.checkpoint_every or not cfg.checkpoint_dir or step % cfg.checkpoint_every:
        return
    out = Path(cfg.checkpoint_dir)
    out.mkdir(parents=True, exist_ok=True)
    models.save_params(gen, out / f"generator_step{step:07d}.bin")
    models.save_params(adversary, out / f"adversary_step{step:07d}.bin")


def _optimizers(gen, adversary, cfg, gen_opt, adv_opt):
    gen_opt = gen_opt or nn.Adam(gen.net, lr=cfg.learning_rate)
    adv_opt = adv_opt or nn.Adam(adversary.net, lr=cfg.learning_rate)
    return gen_opt, adv_opt


def train_discriminative(gen: models.GeneratorNet, disc: models.DiscriminatorNet,
                         cfg: TrainConfig, gen_opt: nn.Adam | None = None,
                         adv_opt: nn.Adam | None = None, rngs=None) -> TrainLog:
    """Least-squares GAN against a reference source of uniform sequences."""
    if cfg.mode != "discriminative":
        raise RejectedInputError("config mode is not discriminative")
    rngs = rngs or make_rngs(cfg)
    gen_opt, adv_opt = _optimizers(gen, disc, cfg, gen_opt, adv_opt)
    n_fake = cfg.batch_size // 2
    n_real = cfg.batch_size - n_fake
    labels = np.concatenate([np.zeros(n_fake), np.ones(n_real)])
    half_cfg = replace(cfg, batch_size=n_fake)
    log = TrainLog()

    for step in range(1, cfg.steps + 1):
        for _ in range(cfg.ratio):
            fake = gen.forward(sample_training_inputs(half_cfg, rngs["inputs"]))
            real = reference_random_batch(cfg, n_real, rngs["reference"])
            disc.net.zero_grad()
            p = disc.forward(np.vstack([fake, real]))
            d_loss = nn.least_squares_loss(p, labels)
            disc.backward(nn.least_squares_grad(p, labels))
            adv_opt.step()

        x = sample_training_inputs(cfg, rngs["inputs"])
        y = gen.forward(x)
        p = disc.forward(y)
        target = np.ones_like(p)
        g_loss = nn.least_squares_loss(p, target)
        _check_finite(cfg, step, gen, disc, g_loss, d_loss)
        grad_y = disc.backward(nn.least_squares_grad(p, target))
        disc.net.zero_grad()
        gen.net.zero_grad()
        gen.backward(grad_y)
        gen_opt.step()

        log.record(step, g_loss, d_loss)
        _maybe_checkpoint(cfg, step, gen, disc)

    log.generator_updates = gen_opt.step_count
    log.adversary_updates = adv_opt.step_count
    return log


def train_predictive(gen: models.GeneratorNet, pred: models.PredictorNet,
                     cfg: TrainConfig, gen_opt: nn.Adam | None = None,
                     adv_opt: nn.Adam | None = None, rngs=None) -> TrainLog:
    """Generator against a next-value predictor; no reference source involved."""
    if cfg.mode != "predictive":
        raise RejectedInputError("config mode is not predictive")
    rngs = rngs or make_rngs(cfg)
    gen_opt, adv_opt = _optimizers(gen, pred, cfg, gen_opt, adv_opt)
    if cfg.predictive_distance == "circular":
        loss_fn, grad_fn = nn.circular_difference_loss, nn.circular_difference_grad
    else:
        loss_fn, grad_fn = nn.absolute_difference_loss, nn.absolute_difference_grad
    log = TrainLog()

    for step in range(1, cfg.steps + 1):
        for _ in range(cfg.ratio):
            y = gen.forward(sample_training_inputs(cfg, rngs["inputs"]))
            head, last = models.split_sequences(y)
            target = last * INPUT_SCALE
            pred.net.zero_grad()
            p = pred.forward(head)
            pred.backward(grad_fn(p, target))
            adv_opt.step()

        y = gen.forward(sample_training_inputs(cfg, rngs["inputs"]))
        head, last = models.split_sequences(y)
        target = last * INPUT_SCALE
        p = pred.forward(head)
        p_loss = loss_fn(p, target)
        g_loss = -p_loss
        _check_finite(cfg, step, gen, pred, g_loss)
        # generator loss is -p_loss, so its gradients are the negated predictor ones
        grad_p = -grad_fn(p, target)
        grad_head = pred.backward(grad_p)
        grad_last = -grad_p * INPUT_SCALE
        pred.net.zero_grad()
        gen.net.zero_grad()
        gen.backward(np.column_stack([grad_head, grad_last]))
        gen_opt.step()

        log.record(step, g_loss, p_loss)
        _maybe_checkpoint(cfg, step, gen, pred)

    log.generator_updates = gen_opt.step_count
    log.adversary_updates = adv_opt.step_count
    return log


def train(gen, adversary, cfg: TrainConfig, **kwargs) -> TrainLog:
    """Dispatch on ``cfg.mode``."""
    if cfg.mode == "discriminative":
        return train_discriminative(gen, adversary, cfg, **kwargs)
    return train_predictive(gen, adversary, cfg, **kwargs)
