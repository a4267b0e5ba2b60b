"""
Command-line driver: ``ganprng {train,generate,evaluate,compare,visualize,experiment}``.

Config files are flat ``key = value`` text.  Training keys mirror
:class:`~ganprng.gantrain.TrainConfig` fields, suite keys carry a ``suite.``
prefix and mirror :class:`~ganprng.statcheck.SuiteConfig`, and the
``experiment`` command also reads ``eval.seed``, ``eval.count``,
``visualize.width`` and ``visualize.height``.  ``#`` starts a comment.

Exit codes::

    0  success
    2  usage error (bad arguments or config)
    3  parse error (malformed bit, report or parameter file)
    4  environment error (I/O, entropy source)
    5  numerical abort during training
    6  rejected input (too few bits, mismatched reports, ...)

Every command writes a JSON run manifest listing its artifacts.  Manifests
carry wall-clock timestamps; every other artifact is a pure function of the
inputs, so reruns with a seeded config reproduce them byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

from . import bitstream as bs
from . import gantrain as gt
from . import models
from . import statcheck as sc
from .errors import NumericalAbort, ParseError, RejectedInputError
from .statcheck.suite import comparison_text

log = logging.getLogger("ganprng")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_ENVIRONMENT = 4
EXIT_NUMERICAL = 5
EXIT_REJECTED = 6

_TRAIN_KEYS = {f.name for f in dataclasses.fields(gt.TrainConfig)} - {"checkpoint_dir", "dump_dir"}
_SUITE_KEYS = {f.name for f in dataclasses.fields(sc.SuiteConfig)}
_EXTRA_KEYS = {"eval.seed", "eval.count", "visualize.width", "visualize.height"}


class UsageError(Exception):
    """Bad command line or config file."""


# ----------------------------------------------------------------------------
# Config files
# ----------------------------------------------------------------------------


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines into a dict of raw strings."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise UsageError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        if key in out:
            raise UsageError(f"config line {lineno}: duplicate key {key!r}")
        known = key in _TRAIN_KEYS or key in _EXTRA_KEYS or (
            key.startswith("suite.") and key[6:] in _SUITE_KEYS
        )
        if not known:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(template, name: str, value: str):
    """Convert ``value`` to the type of ``template``'s default for ``name``."""
    default = getattr(template, name)
    try:
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(value.replace("_", ""))
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            return tuple(v.strip() for v in value.split(",") if v.strip())
    except ValueError as exc:
        raise UsageError(f"config key {name!r}: cannot parse {value!r}") from exc
    return value


@dataclasses.dataclass
class RunConfig:
    train: gt.TrainConfig
    suite: sc.SuiteConfig
    eval_seed: int = 10
    eval_count: int | None = None
    grid_width: int = 200
    grid_height: int = 200

    @property
    def rows(self) -> int:
        """Evaluation rows: enough to fill the suite unless set explicitly."""
        if self.eval_count is not None:
            return self.eval_count
        return math.ceil(self.suite.required_bits / (models.SEQUENCE_LENGTH * bs.WORD_BITS))

    def to_dict(self) -> dict:
        return {
            "train": self.train.to_dict(),
            "suite": self.suite.to_dict(),
            "eval_seed": self.eval_seed,
            "eval_count": self.rows,
            "grid": [self.grid_width, self.grid_height],
        }


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    raw = parse_config_text(path.read_text())
    train_tpl, suite_tpl = gt.TrainConfig(), sc.SuiteConfig()
    train_kw = {k: _coerce(train_tpl, k, v) for k, v in raw.items() if k in _TRAIN_KEYS}
    suite_kw = {k[6:]: _coerce(suite_tpl, k[6:], v) for k, v in raw.items() if k.startswith("suite.")}
    try:
        cfg = RunConfig(gt.TrainConfig(**train_kw), sc.SuiteConfig(**suite_kw))
        if "eval.seed" in raw:
            cfg.eval_seed = int(raw["eval.seed"])
        if "eval.count" in raw:
            cfg.eval_count = int(raw["eval.count"].replace("_", ""))
        if "visualize.width" in raw:
            cfg.grid_width = int(raw["visualize.width"])
        if "visualize.height" in raw:
            cfg.grid_height = int(raw["visualize.height"])
    except (RejectedInputError, ValueError) as exc:
        raise UsageError(f"invalid config {path}: {exc}") from exc
    if not 0 <= cfg.eval_seed < models.WORD_RANGE or cfg.rows < 1:
        raise UsageError("eval.seed must be a 16-bit value and eval.count positive")
    if cfg.grid_width < 1 or cfg.grid_height < 1:
        raise UsageError("visualize.width and visualize.height must be positive")
    return cfg


# ----------------------------------------------------------------------------
# Manifest
# ----------------------------------------------------------------------------


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclasses.dataclass
class RunManifest:
    command: str
    config: dict
    artifacts: dict = dataclasses.field(default_factory=dict)
    started: str = dataclasses.field(default_factory=_now)
    finished: str | None = None

    @property
    def run_id(self) -> str:
        blob = json.dumps([self.command, self.config], sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def add(self, name: str, path) -> None:
        self.artifacts[name] = str(path)

    def save(self, path) -> None:
        self.finished = _now()
        doc = {"run_id": self.run_id, **dataclasses.asdict(self)}
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ----------------------------------------------------------------------------
# Building blocks shared by the commands
# ----------------------------------------------------------------------------


def generate_bits(gen: models.GeneratorNet, seed: int, count: int, path) -> int:
    """Write the evaluation stream of ``count`` rows as an ASCII bit file."""
    dataset = gt.build_eval_dataset(seed, count)
    chunks = (bs.to_bits(bs.quantize(y)) for y in gt.emit_evaluation_stream(gen, dataset))
    return bs.write_ascii_bit_chunks(chunks, path)


def evaluate_bits(bits_path, suite_cfg: sc.SuiteConfig, out_prefix) -> sc.SuiteReport:
    stream = bs.read_ascii_bits(bits_path)
    stream.provenance = Path(bits_path).name
    report = sc.run_suite(stream, suite_cfg)
    report.save_json(f"{out_prefix}.json")
    Path(f"{out_prefix}.txt").write_text(report.to_text())
    return report


def compare_files(before_path, after_path, out_prefix) -> dict:
    delta = sc.compare_reports(sc.SuiteReport.load_json(before_path),
                               sc.SuiteReport.load_json(after_path))
    Path(f"{out_prefix}.json").write_text(json.dumps(delta, indent=2, sort_keys=True) + "\n")
    Path(f"{out_prefix}.txt").write_text(comparison_text(delta))
    return delta


def visualize_bits(bits_path, width: int, height: int, out_path) -> float | None:
    """Write the bitmap; return the stream's byte entropy (None below 8 bits)."""
    stream = bs.read_ascii_bits(bits_path)
    bs.visualize_grid(stream, width, height, out_path)
    return bs.byte_entropy(stream) if stream.bit_count >= 8 else None


def train_run(cfg: RunConfig, out_dir: Path, manifest: RunManifest,
              gen=None, adversary=None) -> gt.TrainLog:
    tcfg = dataclasses.replace(
        cfg.train,
        checkpoint_dir=str(out_dir / "checkpoints") if cfg.train.checkpoint_every else None,
        dump_dir=str(out_dir / "abort_dump"),
    )
    if gen is None:
        gen, adversary = gt.build_networks(tcfg)
    log.info("training %s for %d steps", tcfg.mode, tcfg.steps)
    train_log = gt.train(gen, adversary, tcfg)
    train_log.to_csv(out_dir / "loss.csv")
    models.save_params(gen, out_dir / "generator.bin")
    models.save_params(adversary, out_dir / "adversary.bin")
    manifest.add("loss_csv", out_dir / "loss.csv")
    manifest.add("generator", out_dir / "generator.bin")
    manifest.add("adversary", out_dir / "adversary.bin")
    if tcfg.checkpoint_dir:
        manifest.add("checkpoints", tcfg.checkpoint_dir)
    return train_log


# ----------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("train", cfg.to_dict())
    train_log = train_run(cfg, out, manifest)
    manifest.save(out / "manifest.json")
    print(f"trained {train_log.generator_updates} generator steps; "
          f"final losses {train_log.generator_loss[-1]:.6f} / {train_log.adversary_loss[-1]:.6f}")
    return EXIT_OK


def cmd_generate(args) -> int:
    gen = models.load_params(args.checkpoint)
    if not isinstance(gen, models.GeneratorNet):
        raise RejectedInputError(f"{args.checkpoint} does not hold a generator")
    manifest = RunManifest("generate", {"checkpoint": str(args.checkpoint), "seed": args.seed,
                                        "count": args.count})
    n = generate_bits(gen, args.seed, args.count, args.out)
    manifest.add("bits", args.out)
    manifest.save(args.manifest or f"{args.out}.manifest.json")
    print(f"wrote {n} bits to {args.out}")
    return EXIT_OK


def _suite_from_args(args) -> sc.SuiteConfig:
    if args.config:
        return load_config(args.config).suite
    return sc.SuiteConfig.desk() if args.desk else sc.SuiteConfig()


def cmd_evaluate(args) -> int:
    suite_cfg = _suite_from_args(args)
    prefix = args.out or str(Path(args.bits).with_suffix("")) + ".report"
    manifest = RunManifest("evaluate", {"bits": str(args.bits), "suite": suite_cfg.to_dict()})
    report = evaluate_bits(args.bits, suite_cfg, prefix)
    manifest.add("report_json", f"{prefix}.json")
    manifest.add("report_text", f"{prefix}.txt")
    manifest.save(f"{prefix}.manifest.json")
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    prefix = args.out or "comparison"
    manifest = RunManifest("compare", {"before": str(args.before), "after": str(args.after)})
    delta = compare_files(args.before, args.after, prefix)
    manifest.add("comparison_json", f"{prefix}.json")
    manifest.add("comparison_text", f"{prefix}.txt")
    manifest.save(f"{prefix}.manifest.json")
    print(comparison_text(delta), end="")
    return EXIT_OK


def cmd_visualize(args) -> int:
    manifest = RunManifest("visualize", {"bits": str(args.bits), "width": args.width,
                                         "height": args.height})
    entropy = visualize_bits(args.bits, args.width, args.height, args.out)
    manifest.add("bitmap", args.out)
    manifest.save(f"{args.out}.manifest.json")
    if entropy is None:
        print("byte entropy: n/a (fewer than 8 bits)")
    else:
        print(f"byte entropy: {entropy:.6f} bits/symbol")
    return EXIT_OK


def cmd_experiment(args) -> int:
    """Untrained baseline, training, trained output, evaluation and comparison."""
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("experiment", cfg.to_dict())

    gen, adversary = gt.build_networks(cfg.train)
    models.save_params(gen, out / "generator_untrained.bin")
    manifest.add("generator_untrained", out / "generator_untrained.bin")

    summary = {}
    for stage in ("before", "after"):
        if stage == "after":
            train_run(cfg, out, manifest, gen, adversary)
        bits_path = out / f"bits_{stage}.txt"
        log.info("generating %d rows (%s training)", cfg.rows, stage)
        generate_bits(gen, cfg.eval_seed, cfg.rows, bits_path)
        log.info("evaluating %s", bits_path.name)
        report = evaluate_bits(bits_path, cfg.suite, out / f"report_{stage}")
        grid = out / f"grid_{stage}.pbm"
        entropy = visualize_bits(bits_path, cfg.grid_width, cfg.grid_height, grid)
        summary[stage] = {"byte_entropy": entropy, **report.summary()}
        manifest.add(f"bits_{stage}", bits_path)
        manifest.add(f"report_{stage}", out / f"report_{stage}.json")
        manifest.add(f"grid_{stage}", grid)

    delta = compare_files(out / "report_before.json", out / "report_after.json", out / "comparison")
    manifest.add("comparison", out / "comparison.json")
    summary["delta_byte_entropy"] = summary["after"]["byte_entropy"] - summary["before"]["byte_entropy"]
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    manifest.add("summary", out / "summary.json")
    manifest.save(out / "manifest.json")
    print(comparison_text(delta), end="")
    print(f"byte entropy {summary['before']['byte_entropy']:.4f} -> "
          f"{summary['after']['byte_entropy']:.4f}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ganprng", description="Adversarially trained neural PRNG toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a generator from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", default="run")
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("generate", help="write a generator's evaluation stream as ASCII bits")
    g.add_argument("--checkpoint", required=True)
    g.add_argument("--seed", type=int, default=10)
    g.add_argument("--count", type=int, required=True, help="rows; each row gives 128 bits")
    g.add_argument("--out", required=True)
    g.add_argument("--manifest")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="run the statistical test suite on a bit file")
    e.add_argument("--bits", required=True)
    group = e.add_mutually_exclusive_group()
    group.add_argument("--config", help="config file whose suite.* keys are used")
    group.add_argument("--desk", action="store_true", help="10 x 100,000-bit instances")
    e.add_argument("--out", help="output prefix for .json and .txt reports")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="difference between two suite reports")
    c.add_argument("before")
    c.add_argument("after")
    c.add_argument("--out", help="output prefix for .json and .txt")
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("visualize", help="render leading bits as a P1 bitmap")
    v.add_argument("--bits", required=True)
    v.add_argument("--width", type=int, default=200)
    v.add_argument("--height", type=int, default=200)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_visualize)

    x = sub.add_parser("experiment", help="full before/after training experiment")
    x.add_argument("--config", required=True)
    x.add_argument("--out", default="experiment")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except ParseError as exc:
        where = f" (byte {exc.offset})" if exc.offset is not None else ""
        return _fail(EXIT_PARSE, "parse error", f"{exc}{where}")
    except NumericalAbort as exc:
        return _fail(EXIT_NUMERICAL, "numerical abort", exc)
    except RejectedInputError as exc:
        return _fail(EXIT_REJECTED, "rejected input", exc)
    except OSError as exc:
        return _fail(EXIT_ENVIRONMENT, "environment error", exc)


def _fail(code: int, kind: str, detail) -> int:
    print(f"ganprng: {kind}: {detail}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
