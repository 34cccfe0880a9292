"""Config-driven experiment runner.

Subcommands: ``train`` (train + evaluate one config), ``eval`` (re-score an
existing checkpoint), ``stats`` (per-layer target-length tables for all six
orders), ``grid`` (run a directory of configs and aggregate), ``generate``
(one-off meaning representation -> sentence).

Config files are plain ``key = value`` text; list values are comma-separated.
Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import corpus as cp
from . import model as md
from . import report as rp
from . import training as tr


class UsageError(ValueError):
    """Bad flags, malformed config, or missing inputs (exit code 2)."""


@dataclass
class ExperimentConfig:
    train_data: str
    test_data: str = ""
    order: cp.GeneratingOrder = field(default_factory=lambda: cp.DEFAULT_ORDER)
    hierarchical: bool = True
    repeat_input: bool = False
    curriculum: bool = False
    attention: str = "none"
    seed: int = 1
    epochs: int = 20
    curriculum_span: int = 5
    tf_prob_initial: float = 0.5
    tf_decay: float = 0.9
    batch_size: int = 32
    learning_rate: float = 1e-3
    embed_dim: int = 64
    encoder_hidden: int = 100
    decoder_hidden: tuple[int, ...] = ()
    max_decode_len: int = 60
    dev_fraction: float = 0.1
    out_dir: str = "runs/run"
    config_id: str = "run"
    config_hash: str = ""

    def validate(self) -> None:
        if not self.hierarchical:
            bad = [flag for flag, on in [("repeat_input", self.repeat_input),
                                         ("curriculum", self.curriculum),
                                         ("attention", self.attention != "none")] if on]
            if bad:
                raise UsageError(f"{', '.join(bad)} require hierarchical = true")
        if self.attention not in md.ATTENTION_KINDS:
            raise UsageError(f"unknown attention kind {self.attention!r}")
        if not Path(self.train_data).exists():
            raise UsageError(f"train_data not found: {self.train_data}")
        if self.test_data and not Path(self.test_data).exists():
            raise UsageError(f"test_data not found: {self.test_data}")

    def resolved_decoder_hidden(self) -> tuple[int, ...]:
        if self.decoder_hidden:
            return self.decoder_hidden
        return (100, 100, 100, 100) if self.hierarchical else (400,)

    def variant(self) -> str:
        if not self.hierarchical:
            return "seq2seq"
        parts = ["hierarchical"]
        if self.repeat_input:
            parts.append("repeat")
        if self.curriculum:
            parts.append("curriculum")
        return "+".join(parts)

    def model_config(self, vocab_size: int) -> md.ModelConfig:
        return md.ModelConfig(
            vocab_size=vocab_size,
            embed_dim=self.embed_dim,
            encoder_hidden=self.encoder_hidden,
            decoder_hidden=self.resolved_decoder_hidden(),
            attention_kind=self.attention,
            order=self.order,
            max_decode_len=self.max_decode_len,
            repeat_input=self.repeat_input,
        )

    def schedule(self) -> tr.TrainingSchedule:
        return tr.TrainingSchedule(
            total_epochs=self.epochs,
            curriculum_span=self.curriculum_span,
            tf_prob_initial=self.tf_prob_initial,
            tf_decay=self.tf_decay,
            batch_size=self.batch_size,
            rng_seed=self.seed,
            learning_rate=self.learning_rate,
            curriculum=self.curriculum,
        )


_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def parse_config(path, seed_override: int | None = None,
                 out_override: str | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config not found: {path}")
    raw = path.read_bytes()
    kv: dict[str, str] = {}
    for line_no, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()

    def take_bool(key, default):
        if key not in kv:
            return default
        try:
            return _BOOL[kv.pop(key).lower()]
        except KeyError:
            raise UsageError(f"{path}: {key} must be true/false") from None

    def take(key, cast, default):
        if key not in kv:
            return default
        try:
            return cast(kv.pop(key))
        except ValueError as exc:
            raise UsageError(f"{path}: bad value for {key}: {exc}") from None

    try:
        order = cp.parse_order(kv.pop("order")) if "order" in kv else cp.DEFAULT_ORDER
    except cp.CorpusError as exc:
        raise UsageError(f"{path}: {exc}") from None

    cfg = ExperimentConfig(
        train_data=kv.pop("train_data", ""),
        test_data=kv.pop("test_data", ""),
        order=order,
        hierarchical=take_bool("hierarchical", True),
        repeat_input=take_bool("repeat_input", False),
        curriculum=take_bool("curriculum", False),
        attention=kv.pop("attention", "none"),
        seed=take("seed", int, 1),
        epochs=take("epochs", int, 20),
        curriculum_span=take("curriculum_span", int, 5),
        tf_prob_initial=take("tf_prob_initial", float, 0.5),
        tf_decay=take("tf_decay", float, 0.9),
        batch_size=take("batch_size", int, 32),
        learning_rate=take("learning_rate", float, 1e-3),
        embed_dim=take("embed_dim", int, 64),
        encoder_hidden=take("encoder_hidden", int, 100),
        decoder_hidden=take("decoder_hidden",
                            lambda v: tuple(int(x) for x in v.split(",")), ()),
        max_decode_len=take("max_decode_len", int, 60),
        dev_fraction=take("dev_fraction", float, 0.1),
        out_dir=kv.pop("out_dir", f"runs/{path.stem}"),
        config_id=path.stem,
    )
    if not cfg.train_data:
        raise UsageError(f"{path}: train_data is required")
    if kv:
        raise UsageError(f"{path}: unknown keys: {', '.join(sorted(kv))}")
    if seed_override is not None:
        cfg.seed = seed_override
    if out_override is not None:
        cfg.out_dir = out_override
    cfg.config_hash = hashlib.sha256(raw + f"|seed={cfg.seed}".encode()).hexdigest()[:12]
    return cfg


# ---------------------------------------------------------------------------
# Data plumbing shared by subcommands
# ---------------------------------------------------------------------------


def _load_groups(path):
    return cp.delexicalize_corpus(cp.load_tagged_corpus(path))


def _eval_rows(model, vocab, groups):
    from .metrics import EvalInstance, score_all

    frames = [frame for frame, _ in groups]
    outputs = md.generate_batch(model, frames, vocab)
    instances = [
        EvalInstance(tuple(out), tuple(tuple(r.lemmas()) for r in refs))
        for out, (_, refs) in zip(outputs, groups)
    ]
    return score_all(instances)


def _report_row(cfg: ExperimentConfig, scores: dict) -> dict:
    return {
        "config_id": cfg.config_id,
        "order": cfg.order.label(),
        "variant": cfg.variant(),
        "attention": cfg.attention,
        **scores,
        "config_hash": cfg.config_hash,
    }


def run(cfg: ExperimentConfig) -> dict:
    """Train per config, evaluate on the test split, write artifacts.

    Produces, under ``out_dir``: train_log.tsv, checkpoint.{hnlg,cfg},
    vocab.tsv, report.tsv, training_curves.png. Returns the report row.
    """
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups = _load_groups(cfg.train_data)
    train_g, dev_g = tr.split_groups(groups, cfg.dev_fraction, seed=cfg.seed)
    vocab = cp.Vocabulary.build(train_g)
    vocab.save(out / "vocab.tsv")

    model = md.HierModel.init(cfg.model_config(len(vocab)), seed=cfg.seed)
    samples = tr.prepare_pairs(train_g, vocab, model.config)
    log_path = out / "train_log.tsv"
    log_path.unlink(missing_ok=True)
    result = tr.train(model, samples, cfg.schedule(), dev_groups=dev_g, vocab=vocab,
                      log_path=log_path, checkpoint_prefix=out / "checkpoint")
    rp.training_curves(log_path, result.dev_bleu_trace, out / "training_curves.png")

    eval_groups = _load_groups(cfg.test_data) if cfg.test_data else dev_g
    scores = _eval_rows(model, vocab, eval_groups)
    row = _report_row(cfg, scores)
    rp.append_report_row(out / "report.tsv", row)
    return row


def evaluate(cfg: ExperimentConfig) -> dict:
    """Score an existing checkpoint on the test split (no training)."""
    cfg.validate()
    out = Path(cfg.out_dir)
    ckpt = out / "checkpoint.hnlg"
    if not ckpt.exists():
        raise UsageError(f"no checkpoint under {out} (run 'train' first)")
    model = md.load_model(out / "checkpoint")
    vocab = cp.Vocabulary.load(out / "vocab.tsv")
    if not cfg.test_data:
        raise UsageError("eval requires test_data")
    scores = _eval_rows(model, vocab, _load_groups(cfg.test_data))
    row = _report_row(cfg, scores)
    rp.append_report_row(out / "report.tsv", row)
    return row


def stats(cfg: ExperimentConfig) -> dict:
    """Table-3-style mean target lengths for all six orders, train and test."""
    cfg.validate()
    splits = {"train": cfg.train_data}
    if cfg.test_data:
        splits["test"] = cfg.test_data
    table: dict[str, dict[str, tuple]] = {}
    for order in cp.SIX_ORDERS:
        table[order.label()] = {}
        for split, path in splits.items():
            groups = _load_groups(path)
            sets = [cp.build_layer_targets(ref, order) for _, refs in groups for ref in refs]
            table[order.label()][split] = cp.length_stats(sets)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rp.stats_table_tsv(table, out / "length_stats.tsv")
    rp.stats_chart(table, out / "length_stats.png")
    return table


def grid(config_dir, out_base, seed_override=None) -> list[dict]:
    """Run every config in a directory; aggregate rows, markdown, and chart.

    A run whose report row already exists with the same config hash is reused
    byte-for-byte (idempotent reruns). Failures become error rows and the
    sweep continues.
    """
    config_dir = Path(config_dir)
    if not config_dir.is_dir():
        raise UsageError(f"not a directory: {config_dir}")
    out_base = Path(out_base)
    out_base.mkdir(parents=True, exist_ok=True)
    rows: list[dict] = []
    for path in sorted(config_dir.glob("*.cfg")):
        try:
            cfg = parse_config(path, seed_override=seed_override,
                               out_override=str(out_base / path.stem))
            report_path = Path(cfg.out_dir) / "report.tsv"
            if report_path.exists():
                done = [r for r in rp.read_report_rows(report_path)
                        if r.get("config_hash") == cfg.config_hash]
                if done:
                    rows.append(done[-1])
                    continue
            rows.append(run(cfg))
        except Exception as exc:  # per-row failure, sweep continues
            rows.append({
                "config_id": path.stem, "order": "", "variant": "",
                "attention": "", "BLEU": "error", "ROUGE-1": "", "ROUGE-2": "",
                "ROUGE-L": "", "config_hash": f"{type(exc).__name__}: {exc}",
            })
    rows.sort(key=lambda r: (r.get("order", ""), r.get("variant", ""), r.get("config_id", "")))
    grid_tsv = out_base / "grid_report.tsv"
    grid_tsv.write_text("\t".join(rp.REPORT_COLUMNS) + "\n", encoding="utf-8")
    for row in rows:
        rp.append_report_row(grid_tsv, row)
    (out_base / "grid_report.md").write_text(rp.grid_markdown(
        rp.read_report_rows(grid_tsv)), encoding="utf-8")
    rp.grid_chart(rows, out_base / "grid_chart.png")
    return rows


_MR_RE = re.compile(r"\s*([A-Za-z]+)\s*\[([^\]]*)\]\s*(?:,|$)")


def parse_mr_string(text: str) -> cp.SemanticFrame:
    """Parse 'name[X], food[English]' into a frame (usage error on junk)."""
    slots = []
    pos = 0
    while pos < len(text.strip()):
        m = _MR_RE.match(text, pos)
        if not m:
            raise UsageError(f"malformed MR at offset {pos}: {text[pos:pos + 20]!r}")
        slot, value = m.group(1), m.group(2).strip()
        if slot not in cp.E2E_SLOTS:
            raise UsageError(f"unknown slot {slot!r}")
        slots.append((slot, value))
        pos = m.end()
    if not slots:
        raise UsageError("empty MR")
    return cp.SemanticFrame(tuple(slots))


def generate_once(cfg: ExperimentConfig, mr_text: str) -> str:
    out = Path(cfg.out_dir)
    if not (out / "checkpoint.hnlg").exists():
        raise UsageError(f"no checkpoint under {out} (run 'train' first)")
    model = md.load_model(out / "checkpoint")
    vocab = cp.Vocabulary.load(out / "vocab.tsv")
    return md.generate(parse_mr_string(mr_text), model, vocab)


# ---------------------------------------------------------------------------
# argparse front end
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hnlg", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("train", "eval", "stats", "generate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        if name == "generate":
            p.add_argument("--mr", required=True,
                           help="meaning representation, e.g. 'name[X], food[English]'")
    g = sub.add_parser("grid")
    g.add_argument("--config-dir", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default="runs/grid")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "grid":
            rows = grid(args.config_dir, args.out, seed_override=args.seed)
            for row in rows:
                print("\t".join(str(row.get(c, "")) for c in rp.REPORT_COLUMNS))
            return 0
        cfg = parse_config(args.config, seed_override=args.seed, out_override=args.out)
        if args.command == "train":
            row = run(cfg)
            print("\t".join(str(row.get(c, "")) for c in rp.REPORT_COLUMNS))
        elif args.command == "eval":
            row = evaluate(cfg)
            print("\t".join(str(row.get(c, "")) for c in rp.REPORT_COLUMNS))
        elif args.command == "stats":
            table = stats(cfg)
            for order_label, splits in table.items():
                for split, means in splits.items():
                    cells = "\t".join(f"{m:.2f}" for m in means)
                    print(f"{order_label}\t{split}\t{cells}")
        elif args.command == "generate":
            print(generate_once(cfg, args.mr))
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
