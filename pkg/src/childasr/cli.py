"""Command-line entry point: ``childasr <command> [options]``.

Failures print one tab-separated line ``error<TAB><kind><TAB><message>`` to
stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline as pl
from .config import PipelineConfig
from .errors import AsrError, ConfigError

log = logging.getLogger("childasr")


def _subsets(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--workers", type=int, help="feature-extraction worker processes")
    common.add_argument("--preset", choices=("desk", "paper"), help="model size preset")
    common.add_argument("--work-dir", help="artifact directory (default: config work_dir)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="childasr", description="Desk-scale child speech recognition pipeline")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-corpus", parents=[common], help="synthesise the adult and child corpus")
    sub.add_parser("prep", parents=[common], help="normalise, split by speaker, build vocabulary")

    t = sub.add_parser("train", parents=[common], help="train an acoustic model from scratch")
    t.add_argument("--name", required=True)
    t.add_argument("--subsets", type=_subsets, default=("A",))
    t.add_argument("--others", action="store_true", help="add volume, reverberation and SpecAugment")

    t = sub.add_parser("transfer", parents=[common], help="transfer-learn a pretrained model on child data")
    t.add_argument("--name", required=True)
    t.add_argument("--init", required=True, type=Path, help="pretrained checkpoint")
    t.add_argument("--subsets", type=_subsets, default=pl.CHILD)
    t.add_argument("--others", action="store_true")

    sub.add_parser("train-lm", parents=[common], help="n-gram and RNN language models")

    d = sub.add_parser("decode", parents=[common], help="joint CTC-attention beam search on the child test set")
    d.add_argument("--model", required=True, type=Path)
    d.add_argument("--name", required=True)
    d.add_argument("--lm", action="store_true", help="shallow fusion with the interpolated n-gram")
    d.add_argument("--split", default="test", choices=("valid", "test"))

    r = sub.add_parser("rescore", parents=[common], help="rescore an n-best file with the RNN LM")
    r.add_argument("--hyps", required=True, type=Path)
    r.add_argument("--name", required=True)

    s = sub.add_parser("score", parents=[common], help="character error rate of a hypothesis file")
    s.add_argument("--hyps", required=True, type=Path)
    s.add_argument("--split", default="test", choices=("valid", "test"))

    sub.add_parser("reproduce", parents=[common], help="run every stage and write the results tables")
    return p


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value.strip())
    for key, value in (("seed", args.seed), ("workers", args.workers), ("preset", args.preset),
                       ("work_dir", args.work_dir)):
        if value is not None:
            cfg.set(key, value)
    return cfg


def run(args: argparse.Namespace) -> None:
    cfg = resolve_config(args)
    lay = pl.Layout(Path(cfg["work_dir"]))
    log.info("resolved configuration:\n%s", cfg.render())
    cmd = args.command
    if cmd == "gen-corpus":
        pl.stage_gen_corpus(cfg, lay)
    elif cmd == "prep":
        pl.stage_prep(cfg, lay)
    elif cmd == "train":
        print(pl.stage_train(cfg, lay, args.name, args.subsets, others=args.others))
    elif cmd == "transfer":
        print(pl.stage_train(cfg, lay, args.name, args.subsets, init=args.init, others=args.others))
    elif cmd == "train-lm":
        pl.stage_train_lm(cfg, lay)
    elif cmd == "decode":
        print(pl.stage_decode(cfg, lay, args.model, args.name, args.lm, args.split))
        pl.write_decode_manifest(cfg, lay)
    elif cmd == "rescore":
        print(pl.stage_rescore(cfg, lay, args.hyps, args.name))
        pl.write_decode_manifest(cfg, lay)
    elif cmd == "score":
        report = pl.stage_score(cfg, lay, args.hyps, args.split)
        print(f"CER\t{report.cer:.6f}")
        pl.write_decode_manifest(cfg, lay)
    elif cmd == "reproduce":
        pl.reproduce(cfg, lay)
        sys.stdout.write((lay.results / "results.txt").read_text(encoding="utf-8"))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except AsrError as exc:
        print(f"error\t{exc.kind}\t{exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error\tio\t{exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
