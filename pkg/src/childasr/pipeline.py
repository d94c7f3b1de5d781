"""Pipeline stages behind the command line.

Every stage reads its inputs from the work directory, checks they exist
before writing anything, and records what it wrote (with SHA-256 digests) in
``<stage dir>/MANIFEST.tsv``.  Stage seeds are derived from the master seed.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .augment import AugmentPolicy, expand_training_set
from .config import PipelineConfig
from .decode import DecodeConfig, best_texts, decode_corpus, read_hypotheses, write_hypotheses
from .errors import ConfigError, DependencyError
from .frontend.corpus import CorpusConfig, SubsetConfig, generate_corpus
from .lm import (
    InterpolatedLM,
    RnnLmConfig,
    interpolate,
    perplexity,
    read_arpa,
    rescore_nbest,
    train_ngram,
    train_rnnlm,
    write_arpa,
)
from .lm.rnnlm import RnnLm
from .model import ModelConfig, MtlConfig, init_params, load_examples, train, transfer_learn
from .model.data import load_feature_cache, save_feature_cache
from .numcore import load_params, save_params
from .scoring import format_report, report_tsv, score_corpus
from .textnorm import (
    Manifest,
    Utterance,
    Vocabulary,
    build_vocab,
    normalize_transcript,
    partition,
    transcript_chars,
)

log = logging.getLogger(__name__)

CHILD = ("C1", "C2")


# ---------------------------------------------------------------- helpers


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_stage_manifest(stage_dir: Path, files: Iterable[Path]) -> None:
    lines = ["path\tsha256"]
    for f in sorted(set(files)):
        lines.append(f"{f.relative_to(stage_dir).as_posix()}\t{sha256(f)}")
    (stage_dir / "MANIFEST.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def require(*paths: Path) -> None:
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise DependencyError(f"missing input(s): {', '.join(missing)}")


@dataclass
class Layout:
    root: Path

    @property
    def corpus(self) -> Path:
        return self.root / "corpus"

    @property
    def data(self) -> Path:
        return self.root / "data"

    @property
    def models(self) -> Path:
        return self.root / "models"

    @property
    def lm(self) -> Path:
        return self.root / "lm"

    @property
    def decode(self) -> Path:
        return self.root / "decode"

    @property
    def results(self) -> Path:
        return self.root / "results"


def model_config(cfg: PipelineConfig, vocab_size: int) -> ModelConfig:
    if cfg["preset"] == "paper":
        return ModelConfig.preset("paper", vocab_size)
    if cfg["preset"] != "desk":
        raise ConfigError(f"preset: unknown preset {cfg['preset']!r}")
    return ModelConfig(
        vocab_size=vocab_size, enc_layers=cfg["model.enc_layers"], dec_layers=cfg["model.dec_layers"],
        model_dim=cfg["model.model_dim"], ff_dim=cfg["model.ff_dim"], heads=cfg["model.heads"],
        dropout=cfg["model.dropout"], subsample_factor=cfg["model.subsample_factor"],
    )


def mtl_config(cfg: PipelineConfig, stage: str, child: bool) -> MtlConfig:
    return MtlConfig(
        ctc_weight=cfg["train.ctc_weight"],
        lr=cfg["child.lr"] if child else cfg["train.lr"],
        warmup_steps=cfg["train.warmup_steps"],
        epochs=cfg["child.epochs"] if child else cfg["train.epochs"],
        batch_size=cfg["train.batch_size"],
        seed=cfg.stage_seed(stage),
        label_smoothing=cfg["train.label_smoothing"],
        grad_clip=cfg["train.grad_clip"],
        select_best=cfg["train.select_best"],
    )


def augment_policy(cfg: PipelineConfig, others: bool) -> AugmentPolicy:
    return AugmentPolicy(
        speed_factors=cfg["augment.speed_factors"],
        volume_range_db=cfg["augment.volume_db"],
        use_volume=others,
        use_rir=others,
        rir_decays=cfg["augment.rir_decays"],
        rir_prob=cfg["augment.rir_prob"],
        use_specaug=others,
        num_time_masks=cfg["augment.time_masks"],
        max_time_width=cfg["augment.max_time_width"],
        num_freq_masks=cfg["augment.freq_masks"],
        max_freq_width=cfg["augment.max_freq_width"],
        others_subsets=cfg["augment.others_subsets"],
    )


def decode_config(cfg: PipelineConfig, with_lm: bool) -> DecodeConfig:
    return DecodeConfig(
        beam_width=cfg["decode.beam_width"], ctc_weight=cfg["decode.ctc_weight"],
        lm_weight=cfg["decode.lm_weight"] if with_lm else 0.0,
        max_len_ratio=cfg["decode.max_len_ratio"], nbest=cfg["decode.nbest"],
    )


def write_resolved(cfg: PipelineConfig, stage_dir: Path) -> Path:
    p = stage_dir / "config.resolved"
    p.write_text(cfg.render(), encoding="utf-8")
    return p


# ---------------------------------------------------------------- stages


def stage_gen_corpus(cfg: PipelineConfig, lay: Layout) -> Manifest:
    out = lay.corpus
    out.mkdir(parents=True, exist_ok=True)
    cc = CorpusConfig(
        subsets={t: SubsetConfig(cfg[f"corpus.{t}.speakers"], cfg[f"corpus.{t}.utts"]) for t in ("A", *CHILD)},
        seed=cfg.stage_seed("corpus"),
        arabic_digit_prob=cfg["corpus.arabic_digit_prob"],
        punctuation_prob=cfg["corpus.punctuation_prob"],
    )
    manifest = generate_corpus(cc, out)
    files = [write_resolved(cfg, out), out / "manifest.tsv", out / "speakers.tsv", out / "lexicon.tsv"]
    for r in manifest:
        files += [out / r.audio_path, out / (r.audio_path + ".hdr")]
    write_stage_manifest(out, files)
    return manifest


def stage_prep(cfg: PipelineConfig, lay: Layout) -> None:
    """Normalise transcripts, split by speaker, build the vocabulary, cache features."""
    require(lay.corpus / "manifest.tsv")
    raw = Manifest.read(lay.corpus / "manifest.tsv")
    norm = Manifest([Utterance(r.utt_id, r.audio_path, r.speaker_id, r.subset, normalize_transcript(r.transcript))
                     for r in raw])
    splits = partition(norm, tuple(cfg["partition.ratios"]), seed=cfg.stage_seed("partition"))
    out = lay.data
    out.mkdir(parents=True, exist_ok=True)
    files = [write_resolved(cfg, out)]
    for name, m in zip(("train", "valid", "test"), splits):
        m.write(out / f"{name}.tsv")
        files.append(out / f"{name}.tsv")
    vocab = build_vocab([splits[0]])
    vocab.save(out / "vocab.txt")
    files.append(out / "vocab.txt")
    for name, m in zip(("valid", "test"), splits[1:]):
        ex = load_examples(m, lay.corpus, vocab, workers=cfg["workers"])
        save_feature_cache(out / f"{name}.feats", ex)
        files.append(out / f"{name}.feats")
    write_stage_manifest(out, files)


def load_vocab(lay: Layout) -> Vocabulary:
    require(lay.data / "vocab.txt")
    return Vocabulary.load(lay.data / "vocab.txt")


def split_examples(lay: Layout, split: str, subsets: tuple[str, ...], vocab: Vocabulary):
    require(lay.data / f"{split}.tsv", lay.data / f"{split}.feats")
    m = Manifest.read(lay.data / f"{split}.tsv").subset(*subsets)
    return load_feature_cache(lay.data / f"{split}.feats", m, vocab)


def training_examples(cfg: PipelineConfig, lay: Layout, subsets: tuple[str, ...], vocab: Vocabulary,
                      policy: AugmentPolicy):
    """Augmented training features, cached per (subsets, waveform policy)."""
    require(lay.data / "train.tsv")
    m = Manifest.read(lay.data / "train.tsv").subset(*subsets)
    seed = cfg.stage_seed("augment")
    key = "|".join([",".join(subsets), repr(policy.speed_factors), str(policy.use_volume), str(policy.use_rir),
                    repr(policy.volume_range_db), repr(policy.rir_decays), str(policy.rir_prob),
                    repr(policy.others_subsets), str(seed)])
    cache = lay.data / "cache" / (hashlib.sha256(key.encode()).hexdigest()[:16] + ".feats")
    expanded = expand_training_set(m, policy, seed)
    if cache.exists():
        return load_feature_cache(cache, expanded, vocab)
    ex = load_examples(m, lay.corpus, vocab, policy, seed, cfg["workers"])
    cache.parent.mkdir(parents=True, exist_ok=True)
    save_feature_cache(cache, ex)
    return ex


def stage_train(cfg: PipelineConfig, lay: Layout, name: str, subsets: tuple[str, ...],
                init: Path | None = None, others: bool = False) -> Path:
    """Train (or, with ``init``, transfer-learn) one acoustic model into ``models/<name>``."""
    vocab = load_vocab(lay)
    if init is not None:
        require(init)
    mcfg = model_config(cfg, len(vocab))
    policy = augment_policy(cfg, others)
    child = init is not None or set(subsets) <= set(CHILD)
    mtl = mtl_config(cfg, f"train:{name}", child)
    train_set = training_examples(cfg, lay, subsets, vocab, policy)
    valid_set = split_examples(lay, "valid", subsets, vocab)
    out = lay.models / name
    out.mkdir(parents=True, exist_ok=True)
    files = [write_resolved(cfg, out)]
    if init is None:
        res = train(train_set, init_params(mcfg, cfg.stage_seed(f"init:{name}")), mcfg, mtl, valid_set, policy,
                    log_path=out / "train_log.tsv")
    else:
        res = transfer_learn(load_params(init), train_set, mcfg, mtl, valid_set, policy,
                             log_path=out / "train_log.tsv")
    save_params(out / "model.ckpt", res.params)
    (out / "best_epoch.txt").write_text(f"{res.best_epoch}\n", encoding="utf-8")
    files += [out / "model.ckpt", out / "train_log.tsv", out / "best_epoch.txt"]
    write_stage_manifest(out, files)
    return out / "model.ckpt"


def lm_sentences(m: Manifest) -> list[list[str]]:
    return [transcript_chars(r.transcript) for r in m]


def stage_train_lm(cfg: PipelineConfig, lay: Layout) -> None:
    require(lay.data / "train.tsv", lay.data / "valid.tsv")
    vocab = load_vocab(lay)
    train_m = Manifest.read(lay.data / "train.tsv")
    dev = lm_sentences(Manifest.read(lay.data / "valid.tsv").subset(*CHILD))
    words = [t for t in vocab.tokens[3:]]
    out = lay.lm
    out.mkdir(parents=True, exist_ok=True)
    files = [write_resolved(cfg, out)]
    comps = []
    lines = ["component\tdev_perplexity"]
    for tag in ("A", *CHILD):
        lm = train_ngram(lm_sentences(train_m.subset(tag)), cfg["lm.order"], vocab=words)
        write_arpa(lm, out / f"{tag}.arpa")
        files.append(out / f"{tag}.arpa")
        comps.append(lm)
        lines.append(f"{tag}\t{perplexity(lm, dev):.6f}")
    mix = interpolate(comps, dev, cfg["lm.grid_step"])
    lines.append(f"interpolated\t{perplexity(mix, dev):.6f}")
    (out / "weights.tsv").write_text(
        "component\tweight\n" + "".join(f"{t}\t{w:.2f}\n" for t, w in zip(("A", *CHILD), mix.weights)),
        encoding="utf-8")
    (out / "perplexity.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    rcfg = RnnLmConfig(embed_dim=cfg["rnnlm.embed_dim"], hidden=cfg["rnnlm.hidden"], layers=cfg["rnnlm.layers"],
                       epochs=cfg["rnnlm.epochs"], lr=cfg["rnnlm.lr"], seed=cfg.stage_seed("rnnlm"))
    rnn = train_rnnlm(lm_sentences(train_m), vocab, rcfg, dev)
    save_params(out / "rnnlm.ckpt", rnn.params)
    (out / "rnnlm_log.tsv").write_text(
        "epoch\ttrain_loss\tdev_perplexity\n" + "".join(f"{e}\t{l:.6f}\t{p:.6f}\n" for e, l, p in rnn.history),
        encoding="utf-8")
    files += [out / "weights.tsv", out / "perplexity.tsv", out / "rnnlm.ckpt", out / "rnnlm_log.tsv"]
    write_stage_manifest(out, files)


def load_interpolated(lay: Layout):
    require(lay.lm / "weights.tsv")
    weights = {}
    for line in (lay.lm / "weights.tsv").read_text(encoding="utf-8").splitlines()[1:]:
        tag, w = line.split("\t")
        weights[tag] = float(w)
    tags = list(weights)
    comps = []
    for t in tags:
        require(lay.lm / f"{t}.arpa")
        comps.append(read_arpa(lay.lm / f"{t}.arpa"))
    return InterpolatedLM(comps, np.array([weights[t] for t in tags]))


def load_rnnlm(cfg: PipelineConfig, lay: Layout, vocab: Vocabulary) -> RnnLm:
    require(lay.lm / "rnnlm.ckpt")
    rcfg = RnnLmConfig(embed_dim=cfg["rnnlm.embed_dim"], hidden=cfg["rnnlm.hidden"], layers=cfg["rnnlm.layers"])
    return RnnLm(load_params(lay.lm / "rnnlm.ckpt"), vocab, rcfg)


def stage_decode(cfg: PipelineConfig, lay: Layout, model: Path, name: str, with_lm: bool,
                 split: str = "test") -> Path:
    vocab = load_vocab(lay)
    require(model)
    lm = load_interpolated(lay) if with_lm else None
    examples = split_examples(lay, split, CHILD, vocab)
    mcfg = model_config(cfg, len(vocab))
    params = load_params(model)
    out = lay.decode
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.hyps.tsv"
    decode_corpus(examples, params, mcfg, vocab, decode_config(cfg, with_lm), lm, path)
    return path


def stage_rescore(cfg: PipelineConfig, lay: Layout, hyps_path: Path, name: str) -> Path:
    require(hyps_path)
    vocab = load_vocab(lay)
    rnn = load_rnnlm(cfg, lay, vocab)
    hyps = read_hypotheses(hyps_path)
    out: dict = {}
    for utt, rows in hyps.items():
        ranked = rescore_nbest(rows, rnn.sentence_logprob, cfg["rescore.weight"], cfg["decode.ctc_weight"],
                               cfg["decode.lm_weight"])
        out[utt] = []
        for rank, r in enumerate(ranked, 1):
            row = r.row
            row = type(row)(row.utt_id, rank, r.final, row.ctc, row.att, row.lm, row.text)
            out[utt].append(row)
    path = lay.decode / f"{name}.hyps.tsv"
    write_hypotheses(path, out)
    return path


def write_decode_manifest(cfg: PipelineConfig, lay: Layout) -> None:
    files = [write_resolved(cfg, lay.decode)]
    files += [p for p in lay.decode.iterdir() if p.is_file() and p.name != "MANIFEST.tsv"]
    write_stage_manifest(lay.decode, files)


def stage_score(cfg: PipelineConfig, lay: Layout, hyps_path: Path, split: str = "test"):
    require(hyps_path, lay.data / f"{split}.tsv")
    ref_m = Manifest.read(lay.data / f"{split}.tsv").subset(*CHILD)
    refs = {r.utt_id: r.transcript for r in ref_m}
    hyps = best_texts(read_hypotheses(hyps_path))
    report = score_corpus(refs, hyps, ref_m, exclude_unk=cfg["score.exclude_unk"])
    stem = hyps_path.name.replace(".hyps.tsv", "")
    (hyps_path.parent / f"{stem}.score.txt").write_text(format_report(report, stem), encoding="utf-8")
    (hyps_path.parent / f"{stem}.score.tsv").write_text(report_tsv(report), encoding="utf-8")
    return report


# ---------------------------------------------------------------- end to end

BANNER = (
    "Desk-scale synthetic reproduction. Absolute CER values are NOT expected to\n"
    "match the published ones; only the row structure and directions are comparable.\n"
)


def reproduce(cfg: PipelineConfig, lay: Layout) -> dict[str, float]:
    """Every stage end to end; writes ``results/results.txt`` and ``results/results.tsv``."""
    stage_gen_corpus(cfg, lay)
    stage_prep(cfg, lay)
    adult = stage_train(cfg, lay, "adult_only", ("A",))
    child = stage_train(cfg, lay, "child_only", CHILD)
    transfer = stage_train(cfg, lay, "transfer", CHILD, init=adult)
    transfer_aug = stage_train(cfg, lay, "transfer_aug", CHILD, init=adult, others=True)
    stage_train_lm(cfg, lay)
    reports = {}
    for name, model in (("adult_only", adult), ("child_only", child), ("transfer", transfer),
                        ("transfer_aug", transfer_aug)):
        reports[name] = stage_score(cfg, lay, stage_decode(cfg, lay, model, name, with_lm=False))
    fused = stage_decode(cfg, lay, transfer_aug, "transfer_aug_ngram", with_lm=True)
    reports["transfer_aug_ngram"] = stage_score(cfg, lay, fused)
    rescored = stage_rescore(cfg, lay, fused, "transfer_aug_ngram_rnn")
    reports["transfer_aug_ngram_rnn"] = stage_score(cfg, lay, rescored)
    write_decode_manifest(cfg, lay)

    out = lay.results
    out.mkdir(parents=True, exist_ok=True)
    txt = [BANNER, "Training strategies (CER on combined C1+C2 test)", f"{'strategy':<20}{'CER':>9}"]
    tsv = ["table\trow\tcolumn\tvalue"]
    t2 = (("Adult only", "adult_only"), ("Child only", "child_only"), ("Transfer learning", "transfer"))
    for label, key in t2:
        txt.append(f"{label:<20}{100 * reports[key].cer:>8.2f}%")
        tsv.append(f"2\t{label}\tCER\t{reports[key].cer:.6f}")
    txt += ["", "Read (C1) vs conversational (C2) test speech",
            f"{'strategy':<20}{'C1 CER':>9}{'C1 std':>9}{'C2 CER':>9}{'C2 std':>9}"]
    for label, key in t2:
        r = reports[key]
        cells = []
        for tag in CHILD:
            g = r.subsets.get(tag)
            cer, std = (g.cer, g.speaker_std) if g else (float("nan"), float("nan"))
            cells.append(f"{100 * cer:>8.2f}%{100 * std:>8.2f}%")
            tsv.append(f"3\t{label}\t{tag} CER\t{cer:.6f}")
            tsv.append(f"3\t{label}\t{tag} std\t{std:.6f}")
        txt.append(f"{label:<20}" + "".join(cells))
    txt += ["", "Augmentation and language models (transfer-learned model)",
            f"{'augmentation':<16}{'LM':<18}{'CER':>9}"]
    t4 = (("speed", "-", "transfer"), ("speed+others", "-", "transfer_aug"),
          ("speed+others", "4-gram (C)", "transfer_aug_ngram"),
          ("speed+others", "4-gram+RNN (C)", "transfer_aug_ngram_rnn"))
    for aug, lmname, key in t4:
        txt.append(f"{aug:<16}{lmname:<18}{100 * reports[key].cer:>8.2f}%")
        tsv.append(f"4\t{aug} / {lmname}\tCER\t{reports[key].cer:.6f}")
    (out / "results.txt").write_text("\n".join(txt) + "\n", encoding="utf-8")
    (out / "results.tsv").write_text("\n".join(tsv) + "\n", encoding="utf-8")
    write_resolved(cfg, out)
    write_stage_manifest(lay.root, [p for p in lay.root.rglob("*") if p.is_file() and p.name != "MANIFEST.tsv"
                                    and "cache" not in p.parts])
    return {k: r.cer for k, r in reports.items()}
