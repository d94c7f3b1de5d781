import math

import numpy as np
import pytest

from oracles import ctc_brute, path_table, random_grid

from childasr.ctc import CtcPrefixScorer
from childasr.decode import (
    DecodeConfig,
    beam_search_core,
    best_texts,
    combine,
    decode_corpus,
    greedy_ctc_decode,
    read_hypotheses,
    write_hypotheses,
)
from childasr.errors import ConfigError, ParseError
from childasr.model import init_params

EOS = 3


def full_width(T, K, **kw):
    n = sum(K ** k for k in range(T + 1))
    return DecodeConfig(beam_width=n, nbest=1, **kw)


def test_greedy_ctc():
    lp = np.log(np.array([[.1, .8, .1], [.1, .8, .1], [.8, .1, .1], [.1, .8, .1], [.1, .1, .8]]))
    assert greedy_ctc_decode(lp) == [1, 1, 2]
    assert greedy_ctc_decode(np.zeros((3, 3))) == []


def test_config_validation():
    with pytest.raises(ConfigError):
        DecodeConfig(beam_width=2, nbest=3)
    with pytest.raises(ConfigError):
        DecodeConfig(ctc_weight=1.2)


def test_combine_drops_zero_weight_terms():
    assert combine(1.0, 0.0, -1.0, -math.inf, -math.inf) == -1.0
    assert combine(0.0, 0.0, -math.inf, -2.0, 5.0) == -2.0
    assert combine(0.5, 2.0, -1.0, -3.0, -1.0) == -4.0


@pytest.mark.parametrize("seed", range(20))
def test_pure_ctc_beam_matches_exhaustive(seed):
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, 5))
    lp = random_grid(rng, T, 2)
    table = path_table(lp)
    want = max(table, key=table.get)
    got = beam_search_core([1, 2], EOS, full_width(T, 2, ctc_weight=1.0), T, ctc_scorer=CtcPrefixScorer(lp))
    assert got[0].tokens == want
    assert abs(got[0].combined - table[want]) < 1e-10


def toy_att(seed, V=4):
    """A deterministic prefix-dependent next-token distribution."""
    def score(prefixes):
        out = []
        for p in prefixes:
            z = np.random.default_rng([seed, *p, 99]).normal(size=V) * 2
            z[0] = -np.inf
            out.append(z - np.logaddexp.reduce(z[1:]))
        return np.array(out)
    return score


def att_oracle(seed, max_len):
    score = toy_att(seed)
    best, best_s = None, -np.inf

    def walk(prefix, s):
        nonlocal best, best_s
        row = score([prefix])[0]
        end = s + row[EOS]
        if end > best_s:
            best, best_s = prefix, end
        if len(prefix) < max_len:
            for t in (1, 2):
                walk(prefix + (t,), s + row[t])

    walk((), 0.0)
    return best, best_s


@pytest.mark.parametrize("seed", range(10))
def test_pure_attention_beam_matches_exhaustive(seed):
    want, s = att_oracle(seed, 4)
    got = beam_search_core([1, 2], EOS, full_width(4, 2, ctc_weight=0.0), 4, att_scorer=toy_att(seed))
    assert got[0].tokens == want and abs(got[0].combined - s) < 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_beam_one_is_greedy_attention(seed):
    # follow the best label each step; the answer is the best-scoring ended prefix on that path
    score = toy_att(seed)
    prefix, s = (), 0.0
    best, best_s = None, -np.inf
    for step in range(7):
        row = score([prefix])[0]
        if s + row[EOS] > best_s:
            best, best_s = prefix, s + row[EOS]
        if step == 6:
            break
        tok = max((1, 2), key=lambda t: row[t])
        prefix, s = prefix + (tok,), s + row[tok]
    got = beam_search_core([1, 2], EOS, DecodeConfig(beam_width=1, nbest=1, ctc_weight=0.0), 6,
                           att_scorer=score)
    assert got[0].tokens == best and abs(got[0].combined - best_s) < 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_score_audit(seed):
    rng = np.random.default_rng(seed)
    lp = random_grid(rng, 4, 2)
    lm = toy_att(seed + 100)
    cfg = DecodeConfig(beam_width=4, nbest=4, ctc_weight=0.4, lm_weight=0.7)
    out = beam_search_core([1, 2], EOS, cfg, 4, CtcPrefixScorer(lp), toy_att(seed), lm)
    assert [h.combined for h in out] == sorted((h.combined for h in out), reverse=True)
    for h in out:
        assert h.finished
        assert abs(h.ctc - ctc_brute(lp, h.tokens)) < 1e-10
        att = lmv = 0.0
        for k, tok in enumerate(h.tokens + (EOS,)):
            att += toy_att(seed)([h.tokens[:k]])[0, tok]
            lmv += lm([h.tokens[:k]])[0, tok]
        assert abs(h.att - att) < 1e-10 and abs(h.lm - lmv) < 1e-10
        assert h.combined == combine(0.4, 0.7, h.ctc, h.att, h.lm)


def test_forced_ending_flagged():
    score = lambda ps: np.tile([-np.inf, -0.01, -0.02, -20.0], (len(ps), 1))  # noqa: E731
    out = beam_search_core([1, 2], EOS, DecodeConfig(beam_width=8, nbest=8, ctc_weight=0.0), 3, att_scorer=score)
    assert max(len(h.tokens) for h in out) == 3
    assert all(h.forced == (len(h.tokens) == 3) for h in out)


def test_decode_corpus_files(tiny_corpus, tmp_path):
    ex, cfg, vocab = tiny_corpus["examples"][:3], tiny_corpus["model_cfg"], tiny_corpus["vocab"]
    p = init_params(cfg, 0)
    dc = DecodeConfig(beam_width=3, nbest=2)
    a = decode_corpus(ex, p, cfg, vocab, dc, out_path=tmp_path / "a.tsv")
    b = decode_corpus(ex, p, cfg, vocab, dc, out_path=tmp_path / "b.tsv")
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()
    back = read_hypotheses(tmp_path / "a.tsv")
    assert back == a == b and set(best_texts(back)) == {e.utt_id for e in ex}
    assert all([r.rank for r in rows] == list(range(1, len(rows) + 1)) for rows in back.values())
    assert decode_corpus([], p, cfg, vocab, dc, out_path=tmp_path / "e.tsv") == {}
    assert read_hypotheses(tmp_path / "e.tsv") == {}


def test_hypothesis_file_errors(tmp_path):
    (tmp_path / "h.tsv").write_text("bad header\n")
    with pytest.raises(ParseError):
        read_hypotheses(tmp_path / "h.tsv")
    write_hypotheses(tmp_path / "ok.tsv", {})
    with open(tmp_path / "ok.tsv", "a") as fh:
        fh.write("u\t1\tx\t0\t0\t0\tab\n")
    with pytest.raises(ParseError, match=":2:"):
        read_hypotheses(tmp_path / "ok.tsv")
