import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from childasr.decode import HypRow
from childasr.errors import ParseError
from childasr.lm import (
    EOS,
    InterpolatedLM,
    RnnLmConfig,
    interpolate,
    perplexity,
    read_arpa,
    rescore_nbest,
    simplex_grid,
    train_ngram,
    train_rnnlm,
    write_arpa,
)
from childasr.textnorm import SPECIAL_TOKENS, Vocabulary

ALPHA = list("abcde")


def corpus(seed, n=40, alphabet=ALPHA, skew=None):
    rng = np.random.default_rng(seed)
    return [list(rng.choice(alphabet, size=rng.integers(1, 7), p=skew)) for _ in range(n)]


def test_unigram_fixture():
    lm = train_ngram([["a", "b"], ["a"]], order=1, vocab=["a", "b"])
    # counts a:2 b:1 </s>:2, 3 seen types, support {a, b, </s>, <unk>}
    expect = {"a": (2 + 3 / 4) / 8, "b": (1 + 3 / 4) / 8, EOS: (2 + 3 / 4) / 8, "<unk>": (3 / 4) / 8}
    for w, p in expect.items():
        assert math.isclose(math.exp(lm.logprob(w)), p, rel_tol=1e-12)


def test_bigram_hand_value():
    lm = train_ngram([["a", "b"], ["a", "a"]], order=2, vocab=["a", "b"])
    uni = {w: math.exp(lm.logprob(w)) for w in ("a", "b", EOS, "<unk>")}
    # history "a": c=3 (a b, a a, a </s>), 3 distinct followers
    want = (1 + 3 * uni["b"]) / 6
    assert math.isclose(math.exp(lm.logprob("b", ["a"])), want, rel_tol=1e-12)
    # unseen continuation backs off with weight 3/6
    assert math.isclose(math.exp(lm.logprob("<unk>", ["a"])), 0.5 * uni["<unk>"], rel_tol=1e-12)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_conditionals_normalise(order):
    lm = train_ngram(corpus(order), order=order, vocab=ALPHA)
    rng = np.random.default_rng(order)
    hists = [[], ["<s>"], ["<s>", "a"], list("abca"), list("eeee"), ["zz", "a"]]
    hists += [list(rng.choice(ALPHA, size=3)) for _ in range(20)]
    for h in hists:
        total = sum(math.exp(lm.logprob(w, h)) for w in lm.predictable())
        assert abs(total - 1.0) < 1e-6


def test_unknown_token_maps_to_unk():
    lm = train_ngram(corpus(0), order=3, vocab=ALPHA)
    assert lm.logprob("q", ["a", "b"]) == lm.logprob("<unk>", ["a", "b"])


def test_arpa_round_trip_byte_identical(tmp_path):
    lm = train_ngram(corpus(1, n=60), order=4, vocab=ALPHA)
    write_arpa(lm, tmp_path / "a.arpa")
    write_arpa(read_arpa(tmp_path / "a.arpa"), tmp_path / "b.arpa")
    assert (tmp_path / "a.arpa").read_bytes() == (tmp_path / "b.arpa").read_bytes()
    again = read_arpa(tmp_path / "a.arpa")
    total = sum(math.exp(again.logprob(w, ["a", "b", "c"])) for w in again.predictable())
    # six printed decimals in log10 space
    assert abs(total - 1.0) < 1e-5


def test_arpa_parse_errors(tmp_path):
    lm = train_ngram(corpus(2), order=2, vocab=ALPHA)
    write_arpa(lm, tmp_path / "ok.arpa")
    text = (tmp_path / "ok.arpa").read_text()
    bad = text.replace("ngram 2=", "ngram 2=9999\nngram 9=")
    (tmp_path / "bad.arpa").write_text(bad)
    with pytest.raises(ParseError):
        read_arpa(tmp_path / "bad.arpa")
    (tmp_path / "trunc.arpa").write_text(text.replace("\\end\\", ""))
    with pytest.raises(ParseError, match="trunc.arpa"):
        read_arpa(tmp_path / "trunc.arpa")


def test_perplexity_fixtures():
    lm = train_ngram([list("ab")], order=1, vocab=list("ab"))
    lp = lm.token_logprobs(list("ab"))
    assert lp.shape == (3,)
    assert math.isclose(perplexity(lm, [list("ab")]), math.exp(-lp.mean()), rel_tol=1e-12)
    # same quantity through base 10
    l10 = sum(lm.logprob10(w, h) for w, h in [("a", ["<s>"]), ("b", ["<s>", "a"]), (EOS, ["<s>", "a", "b"])])
    assert math.isclose(perplexity(lm, [list("ab")]), 10 ** (-l10 / 3), rel_tol=1e-12)
    with pytest.raises(ValueError):
        perplexity(lm, [])


def test_higher_order_fits_training_data_better():
    data = corpus(3, n=80)
    ppl = [perplexity(train_ngram(data, order=k, vocab=ALPHA), data) for k in (1, 2, 3, 4)]
    assert all(a > b for a, b in zip(ppl, ppl[1:]))


def test_simplex_grid():
    g = simplex_grid(3, 0.05)
    assert len(g) == math.comb(22, 2)
    assert all(abs(sum(w) - 1) < 1e-12 and min(w) >= 0 for w in g)
    assert (1.0, 0.0, 0.0) in g and (0.0, 0.0, 1.0) in g
    with pytest.raises(ValueError):
        simplex_grid(2, 0.3)


def test_interpolation_not_worse_than_components():
    comps = [train_ngram(corpus(s, skew=p), order=3, vocab=ALPHA)
             for s, p in [(4, None), (5, [0.6, 0.1, 0.1, 0.1, 0.1]), (6, [0.1, 0.1, 0.1, 0.1, 0.6])]]
    dev = corpus(7, n=30, skew=[0.3, 0.1, 0.1, 0.1, 0.4])
    mix = interpolate(comps, dev)
    assert perplexity(mix, dev) <= min(perplexity(c, dev) for c in comps) + 1e-9
    assert len(mix.grid) == len(simplex_grid(3, 0.05))
    for h in ([], ["a", "e"]):
        assert abs(sum(mix.prob(w, h) for w in mix.predictable()) - 1.0) < 1e-6


def test_interpolated_single_weight_is_component():
    comps = [train_ngram(corpus(s), order=2, vocab=ALPHA) for s in (8, 9)]
    mix = InterpolatedLM(comps, [1.0, 0.0])
    s = list("abcab")
    assert np.allclose(mix.token_logprobs(s), comps[0].token_logprobs(s), rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        InterpolatedLM(comps, [0.7, 0.7])


@settings(max_examples=20, deadline=None)
@given(st.lists(st.lists(st.sampled_from(ALPHA), min_size=1, max_size=6), min_size=1, max_size=10),
       st.integers(1, 4))
def test_normalisation_property(sents, order):
    lm = train_ngram(sents, order=order, vocab=ALPHA)
    for h in ([], sents[0][:3]):
        assert abs(sum(math.exp(lm.logprob(w, h)) for w in lm.predictable()) - 1.0) < 1e-6


def small_vocab():
    return Vocabulary(list(SPECIAL_TOKENS) + ALPHA)


def test_rnnlm_learns_and_normalises():
    data = [list("abcde")] * 20 + [list("edcba")] * 20
    cfg = RnnLmConfig(embed_dim=8, hidden=8, layers=1, epochs=15, lr=2e-2, batch_size=8)
    lm = train_rnnlm(data, small_vocab(), cfg, dev=data[:4])
    assert lm.history[-1][2] < lm.history[0][2]
    lp = lm.step_logprobs([3])
    assert abs(np.exp(lp).sum() - 1.0) < 1e-9
    assert lm.token_logprobs(list("abc")).shape == (4,)
    again = train_rnnlm(data, small_vocab(), cfg)
    assert again.sentence_logprob(list("abc")) == train_rnnlm(data, small_vocab(), cfg).sentence_logprob(list("abc"))


def nbest(seed, n=6):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        c, a, lm = rng.normal(-10, 3, size=3)
        rows.append(HypRow("u", 0, 0.3 * c + 0.7 * a + 0.5 * lm, c, a, lm, "abcde"[: i % 5 + 1]))
    rows.sort(key=lambda r: -r.combined)
    return rows


@pytest.mark.parametrize("seed", range(10))
def test_rescore_weight_zero_keeps_ranking(seed):
    rows = nbest(seed)
    out = rescore_nbest(rows, lambda s: float(len(s)), weight=0.0, ctc_weight=0.3, lm_scale=0.5)
    assert [r.row.text for r in out] == [r.text for r in rows]
    for r in out:
        assert math.isclose(r.final, r.row.combined, rel_tol=1e-12)


def test_rescore_full_weight_ranks_by_rnn():
    rows = [HypRow("u", i + 1, -1.0, -1.0, -1.0, -float(i), t) for i, t in enumerate(["a", "ab", "abc"])]
    out = rescore_nbest(rows, lambda s: float(len(s)), weight=1.0, ctc_weight=0.3, lm_scale=1.0)
    assert [r.row.text for r in out] == ["abc", "ab", "a"]
    with pytest.raises(ValueError):
        rescore_nbest([], lambda s: 0.0)
