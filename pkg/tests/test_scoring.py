import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import edit_recursive

from childasr.errors import ScoringError
from childasr.scoring import EditCounts, edit_distance, format_report, report_tsv, score_corpus
from childasr.textnorm import Manifest, Utterance


def test_cat_cut():
    c = edit_distance("cat", "cut")
    assert (c.sub, c.ins, c.dele, c.ref_len) == (1, 0, 0, 3)
    assert c.cer == pytest.approx(1 / 3, abs=1e-15)


def test_edge_cases():
    assert edit_distance("", "").cer == 0.0
    assert edit_distance("", "ab") == EditCounts(0, 2, 0, 0)
    assert edit_distance("ab", "") == EditCounts(0, 0, 2, 2)
    assert edit_distance("abc", "abc").errors == 0


def test_brute_force_pairs():
    rng = np.random.default_rng(0)
    for _ in range(500):
        a = "".join(rng.choice(list("abc"), size=rng.integers(0, 9)))
        b = "".join(rng.choice(list("abc"), size=rng.integers(0, 9)))
        c = edit_distance(a, b)
        assert c.errors == edit_recursive(a, b)
        assert c.ref_len == len(a)
        # counts describe a real alignment
        assert len(a) - c.dele + c.ins == len(b)


@settings(max_examples=200, deadline=None)
@given(*(st.text(alphabet="xyz", max_size=6) for _ in range(3)))
def test_metric_properties(a, b, c):
    d = lambda u, v: edit_distance(u, v).errors  # noqa: E731
    assert d(a, b) == d(b, a)
    assert d(a, c) <= d(a, b) + d(b, c)
    assert (d(a, b) == 0) == (a == b)


def utt(i, spk, subset, text):
    return Utterance(f"u{i}", f"a/{i}", spk, subset, text)


def test_pooled_cer_and_speaker_std():
    m = Manifest([utt(0, "s1", "C1", "abcde"), utt(1, "s1", "C1", "abcde"),
                  utt(2, "s2", "C1", "abcde"), utt(3, "s2", "C1", "abcde")])
    refs = {r.utt_id: r.transcript for r in m}
    # s1: 1 error in 10, s2: 3 errors in 10
    hyps = {"u0": "abcdx", "u1": "abcde", "u2": "xbcdx", "u3": "abcdx"}
    rep = score_corpus(refs, hyps, m)
    assert rep.cer == pytest.approx(0.2, abs=1e-15)
    assert rep.subsets["C1"].per_speaker == pytest.approx({"s1": 0.1, "s2": 0.3})
    assert rep.subsets["C1"].speaker_std == pytest.approx(0.1, abs=1e-12)
    assert "overall" in format_report(rep) and report_tsv(rep).startswith("group\t")


def test_pooled_is_not_mean_of_rates():
    m = Manifest([utt(0, "s1", "C1", "a"), utt(1, "s2", "C1", "abcdefghij")])
    rep = score_corpus({"u0": "a", "u1": "abcdefghij"}, {"u0": "b", "u1": "abcdefghij"}, m)
    assert rep.cer == pytest.approx(1 / 11)


def test_order_and_grouping_invariance():
    rng = np.random.default_rng(1)
    recs = [utt(i, f"s{i % 3}", ("C1", "C2")[i % 2], "".join(rng.choice(list("abc"), 5))) for i in range(12)]
    refs = {r.utt_id: r.transcript for r in recs}
    hyps = {r.utt_id: "".join(rng.choice(list("abc"), 4)) for r in recs}
    base = score_corpus(refs, hyps, Manifest(recs))
    for perm in itertools.islice(itertools.permutations(range(12)), 0, 2000, 400):
        shuffled = Manifest([recs[i] for i in perm])
        assert score_corpus(dict(reversed(refs.items())), hyps, shuffled).overall.counts == base.overall.counts
    total = base.subsets["C1"].counts + base.subsets["C2"].counts
    assert total == base.overall.counts


def test_missing_hypothesis_and_errors():
    m = Manifest([utt(0, "s", "C1", "ab")])
    assert score_corpus({"u0": "ab"}, {}, m).cer == 1.0
    with pytest.raises(ScoringError):
        score_corpus({"u0": "ab"}, {"zz": "a"}, m)
    with pytest.raises(ScoringError):
        score_corpus({}, {}, m)


def test_exclude_unk():
    m = Manifest([utt(0, "s", "C1", "a <unk>"), utt(1, "s", "C1", "ab")])
    refs = {r.utt_id: r.transcript for r in m}
    rep = score_corpus(refs, {"u0": "zz", "u1": "ab"}, m, exclude_unk=True)
    assert rep.cer == 0.0 and "u0" not in rep.per_utterance
