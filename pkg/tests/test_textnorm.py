from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from childasr.errors import LexiconError, ParseError, PartitionError
from childasr.textnorm import (
    DIGIT_MAP,
    SPECIAL_TOKENS,
    SYLLABLE_FIXTURE,
    UNK_ID,
    Manifest,
    Utterance,
    Vocabulary,
    build_vocab,
    normalize_transcript,
    parse_pinyin,
    partition,
    read_lexicon,
    tokenize_chars,
    transcript_chars,
    write_lexicon,
)


def manifest_of(texts, subset="C1", per_speaker=1):
    return Manifest([Utterance(f"u{i}", f"a/{i}.f64", f"s{i // per_speaker}", subset, t)
                     for i, t in enumerate(texts)])


def test_normalize_examples():
    assert normalize_transcript("今天3号") == "今天三号"
    assert normalize_transcript("你好。") == "你好"
    assert normalize_transcript("我们 play 吧") == "我们 <unk> 吧"
    assert normalize_transcript("２０！") == "二零"


def test_digit_table_complete():
    assert [DIGIT_MAP[str(i)] for i in range(10)] == list("零一二三四五六七八九")


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet=st.sampled_from(list("你好我们3０Ab c,。！？<unk>- ")), max_size=20))
def test_normalize_idempotent(s):
    once = normalize_transcript(s)
    assert normalize_transcript(once) == once


def test_parse_pinyin_examples():
    e = parse_pinyin("zhong1")
    assert (e.initial, e.final, e.tone) == ("zh", "ong", 1)
    e = parse_pinyin("a4")
    assert (e.initial, e.final, e.tone) == ("", "a", 4)
    assert parse_pinyin("ma").tone == 5
    with pytest.raises(LexiconError):
        parse_pinyin("xq9")


@pytest.mark.parametrize("syl", SYLLABLE_FIXTURE)
def test_parse_pinyin_round_trip(syl):
    assert parse_pinyin(syl).spelled() == syl


def test_lexicon_file_round_trip(tmp_path):
    entries = [("中", parse_pinyin("zhong1")), ("啊", parse_pinyin("a4"))]
    write_lexicon(entries, tmp_path / "lex.tsv")
    assert read_lexicon(tmp_path / "lex.tsv") == entries
    (tmp_path / "bad.tsv").write_text("中\tzhong1\n", encoding="utf-8")
    with pytest.raises(ParseError):
        read_lexicon(tmp_path / "bad.tsv")


def test_vocab_examples():
    v = build_vocab([manifest_of(["你好", "好的"])])
    assert len(v) == 6
    assert tuple(v.tokens[:3]) == SPECIAL_TOKENS
    assert build_vocab([manifest_of(["你好", "好的"])]).tokens == v.tokens
    with pytest.raises(ValueError):
        build_vocab([Manifest([])])


def test_vocab_save_load(tmp_path):
    v = build_vocab([manifest_of(["你好"])])
    v.save(tmp_path / "v.txt")
    assert Vocabulary.load(tmp_path / "v.txt") == v


def test_tokenize_examples():
    v = build_vocab([manifest_of(["你好"])])
    assert tokenize_chars("你好", v) == [v.id("你"), v.id("好")]
    assert tokenize_chars("", v) == []
    assert tokenize_chars("你猫", v) == [v.id("你"), UNK_ID]
    assert tokenize_chars("你 <unk> 好", v) == [v.id("你"), UNK_ID, v.id("好")]


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.sampled_from(list("你好猫 \t")), max_size=15))
def test_tokenize_length(s):
    v = build_vocab([manifest_of(["你好"])])
    assert len(tokenize_chars(s, v)) == sum(1 for ch in s if not ch.isspace())
    assert len(transcript_chars(s)) == len(tokenize_chars(s, v))


def test_manifest_round_trip(tmp_path):
    m = manifest_of(["你好", "我们"])
    m.write(tmp_path / "m.tsv")
    assert Manifest.read(tmp_path / "m.tsv") == m
    (tmp_path / "bad.tsv").write_text("u1\tpath\n", encoding="utf-8")
    with pytest.raises(ParseError):
        Manifest.read(tmp_path / "bad.tsv")


def test_manifest_rejects_duplicates_and_bad_subset():
    with pytest.raises(ValueError):
        Manifest([Utterance("u", "p", "s", "A", "x"), Utterance("u", "p", "s", "A", "y")])
    with pytest.raises(ValueError):
        Manifest([Utterance("u", "p", "s", "B", "x")])


def test_partition_proportions_and_disjointness():
    m = manifest_of(["好"] * 1000, subset="A", per_speaker=10)
    tr, va, te = partition(m, seed=3)
    assert abs(len(tr) - 810) <= 10 and abs(len(va) - 90) <= 10 and abs(len(te) - 100) <= 10
    spk = [set(r.speaker_id for r in s) for s in (tr, va, te)]
    assert not (spk[0] & spk[1]) and not (spk[0] & spk[2]) and not (spk[1] & spk[2])
    assert Counter(r.utt_id for s in (tr, va, te) for r in s) == Counter(r.utt_id for r in m)
    assert partition(m, seed=3) == (tr, va, te)


def test_partition_per_subset_and_errors():
    recs = [Utterance(f"{t}{i}", "p", f"{t}s{i // 2}", t, "好") for t in ("A", "C1") for i in range(20)]
    tr, va, te = partition(Manifest(recs), seed=0)
    for s in (tr, va, te):
        assert {r.subset for r in s} == {"A", "C1"}
    with pytest.raises(PartitionError):
        partition(manifest_of(["好"] * 4, per_speaker=2))
    with pytest.raises(PartitionError):
        partition(manifest_of(["好"] * 9), ratios=(0.5, 0.5, 0.1))
