import pytest

from childasr.cli import main
from childasr.config import DEFAULTS, PipelineConfig
from childasr.errors import ConfigError

TINY = ["--set", "corpus.A.speakers=4", "--set", "corpus.A.utts=4", "--set", "corpus.C1.speakers=3",
        "--set", "corpus.C1.utts=4", "--set", "corpus.C2.speakers=3", "--set", "corpus.C2.utts=4",
        "--set", "decode.beam_width=2", "--set", "decode.nbest=2"]


def test_defaults_round_trip():
    cfg = PipelineConfig()
    again = PipelineConfig.from_text(cfg.render())
    assert again.values == cfg.values
    assert list(cfg.values) == list(DEFAULTS)


def test_config_parsing_and_errors(tmp_path):
    cfg = PipelineConfig.from_text("seed = 7  # comment\naugment.speed_factors = 0.8, 1.2\ntrain.select_best = off\n")
    assert cfg["seed"] == 7 and cfg["augment.speed_factors"] == (0.8, 1.2) and cfg["train.select_best"] is False
    with pytest.raises(ConfigError, match="model.depth"):
        PipelineConfig.from_text("model.depth = 3\n")
    with pytest.raises(ConfigError, match="train.lr"):
        PipelineConfig.from_text("train.lr = fast\n")
    with pytest.raises(ConfigError, match=":2:"):
        PipelineConfig.from_text("seed = 1\nno equals sign\n")
    with pytest.raises(ConfigError):
        PipelineConfig.load(tmp_path / "absent.cfg")


def test_stage_seeds_distinct_and_stable():
    a, b = PipelineConfig(), PipelineConfig({"seed": 1})
    assert a.stage_seed("corpus") == PipelineConfig().stage_seed("corpus")
    assert a.stage_seed("corpus") != a.stage_seed("partition")
    assert a.stage_seed("corpus") != b.stage_seed("corpus")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_error_line_for_unknown_key(tmp_path, capsys):
    code, _, err = run(capsys, "prep", "--work-dir", str(tmp_path), "--set", "bogus.key=1")
    assert code == 2
    kind, msg = err.strip().split("\t")[1:]
    assert kind == "config" and "bogus.key" in msg


def test_missing_dependency(tmp_path, capsys):
    code, _, err = run(capsys, "prep", "--work-dir", str(tmp_path))
    assert code == 2 and err.startswith("error\tmissing-dependency\t")
    code, _, err = run(capsys, "train", "--name", "x", "--work-dir", str(tmp_path))
    assert code == 2 and "missing-dependency" in err


def test_cli_flow_untrained_model(tmp_path, capsys):
    wd = ["--work-dir", str(tmp_path)]
    assert run(capsys, "gen-corpus", *wd, *TINY)[0] == 0
    assert run(capsys, "prep", *wd, *TINY)[0] == 0
    first = {p.name: p.read_bytes() for p in (tmp_path / "data").iterdir() if p.is_file()}
    # rerunning a stage reproduces its outputs
    assert run(capsys, "prep", *wd, *TINY)[0] == 0
    assert {p.name: p.read_bytes() for p in (tmp_path / "data").iterdir() if p.is_file()} == first
    resolved = (tmp_path / "data" / "config.resolved").read_text()
    assert "corpus.A.speakers = 4" in resolved and "decode.beam_width = 2" in resolved

    code, out, _ = run(capsys, "train", "--name", "raw", *wd, *TINY, "--set", "train.epochs=0")
    assert code == 0
    ckpt = out.strip()
    code, out, _ = run(capsys, "decode", "--model", ckpt, "--name", "raw", *wd, *TINY)
    assert code == 0
    code, out, _ = run(capsys, "score", "--hyps", out.strip(), *wd, *TINY)
    assert code == 0
    label, value = out.strip().split("\t")
    assert label == "CER" and float(value) > 0.8
    manifest = (tmp_path / "decode" / "MANIFEST.tsv").read_text().splitlines()
    assert any(line.startswith("raw.hyps.tsv\t") for line in manifest)
