from pathlib import Path

import pytest

from swaprl.cli import main
from swaprl.config import (ConfigError, RunConfig, dump_config, load_config,
                           parse_config_text)

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Small corpus with vocab and priors built through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.smi"
    lines = (DATA / "corpus_10k.smi").read_text().splitlines()[:150]
    corpus.write_text("\n".join(lines) + "\n")
    rc = main([
        "vocab", "build",
        "--corpus", str(corpus),
        "--vocab", str(root / "vocab.txt"),
        "--priors", str(root / "priors.tsv"),
    ])
    assert rc == 0
    return root


def _tiny_cfg(workdir, extra="") -> str:
    cfg = workdir / f"cfg{abs(hash(extra)) % 10_000}.cfg"
    cfg.write_text(
        f"""
corpus = {workdir}/corpus.smi
vocab = {workdir}/vocab.txt
priors = {workdir}/priors.tsv
d_hidden = 16
n_layers = 2
epochs = 1
steps_per_epoch = 32
steps_per_collect = 12
pretrain_batch_size = 32
sample_n = 25
seed = 3
threads = 1
"""
        + extra
    )
    return str(cfg)


def test_vocab_build_outputs(workdir):
    assert (workdir / "vocab.txt").read_text().splitlines()[:3] == [
        "[BOS]", "[EOS]", "[PAD]"]
    assert "\t" in (workdir / "priors.tsv").read_text().splitlines()[0]


def test_unknown_subcommand_exits_one():
    assert main(["frobnicate"]) == 1


def test_unknown_config_key_exits_one(workdir, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 1\n")
    assert main(["train", "--config", str(bad)]) == 1


def test_frl_without_checkpoint_exits_one(workdir):
    cfg = _tiny_cfg(workdir)
    assert main(["train", "--config", cfg, "--mode", "frl",
                 "--out-dir", str(workdir / "frl")]) == 1


def test_train_sample_repair_eval_oracle(workdir):
    cfg = _tiny_cfg(workdir)
    out = workdir / "run"
    assert main(["train", "--config", cfg, "--mode", "prl",
                 "--out-dir", str(out)]) == 0
    assert (out / "final.ckpt").exists()
    assert (out / "episodes.log").exists()
    assert (out / "effective.cfg").exists()

    samples = workdir / "samples.smi"
    assert main(["sample", "--config", cfg, "--checkpoint", str(out / "final.ckpt"),
                 "--n", "25", "--out", str(samples)]) == 0
    assert len(samples.read_text().splitlines()) == 25

    repaired = workdir / "repaired.tsv"
    assert main(["repair", "--config", cfg, "--in", str(samples),
                 "--out", str(repaired)]) == 0
    rows = repaired.read_text().splitlines()
    assert len(rows) == 25
    assert all(len(r.split("\t")) == 4 for r in rows)

    report = workdir / "report.txt"
    assert main(["eval", "--config", cfg, "--samples", str(samples),
                 "--report", str(report)]) == 0
    assert "validity = " in report.read_text()

    judg = workdir / "judgments.tsv"
    assert main(["oracle-export", "--config", cfg, "--samples", str(samples),
                 "--out", str(judg)]) == 0
    rows = judg.read_text().splitlines()
    assert rows[0] == "idx\tsmiles\tparse_ok\tchem_problems"
    assert len(rows) == 26


def test_oracle_export_judgments(workdir, tmp_path):
    samples = tmp_path / "s.smi"
    samples.write_text("CCO\nC(C\n")
    out = tmp_path / "j.tsv"
    assert main(["oracle-export", "--samples", str(samples), "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[1] == "0\tCCO\t1\t0"
    assert rows[2] == "1\tC(C\t0\t"


def test_sample_checkpoint_vocab_mismatch(workdir, tmp_path):
    cfg = _tiny_cfg(workdir)
    out = workdir / "run"
    # rebuild a different vocabulary and try to sample with it
    corpus2 = tmp_path / "c2.smi"
    corpus2.write_text("CC\nCO\n")
    assert main(["vocab", "build", "--corpus", str(corpus2),
                 "--vocab", str(tmp_path / "v2.txt"),
                 "--priors", str(tmp_path / "p2.tsv")]) == 0
    rc = main(["sample", "--config", cfg, "--vocab", str(tmp_path / "v2.txt"),
               "--checkpoint", str(out / "final.ckpt"),
               "--n", "5", "--out", str(tmp_path / "s.smi")])
    assert rc == 1


def test_config_round_trip(tmp_path):
    cfg = RunConfig(seed=9, d_hidden=32, mode="frl")
    path = tmp_path / "c.cfg"
    path.write_text(dump_config(cfg))
    loaded = load_config(path)
    assert loaded == cfg


def test_config_rejects_bad_value():
    with pytest.raises(ConfigError):
        parse_config_text("seed = banana\n")


def test_config_lr_auto():
    cfg = RunConfig(mode="prl")
    assert cfg.resolved_lr() == 1e-4
    cfg.mode = "frl"
    assert cfg.resolved_lr() == 1e-8
    cfg.lr = 5e-5
    assert cfg.resolved_lr() == 5e-5


def test_prl_with_init_checkpoint_exits_one(workdir):
    cfg = _tiny_cfg(workdir)
    rc = main(["train", "--config", cfg, "--mode", "prl",
               "--init-checkpoint", str(workdir / "nope.ckpt"),
               "--out-dir", str(workdir / "x")])
    assert rc == 1


def test_oracle_export_unreadable_exits_two(tmp_path):
    rc = main(["oracle-export", "--samples", str(tmp_path / "missing.smi"),
               "--out", str(tmp_path / "o.tsv")])
    assert rc == 2
