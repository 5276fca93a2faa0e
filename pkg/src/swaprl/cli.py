"""Command-line entry point: vocab build, pretrain, train, sample, repair,
eval, oracle-export. Exit codes: 0 success, 1 validation error, 2 runtime
error."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from .checkpoint import (Checkpoint, CheckpointError, load_checkpoint,
                         load_into_module, save_checkpoint, tensors_from_module)
from .config import ConfigError, RunConfig, apply_overrides, dump_config, load_config
from .metrics import evaluate, format_report, repair_stats, scaffold_stats
from .molparse import MolGraph, canonicalize, parse_smiles
from .chemcheck import detect_problems
from .policy import GruActor, GruCritic, param_count, sample_sequence
from .pretrain import pretrain
from .swap_reward import episode_rng, reward as score_episode
from .trainer import train as ppo_train
from .vocab import (TokenizeError, TokenPriors, VocabError, Vocabulary,
                    build_vocabulary, compute_priors)


class CliError(Exception):
    """Validation failure; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise CliError(message)


def _read_lines(path: str) -> list[str]:
    return [
        ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()
    ]


def _load_run_config(args, overrides: dict[str, object]) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return apply_overrides(cfg, overrides)


def _require(cfg: RunConfig, *keys: str) -> None:
    for key in keys:
        if not getattr(cfg, key):
            raise CliError(f"missing required config key {key!r}")


def _apply_threads(cfg: RunConfig) -> None:
    if cfg.threads > 0:
        torch.set_num_threads(cfg.threads)


def _build_models(cfg: RunConfig, n_tokens: int) -> tuple[GruActor, GruCritic]:
    d_embed = cfg.d_embed if cfg.d_embed > 0 else None
    if cfg.head_concat not in ("top", "all"):
        raise CliError(f"head_concat must be top or all, got {cfg.head_concat!r}")
    wide = cfg.head_concat == "all"
    actor = GruActor(n_tokens, cfg.d_hidden, cfg.n_layers, d_embed,
                     cfg.dropout, init_seed=cfg.seed, wide_head=wide)
    critic = GruCritic(n_tokens, cfg.d_hidden, cfg.n_layers, d_embed,
                       cfg.dropout, init_seed=cfg.seed + 1, wide_head=wide)
    return actor, critic


def _check_vocab_hash(ckpt, v: Vocabulary, path: str) -> None:
    if ckpt.vocab_hash != v.content_hash():
        raise CliError(
            f"checkpoint {path} was written for a different vocabulary"
        )


def cmd_vocab_build(args, overrides) -> int:
    cfg = _load_run_config(args, overrides)
    _require(cfg, "corpus", "vocab", "priors")
    lines = _read_lines(cfg.corpus)
    v = build_vocabulary(lines)
    v.save(cfg.vocab)
    priors = compute_priors(lines, v)
    priors.save(cfg.priors, v)
    print(f"vocabulary: {len(v)} tokens -> {cfg.vocab}")
    print(f"priors -> {cfg.priors}")
    return 0


def cmd_pretrain(args, overrides) -> int:
    cfg = _load_run_config(args, overrides)
    _require(cfg, "corpus", "vocab", "out_dir")
    _apply_threads(cfg)
    v = Vocabulary.load(cfg.vocab)
    lines = _read_lines(cfg.corpus)
    actor, _ = _build_models(cfg, len(v))
    state, log, skipped = pretrain(lines, v, cfg.pretrain_cfg(), actor, cfg.seed)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tensors = tensors_from_module(actor, "actor")
    opt = {f"adam_m/{k}": t.detach().numpy() for k, t in state.m.items()}
    opt.update({f"adam_v/{k}": t.detach().numpy() for k, t in state.v.items()})
    opt["adam/step"] = np.array(float(state.step), dtype=np.float32)
    save_checkpoint(
        out / "pretrained.ckpt",
        Checkpoint(tensors, opt, cfg.seed, v.content_hash(), param_count(actor)),
    )
    (out / "pretrain.log").write_text("\n".join(log) + "\n", encoding="utf-8")
    (out / "effective.cfg").write_text(dump_config(cfg), encoding="utf-8")
    if skipped:
        print(f"skipped {skipped} over-long corpus lines")
    print(f"checkpoint -> {out / 'pretrained.ckpt'}")
    return 0


def cmd_train(args, overrides) -> int:
    cfg = _load_run_config(args, overrides)
    if cfg.mode not in ("prl", "frl"):
        raise CliError(f"mode must be prl or frl, got {cfg.mode!r}")
    _require(cfg, "vocab", "priors", "out_dir")
    if cfg.mode == "frl" and not cfg.init_checkpoint:
        raise CliError("frl requires init_checkpoint")
    if cfg.mode == "prl" and cfg.init_checkpoint:
        raise CliError("prl does not take an init_checkpoint")
    _apply_threads(cfg)
    v = Vocabulary.load(cfg.vocab)
    priors = TokenPriors.load(cfg.priors, v)
    actor, critic = _build_models(cfg, len(v))
    if cfg.mode == "frl":
        ckpt = load_checkpoint(cfg.init_checkpoint)
        _check_vocab_hash(ckpt, v, cfg.init_checkpoint)
        load_into_module(actor, ckpt.tensors, "actor")
    result = ppo_train(
        actor, critic, v, priors, cfg.ppo(), cfg.swap_reward_cfg(), cfg.seed, cfg.out_dir
    )
    (Path(cfg.out_dir) / "effective.cfg").write_text(dump_config(cfg), encoding="utf-8")
    print(f"episodes: {len(result.episodes)}  best_return: {result.best_return:.6f}")
    print(f"final -> {result.final_path}")
    return 0


def cmd_sample(args, overrides) -> int:
    cfg = _load_run_config(args, overrides)
    _require(cfg, "vocab", "checkpoint", "samples")
    _apply_threads(cfg)
    v = Vocabulary.load(cfg.vocab)
    ckpt = load_checkpoint(cfg.checkpoint)
    _check_vocab_hash(ckpt, v, cfg.checkpoint)
    actor, _ = _build_models(cfg, len(v))
    load_into_module(actor, ckpt.tensors, "actor")
    gen = torch.Generator().manual_seed(cfg.seed)
    out_lines = []
    for _ in range(cfg.sample_n):
        seq, _, _ = sample_sequence(actor, v.bos, v.eos, gen, cfg.t_max)
        out_lines.append(v.detokenize(seq))
    Path(cfg.samples).write_text("\n".join(out_lines) + "\n", encoding="utf-8")
    print(f"{cfg.sample_n} samples -> {cfg.samples}")
    return 0


def cmd_repair(args, overrides) -> int:
    cfg = _load_run_config(args, overrides)
    _require(cfg, "corpus", "vocab", "priors", "samples", "report")
    v = Vocabulary.load(cfg.vocab)
    priors = TokenPriors.load(cfg.priors, v)
    reward_cfg = cfg.swap_reward_cfg()
    lines = Path(cfg.samples).read_text(encoding="utf-8").splitlines()
    out = []
    for i, line in enumerate(lines):
        line = line.strip()
        try:
            toks = v.tokenize(line)
        except TokenizeError:
            toks = []
        b = score_episode(toks, v, priors, reward_cfg, episode_rng(cfg.seed, i))
        repaired = (
            v.detokenize(b.repaired_sequence) if b.repaired_sequence is not None else ""
        )
        out.append(f"{line}\t{repaired}\t{b.path.value}\t{b.reward:.6f}")
    Path(cfg.report).write_text("\n".join(out) + "\n", encoding="utf-8")
    print(f"{len(out)} rows -> {cfg.report}")
    return 0


def cmd_eval(args, overrides) -> int:
    cfg = _load_run_config(args, overrides)
    _require(cfg, "samples", "corpus", "report")
    samples = Path(cfg.samples).read_text(encoding="utf-8").splitlines()
    train_lines = _read_lines(cfg.corpus)
    train_canon: set[str] = set()
    train_graphs = []
    for line in train_lines:
        g = parse_smiles(line.strip())
        if isinstance(g, MolGraph) and g.atoms:
            train_canon.add(canonicalize(g))
            train_graphs.append(g)
    report = evaluate(samples, train_canon)
    if args.scaffolds:
        gen_graphs = []
        for line in samples:
            g = parse_smiles(line.strip())
            if isinstance(g, MolGraph) and g.atoms and detect_problems(g).count == 0:
                gen_graphs.append(g)
        if gen_graphs and train_graphs:
            count, sim, defined = scaffold_stats(gen_graphs, train_graphs)
            report.scaffold_count = count
            report.scaffold_similarity = sim if defined else 0.0
    Path(cfg.report).write_text(format_report(report), encoding="utf-8")
    print(format_report(report), end="")
    return 0


def cmd_oracle_export(args, overrides) -> int:
    cfg = _load_run_config(args, overrides)
    _require(cfg, "samples", "report")
    try:
        lines = Path(cfg.samples).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        print(f"cannot read samples: {e}", file=sys.stderr)
        return 2
    rows = ["idx\tsmiles\tparse_ok\tchem_problems"]
    for i, line in enumerate(lines):
        line = line.strip()
        g = parse_smiles(line) if line else None
        if isinstance(g, MolGraph) and g.atoms:
            rows.append(f"{i}\t{line}\t1\t{detect_problems(g).count}")
        else:
            rows.append(f"{i}\t{line}\t0\t")
    Path(cfg.report).write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"{len(lines)} judgments -> {cfg.report}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="swaprl")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", help="vocabulary utilities")
    vsub = p.add_subparsers(dest="vocab_command", required=True)
    pb = vsub.add_parser("build")
    _add_common(pb)
    pb.add_argument("--corpus")
    pb.add_argument("--vocab")
    pb.add_argument("--priors")
    pb.set_defaults(func=cmd_vocab_build)

    p = sub.add_parser("pretrain")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--vocab")
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train")
    _add_common(p)
    p.add_argument("--mode", choices=["prl", "frl"], default=None)
    p.add_argument("--vocab")
    p.add_argument("--priors")
    p.add_argument("--init-checkpoint", dest="init_checkpoint")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample")
    _add_common(p)
    p.add_argument("--vocab")
    p.add_argument("--checkpoint")
    p.add_argument("--n", type=int, default=None, dest="sample_n")
    p.add_argument("--out", dest="samples")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("repair")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--vocab")
    p.add_argument("--priors")
    p.add_argument("--in", dest="samples")
    p.add_argument("--out", dest="report")
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("eval")
    _add_common(p)
    p.add_argument("--samples")
    p.add_argument("--corpus")
    p.add_argument("--report")
    p.add_argument("--scaffolds", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle-export")
    _add_common(p)
    p.add_argument("--samples")
    p.add_argument("--out", dest="report")
    p.set_defaults(func=cmd_oracle_export)

    return parser


_OVERRIDE_KEYS = (
    "seed", "threads", "mode", "corpus", "vocab", "priors", "out_dir",
    "init_checkpoint", "checkpoint", "samples", "report", "sample_n", "epochs",
)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = {
            k: getattr(args, k) for k in _OVERRIDE_KEYS if hasattr(args, k)
        }
        return args.func(args, overrides)
    except (CliError, ConfigError, VocabError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError, ValueError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
