"""Command-line entry point: ``ted-erc <subcommand> [options]``.

Every config key can be given as a flag (``--priority.gamma 3``) or with
``--set key=value``; flags override ``--config`` files. Exit codes: 0 ok,
1 usage/config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .config import RunConfig, format_config
from .cust import cust_encode
from .dialogue import load_dialogues, load_labels
from .errors import ConfigError, DataError, NumericError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("ted_erc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--seed", help="alias for --train.seed")
    p.add_argument("-v", "--verbose", action="store_true")
    g = p.add_argument_group("config keys")
    for key in config_mod.all_keys():
        g.add_argument(f"--{key}", dest=f"cfg:{key}", metavar="V")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="ted-erc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("encode", parents=[common], help="print the multi-turn token sequence as JSON")
    p.add_argument("--data", help="JSONL dialogue file (default: data.train)")
    p.add_argument("--dialogue", help="dialogue id or 0-based index (default: all)")
    p.add_argument("--turn", type=int, help="current turn (default: every turn)")

    p = sub.add_parser("synth", parents=[common], help="write synthetic train/dev/test splits and labels")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", parents=[common], help="train and save a checkpoint")
    p.add_argument("--seeds", help="comma-separated seeds, one run each (e.g. 1111,2222,3333,4444,5555)")

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--checkpoint", help="checkpoint path (default: data.checkpoint)")
    p.add_argument("--data", help="JSONL file to score (default: data.test, then data.dev)")
    p.add_argument("--json", help="also write the report as JSON here")

    sub.add_parser("gradcheck", parents=[common], help="finite-difference check of all gradients")

    p = sub.add_parser("dump-attn", parents=[common], help="write attention matrices as CSV")
    p.add_argument("--checkpoint", help="checkpoint path (default: data.checkpoint)")
    p.add_argument("--data", required=True, help="JSONL dialogue file")
    p.add_argument("--dialogue", default="0", help="dialogue id or 0-based index")
    p.add_argument("--turn", type=int, required=True, help="current turn")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _overrides(args) -> dict[str, str]:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    if args.seed is not None:
        out["train.seed"] = args.seed
    for name, value in vars(args).items():
        if name.startswith("cfg:") and value is not None:
            out[name[4:]] = value
    return out


def _show(cfg: RunConfig) -> None:
    sys.stderr.write(f"# resolved config (seed {cfg.train.seed})\n{format_config(cfg)}")


def _labels(cfg: RunConfig):
    return load_labels(cfg.data.labels) if cfg.data.labels else None


def _pick(dialogues, which):
    if which is None:
        return list(enumerate(dialogues))
    for i, d in enumerate(dialogues):
        if d.id == which:
            return [(i, d)]
    try:
        i = int(which)
        return [(i, dialogues[i])]
    except (ValueError, IndexError):
        raise DataError(f"no dialogue {which!r}") from None


def cmd_encode(cfg, args):
    path = args.data or cfg.data.train
    if path is None:
        raise ConfigError("missing required config key data.train (or --data)")
    dialogues = load_dialogues(path, _labels(cfg))
    for _, d in _pick(dialogues, args.dialogue):
        turns = [args.turn] if args.turn is not None else range(len(d))
        for c in turns:
            seq = cust_encode(d, c, cfg.cust.context, cfg.cust.max_turns, cfg.cust.speaker_tokens)
            print(seq.dumps())
    return EXIT_OK


def cmd_synth(cfg, args):
    from .synthetic import SynthConfig, generate, write_splits

    s = cfg.synth
    data = generate(SynthConfig(**vars(s)))
    paths = write_splits(data, args.out)
    for name, p in paths.items():
        print(f"{name}: {p}")
    return EXIT_OK


def cmd_train(cfg, args):
    from . import runner

    runner.require(cfg, "data.train", "data.dev", "data.labels")
    labels = load_labels(cfg.data.labels)
    train_d = load_dialogues(cfg.data.train, labels)
    dev_d = load_dialogues(cfg.data.dev, labels)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.train.seed]
    out_dir = Path(cfg.data.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scores = []
    for seed in seeds:
        cfg.train.seed = seed
        if len(seeds) > 1:
            _show(cfg)
        ckpt = cfg.data.checkpoint or str(out_dir / "model.ckpt")
        hist = out_dir / "history.json"
        if len(seeds) > 1:
            stem = Path(ckpt)
            ckpt = str(stem.with_name(f"{stem.stem}.seed{seed}{stem.suffix}"))
            hist = out_dir / f"history.seed{seed}.json"
        result = runner.run_training(cfg, train_d, dev_d, labels)
        runner.save_result(result, ckpt, hist)
        scores.append(result.dev_metric)
        print(f"seed {seed}: epochs {len(result.history.epochs)} best dev {cfg.train.metric} "
              f"{result.dev_metric:.6f} -> {ckpt}")
    if len(seeds) > 1:
        print(f"mean dev {cfg.train.metric} over {len(seeds)} seeds: {float(np.mean(scores)):.6f}")
    return EXIT_OK


def cmd_eval(cfg, args):
    from . import runner

    ckpt = args.checkpoint or cfg.data.checkpoint
    if ckpt is None:
        raise ConfigError("missing required config key data.checkpoint (or --checkpoint)")
    model, saved, labels, meta = runner.load_model(ckpt)
    path = args.data or cfg.data.test or cfg.data.dev or saved.data.dev
    if path is None:
        raise ConfigError("missing required config key data.test (or --data)")
    result, _ = runner.evaluate(model, load_dialogues(path, labels), labels)
    report = result.as_dict(labels)
    print(f"examples      {int(result.support.sum())}")
    for key in ("weighted_f1", "micro_f1", "macro_f1", "accuracy"):
        print(f"{key:<13} {report[key]:.9f}")
    for name, row in report["per_class"].items():
        print(f"  {name:<12} P {row['precision']:.4f} R {row['recall']:.4f} F1 {row['f1']:.4f} n {row['support']}")
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=1) + "\n")
    return EXIT_OK


def cmd_gradcheck(cfg, args):
    from .attention import Architecture
    from .model import HeadConfig, TedModel, make_batch
    from .pooling import TurnVectors
    from .priority import PriorityConfig
    from .training import grad_check

    g = cfg.gradcheck
    arch = Architecture(g.dim, cfg.model.layers, cfg.model.heads, g.labels,
                        cfg.attn.output_projection, cfg.model.pe, cfg.model.ffn, dropout=0.0)
    rng = np.random.default_rng(cfg.train.seed)
    speakers = tuple(int(s) for s in rng.integers(0, 2, size=g.turns))
    items = [TurnVectors(rng.standard_normal((g.turns, g.dim)), g.turns - 1, speakers) for _ in range(3)]
    gold = rng.integers(0, g.labels, size=len(items))
    heads = {"tbm": HeadConfig(None, cfg.attn.mask)}
    if cfg.priority.enabled:
        p = cfg.priority
        sigma = float(g.turns) if p.sigma == "auto" else p.sigma
        heads["ted"] = HeadConfig(PriorityConfig(p.target, p.decay, p.gamma, sigma).resolved(), cfg.attn.mask)
    ok = True
    for tag, head in heads.items():
        model = TedModel.initialize(arch, cfg.train.seed, head=head)
        report = grad_check(model, make_batch(items, head, gold=gold), g.h, g.tol)
        for name, row in report.items():
            ok &= row["ok"]
            print(f"{tag:<4} {name:<18} rel {row['rel_error']:.3e} abs {row['abs_error']:.3e} "
                  f"{'ok' if row['ok'] else 'FAIL'}")
    print("gradcheck", "passed" if ok else "FAILED", f"(tol {g.tol:g}, h {g.h:g})")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_dump_attn(cfg, args):
    from . import runner

    ckpt = args.checkpoint or cfg.data.checkpoint
    if ckpt is None:
        raise ConfigError("missing required config key data.checkpoint (or --checkpoint)")
    model, _, labels, _ = runner.load_model(ckpt)
    (_, d), = _pick(load_dialogues(args.data, labels), args.dialogue)
    if not 0 <= args.turn < len(d):
        raise DataError(f"turn {args.turn} out of range for dialogue {d.id!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in write_attention_csv(model.attention(d, args.turn), out):
        print(path)
    return EXIT_OK


def write_attention_csv(maps, out_dir) -> list[Path]:
    paths = []
    for n, layer in enumerate(maps):
        for j, mat in enumerate(layer):
            path = Path(out_dir) / f"layer{n}_head{j}.csv"
            path.write_text("".join(",".join(f"{x:.9g}" for x in row) + "\n" for row in mat))
            paths.append(path)
    return paths


COMMANDS = {
    "encode": cmd_encode,
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "dump-attn": cmd_dump_attn,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = config_mod.resolve(args.config, _overrides(args))
        _show(cfg)
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        sys.stderr.write(f"ted-erc: error: {exc}\n")
        return EXIT_USAGE
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"ted-erc: error: {exc}\n")
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        sys.stderr.write(f"ted-erc: data error: {exc}\n")
        return EXIT_DATA
    except NumericError as exc:
        sys.stderr.write(f"ted-erc: numeric failure: {exc}\n")
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
