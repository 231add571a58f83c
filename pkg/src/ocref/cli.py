"""Command-line entry point: one binary, subcommands per pipeline stage.

See docs/cli.md for full usage. Every subcommand except ``serve`` is
deterministic given ``--seed``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import analysis, corpus, engine, importer, world
from .model import (
    ModelConfig,
    VARIANTS,
    evaluate_models,
    load_params,
    save_params,
    train as train_model,
)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ocref", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate worlds as JSON lines")
    _common(p)
    p.add_argument("--num-shared", type=int, required=True, choices=world.SHARED_CHOICES)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", type=Path, default=None, help="output file (default stdout)")

    p = sub.add_parser("serve", help="run the live game server")
    _common(p)
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--store", type=Path, required=True, help="transcript store directory")
    p.add_argument("--ui", type=Path, default=None, help="static UI directory to serve")
    p.add_argument("--reading-s", type=float, default=None)
    p.add_argument("--active-s", type=float, default=None)
    p.add_argument("--lockout-s", type=float, default=None)
    p.add_argument("--tick-s", type=float, default=1.0,
                   help="heartbeat interval (testing)")

    p = sub.add_parser("import", help="convert released dialogue data to transcripts")
    _common(p)
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--frame-size", type=float, default=None,
                   help="side of the source coordinate frame (inferred if omitted)")

    p = sub.add_parser("split", help="split transcripts 8:1:1 by dialogue")
    _common(p)
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("vocab", help="build the vocabulary from a training split")
    _common(p)
    p.add_argument("--train", type=Path, required=True, help="train.jsonl")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--min-count", type=int, default=corpus.MIN_TOKEN_COUNT)

    p = sub.add_parser("analyze", help="corpus statistics and selection bias")
    _common(p)
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--plots", type=Path, default=None)
    p.add_argument("--dicts", type=Path, default=None, help="nuance dictionary directory")
    p.add_argument("--json", action="store_true", help="also print the report to stdout")

    p = sub.add_parser("train", help="train one target-selection baseline")
    _common(p)
    p.add_argument("--variant", required=True, choices=[v for v in VARIANTS])
    p.add_argument("--data", type=Path, required=True,
                   help="directory with train/valid/test.jsonl (from `split`)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.001)

    p = sub.add_parser("eval", help="score trained models on the test variants")
    _common(p)
    p.add_argument("--models", type=Path, required=True, help="directory of .npz checkpoints")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("selfcheck", help="run the invariant suites")
    _common(p)
    p.add_argument("--full", action="store_true", help="full-size statistical checks")
    p.add_argument("--json", action="store_true")
    return parser


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    lines = []
    for i in range(args.count):
        w = world.generate_world(args.num_shared, seed=args.seed + i)
        lines.append(json.dumps(world.world_to_dict(w)))
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_serve(args) -> int:
    import asyncio

    from .server import run_server

    kw = {}
    timing = engine.Timing(
        reading_ms=int((args.reading_s if args.reading_s is not None else 20.0) * 1000),
        active_ms=int((args.active_s if args.active_s is not None else 360.0) * 1000),
        lockout_ms=int((args.lockout_s if args.lockout_s is not None else 60.0) * 1000),
    )
    try:
        asyncio.run(run_server(args.port, args.store, seed=args.seed, host=args.host,
                               timing=timing, ui_dir=args.ui,
                               tick_interval=args.tick_s, **kw))
    except KeyboardInterrupt:
        pass
    return 0


def cmd_import(args) -> int:
    transcripts = importer.import_release(args.infile, frame_size=args.frame_size)
    n = corpus.save_transcripts(args.out, transcripts)
    per_k: dict[int, int] = {}
    for t in transcripts:
        per_k[t.num_shared] = per_k.get(t.num_shared, 0) + 1
    print(f"imported {n} dialogues: " +
          ", ".join(f"k={k}: {c}" for k, c in sorted(per_k.items())))
    return 0


def cmd_split(args) -> int:
    transcripts = corpus.load_transcripts(args.infile)
    train, valid, test = corpus.split_dataset(transcripts, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("valid", valid), ("test", test)):
        corpus.save_transcripts(args.out / f"{name}.jsonl", part)
        print(f"{name}: {len(part)} dialogues")
    return 0


def cmd_vocab(args) -> int:
    transcripts = corpus.load_transcripts(args.train)
    vocab = corpus.build_vocab(transcripts, min_count=args.min_count)
    vocab.save(args.out)
    print(f"vocabulary: {vocab.size} entries (incl. unknown + 3 markers)")
    return 0


def cmd_analyze(args) -> int:
    transcripts = corpus.load_transcripts(args.infile)
    dicts = analysis.load_nuance_dictionaries(args.dicts) if args.dicts else None
    report = analysis.build_report(transcripts, dicts)
    args.report.parent.mkdir(parents=True, exist_ok=True)
    args.report.write_text(json.dumps(report, indent=2), encoding="utf-8")
    if args.plots:
        bias = analysis.SelectionBias(**report["selection_bias"])
        analysis.render_plots(bias, args.plots)
    if args.json:
        print(json.dumps(report))
    else:
        overall = report["stats"]["overall"]
        print(f"dialogues: {overall['n_dialogues']}, "
              f"success rate: {overall['success_rate']:.3f}, "
              f"unique tokens: {overall['unique_tokens']}")
    return 0


def _load_split(data_dir: Path):
    parts = {}
    for name in ("train", "valid", "test"):
        path = data_dir / f"{name}.jsonl"
        if not path.exists():
            raise FileNotFoundError(f"missing {path}; run `ocref split` first")
        parts[name] = corpus.load_transcripts(path)
    vocab_path = data_dir / "vocab.json"
    if vocab_path.exists():
        vocab = corpus.Vocabulary.load(vocab_path)
    else:
        vocab = corpus.build_vocab(parts["train"])
    return parts, vocab


def cmd_train(args) -> int:
    parts, vocab = _load_split(args.data)
    train_ex, _ = corpus.make_examples(parts["train"], vocab)
    valid_ex, _ = corpus.make_examples(parts["valid"], vocab)
    cfg = ModelConfig(variant=args.variant, vocab_size=vocab.size, seed=args.seed,
                      epochs=args.epochs, batch_size=args.batch_size, lr=args.lr)
    result = train_model(train_ex, valid_ex, cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_params(args.out, result.params, cfg, meta={
        "seed": args.seed,
        "best_epoch": result.best_epoch,
        "valid_loss": result.best_valid_loss,
    })
    last = result.log[-1]
    print(f"trained {args.variant} seed={args.seed}: best epoch {result.best_epoch}, "
          f"valid loss {result.best_valid_loss:.4f}, "
          f"final valid acc {last.valid_accuracy:.3f}")
    return 0


def cmd_eval(args) -> int:
    parts, vocab = _load_split(args.data)
    test_ex, _ = corpus.make_examples(parts["test"], vocab)
    variants_data = corpus.make_test_variants(
        test_ex, corpus.successful_dialogue_ids(parts["test"]), seed=args.seed)
    models: dict[str, list] = {}
    files = sorted(args.models.glob("*.npz"))
    if not files:
        print(f"no .npz checkpoints under {args.models}", file=sys.stderr)
        return 1
    for path in files:
        params, cfg, meta = load_params(path)
        models.setdefault(cfg.variant, []).append(
            (int(meta.get("seed", cfg.seed)), params, cfg,
             float(meta.get("valid_loss", 0.0))))
    report = evaluate_models(models, variants_data)
    args.report.parent.mkdir(parents=True, exist_ok=True)
    args.report.write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    if args.json:
        print(json.dumps(report.to_dict()))
    else:
        for name, rep in report.variants.items():
            print(f"{name}: full {rep.mean:.4f} +- {rep.std:.4f} "
                  f"({len(rep.seed_accuracies)} seeds), "
                  f"uncorrelated {rep.uncorrelated:.4f}, "
                  f"success-only {rep.success_only:.4f}")
        for pair, p in report.ttests.items():
            print(f"t-test {pair}: p = {p:.3g}")
    return 0


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_selfcheck

    results = run_selfcheck(full=args.full, seed=args.seed)
    if args.json:
        print(json.dumps(results))
    else:
        for name, (ok, detail) in results.items():
            print(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for ok, _ in results.values()) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    handlers = {
        "generate": cmd_generate,
        "serve": cmd_serve,
        "import": cmd_import,
        "split": cmd_split,
        "vocab": cmd_vocab,
        "analyze": cmd_analyze,
        "train": cmd_train,
        "eval": cmd_eval,
        "selfcheck": cmd_selfcheck,
    }
    try:
        return handlers[args.command](args)
    except (OSError, ValueError, importer.ImportFormatError,
            world.GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
