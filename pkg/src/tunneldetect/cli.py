"""Command-line entry point.

Subcommands compose the library into reproducible pipelines:

    generate-data   write a labeled synthetic corpus CSV
    train           train a model on a corpus CSV
    grid-search     cross-validated hyperparameter search
    evaluate        metrics report (and scatter CSV) for a model on a corpus
    classify        stream verdicts for names from a file/stdin or a resolver log

Every file-producing subcommand also writes `<output>.manifest.json`
recording the resolved flags, seeds and input/output checksums, enough
to reproduce the run bit for bit.

Exit codes: 0 success, 2 usage, 3 I/O failure, 4 data/format problem.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

from . import __version__
from . import datagen, evaluation, logparse, model_store, training
from .network import DEFAULT_HYPERPARAMS, Hyperparams
from .tokenizer import build_vocabulary

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _write_manifest(out_path, subcommand: str, args: dict, inputs: list, outputs: list, metrics: dict | None = None) -> None:
    manifest = {
        "tool": f"tunneldetect {__version__}",
        "subcommand": subcommand,
        "args": args,
        "inputs": {str(p): _sha256_file(p) for p in inputs},
        "outputs": {str(p): _sha256_file(p) for p in outputs},
    }
    if metrics is not None:
        manifest["metrics"] = metrics
    path = str(out_path) + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _hp_flag(text: str) -> Hyperparams:
    try:
        return training.parse_grid_line(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _feed_flag(text: str) -> tuple[str, str]:
    origin, sep, path = text.partition("=")
    if not sep or not origin or not path:
        raise argparse.ArgumentTypeError(f"expected ORIGIN=PATH, got {text!r}")
    return origin, path


def _threshold_flag(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"threshold must be in (0, 1), got {value}")
    return value


def cmd_generate_data(args) -> int:
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        spec = datagen.CorpusSpec(
            tunneling_counts=dict(raw["tunneling"]),
            normal_counts=dict(raw["normal"]),
            apexes=tuple(raw.get("apexes", datagen.DEFAULT_APEXES)),
            seed=args.seed if args.seed is not None else int(raw.get("seed", 0)),
        )
    else:
        per_class = 8000 if args.full else args.per_class
        spec = datagen.desk_scale_spec(
            seed=args.seed if args.seed is not None else 0,
            per_class=per_class,
            apexes=tuple(args.apex) if args.apex else datagen.DEFAULT_APEXES,
        )

    pools = datagen.default_normal_pools()
    feed_inputs = []
    for origin, path in args.normal_feed or []:
        samples, skipped = datagen.load_normal(path, origin)
        if skipped:
            print(f"note: {skipped} invalid lines skipped in {path}", file=sys.stderr)
        pools[origin] = [s.name for s in samples]
        feed_inputs.append(path)

    corpus = datagen.build_corpus(spec, pools)
    datagen.write_corpus(corpus, args.out)

    counts = {
        "tunneling": dict(spec.tunneling_counts),
        "normal": dict(spec.normal_counts),
        "total": len(corpus),
    }
    _write_manifest(
        args.out,
        "generate-data",
        {
            "seed": spec.seed,
            "apexes": list(spec.apexes),
            "spec": args.spec,
            "per_class": None if args.spec else (8000 if args.full else args.per_class),
        },
        inputs=feed_inputs,
        outputs=[args.out],
        metrics=counts,
    )
    print(f"wrote {len(corpus)} samples to {args.out}")
    return EXIT_OK


def _load_labeled_corpus(path):
    corpus = datagen.read_corpus(path)
    if not corpus:
        raise ValueError(f"corpus {path} is empty")
    return corpus


def cmd_train(args) -> int:
    corpus = _load_labeled_corpus(args.corpus)
    hp = args.hp or DEFAULT_HYPERPARAMS
    cfg = training.TrainConfig(
        epochs=args.epochs, batch_size=args.batch, seed=args.seed, lr=args.lr
    )
    losses: list[float] = []

    def progress(epoch, loss):
        losses.append(loss)
        print(f"epoch {epoch:>3}/{cfg.epochs}  mean loss {loss:.6f}", file=sys.stderr)

    params = training.train(corpus, hp, cfg, progress=progress)
    model_store.save(params, hp, build_vocabulary(), args.out)
    _write_manifest(
        args.out,
        "train",
        {
            "corpus": str(args.corpus),
            "hp": {k: getattr(hp, k) for k in ("nf", "ks", "sl", "d", "l", "hn")},
            "epochs": cfg.epochs,
            "batch": cfg.batch_size,
            "seed": cfg.seed,
            "lr": cfg.lr,
        },
        inputs=[args.corpus],
        outputs=[args.out],
        metrics={
            "parameter_count": training.count_parameters(hp),
            "epoch_losses": losses,
        },
    )
    print(f"trained {training.count_parameters(hp)} parameters, model saved to {args.out}")
    return EXIT_OK


def cmd_grid_search(args) -> int:
    corpus = _load_labeled_corpus(args.corpus)
    grid = training.parse_grid_file(args.grid) if args.grid else training.default_grid()
    cfg = training.TrainConfig(
        epochs=args.epochs, batch_size=args.batch, seed=args.seed, lr=args.lr
    )
    results = training.grid_search(corpus, grid, cfg, k=args.folds)

    rows = [
        {
            "hp": {k: getattr(r.hp, k) for k in ("nf", "ks", "sl", "d", "l", "hn")},
            "mean_f1": r.mean_f1,
            "sd_f1": r.sd_f1,
            "parameters": r.parameter_count,
        }
        for r in results
    ]
    print(f"{'mean_f1':>8} {'sd_f1':>8} {'params':>12}  hp")
    for r in results:
        print(
            f"{r.mean_f1:>8.4f} {r.sd_f1:>8.4f} {r.parameter_count:>12,d}  "
            f"nf={r.hp.nf} ks={r.hp.ks} sl={r.hp.sl} d={r.hp.d} l={r.hp.l} hn={r.hp.hn}"
        )
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_manifest(
            args.report,
            "grid-search",
            {
                "corpus": str(args.corpus),
                "grid": str(args.grid) if args.grid else "default",
                "folds": args.folds,
                "seed": cfg.seed,
                "epochs": cfg.epochs,
                "batch": cfg.batch_size,
            },
            inputs=[p for p in (args.corpus, args.grid) if p],
            outputs=[args.report],
            metrics={"best": rows[0]},
        )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    params, hp, _vocab = model_store.load(args.model)
    corpus = _load_labeled_corpus(args.corpus)
    predictions = evaluation.predict_samples(params, hp, corpus, args.threshold)
    report = evaluation.compute_metrics(predictions, args.threshold)
    print(evaluation.format_report(report))

    outputs = []
    if args.scatter:
        evaluation.export_scatter(predictions, args.scatter)
        outputs.append(args.scatter)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(evaluation.report_to_dict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(args.report)
    if outputs:
        _write_manifest(
            args.report or args.scatter,
            "evaluate",
            {
                "model": str(args.model),
                "corpus": str(args.corpus),
                "threshold": args.threshold,
            },
            inputs=[args.model, args.corpus],
            outputs=outputs,
            metrics=evaluation.report_to_dict(report),
        )
    return EXIT_OK


def cmd_classify(args) -> int:
    params, hp, _vocab = model_store.load(args.model)

    if args.input == "-":
        lines = sys.stdin
        close = None
    else:
        close = open(args.input, "r", encoding="utf-8", errors="replace")
        lines = close
    skipped = 0
    batch: list[logparse.LogRecord] = []
    try:
        def flush():
            if not batch:
                return
            preds = evaluation.predict_names(
                params, hp, [r.qname for r in batch], args.threshold
            )
            for pred in preds:
                print(f"{pred.name}\t{pred.probability:.6f}\t{pred.predicted}")
            batch.clear()

        for lineno, line in enumerate(lines, start=1):
            rec = logparse.parse_line(args.format, line, lineno)
            if rec is None:
                skipped += 1
                continue
            if args.apex and not logparse.filter_apex([rec], args.apex):
                continue
            batch.append(rec)
            if len(batch) >= 256:
                flush()
        flush()
    finally:
        if close is not None:
            close.close()
    if skipped:
        print(f"skipped {skipped} unparseable lines", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tunneldetect",
        description="Detect DNS tunneling from domain names with a character-level CNN.",
    )
    parser.add_argument("--version", action="version", version=f"tunneldetect {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("generate-data", help="write a labeled synthetic corpus CSV")
    p.add_argument("--out", required=True, help="corpus CSV to write")
    p.add_argument("--seed", type=int, default=None, help="corpus seed (default 0)")
    p.add_argument("--per-class", type=int, default=2000, help="samples per class (default 2000)")
    p.add_argument("--full", action="store_true", help="full-size corpus (8000 per class)")
    p.add_argument("--spec", help="JSON file with explicit per-category counts")
    p.add_argument("--apex", action="append", help="tunneling apex domain (repeatable)")
    p.add_argument(
        "--normal-feed",
        action="append",
        type=_feed_flag,
        metavar="ORIGIN=PATH",
        help="normal-domain feed file for an origin (repeatable)",
    )
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="train a model on a corpus CSV")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--hp", type=_hp_flag, default=None, help="e.g. 'nf=1024 ks=4 sl=1 d=100 l=45 hn=256'")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.001)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid-search", help="cross-validated hyperparameter search")
    p.add_argument("--corpus", required=True)
    p.add_argument("--grid", help="grid file (one key=value combination per line)")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--report", help="JSON report to write")
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("evaluate", help="metrics report for a model on a labeled corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--threshold", type=_threshold_flag, default=evaluation.DEFAULT_THRESHOLD)
    p.add_argument("--report", help="JSON metrics report to write")
    p.add_argument("--scatter", help="per-name probability CSV to write")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("classify", help="stream verdicts for names from a file or stdin")
    p.add_argument("--model", required=True)
    p.add_argument("--input", default="-", help="input file, or '-' for stdin (default)")
    p.add_argument("--format", choices=logparse.FORMATS, default="plain")
    p.add_argument("--threshold", type=_threshold_flag, default=evaluation.DEFAULT_THRESHOLD)
    p.add_argument("--apex", action="append", help="only score names under this apex (repeatable)")
    p.set_defaults(func=cmd_classify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return EXIT_OK
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (model_store.ModelFormatError, ValueError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
