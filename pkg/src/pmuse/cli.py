"""Command-line surface: train, evaluate, recommend, generate, extract-palette,
synth, and serve. Exit codes: 0 success, 1 usage, 2 data error, 3 runtime."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import colors, corpus, inference, metrics
from .model import ModelConfig
from .text_embed import EmbeddingError, HashEmbedder, StoreProvider, load_store
from .train import (Checkpoint, CheckpointError, TrainConfig, load_checkpoint,
                    save_checkpoint, train)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pmuse", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("train", help="train a model on a JSONL corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--config", help="JSON file with 'model' and 'train' sections")
    p.add_argument("--out", required=True)
    p.add_argument("--store", help="embedding store file (default: hash embedder)")

    p = sub.add_parser("evaluate", help="accuracy@1 / distribution@1 on a corpus")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mask-count", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--store")
    p.add_argument("--freq-csv", help="also export the correct-code frequency CSV")

    p = sub.add_parser("recommend", help="complete masked slots of a document")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--doc", required=True, help="JSON file with one document")
    p.add_argument("--mask", required=True, help="comma list of block:slot, e.g. graphic:0,image:2")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--store")

    p = sub.add_parser("generate", help="generate a palette from text")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--text", required=True, help="semicolon-separated phrases")
    p.add_argument("--length", type=int, default=5)
    p.add_argument("--no-pp", action="store_true", help="disable duplicate elimination")
    p.add_argument("--store")

    p = sub.add_parser("extract-palette", help="k-means palette from raw pixels")
    p.add_argument("--pixels", required=True, help="JSON file: array of '#rrggbb'")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="write a synthetic corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--addr", default="127.0.0.1:8000", help="host:port (env PMUSE_ADDR overrides)")
    p.add_argument("--store")

    return parser


def _provider(args, ckpt: Checkpoint | None = None):
    if getattr(args, "store", None):
        return StoreProvider(load_store(args.store))
    dim = ckpt.model_config.text_dim if ckpt else 512
    return HashEmbedder(dim=dim)


def _parse_mask_arg(spec: str, mode: str) -> list[int]:
    positions = []
    for part in spec.split(","):
        part = part.strip()
        try:
            block, slot = part.split(":")
            slot = int(slot)
        except ValueError as exc:
            raise UsageError(f"bad --mask entry {part!r}, expected block:slot") from exc
        if block not in colors.PALETTE_KINDS:
            raise UsageError(f"unknown block {block!r} in --mask")
        if not 0 <= slot < corpus.SLOTS_PER_BLOCK:
            raise UsageError(f"slot {slot} outside 0..{corpus.SLOTS_PER_BLOCK - 1}")
        base = 0 if mode == "pat" else colors.PALETTE_KINDS.index(block) * corpus.BLOCK_LEN
        positions.append(base + slot)
    return positions


def _cmd_train(args) -> int:
    cfg = {"model": {}, "train": {}}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg.update(json.load(fh))
    train_config = TrainConfig(**cfg.get("train", {}))
    model_fields = dict(cfg.get("model", {}))
    model_fields.setdefault("max_len", corpus.CRELLO_LEN if train_config.mode == "crello" else corpus.PAT_LEN)
    model_config = ModelConfig(**model_fields)
    docs_train = corpus.load_jsonl(args.data)
    docs_val = corpus.load_jsonl(args.val)
    provider = _provider(args)
    if provider.dim != model_config.text_dim:
        provider = HashEmbedder(dim=model_config.text_dim) if not args.store else provider
    ckpt, history = train(docs_train, docs_val, model_config, train_config, provider,
                          log=lambda row: print(json.dumps(row), file=sys.stderr))
    save_checkpoint(ckpt, args.out)
    print(json.dumps({"out": args.out, "epochs_run": len(history),
                      "best_epoch": ckpt.epoch, "best_val_loss": ckpt.best_val_loss}))
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    docs = corpus.load_jsonl(args.data)
    report = metrics.evaluate(ckpt, docs, mask_counts=(args.mask_count,), seed=args.seed,
                              provider=_provider(args, ckpt))
    if args.freq_csv:
        metrics.export_frequency_csv(report, args.freq_csv)
    print(json.dumps({
        "mask_count": args.mask_count,
        "accuracy_at_1": report.accuracy_at_1[args.mask_count],
        "distribution_at_1": report.distribution_at_1[args.mask_count],
        "all_correct_at_1": report.all_correct_at_1[args.mask_count],
        "sample_count": report.sample_count[args.mask_count],
    }))
    return EXIT_OK


def _cmd_recommend(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    with open(args.doc, "r", encoding="utf-8") as fh:
        doc = corpus.parse_document(json.load(fh), where=args.doc)
    positions = _parse_mask_arg(args.mask, ckpt.mode)
    recs = inference.complete(ckpt, doc, positions, k=args.k, provider=_provider(args, ckpt))
    out = [{"position": r.position,
            "candidates": [{"color": colors.code_to_hex(c), "code": c, "probability": p}
                           for c, p in r.candidates]}
           for r in recs]
    print(json.dumps({"recommendations": out}))
    return EXIT_OK


def _cmd_generate(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    phrases = [corpus.Phrase(t.strip()) for t in args.text.split(";") if t.strip()]
    result = inference.generate(ckpt, phrases, length=args.length,
                                post_process=not args.no_pp, provider=_provider(args, ckpt))
    print(json.dumps({"colors": result.hexes, "codes": result.codes}))
    return EXIT_OK


def _cmd_extract(args) -> int:
    with open(args.pixels, "r", encoding="utf-8") as fh:
        hex_list = json.load(fh)
    if not isinstance(hex_list, list):
        raise corpus.CorpusError(f"{args.pixels}: expected a JSON array of hex colors")
    pixels = [colors.hex_to_rgb(h) for h in hex_list]
    palette = corpus.extract_palette(pixels, args.k, seed=args.seed)
    print(json.dumps({"colors": palette.hexes, "codes": palette.colors}))
    return EXIT_OK


def _cmd_synth(args) -> int:
    docs = corpus.synth_corpus(args.n, seed=args.seed)
    corpus.save_jsonl(docs, args.out)
    print(json.dumps({"out": args.out, "documents": len(docs)}))
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceState, create_app

    ckpt = load_checkpoint(args.ckpt)
    state = ServiceState.from_checkpoint(ckpt, _provider(args, ckpt))
    addr = os.environ.get("PMUSE_ADDR", args.addr)
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise UsageError(f"bad address {addr!r}, expected host:port")
    uvicorn.run(create_app(state), host=host, port=int(port), log_level="info")
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "recommend": _cmd_recommend,
    "generate": _cmd_generate,
    "extract-palette": _cmd_extract,
    "synth": _cmd_synth,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (corpus.CorpusError, CheckpointError, EmbeddingError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not crashes
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
