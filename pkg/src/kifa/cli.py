"""Command-line interface.

Subcommands: generate, train, index, evaluate, export-attn, gradcheck.
Exit code is 0 on success; component errors surface as a stable error code
on stderr and a non-zero exit. KIFA_LOG sets the logging verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import net as netmod
from . import pipeline
from .errors import KifaError
from .skeleton import load_manifest, load_sequence
from .syngen import GenParams, generate_corpus

log = logging.getLogger("kifa")


def _setup_logging():
    level = os.environ.get("KIFA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(path) -> pipeline.PipelineConfig:
    if path is None:
        return pipeline.PipelineConfig()
    with open(path, encoding="utf-8") as f:
        return pipeline.PipelineConfig.from_dict(json.load(f))


def _write_json(doc, path):
    text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_generate(args) -> int:
    params = GenParams(noise_std=args.noise, seed=args.seed)
    manifest = generate_corpus(params, args.per_class, args.out)
    log.info("wrote %d sequences to %s", len(manifest.entries), args.out)
    print(f"generated {len(manifest.entries)} sequences in {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args.config)
    manifest = load_manifest(args.data)
    root = Path(args.data).parent
    from .skeleton import load_samples

    samples = load_samples(manifest, root)
    session, info = pipeline.train_session(
        samples, config, manifest_ref=str(args.data), seed=config.net.seed)
    pipeline.save_session(session, args.out)
    losses = info["pretrain_loss"]
    print(f"trained on {len(samples)} samples; "
          f"loss {losses[0]:.4f} -> {losses[-1]:.4f}; session at {args.out}")
    return 0


def cmd_index(args) -> int:
    session = pipeline.load_session(args.session)
    seq = load_sequence(args.input)
    result = pipeline.index_sample(session, seq, frozen=args.frozen)
    if not args.frozen:
        pipeline.save_session(session, args.session)
    _write_json(result, args.out)
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    manifest = load_manifest(args.data)
    root = Path(args.data).parent
    cv = pipeline.run_cv(manifest, root, config, args.folds, args.seed)
    if args.baseline:
        report = pipeline.baseline_evaluate(manifest, root, config,
                                            args.folds, args.seed, cv=cv)
    else:
        report = pipeline.evaluate(manifest, root, config,
                                   args.folds, args.seed, cv=cv)
    _write_json(report, args.report)
    return 0


def cmd_export_attn(args) -> int:
    session = pipeline.load_session(args.session)
    seq = load_sequence(args.input)
    paths = pipeline.export_attention(session, seq, args.out, force=args.force)
    print(f"wrote {paths['temporal']} and {paths['joint']}")
    return 0


def cmd_gradcheck(args) -> int:
    config = netmod.NetConfig(hidden_size=8, joint_embed_size=6, epochs=1)
    worst = max(netmod.grad_check(config, seed=args.seed + i, h=args.h)
                for i in range(args.trials))
    print(f"max relative gradient error over {args.trials} trials: {worst:.3e}")
    return 0 if worst <= 1e-4 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kifa",
        description="Skeleton action recognition with fuzzy intensity indexing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a labeled synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-class", type=int, default=40,
                   help="samples per (action, intensity) pair")
    p.add_argument("--noise", type=float, default=0.02)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a pipeline session")
    p.add_argument("--data", required=True, help="manifest JSON path")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.add_argument("--out", required=True, help="session directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("index", help="index one sequence with a trained session")
    p.add_argument("--session", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--frozen", action="store_true",
                   help="do not update the fuzzifier state")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("evaluate", help="k-fold cross-validated evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--baseline", action="store_true",
                   help="report the logistic baseline instead of the fuzzy stage")
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-attn", help="export attention weights as CSV")
    p.add_argument("--session", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_export_attn)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--h", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KifaError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
