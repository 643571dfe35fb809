"""``revdec`` command line: gen, decode, metrics, sweep.

Exit codes: 0 success, 1 some sweep cells failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .core import DecoderConfig
from .decoder import CommitPolicy
from .harness import (
    Scenario,
    format_csv,
    load_manifest,
    load_scenario,
    load_trace,
    metrics_json,
    run_sweep,
    save_scenario,
    save_trace,
    summarize,
)
from .metrics import evaluate
from .scoring import SyntheticSourceSpec, load_lattice


def _int(value: str) -> int:
    try:
        return int(value, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None


def _unit(name: str):
    def parse(value: str) -> float:
        x = float(value)
        if not 0.0 <= x <= 1.0:
            raise argparse.ArgumentTypeError(f"{name} must be in [0,1]")
        return x
    return parse


def _positive(value: str) -> int:
    n = _int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _rw(value: str) -> Optional[int]:
    if value.lower() == "none":
        return None
    n = _int(value)
    if n < 0:
        raise argparse.ArgumentTypeError("revision window must be >= 0 or 'none'")
    return n


def _reward(value: str) -> float:
    x = float(value)
    if x < 0:
        raise argparse.ArgumentTypeError("word reward must be >= 0")
    return x


def _commit(value: str) -> CommitPolicy:
    try:
        return CommitPolicy.parse(value)
    except ValueError:
        raise argparse.ArgumentTypeError("commit must be 'frame', 'every_frame' or 'chunk'") from None


def _add_decoder_flags(p: argparse.ArgumentParser, defaults: bool) -> None:
    d = DecoderConfig()
    p.add_argument("--beam", type=_positive, default=d.beam_size if defaults else None, help="beam size b")
    p.add_argument("--chunk", type=_positive, default=d.chunk_size if defaults else None, help="frames per chunk u")
    p.add_argument("--rw", type=_rw, default=None if defaults else argparse.SUPPRESS,
                   help="revision window RW, or 'none'")
    p.add_argument("--word-reward", type=_reward, default=None,
                   help="per-token reward (default 1.0 without a revision window, 0.0 with one)")
    p.add_argument("--max-symbols", type=_positive, default=d.max_symbols_per_frame if defaults else None,
                   help="emission cap per frame")
    p.add_argument("--commit", type=_commit, default=CommitPolicy.CHUNK if defaults else None,
                   help="commit every frame ('frame') or at chunk ends ('chunk')")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revdec", description="Revision-controlled streaming beam search")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a scenario file")
    g.add_argument("-o", "--output", required=True, type=Path)
    g.add_argument("--id", default=None)
    g.add_argument("--from-lattice", type=Path, default=None, help="use a lattice file instead of a synthetic source")
    g.add_argument("--seed", type=_int, default=0)
    g.add_argument("--vocab", type=_int, default=8, help="vocabulary size including blank and <s>")
    g.add_argument("--frames", type=_int, default=16)
    g.add_argument("--context-order", type=_int, default=2)
    g.add_argument("--concentration", type=float, default=6.0)
    g.add_argument("--instability", type=_unit("instability"), default=0.2)
    g.add_argument("--blank-bias", type=_unit("blank-bias"), default=0.2)
    g.add_argument("--frame-span", type=float, default=40.0, help="milliseconds per frame")
    g.add_argument("--reference", default=None, help="whitespace-separated reference tokens")
    g.add_argument("--auto-reference", action="store_true",
                   help="use the unconstrained frame-commit decode output as the reference")
    _add_decoder_flags(g, defaults=True)

    d = sub.add_parser("decode", help="decode a scenario, write its trace, print metrics")
    d.add_argument("scenario", type=Path)
    d.add_argument("-o", "--output", type=Path, default=None, help="trace path (default: <scenario>.trace.jsonl)")
    _add_decoder_flags(d, defaults=False)

    m = sub.add_parser("metrics", help="recompute metrics from a trace file")
    m.add_argument("trace", type=Path)

    s = sub.add_parser("sweep", help="run a manifest of scenarios over a config grid")
    s.add_argument("manifest", type=Path)
    s.add_argument("-o", "--output", type=Path, default=None, help="CSV path (default: <manifest>.csv)")
    s.add_argument("-j", "--jobs", type=_positive, default=1)
    return parser


def cmd_gen(args) -> int:
    cfg = DecoderConfig(
        beam_size=args.beam,
        chunk_size=args.chunk,
        revision_window=args.rw,
        word_reward=args.word_reward,
        max_symbols_per_frame=args.max_symbols,
        frame_span_ms=args.frame_span,
    )
    if args.from_lattice is not None:
        load_lattice(args.from_lattice)  # fail early on a bad file
        # scenario files resolve lattice paths relative to themselves
        source = os.path.relpath(args.from_lattice, args.output.parent)
        default_id = args.from_lattice.stem
    else:
        source = SyntheticSourceSpec(
            seed=args.seed,
            vocab_size=args.vocab,
            frame_count=args.frames,
            context_order=args.context_order,
            concentration=args.concentration,
            instability=args.instability,
            blank_bias=args.blank_bias,
        )
        default_id = f"syn-{args.seed}"
    sc = Scenario(args.id or default_id, source, cfg, args.commit, base_dir=str(args.output.parent))
    if args.reference is not None:
        sc = replace(sc, reference=tuple(args.reference.split()))
    elif args.auto_reference:
        free = sc.with_overrides(revision_window=None, commit=CommitPolicy.EVERY_FRAME).run()
        sc = replace(sc, reference=free.vocab.decode(free.final.output))
    save_scenario(sc, args.output)
    return 0


def _overrides(args) -> dict:
    out = {}
    if args.beam is not None:
        out["beam_size"] = args.beam
    if args.chunk is not None:
        out["chunk_size"] = args.chunk
    if hasattr(args, "rw"):
        out["revision_window"] = args.rw
    if args.word_reward is not None:
        out["word_reward"] = args.word_reward
    if args.max_symbols is not None:
        out["max_symbols_per_frame"] = args.max_symbols
    if args.commit is not None:
        out["commit"] = args.commit
    return out


def cmd_decode(args) -> int:
    sc = load_scenario(args.scenario).with_overrides(**_overrides(args))
    trace = sc.run()
    out = args.output or args.scenario.with_suffix(".trace.jsonl")
    save_trace(trace, out)
    sys.stdout.write(metrics_json(evaluate(trace)))
    return 0


def cmd_metrics(args) -> int:
    sys.stdout.write(metrics_json(evaluate(load_trace(args.trace))))
    return 0


def cmd_sweep(args) -> int:
    rows = run_sweep(load_manifest(args.manifest), jobs=args.jobs)
    out = args.output or args.manifest.with_suffix(".csv")
    out.write_text(format_csv(rows), encoding="utf-8")
    sys.stdout.write(json.dumps(summarize(rows), indent=2) + "\n")
    return 1 if any(r.error for r in rows) else 0


COMMANDS = {"gen": cmd_gen, "decode": cmd_decode, "metrics": cmd_metrics, "sweep": cmd_sweep}


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError, IndexError, json.JSONDecodeError) as exc:
        print(f"revdec {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
