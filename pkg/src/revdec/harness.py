"""Scenario files, trace files and parameter sweeps.

A scenario is a JSON object naming a scoring source (synthetic spec or
lattice path) plus decoder settings. A trace is JSONL: a header line, one
line per commit, and a final line with the chosen hypothesis. A sweep runs a
list of scenarios against a config grid and tabulates the metrics.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .core import CommitEvent, DecodeTrace, DecoderConfig, Hypothesis, Vocabulary
from .decoder import CommitPolicy, PrunePolicy, decode_stream
from .metrics import MetricsReport, evaluate
from .scoring import ScoringSource, SyntheticSourceSpec, load_lattice

PathLike = Union[str, Path]


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    id: str
    source: Union[SyntheticSourceSpec, str]
    config: DecoderConfig = DecoderConfig()
    commit: CommitPolicy = CommitPolicy.CHUNK
    prune: Optional[PrunePolicy] = None
    reference: Optional[Tuple[str, ...]] = None
    base_dir: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "commit", CommitPolicy.parse(self.commit))
        if self.prune is None:
            rw = self.config.revision_window
            object.__setattr__(self, "prune", PrunePolicy.NONE if rw is None else PrunePolicy.REVISION_WINDOW)
        object.__setattr__(self, "prune", PrunePolicy.parse(self.prune))
        if self.reference is not None:
            object.__setattr__(self, "reference", tuple(self.reference))

    def build_source(self) -> ScoringSource:
        if isinstance(self.source, SyntheticSourceSpec):
            return self.source.build()
        path = Path(self.source)
        if not path.is_absolute() and self.base_dir:
            path = Path(self.base_dir) / path
        return load_lattice(path)

    def with_overrides(self, **changes) -> "Scenario":
        """Copy with config fields replaced; ``revision_window`` also sets the prune mode."""
        commit = changes.pop("commit", None)
        cfg = replace(self.config, **changes)
        prune = self.prune
        if "revision_window" in changes:
            prune = PrunePolicy.NONE if cfg.revision_window is None else PrunePolicy.REVISION_WINDOW
        return replace(self, config=cfg, prune=prune, commit=commit or self.commit)

    def run(self, src: Optional[ScoringSource] = None) -> DecodeTrace:
        return decode_stream(src or self.build_source(), self.config, self.commit, self.prune, self.reference)

    def to_dict(self) -> dict:
        if isinstance(self.source, SyntheticSourceSpec):
            source = {"type": "synthetic", **self.source.to_dict()}
        else:
            source = {"type": "lattice", "path": str(self.source)}
        return {
            "id": self.id,
            "source": source,
            "config": self.config.to_dict(),
            "commit": self.commit.value,
            "prune": self.prune.value,
            "reference": list(self.reference) if self.reference is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir: Optional[PathLike] = None) -> "Scenario":
        try:
            src = dict(d["source"])
            kind = src.pop("type")
            if kind == "synthetic":
                source: Union[SyntheticSourceSpec, str] = SyntheticSourceSpec.from_dict(src)
            elif kind == "lattice":
                source = str(src["path"])
            else:
                raise ValueError(f"unknown source type {kind!r}")
            return cls(
                id=str(d["id"]),
                source=source,
                config=DecoderConfig.from_dict(d.get("config", {})),
                commit=d.get("commit", "chunk"),
                prune=d.get("prune"),
                reference=d.get("reference"),
                base_dir=str(base_dir) if base_dir is not None else None,
            )
        except KeyError as exc:
            raise ValueError(f"scenario is missing {exc}") from None


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def save_scenario(scenario: Scenario, path: PathLike) -> None:
    Path(path).write_text(dump_json(scenario.to_dict()), encoding="utf-8")


def load_scenario(path: PathLike) -> Scenario:
    path = Path(path)
    return Scenario.from_dict(json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent)


# -- traces -----------------------------------------------------------------

def _line(obj) -> str:
    return json.dumps(obj, separators=(",", ":")) + "\n"


def format_trace(trace: DecodeTrace) -> str:
    v = trace.vocab
    header = {
        "config": trace.config.to_dict(),
        "commit": trace.commit_mode,
        "prune": trace.prune_mode,
        "T": trace.source_frames,
        "vocab": list(v.tokens),
        "blank_id": v.blank_id,
        "bos_id": v.bos_id,
        "vocab_sha256": v.digest(),
        "reference": list(trace.reference) if trace.reference is not None else None,
    }
    lines = [_line(header)]
    lines += [_line({"frame": c.frame_index, "tokens": list(c.displayed)}) for c in trace.commits]
    lines.append(_line({
        "final": list(trace.final.output),
        "emit_frames": list(trace.final.output_frames),
        "log_score": trace.final.log_score,
    }))
    return "".join(lines)


def parse_trace(text: str) -> DecodeTrace:
    """Rebuild a trace, checking every invariant.

    Raises:
        TraceFormatError: malformed JSON, missing fields, a vocabulary hash
            mismatch, or a violated trace invariant (named in the message).
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise TraceFormatError("trace needs a header and a final line")
    try:
        records = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"invalid JSON: {exc}") from None
    head, *body, last = records
    try:
        vocab = Vocabulary(tuple(head["vocab"]), head["blank_id"], head["bos_id"])
        if head.get("vocab_sha256", vocab.digest()) != vocab.digest():
            raise TraceFormatError("vocab_sha256 does not match the vocabulary")
        commits = [CommitEvent(int(r["frame"]), tuple(r["tokens"])) for r in body]
        final_tokens = tuple(last["final"])
        frames = tuple(last["emit_frames"])
        if len(frames) != len(final_tokens):
            raise TraceFormatError("final: emit_frames and final differ in length")
        n = len(vocab)
        for what, seq in [("final", final_tokens)] + [(f"commit at frame {c.frame_index}", c.displayed) for c in commits]:
            if any(not 0 <= t < n or t in (vocab.blank_id, vocab.bos_id) for t in seq):
                raise TraceFormatError(f"{what}: token outside the emittable vocabulary")
        final = Hypothesis((vocab.bos_id,) + final_tokens, float(last.get("log_score", 0.0)), (0,) + frames)
        return DecodeTrace(
            config=DecoderConfig.from_dict(head["config"]),
            commits=tuple(commits),
            final=final,
            source_frames=int(head["T"]),
            vocab=vocab,
            commit_mode=head.get("commit", "chunk"),
            prune_mode=head.get("prune", "none"),
            reference=head.get("reference"),
        )
    except TraceFormatError:
        raise
    except (KeyError, TypeError) as exc:
        raise TraceFormatError(f"missing or malformed field: {exc}") from None
    except ValueError as exc:
        raise TraceFormatError(f"invariant violated: {exc}") from None


def save_trace(trace: DecodeTrace, path: PathLike) -> None:
    Path(path).write_text(format_trace(trace), encoding="utf-8")


def load_trace(path: PathLike) -> DecodeTrace:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


def metrics_json(report: MetricsReport) -> str:
    return json.dumps(report.to_dict()) + "\n"


# -- sweeps -----------------------------------------------------------------

GRID_KEYS = ("beam", "chunk", "rw", "commit", "word_reward")
CSV_COLUMNS = ("id", "b", "u", "rw", "commit_mode", "ne", "al_ms", "harness_bleu", "max_erasure", "error")


@dataclass
class SweepRow:
    id: str
    b: int
    u: int
    rw: Optional[int]
    commit_mode: str
    report: Optional[MetricsReport] = None
    error: str = ""

    def cells(self) -> List[str]:
        r = self.report
        rw = "none" if self.rw is None else str(self.rw)
        if r is None:
            return [self.id, str(self.b), str(self.u), rw, self.commit_mode, "", "", "", "", self.error]
        fmt = lambda x: "" if x is None else repr(float(x))  # noqa: E731
        return [self.id, str(self.b), str(self.u), rw, self.commit_mode,
                fmt(r.ne), fmt(r.al_ms), fmt(r.bleu), str(r.max_erasure), ""]


def load_manifest(path: PathLike) -> List[Scenario]:
    """Scenarios of a sweep manifest, expanded over its grid, in run order."""
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    return expand_manifest(data, base_dir=path.parent)


def expand_manifest(data: dict, base_dir: Optional[PathLike] = None) -> List[Scenario]:
    base_dir = Path(base_dir) if base_dir is not None else Path(".")
    scenarios = []
    for entry in data.get("scenarios", []):
        if isinstance(entry, str):
            scenarios.append(load_scenario(base_dir / entry))
        else:
            scenarios.append(Scenario.from_dict(entry, base_dir=base_dir))
    ids = [s.id for s in scenarios]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ValueError(f"duplicate scenario ids in manifest: {dupes}")

    grid = data.get("grid", {})
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ValueError(f"unknown grid keys: {sorted(unknown)}")
    axes = [(k, list(grid[k])) for k in GRID_KEYS if k in grid]
    cells = []
    for sc in scenarios:
        for values in itertools.product(*(v for _, v in axes)):
            changes = {}
            for (key, _), value in zip(axes, values):
                if key == "beam":
                    changes["beam_size"] = int(value)
                elif key == "chunk":
                    changes["chunk_size"] = int(value)
                elif key == "rw":
                    changes["revision_window"] = None if value in (None, "none") else int(value)
                elif key == "commit":
                    changes["commit"] = CommitPolicy.parse(value)
                elif key == "word_reward":
                    changes["word_reward"] = None if value is None else float(value)
            cells.append(sc.with_overrides(**changes))
    return cells


def run_cell(scenario: Scenario, sources: Dict[str, ScoringSource]) -> SweepRow:
    cfg = scenario.config
    row = SweepRow(scenario.id, cfg.beam_size, cfg.chunk_size, cfg.revision_window, scenario.commit.value)
    try:
        row.report = evaluate(scenario.run(sources[scenario.id]))
    except Exception as exc:  # noqa: BLE001 - a failed cell must not sink the sweep
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(cells: Sequence[Scenario], jobs: int = 1) -> List[SweepRow]:
    """Decode every cell; rows come back in input order regardless of ``jobs``."""
    sources: Dict[str, ScoringSource] = {}
    failed: Dict[str, str] = {}
    for sc in cells:
        if sc.id in sources or sc.id in failed:
            continue
        try:
            sources[sc.id] = sc.build_source()
        except Exception as exc:  # noqa: BLE001
            failed[sc.id] = f"{type(exc).__name__}: {exc}"

    def work(sc: Scenario) -> SweepRow:
        if sc.id in failed:
            cfg = sc.config
            return SweepRow(sc.id, cfg.beam_size, cfg.chunk_size, cfg.revision_window, sc.commit.value,
                            error=failed[sc.id])
        return run_cell(sc, sources)

    if jobs <= 1:
        return [work(sc) for sc in cells]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, cells))


def format_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def _finite_mean(xs) -> Optional[float]:
    xs = [x for x in xs if x is not None and math.isfinite(x)]
    return math.fsum(xs) / len(xs) if xs else None


def summarize(rows: Sequence[SweepRow]) -> dict:
    """Per-setting means over scenarios, keyed by (b, u, rw, commit_mode) in first-seen order.

    Means skip non-finite values (NaN lagging of an empty output, infinite
    erasure of a degenerate stream); ``n`` counts the rows that succeeded.
    """
    groups: Dict[tuple, List[SweepRow]] = {}
    for r in rows:
        groups.setdefault((r.b, r.u, r.rw, r.commit_mode), []).append(r)
    out = []
    for (b, u, rw, mode), members in groups.items():
        ok = [m.report for m in members if m.report is not None]
        out.append({
            "b": b, "u": u, "rw": rw, "commit_mode": mode,
            "n": len(ok),
            "mean_ne": _finite_mean(r.ne for r in ok),
            "mean_al_ms": _finite_mean(r.al_ms for r in ok),
            "mean_al_frames": _finite_mean(r.al_frames for r in ok),
            "mean_harness_bleu": _finite_mean(r.bleu for r in ok),
            "max_erasure": max((r.max_erasure for r in ok), default=0),
        })
    return {"rows": len(rows), "failed": sum(1 for r in rows if r.error), "groups": out}


def frozen_scenarios(count: int = 100, seed0: int = 0) -> List[Scenario]:
    """The frozen synthetic scenario set used by the acceptance checks and the sweep.

    Sizes cycle through vocabularies 6-20, streams of 8-64 frames and
    instability 0-1 so every combination region is covered. All scenarios
    decode with b=7, u=4 and an explicit word reward of 0.
    """
    out = []
    for i in range(count):
        seed = seed0 + i
        spec = SyntheticSourceSpec(
            seed=seed,
            vocab_size=6 + i % 15,
            frame_count=8 + (i * 7) % 57,
            context_order=2,
            concentration=6.0,
            instability=(i % 11) / 10,
            blank_bias=0.2,
        )
        out.append(Scenario(f"syn-{seed:03d}", spec, DecoderConfig(beam_size=7, chunk_size=4, word_reward=0.0)))
    return out
