"""Conditional next-token distributions delivered frame by frame.

A scoring source stands in for the transducer's joint network: given a frame
index and the tokens emitted so far it returns natural-log probabilities over
the whole vocabulary, blank included. Only the last ``context_order`` tokens
of the context matter.

Two backends are provided: :class:`SyntheticSource`, a seeded generator
whose rankings can be made to jump mid-stream, and :class:`LatticeSource`,
which replays logged posteriors from a text file.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import Tokens, Vocabulary

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53
# domain-separation tags for the counter-based generator
_TAG_ROW = 0x524F57
_TAG_SWAP = 0x53574150

NORMALIZATION_ATOL = 1e-9
LATTICE_ATOL = 1e-6


class ScoringSource:
    """Base class for frame-synchronous next-token distributions.

    Subclasses implement :meth:`_row` for an already truncated context and
    must stay read-only after construction.
    """

    vocab: Vocabulary
    frame_count: int
    context_order: int

    def __init__(self, vocab: Vocabulary, frame_count: int, context_order: int):
        if frame_count < 0:
            raise ValueError("frame_count must be non-negative")
        if context_order < 0:
            raise ValueError("context_order must be non-negative")
        self.vocab = vocab
        self.frame_count = frame_count
        self.context_order = context_order
        self._cache: Dict[Tuple[int, Tokens], np.ndarray] = {}
        self._ranked: Dict[Tuple[int, Tokens], Tuple[List[float], Tuple[int, ...]]] = {}

    def truncate(self, context: Sequence[int]) -> Tokens:
        if self.context_order == 0:
            return ()
        return tuple(context[-self.context_order:])

    def score_next(self, frame: int, context: Sequence[int]) -> np.ndarray:
        """Log-probability row of length ``len(vocab)`` for the next emission.

        Raises:
            IndexError: ``frame`` outside ``1..frame_count``.
            ValueError: ``context`` contains the blank token.
        """
        if not 1 <= frame <= self.frame_count:
            raise IndexError(f"frame {frame} outside 1..{self.frame_count}")
        key = (frame, self.truncate(context))
        row = self._cache.get(key)
        if row is None:
            if self.vocab.blank_id in context:
                raise ValueError("context must not contain the blank token")
            row = self._row(*key)
            row.setflags(write=False)
            self._cache[key] = row
        return row

    def ranked(self, frame: int, context: Sequence[int]) -> Tuple[List[float], Tuple[int, ...]]:
        """``score_next`` as a plain list, plus the emittable tokens best-first.

        Blank, bos and zero-probability tokens are left out of the ranking;
        ties keep index order.
        """
        k = self.context_order
        key = (frame, tuple(context[-k:]) if k else ())
        hit = self._ranked.get(key)
        if hit is None:
            row = self.score_next(frame, context)
            skip = (self.vocab.blank_id, self.vocab.bos_id)
            values = row.tolist()
            order = tuple(
                t for t in sorted(range(len(values)), key=lambda t: -values[t])
                if t not in skip and values[t] > -math.inf
            )
            hit = (values, order)
            self._ranked[key] = hit
        return hit

    def _row(self, frame: int, context: Tokens) -> np.ndarray:
        raise NotImplementedError


def score_next(src: ScoringSource, frame: int, context: Sequence[int]) -> np.ndarray:
    return src.score_next(frame, context)


@dataclass(frozen=True)
class SyntheticSourceSpec:
    """Parameters that fully determine a :class:`SyntheticSource`.

    ``concentration`` sharpens the generated distributions; 0 gives uniform
    rows. ``instability`` is the per-frame probability of a swap event that
    reshuffles every later distribution. ``blank_bias`` is the probability
    mass mixed into the blank entry.
    """

    seed: int = 0
    vocab_size: int = 8
    frame_count: int = 16
    context_order: int = 2
    concentration: float = 6.0
    instability: float = 0.2
    blank_bias: float = 0.2

    def __post_init__(self):
        if self.vocab_size < 3:
            raise ValueError("vocab_size must be >= 3 (blank, bos and one word)")
        if self.frame_count < 0:
            raise ValueError("frame_count must be non-negative")
        if self.context_order < 0:
            raise ValueError("context_order must be non-negative")
        if not (self.concentration >= 0 and math.isfinite(self.concentration)):
            raise ValueError("concentration must be a finite value >= 0")
        if not 0.0 <= self.instability <= 1.0:
            raise ValueError("instability must be in [0,1]")
        if not 0.0 <= self.blank_bias <= 1.0:
            raise ValueError("blank_bias must be in [0,1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSourceSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown synthetic source keys: {sorted(unknown)}")
        d = dict(d)
        for k in ("concentration", "instability", "blank_bias"):
            if k in d:
                d[k] = float(d[k])
        return cls(**d)

    def build(self) -> "SyntheticSource":
        return SyntheticSource(self)


def _key(*words: int) -> bytes:
    return struct.pack(f"<{len(words)}Q", *(w & _MASK64 for w in words))


def counter_uniforms(key: bytes, n: int) -> List[float]:
    """``n`` uniforms in (0, 1): SHAKE-128 of ``key`` read as little-endian uint64 words.

    The top 53 bits of word ``j`` map to ``(k + 0.5) / 2**53``, never 0 or 1.
    """
    words = struct.unpack(f"<{n}Q", hashlib.shake_128(key).digest(8 * n))
    return [((w >> 11) + 0.5) * _TWO_M53 for w in words]


class SyntheticSource(ScoringSource):
    """Deterministic pseudo-random distributions keyed on (seed, frame, context).

    Each row is hashed from ``(seed, salt, frame, context)`` alone, so rows
    never depend on query order. Uniforms become exponential variates,
    which are raised to ``concentration``, mixed with ``blank_bias`` on the
    blank entry and renormalized. A swap event at frame ``f`` XORs a
    random salt into the key of every frame ``>= f``, so the ranking of
    continuations can change abruptly, which is what makes beam search
    re-rank and the display flicker.
    """

    def __init__(self, spec: SyntheticSourceSpec):
        super().__init__(Vocabulary.synthetic(spec.vocab_size), spec.frame_count, spec.context_order)
        self.spec = spec
        self.salts = self._swap_salts(spec)

    @staticmethod
    def _swap_salts(spec: SyntheticSourceSpec) -> Tuple[int, ...]:
        salts = [0]
        salt = 0
        for f in range(1, spec.frame_count + 1):
            u, v = counter_uniforms(_key(spec.seed, _TAG_SWAP, f), 2)
            if u < spec.instability:
                salt ^= int(v * 2.0**63) | 1
            salts.append(salt)
        return tuple(salts)

    @property
    def swap_frames(self) -> Tuple[int, ...]:
        return tuple(f for f in range(1, self.frame_count + 1) if self.salts[f] != self.salts[f - 1])

    def _row(self, frame: int, context: Tokens) -> np.ndarray:
        spec = self.spec
        key = _key(spec.seed, _TAG_ROW, self.salts[frame], frame, len(context), *context)
        c = spec.concentration
        q = [(-math.log(u)) ** c for u in counter_uniforms(key, spec.vocab_size)]
        scale = (1.0 - spec.blank_bias) / math.fsum(q)
        p = [x * scale for x in q]
        p[self.vocab.blank_id] += spec.blank_bias
        total = math.fsum(p)
        return np.array([math.log(x / total) if x > 0 else -math.inf for x in p])


class LatticeError(ValueError):
    """Malformed lattice file; the message names the offending line."""


class LatticeSource(ScoringSource):
    """Replays stored probability rows; unlisted contexts get ``default``."""

    def __init__(
        self,
        vocab: Vocabulary,
        frame_count: int,
        context_order: int,
        default: Sequence[float],
        rows: Optional[Dict[Tuple[int, Tokens], Sequence[float]]] = None,
    ):
        super().__init__(vocab, frame_count, context_order)
        n = len(vocab)
        self.default = _check_row(default, n, "DEFAULT")
        self.rows: Dict[Tuple[int, Tokens], Tuple[float, ...]] = {}
        for (frame, ctx), probs in (rows or {}).items():
            what = f"ROW f={frame} ctx={_fmt_ctx(ctx)}"
            self.rows[(frame, tuple(ctx))] = _check_entry(self, frame, ctx, probs, what)

    def _row(self, frame: int, context: Tokens) -> np.ndarray:
        probs = self.rows.get((frame, context), self.default)
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(probs, dtype=np.float64))


def _check_entry(src: ScoringSource, frame: int, ctx: Tokens, probs, what: str) -> Tuple[float, ...]:
    n = len(src.vocab)
    if not 1 <= frame <= src.frame_count:
        raise LatticeError(f"{what}: frame out of range 1..{src.frame_count}")
    if len(ctx) > src.context_order:
        raise LatticeError(f"{what}: context longer than K={src.context_order}")
    if any(not 0 <= t < n for t in ctx):
        raise LatticeError(f"{what}: token index out of range")
    if src.vocab.blank_id in ctx:
        raise LatticeError(f"{what}: context contains blank")
    return _check_row(probs, n, what)


def _check_row(probs: Sequence[float], n: int, what: str) -> Tuple[float, ...]:
    probs = tuple(float(p) for p in probs)
    if len(probs) != n:
        raise LatticeError(f"{what}: expected {n} probabilities, got {len(probs)}")
    if any(not (p >= 0.0 and math.isfinite(p)) for p in probs):
        raise LatticeError(f"{what}: probabilities must be finite and non-negative")
    if abs(math.fsum(probs) - 1.0) > LATTICE_ATOL:
        raise LatticeError(f"{what}: row not normalized (sums to {math.fsum(probs):.9g})")
    return probs


def _fmt_ctx(ctx: Iterable[int]) -> str:
    ctx = tuple(ctx)
    return ",".join(str(t) for t in ctx) if ctx else "-"


def _fmt_row(probs: Sequence[float]) -> str:
    return " ".join(repr(float(p)) for p in probs)


def _parse_kv(fields: Sequence[str], expected: Sequence[str], lineno: int) -> Dict[str, str]:
    out = {}
    for f in fields:
        key, sep, value = f.partition("=")
        if not sep or key not in expected or key in out:
            raise LatticeError(f"line {lineno}: unexpected field {f!r}")
        out[key] = value
    missing = [k for k in expected if k not in out]
    if missing:
        raise LatticeError(f"line {lineno}: missing {', '.join(missing)}")
    return out


def _parse_probs(fields: Sequence[str], lineno: int) -> Tuple[float, ...]:
    try:
        return tuple(float(x) for x in fields)
    except ValueError as exc:
        raise LatticeError(f"line {lineno}: {exc}") from None


def parse_lattice(text: str) -> LatticeSource:
    lines = text.splitlines()
    if len(lines) < 3:
        raise LatticeError("lattice needs a header, a VOCAB line and a DEFAULT line")

    head = lines[0].split()
    if head[:2] != ["LATTICE", "v1"]:
        raise LatticeError("line 1: expected 'LATTICE v1 ...' header")
    kv = _parse_kv(head[2:], ("N", "T", "K", "BLANK", "BOS"), 1)
    try:
        n, t, k, blank, bos = (int(kv[x]) for x in ("N", "T", "K", "BLANK", "BOS"))
    except ValueError as exc:
        raise LatticeError(f"line 1: {exc}") from None

    vocab_fields = lines[1].split()
    if not vocab_fields or vocab_fields[0] != "VOCAB":
        raise LatticeError("line 2: expected VOCAB")
    if len(vocab_fields) - 1 != n:
        raise LatticeError(f"line 2: VOCAB lists {len(vocab_fields) - 1} tokens, header says N={n}")
    try:
        vocab = Vocabulary(tuple(vocab_fields[1:]), blank, bos)
    except ValueError as exc:
        raise LatticeError(f"line 2: {exc}") from None

    default_fields = lines[2].split()
    if not default_fields or default_fields[0] != "DEFAULT":
        raise LatticeError("line 3: expected DEFAULT")
    src = LatticeSource(vocab, t, k, _check_row(_parse_probs(default_fields[1:], 3), n, "line 3"))

    rows: Dict[Tuple[int, Tokens], Tuple[float, ...]] = {}
    for lineno, line in enumerate(lines[3:], start=4):
        fields = line.split()
        if not fields:
            continue
        if fields[0] != "ROW":
            raise LatticeError(f"line {lineno}: unknown directive {fields[0]!r}")
        kv = _parse_kv(fields[1:3], ("f", "ctx"), lineno)
        try:
            frame = int(kv["f"])
            ctx = () if kv["ctx"] == "-" else tuple(int(x) for x in kv["ctx"].split(","))
        except ValueError as exc:
            raise LatticeError(f"line {lineno}: {exc}") from None
        if (frame, ctx) in rows:
            raise LatticeError(f"line {lineno}: duplicate row for f={frame} ctx={kv['ctx']}")
        rows[(frame, ctx)] = _check_entry(src, frame, ctx, _parse_probs(fields[3:], lineno), f"line {lineno}")

    src.rows = rows
    return src


def load_lattice(path: Union[str, Path]) -> LatticeSource:
    return parse_lattice(Path(path).read_text(encoding="utf-8"))


def format_lattice(src: LatticeSource) -> str:
    v = src.vocab
    out = [
        f"LATTICE v1 N={len(v)} T={src.frame_count} K={src.context_order} BLANK={v.blank_id} BOS={v.bos_id}",
        "VOCAB " + " ".join(v.tokens),
        "DEFAULT " + _fmt_row(src.default),
    ]
    for (frame, ctx) in sorted(src.rows):
        out.append(f"ROW f={frame} ctx={_fmt_ctx(ctx)} {_fmt_row(src.rows[(frame, ctx)])}")
    return "\n".join(out) + "\n"


def save_lattice(src: LatticeSource, path: Union[str, Path]) -> None:
    Path(path).write_text(format_lattice(src), encoding="utf-8")


def reachable_contexts(vocab: Vocabulary, context_order: int):
    """Every truncated context a decode can present to a source.

    Emitted sequences start with bos and never contain blank or a second
    bos, so a window either starts with bos or is filled with words.
    """
    if context_order == 0:
        return [()]
    words = vocab.emittable()
    out = []
    for j in range(context_order):
        out.extend((vocab.bos_id,) + w for w in itertools.product(words, repeat=j))
    out.extend(itertools.product(words, repeat=context_order))
    return out


def to_lattice(src: ScoringSource) -> LatticeSource:
    """Tabulate any source into a replayable lattice (uniform default row)."""
    n = len(src.vocab)
    rows = {}
    for frame in range(1, src.frame_count + 1):
        for ctx in reachable_contexts(src.vocab, src.context_order):
            p = np.exp(src.score_next(frame, ctx))
            rows[(frame, ctx)] = tuple(float(x) for x in p / p.sum())
    return LatticeSource(src.vocab, src.frame_count, src.context_order, (1.0 / n,) * n, rows)
