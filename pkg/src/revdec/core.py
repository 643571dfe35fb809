"""Value types shared by the scoring sources, the decoder and the metrics.

Token sequences are plain tuples of vocabulary indices. Everything here is
frozen after construction, so a source, a beam or a trace can be handed to
several threads at once.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

Tokens = Tuple[int, ...]


def longest_common_prefix(a: Sequence[int], b: Sequence[int]) -> int:
    """Length of the longest shared prefix, by exact token-index equality."""
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return i
    return n


@dataclass(frozen=True)
class Vocabulary:
    tokens: Tuple[str, ...]
    blank_id: int = 0
    bos_id: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        n = len(self.tokens)
        if len(set(self.tokens)) != n:
            raise ValueError("vocabulary tokens must be unique")
        for name in ("blank_id", "bos_id"):
            idx = getattr(self, name)
            if not 0 <= idx < n:
                raise ValueError(f"{name}={idx} out of range for vocabulary of size {n}")
        if self.blank_id == self.bos_id:
            raise ValueError("blank_id and bos_id must differ")

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def synthetic(cls, size: int) -> "Vocabulary":
        """``<blank>``, ``<s>`` and ``size - 2`` placeholder words ``w2 .. w{size-1}``."""
        if size < 3:
            raise ValueError("a synthetic vocabulary needs at least 3 entries")
        return cls(("<blank>", "<s>") + tuple(f"w{i}" for i in range(2, size)), 0, 1)

    def emittable(self) -> Tuple[int, ...]:
        """Indices the decoder may emit: everything except blank and bos."""
        return tuple(i for i in range(len(self.tokens)) if i not in (self.blank_id, self.bos_id))

    def decode(self, ids: Sequence[int]) -> Tuple[str, ...]:
        return tuple(self.tokens[i] for i in ids)

    def encode(self, words: Sequence[str]) -> Tokens:
        index = {tok: i for i, tok in enumerate(self.tokens)}
        return tuple(index[w] for w in words)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.blank_id} {self.bos_id}\n".encode())
        h.update("\n".join(self.tokens).encode("utf-8"))
        return h.hexdigest()


@dataclass(frozen=True)
class Hypothesis:
    """A partial translation: tokens (bos first), its score, and per-token emission frames."""

    tokens: Tokens
    log_score: float
    emit_frames: Tuple[int, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.emit_frames):
            raise ValueError("tokens and emit_frames must have the same length")
        if any(b < a for a, b in zip(self.emit_frames, self.emit_frames[1:])):
            raise ValueError("emit_frames must be non-decreasing")

    @classmethod
    def initial(cls, bos_id: int) -> "Hypothesis":
        return cls((bos_id,), 0.0, (0,))

    @property
    def output(self) -> Tokens:
        """Displayable tokens (the leading bos stripped)."""
        return self.tokens[1:]

    @property
    def output_frames(self) -> Tuple[int, ...]:
        return self.emit_frames[1:]

    def sort_key(self):
        return (-self.log_score, self.tokens)

    @classmethod
    def _trusted(cls, tokens, log_score, emit_frames) -> "Hypothesis":
        # skips validation; only for extensions of an already valid hypothesis
        h = object.__new__(cls)
        object.__setattr__(h, "tokens", tokens)
        object.__setattr__(h, "log_score", log_score)
        object.__setattr__(h, "emit_frames", emit_frames)
        return h

    def extend(self, token: int, score_delta: float, frame: int) -> "Hypothesis":
        if frame < self.emit_frames[-1]:
            raise ValueError("emission frame earlier than the previous token")
        return Hypothesis._trusted(self.tokens + (token,), self.log_score + score_delta, self.emit_frames + (frame,))

    def rescore(self, score_delta: float) -> "Hypothesis":
        return Hypothesis._trusted(self.tokens, self.log_score + score_delta, self.emit_frames)


def better_path(a: Hypothesis, b: Hypothesis) -> Hypothesis:
    """Pick which of two paths to the same token sequence survives a merge.

    Higher score wins; on an exact tie the earlier emission timing is kept.
    """
    if a.log_score != b.log_score:
        return a if a.log_score > b.log_score else b
    return a if a.emit_frames <= b.emit_frames else b


@dataclass(frozen=True)
class Beam:
    entries: Tuple[Hypothesis, ...]
    capacity: int

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.capacity < 1:
            raise ValueError("beam capacity must be positive")
        if not 1 <= len(self.entries) <= self.capacity:
            raise ValueError(f"beam holds {len(self.entries)} entries, capacity {self.capacity}")
        keys = [h.sort_key() for h in self.entries]
        if keys != sorted(keys):
            raise ValueError("beam entries must be sorted by (score desc, tokens asc)")
        if len({h.tokens for h in self.entries}) != len(self.entries):
            raise ValueError("beam entries must have distinct token sequences")

    @classmethod
    def top(cls, hyps, capacity: int) -> "Beam":
        """Sort candidates deterministically and keep the best ``capacity``."""
        ranked = sorted(hyps, key=Hypothesis.sort_key)
        return cls(tuple(ranked[:capacity]), capacity)

    @property
    def best(self) -> Hypothesis:
        return self.entries[0]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


@dataclass(frozen=True)
class CommitEvent:
    frame_index: int
    displayed: Tokens

    def __post_init__(self):
        object.__setattr__(self, "displayed", tuple(self.displayed))


@dataclass(frozen=True)
class DecoderConfig:
    """Search parameters.

    ``revision_window=None`` means no revision limit. ``word_reward=None``
    resolves to 1.0 without a revision window and 0.0 with one; see
    :meth:`resolved`.
    """

    beam_size: int = 7
    chunk_size: int = 4
    revision_window: Optional[int] = None
    word_reward: Optional[float] = None
    max_symbols_per_frame: int = 5
    frame_span_ms: float = 40.0

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if self.max_symbols_per_frame < 1:
            raise ValueError("max_symbols_per_frame must be >= 1")
        if self.revision_window is not None and self.revision_window < 0:
            raise ValueError("revision_window must be non-negative")
        if self.word_reward is not None and (self.word_reward < 0 or not math.isfinite(self.word_reward)):
            raise ValueError("word_reward must be a finite value >= 0")
        if not self.frame_span_ms > 0:
            raise ValueError("frame_span_ms must be positive")

    def resolved(self, revision_window_active: bool) -> "DecoderConfig":
        if self.word_reward is not None:
            return self
        return replace(self, word_reward=0.0 if revision_window_active else 1.0)

    def to_dict(self) -> dict:
        return {
            "beam_size": self.beam_size,
            "chunk_size": self.chunk_size,
            "revision_window": self.revision_window,
            "word_reward": self.word_reward,
            "max_symbols_per_frame": self.max_symbols_per_frame,
            "frame_span_ms": self.frame_span_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecoderConfig":
        known = {k: d[k] for k in cls().to_dict() if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if known.get("frame_span_ms") is not None:
            known["frame_span_ms"] = float(known["frame_span_ms"])
        if known.get("word_reward") is not None:
            known["word_reward"] = float(known["word_reward"])
        return cls(**known)


@dataclass(frozen=True)
class DecodeTrace:
    """Everything a decode displayed, plus the final hypothesis."""

    config: DecoderConfig
    commits: Tuple[CommitEvent, ...]
    final: Hypothesis
    source_frames: int
    vocab: Vocabulary
    commit_mode: str = "chunk"
    prune_mode: str = "none"
    reference: Optional[Tuple[str, ...]] = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "commits", tuple(self.commits))
        if self.reference is not None:
            object.__setattr__(self, "reference", tuple(self.reference))
        self.validate()

    def validate(self) -> None:
        if not self.commits:
            raise ValueError("trace has no commits")
        frames = [c.frame_index for c in self.commits]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("commit frame indices must strictly increase")
        if self.commits[-1].displayed != self.final.output:
            raise ValueError("last commit must display the final hypothesis")
        if self.source_frames < frames[-1]:
            raise ValueError("source_frames is smaller than the last commit frame")
        if any(f > self.source_frames for f in self.final.emit_frames):
            raise ValueError("final emit_frames exceed source_frames")
