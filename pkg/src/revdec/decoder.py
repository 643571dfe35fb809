"""Frame-synchronous transducer beam search with revision control.

One call to :func:`expand_frame` consumes one input frame. Every beam entry
may emit up to ``max_symbols_per_frame`` words at that frame; a path leaves
the frame either by emitting blank (paying the blank log-probability) or by
hitting the emission cap (free). The best ``beam_size`` distinct token
sequences survive.

:func:`decode_stream` drives the frames, publishes the beam's best entry at
commit points, and, with a revision window, drops every entry that would
revise more than the last ``rw`` tokens of what was just published.
"""

from __future__ import annotations

import heapq
import math
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .core import (
    Beam,
    CommitEvent,
    DecodeTrace,
    DecoderConfig,
    Hypothesis,
    Tokens,
)
from .scoring import ScoringSource


class CommitPolicy(str, Enum):
    EVERY_FRAME = "every_frame"
    CHUNK = "chunk"

    @classmethod
    def parse(cls, value: Union[str, "CommitPolicy"]) -> "CommitPolicy":
        if isinstance(value, cls):
            return value
        if value == "frame":
            return cls.EVERY_FRAME
        return cls(value)

    def fires(self, frame: int, chunk_size: int) -> bool:
        if self is CommitPolicy.EVERY_FRAME:
            return True
        return frame % chunk_size == 0


class PrunePolicy(str, Enum):
    NONE = "none"
    REVISION_WINDOW = "revision_window"

    @classmethod
    def parse(cls, value: Union[str, "PrunePolicy"]) -> "PrunePolicy":
        return value if isinstance(value, cls) else cls(value)


def emission_gain(row: Sequence[float], token: int, word_reward: float) -> float:
    """Score added when ``token`` is emitted from ``row`` (word reward included)."""
    return row[token] + word_reward


def blank_gain(row: Sequence[float], blank_id: int) -> float:
    return row[blank_id]


class _TopDistinct:
    """Completed paths of one frame, merged by token sequence.

    Tracks the score of the ``k``-th best distinct sequence so the search
    can skip subtrees that cannot reach the top ``k``.
    """

    def __init__(self, k: int):
        self.k = k
        self.done: Dict[Tokens, Tuple[float, Tuple[int, ...]]] = {}
        self._heap: List[float] = []

    def floor(self) -> float:
        return self._heap[0] if len(self._heap) >= self.k else -math.inf

    def add(self, tokens: Tokens, score: float, frames: Tuple[int, ...]) -> None:
        old = self.done.get(tokens)
        if old is None:
            self.done[tokens] = (score, frames)
            if len(self._heap) < self.k:
                heapq.heappush(self._heap, score)
            elif score > self._heap[0]:
                heapq.heapreplace(self._heap, score)
            return
        # same rule as core.better_path
        if score > old[0] or (score == old[0] and frames < old[1]):
            self.done[tokens] = (score, frames)
            if score != old[0]:
                self._heap = heapq.nlargest(self.k, (s for s, _ in self.done.values()))
                heapq.heapify(self._heap)

    def beam(self) -> Beam:
        best = heapq.nsmallest(self.k, self.done.items(), key=lambda kv: (-kv[1][0], kv[0]))
        # paths only ever append frames >= the last one, so skip re-validation
        return Beam(tuple(Hypothesis._trusted(tok, s, fr) for tok, (s, fr) in best), self.k)


def expand_frame(beam: Beam, src: ScoringSource, frame: int, cfg: DecoderConfig) -> Beam:
    """Advance every hypothesis in ``beam`` through ``frame``; keep the top ``beam_size``.

    The within-frame enumeration is exact: a partial path is abandoned only
    when even a best-case continuation (every further word at probability 1)
    scores below the current ``beam_size``-th completed sequence.
    """
    if len(beam) == 0:
        raise ValueError("cannot expand an empty beam")
    if not 1 <= frame <= src.frame_count:
        raise IndexError(f"frame {frame} outside 1..{src.frame_count}")

    w = cfg.word_reward or 0.0
    cap = cfg.max_symbols_per_frame
    blank = src.vocab.blank_id
    top = _TopDistinct(cfg.beam_size)

    ranked = src.ranked
    add = top.add

    def grow(tokens: Tokens, score: float, frames: Tuple[int, ...], emitted: int) -> None:
        if emitted == cap:
            add(tokens, score, frames)
            return
        row, order = ranked(frame, tokens)
        add(tokens, score + blank_gain(row, blank), frames)
        headroom = (cap - emitted - 1) * w
        next_frames = frames + (frame,)
        for tok in order:
            child = score + emission_gain(row, tok, w)
            if child + headroom < top.floor():
                break
            grow(tokens + (tok,), child, next_frames, emitted + 1)

    for hyp in beam:
        grow(hyp.tokens, hyp.log_score, hyp.emit_frames, 0)
    return top.beam()


def accept(candidate: Sequence[int], best: Sequence[int], rw: int) -> bool:
    """True when ``candidate`` agrees with ``best`` on all but its last ``rw`` tokens."""
    keep = max(0, len(best) - rw)
    return tuple(candidate[:keep]) == tuple(best[:keep])


def prune_revision_window(beam: Beam, rw: int) -> Beam:
    """Drop entries that would revise more than ``rw`` trailing tokens of the best one.

    The result may hold fewer than ``capacity`` entries but never zero.
    """
    best = beam.entries[0].output
    kept = tuple(h for h in beam if accept(h.output, best, rw))
    return Beam(kept, beam.capacity)


def decode_stream(
    src: ScoringSource,
    cfg: DecoderConfig,
    commit: Union[str, CommitPolicy] = CommitPolicy.CHUNK,
    prune: Optional[Union[str, PrunePolicy]] = None,
    reference: Optional[Sequence[str]] = None,
) -> DecodeTrace:
    """Decode the whole stream and record what was displayed at each commit.

    ``prune`` defaults to a revision window exactly when
    ``cfg.revision_window`` is set. An unset ``cfg.word_reward`` is resolved
    (1.0 without a window, 0.0 with one) and the resolved config is stored
    in the returned trace.
    """
    commit = CommitPolicy.parse(commit)
    if prune is None:
        prune = PrunePolicy.NONE if cfg.revision_window is None else PrunePolicy.REVISION_WINDOW
    prune = PrunePolicy.parse(prune)
    if prune is PrunePolicy.REVISION_WINDOW and cfg.revision_window is None:
        raise ValueError("revision_window pruning needs cfg.revision_window")
    if prune is PrunePolicy.NONE and cfg.revision_window is not None:
        raise ValueError("cfg.revision_window is set but pruning is disabled")
    cfg = cfg.resolved(prune is PrunePolicy.REVISION_WINDOW)

    vocab = src.vocab
    T = src.frame_count
    beam = Beam((Hypothesis.initial(vocab.bos_id),), cfg.beam_size)
    commits: List[CommitEvent] = []
    if T == 0:
        commits.append(CommitEvent(0, ()))

    for frame in range(1, T + 1):
        beam = expand_frame(beam, src, frame, cfg)
        if commit.fires(frame, cfg.chunk_size) or frame == T:
            commits.append(CommitEvent(frame, beam.best.output))
            if prune is PrunePolicy.REVISION_WINDOW:
                beam = prune_revision_window(beam, cfg.revision_window)

    return DecodeTrace(
        config=cfg,
        commits=tuple(commits),
        final=beam.best,
        source_frames=T,
        vocab=vocab,
        commit_mode=commit.value,
        prune_mode=prune.value,
        reference=tuple(reference) if reference is not None else None,
    )
