"""Brute-force reference search for tiny instances.

Enumerates every emission path through all frames with the decoder's rules
(blank leaves a frame, the emission cap leaves it for free, bos and blank are
never emitted) and scores them with the decoder's own gain functions, so
scores are bit-comparable. No beam, no per-frame pruning, no merging until
the very end.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Dict, List, Tuple

from .core import DecoderConfig, Hypothesis, Tokens, better_path
from .decoder import blank_gain, decode_stream, emission_gain
from .metrics import normalized_erasure
from .scoring import ScoringSource

MAX_SEARCH_SPACE = 10**7


class SearchSpaceTooLarge(ValueError):
    def __init__(self, bound: int):
        super().__init__(f"search space bound {bound} exceeds {MAX_SEARCH_SPACE}")
        self.bound = bound


def search_space_bound(src: ScoringSource, cfg: DecoderConfig) -> int:
    return len(src.vocab) ** (src.frame_count * cfg.max_symbols_per_frame)


def _check_bound(src: ScoringSource, cfg: DecoderConfig) -> None:
    bound = search_space_bound(src, cfg)
    if bound > MAX_SEARCH_SPACE:
        raise SearchSpaceTooLarge(bound)


def frame_paths(
    src: ScoringSource, frame: int, start: Hypothesis, word_reward: float, cap: int
) -> List[Hypothesis]:
    """Every way ``start`` can pass through ``frame``, unmerged."""
    vocab = src.vocab
    words = [t for t in range(len(vocab)) if t not in (vocab.blank_id, vocab.bos_id)]
    out = []
    pending = [(start, 0)]
    while pending:
        hyp, emitted = pending.pop()
        if emitted == cap:
            out.append(hyp)
            continue
        row = src.score_next(frame, hyp.tokens).tolist()
        out.append(hyp.rescore(blank_gain(row, vocab.blank_id)))
        for tok in words:
            if row[tok] == -math.inf:
                continue
            pending.append((hyp.extend(tok, emission_gain(row, tok, word_reward), frame), emitted + 1))
    return out


def all_paths(src: ScoringSource, cfg: DecoderConfig) -> List[Hypothesis]:
    w = cfg.word_reward or 0.0
    paths = [Hypothesis.initial(src.vocab.bos_id)]
    for frame in range(1, src.frame_count + 1):
        paths = [p for h in paths for p in frame_paths(src, frame, h, w, cfg.max_symbols_per_frame)]
    return paths


def best_per_sequence(paths) -> Dict[Tokens, Hypothesis]:
    best: Dict[Tokens, Hypothesis] = {}
    for h in paths:
        old = best.get(h.tokens)
        best[h.tokens] = h if old is None else better_path(old, h)
    return best


def exhaustive_best(src: ScoringSource, cfg: DecoderConfig) -> Hypothesis:
    """Highest-scoring complete hypothesis, ties broken like the decoder.

    ``cfg.word_reward=None`` counts as 0.

    Raises:
        SearchSpaceTooLarge: ``len(vocab) ** (T * max_symbols_per_frame)``
            exceeds ``MAX_SEARCH_SPACE``.
    """
    _check_bound(src, cfg)
    best = best_per_sequence(all_paths(src, cfg))
    return min(best.values(), key=Hypothesis.sort_key)


def reachable_sequences(src: ScoringSource, cfg: DecoderConfig) -> int:
    """Number of distinct token sequences a full decode can end with."""
    _check_bound(src, cfg)
    return len({h.tokens for h in all_paths(src, cfg)})


def revision_frontier(src: ScoringSource, cfg: DecoderConfig, commit="chunk") -> Dict[int, Tuple[float, float]]:
    """Map each revision window ``rw`` to ``(normalized erasure, final score)``.

    Windows run from 0 up to the longest commit of the unconstrained decode;
    at that size the window never prunes, so larger values add nothing. All
    runs share one word reward (``cfg.word_reward``, 0 when unset) so the
    scores are comparable.
    """
    _check_bound(src, cfg)
    base = replace(cfg, revision_window=None, word_reward=cfg.word_reward or 0.0)
    free = decode_stream(src, base, commit)
    longest = max(len(c.displayed) for c in free.commits)
    out = {}
    for rw in range(longest + 1):
        trace = decode_stream(src, replace(base, revision_window=rw), commit)
        out[rw] = (normalized_erasure(trace), trace.final.log_score)
    return out
