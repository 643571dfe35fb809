"""Stability, latency and quality measures over decode traces.

Erasure follows the replace-the-display model: when a new commit is shown,
everything past the longest common prefix with the previous one counts as
erased. Normalized Erasure divides the total by the final length.

Average Lagging uses the frame at which each final token became stable, that
is, the first commit from which that token's prefix never changes again.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

from .core import DecodeTrace, longest_common_prefix


def erasure(prev: Sequence[int], nxt: Sequence[int]) -> int:
    return len(prev) - longest_common_prefix(prev, nxt)


def transition_erasures(trace: DecodeTrace):
    shown = [c.displayed for c in trace.commits]
    return [erasure(a, b) for a, b in zip(shown, shown[1:])]


class DegenerateStreamWarning(RuntimeWarning):
    """Tokens were erased but the final output is empty."""


def normalized_erasure(trace: DecodeTrace) -> float:
    """Total erased tokens per final token.

    An empty final output with no erasures scores 0. An empty final output
    after erasures has no meaningful normalization; it returns ``inf`` and
    emits :class:`DegenerateStreamWarning`.
    """
    total = sum(transition_erasures(trace))
    n = len(trace.final.output)
    if n:
        return total / n
    if total == 0:
        return 0.0
    warnings.warn(f"{total} tokens erased but the final output is empty", DegenerateStreamWarning)
    return math.inf


def finalization_frames(trace: DecodeTrace) -> Tuple[int, ...]:
    """Frame at which each final token position became stable.

    Position ``t`` (1-based) is stable from commit ``j`` on when every commit
    ``j' >= j`` displays the final prefix ``final[:t]``. A token that was
    erased and later restored is stable only from its last restoration.
    """
    final = trace.final.output
    commits = trace.commits
    g = [0] * len(final)
    # walk backwards; `agree` = length of prefix shared with the final output
    # by every commit from this one on
    agree = len(final)
    for c in reversed(commits):
        agree = min(agree, longest_common_prefix(c.displayed, final))
        for t in range(agree):
            g[t] = c.frame_index
    return tuple(g)


def average_lagging(trace: DecodeTrace) -> Tuple[float, float]:
    """Average Lagging in frames and in milliseconds.

    With delays ``g``, ``T`` source frames and ``L`` final tokens, the rate is
    ``r = L / T`` and the sum runs up to the first token whose delay reaches
    ``T``. Returns ``(nan, nan)`` for an empty final output.
    """
    g = finalization_frames(trace)
    if not g or trace.source_frames == 0:
        return math.nan, math.nan
    T = trace.source_frames
    rate = len(g) / T
    tau = next((t for t, d in enumerate(g, start=1) if d == T), len(g))
    al = sum(g[t - 1] - (t - 1) / rate for t in range(1, tau + 1)) / tau
    return al, al * trace.config.frame_span_ms


def revision_histogram(trace: DecodeTrace) -> Dict[int, int]:
    return dict(sorted(Counter(transition_erasures(trace)).items()))


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Sequence[str], reference: Sequence[str], max_order: int = 4) -> float:
    """Sentence BLEU on a 0-100 scale.

    Clipped n-gram precisions up to ``max_order``; orders above 1 use add-one
    smoothing. Brevity penalty ``min(1, exp(1 - |ref| / |cand|))``. Not a
    sacreBLEU-compatible score.
    """
    if not reference:
        raise ValueError("reference must be non-empty")
    if not candidate:
        return 0.0
    log_p = 0.0
    for n in range(1, max_order + 1):
        cand, ref = _ngrams(candidate, n), _ngrams(reference, n)
        matches = sum(min(c, ref[g]) for g, c in cand.items())
        total = max(len(candidate) - n + 1, 0)
        if n > 1:
            matches, total = matches + 1, total + 1
        if matches == 0:
            return 0.0
        log_p += math.log(matches / total)
    bp = min(1.0, math.exp(1.0 - len(reference) / len(candidate)))
    return 100.0 * bp * math.exp(log_p / max_order)


@dataclass
class MetricsReport:
    ne: float
    al_ms: float
    al_frames: float
    revision_histogram: Dict[int, int] = field(default_factory=dict)
    bleu: Optional[float] = None
    erased_total: int = 0
    final_length: int = 0

    @property
    def max_erasure(self) -> int:
        return max(self.revision_histogram, default=0)

    def to_dict(self) -> dict:
        return {
            "ne": self.ne,
            "al_ms": self.al_ms,
            "al_frames": self.al_frames,
            "revision_histogram": {str(k): v for k, v in sorted(self.revision_histogram.items())},
            "bleu": self.bleu,
            "erased_total": self.erased_total,
            "final_length": self.final_length,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            ne=d["ne"],
            al_ms=d["al_ms"],
            al_frames=d["al_frames"],
            revision_histogram={int(k): v for k, v in d["revision_histogram"].items()},
            bleu=d["bleu"],
            erased_total=d["erased_total"],
            final_length=d["final_length"],
        )


def evaluate(trace: DecodeTrace) -> MetricsReport:
    """All metrics for one trace; BLEU only when the trace carries a reference."""
    al_frames, al_ms = average_lagging(trace)
    score = None
    if trace.reference:
        score = bleu(trace.vocab.decode(trace.final.output), trace.reference)
    return MetricsReport(
        ne=normalized_erasure(trace),
        al_ms=al_ms,
        al_frames=al_frames,
        revision_histogram=revision_histogram(trace),
        bleu=score,
        erased_total=sum(transition_erasures(trace)),
        final_length=len(trace.final.output),
    )
