"""Streaming transducer beam search with chunk-level commits and revision windows."""

from .core import (
    Beam,
    CommitEvent,
    DecodeTrace,
    DecoderConfig,
    Hypothesis,
    Vocabulary,
    longest_common_prefix,
)
from .decoder import (
    CommitPolicy,
    PrunePolicy,
    accept,
    decode_stream,
    expand_frame,
    prune_revision_window,
)
from .metrics import (
    MetricsReport,
    average_lagging,
    bleu,
    erasure,
    evaluate,
    normalized_erasure,
    revision_histogram,
)
from .oracle import exhaustive_best, revision_frontier
from .scoring import (
    LatticeError,
    LatticeSource,
    ScoringSource,
    SyntheticSource,
    SyntheticSourceSpec,
    format_lattice,
    load_lattice,
    parse_lattice,
    save_lattice,
    score_next,
    to_lattice,
)

__version__ = "0.1.0"
