import sys

import pytest

from revdec import DecoderConfig, LatticeSource, Vocabulary


def fixed_source(probs, frames=1, words=None, context_order=0, rows=None):
    """Context-free source: the same ``probs`` row (blank, <s>, words...) at every frame."""
    n = len(probs)
    words = words or [chr(ord("a") + i) for i in range(n - 2)]
    vocab = Vocabulary(("<blank>", "<s>", *words), 0, 1)
    return LatticeSource(vocab, frames, context_order, probs, rows or {})


@pytest.fixture
def make_fixed():
    return fixed_source


@pytest.fixture
def cfg():
    return DecoderConfig(beam_size=4, chunk_size=2, word_reward=0.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
