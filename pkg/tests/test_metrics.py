import math
import os

import pytest
from hypothesis import given
from hypothesis import strategies as st

from revdec import CommitEvent, DecodeTrace, DecoderConfig, Hypothesis, Vocabulary
from revdec.metrics import (
    DegenerateStreamWarning,
    MetricsReport,
    average_lagging,
    bleu,
    erasure,
    evaluate,
    finalization_frames,
    normalized_erasure,
    revision_histogram,
)

CAPTION = [
    "American".split(),
    "West central US".split(),
    "West central US has many".split(),
    "there are many big mountains in west central US".split(),
]


def make_trace(displays, frames=None, T=None, span=40.0, reference=None, words=None):
    """Trace over word-level displays; words map to vocabulary ids in first-seen order."""
    words = words or list(dict.fromkeys(w for d in displays for w in d))
    vocab = Vocabulary(("<blank>", "<s>", *words))
    ids = [vocab.encode(d) for d in displays]
    frames = frames or list(range(1, len(displays) + 1))
    T = T or frames[-1]
    final = Hypothesis((1, *ids[-1]), 0.0, (0,) + (T,) * len(ids[-1]))
    return DecodeTrace(
        config=DecoderConfig(frame_span_ms=span),
        commits=tuple(CommitEvent(f, d) for f, d in zip(frames, ids)),
        final=final,
        source_frames=T,
        vocab=vocab,
        reference=reference,
    )


def oracle_erasure(prev, nxt):
    return len(prev) - len(os.path.commonprefix([list(prev), list(nxt)]))


@pytest.mark.parametrize("i, expected", [(0, 1), (1, 0), (2, 5)])
def test_caption_erasures(i, expected):
    assert erasure(CAPTION[i], CAPTION[i + 1]) == expected == oracle_erasure(CAPTION[i], CAPTION[i + 1])


def test_case_difference_is_a_revision():
    assert erasure(["West"], ["west"]) == 1


def test_caption_normalized_erasure():
    expected = sum(oracle_erasure(a, b) for a, b in zip(CAPTION, CAPTION[1:])) / len(CAPTION[-1])
    ne = normalized_erasure(make_trace(CAPTION))
    assert ne == expected
    assert abs(ne - 0.6667) < 1e-4
    assert abs(ne - 6 / 9) < 1e-9


def test_caption_histogram():
    assert revision_histogram(make_trace(CAPTION)) == {0: 1, 1: 1, 5: 1}


def test_single_commit_histogram_empty():
    assert revision_histogram(make_trace([["a", "b"]])) == {}


def test_degenerate_normalized_erasure():
    assert normalized_erasure(make_trace([[], []], words=["a"])) == 0.0
    with pytest.warns(DegenerateStreamWarning):
        assert normalized_erasure(make_trace([["a"], []])) == math.inf


def test_al_hand_example():
    # T=4, token 1 final at frame 2, token 2 at frame 4
    trace = make_trace([["a"], ["a", "b"]], frames=[2, 4])
    assert finalization_frames(trace) == (2, 4)
    al_frames, al_ms = average_lagging(trace)
    assert abs(al_frames - 2.0) < 1e-9
    assert abs(al_ms - 80.0) < 1e-9


def test_al_uses_last_restoration():
    trace = make_trace([["a"], ["b"], ["a"], ["a", "c"]], frames=[1, 2, 3, 4])
    assert finalization_frames(trace) == (3, 4)


def test_al_everything_at_the_end():
    trace = make_trace([[], ["a", "b", "c"]], frames=[5, 10], words=["a", "b", "c"])
    assert average_lagging(trace)[0] == 10.0


@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 3))
def test_al_constant_lag(L, step, lag):
    # token t appears at frame t*step + lag; commits every frame through T
    T = L * step + lag
    displays = [["w%d" % j for j in range(L) if (j + 1) * step + lag <= f] for f in range(1, T + 1)]
    trace = make_trace(displays, T=T, words=["w%d" % j for j in range(L)])
    g = finalization_frames(trace)
    assert g == tuple((t + 1) * step + lag for t in range(L))
    tau = next(t for t in range(1, L + 1) if g[t - 1] == T)
    expected = sum(g[t - 1] - (t - 1) * T / L for t in range(1, tau + 1)) / tau
    assert average_lagging(trace)[0] == pytest.approx(expected)


@pytest.mark.parametrize("span", [10.0, 40.0, 80.0])
def test_al_ms_scales_with_frame_span(span):
    trace = make_trace(CAPTION, span=span)
    frames, ms = average_lagging(trace)
    assert ms == pytest.approx(frames * span)


def test_al_empty_output_is_nan():
    frames, ms = average_lagging(make_trace([[]], words=["a"]))
    assert math.isnan(frames) and math.isnan(ms)


def brute_bleu(cand, ref, max_order=4):
    """Counts every n-gram by scanning all index windows."""
    logs = []
    for n in range(1, max_order + 1):
        windows = [tuple(cand[i:i + n]) for i in range(len(cand)) if i + n <= len(cand)]
        ref_windows = [tuple(ref[i:i + n]) for i in range(len(ref)) if i + n <= len(ref)]
        hits = 0
        used = []
        for w in windows:
            if ref_windows.count(w) > used.count(w):
                hits += 1
                used.append(w)
        num, den = hits, len(windows)
        if n > 1:
            num, den = num + 1, den + 1
        if num == 0:
            return 0.0
        logs.append(math.log(num / den))
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return 100 * bp * math.exp(sum(logs) / max_order)


def test_bleu_hand_example():
    cand, ref = list("abcd"), list("abce")
    hand = 100 * (0.75 * 0.75 * (2 / 3) * 0.5) ** 0.25
    assert abs(bleu(cand, ref) - 65.80) < 0.05
    assert bleu(cand, ref) == pytest.approx(hand, abs=1e-12)
    assert bleu(cand, ref) == pytest.approx(brute_bleu(cand, ref), abs=1e-12)


def test_bleu_edge_cases():
    assert bleu(list("abcde"), list("abcde")) == pytest.approx(100.0)
    assert bleu([], ["a"]) == 0.0
    with pytest.raises(ValueError):
        bleu(["a"], [])


tokens = st.lists(st.sampled_from("abcd"), min_size=1, max_size=9)


@given(tokens, tokens)
def test_bleu_matches_brute_force(cand, ref):
    assert bleu(cand, ref) == pytest.approx(brute_bleu(cand, ref), abs=1e-9)


@given(tokens, tokens, st.permutations("abcd"))
def test_bleu_invariant_under_renaming(cand, ref, perm):
    rename = dict(zip("abcd", perm))
    assert bleu(cand, ref) == pytest.approx(bleu([rename[t] for t in cand], [rename[t] for t in ref]))


def test_evaluate_caption():
    ref = CAPTION[-1]
    report = evaluate(make_trace(CAPTION, reference=tuple(ref)))
    assert report.ne == pytest.approx(6 / 9)
    assert report.erased_total == 6 and report.final_length == 9
    assert report.bleu == pytest.approx(100.0)
    assert report.max_erasure == 5
    assert MetricsReport.from_dict(report.to_dict()) == report
    assert evaluate(make_trace(CAPTION)).bleu is None


def test_report_keys_are_fixed():
    keys = list(evaluate(make_trace(CAPTION)).to_dict())
    assert keys == ["ne", "al_ms", "al_frames", "revision_histogram", "bleu", "erased_total", "final_length"]
