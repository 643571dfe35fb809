# # Erasure, lagging and BLEU on a hand-made display sequence
#
# Four successive displays of an English caption. The third-to-fourth step
# throws away everything, including "West", which later returns as "west";
# token identity is exact, so the case change counts as a revision.

from revdec import CommitEvent, DecodeTrace, DecoderConfig, Hypothesis, Vocabulary
from revdec.metrics import bleu, erasure, evaluate, finalization_frames

displays = [
    "American",
    "West central US",
    "West central US has many",
    "there are many big mountains in west central US",
]
words = list(dict.fromkeys(w for d in displays for w in d.split()))
vocab = Vocabulary(("<blank>", "<s>", *words))
ids = [vocab.encode(d.split()) for d in displays]

for a, b in zip(displays, displays[1:]):
    print(f"{erasure(a.split(), b.split())} erased: {a!r} -> {b!r}")

# Wrap the displays in a trace: commits at frames 4, 8, 12, 16 of a 16-frame stream.

final = Hypothesis((1, *ids[-1]), 0.0, (0,) + (16,) * len(ids[-1]))
trace = DecodeTrace(
    config=DecoderConfig(frame_span_ms=40.0),
    commits=tuple(CommitEvent(4 * (i + 1), d) for i, d in enumerate(ids)),
    final=final,
    source_frames=16,
    vocab=vocab,
    reference=tuple("there are many tall mountains in west central US".split()),
)
report = evaluate(trace)
print("NE", round(report.ne, 4))
print("finalized at frames", finalization_frames(trace))
print("AL", report.al_frames, "frames =", report.al_ms, "ms")
print("BLEU against the reference", round(report.bleu, 2))

# The small BLEU example: three of four unigrams match, smoothing handles the rest.

print("BLEU(a b c d | a b c e) =", round(bleu("a b c d".split(), "a b c e".split()), 2))
