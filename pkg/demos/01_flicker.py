# # Watching a streaming decode flicker
#
# A synthetic source hands out next-token distributions frame by frame. With
# `instability` above zero, its rankings jump at random frames, so plain beam
# search keeps replacing what it already showed.

from revdec import DecoderConfig, SyntheticSourceSpec, decode_stream
from revdec.metrics import evaluate

spec = SyntheticSourceSpec(seed=7, vocab_size=10, frame_count=32, instability=0.8)
src = spec.build()
print("swap events at frames", src.swap_frames)

# Decode with b=7 and commit (display) the current best at every frame.
# Word reward is pinned to 0 so every run below uses the same scores.

cfg = DecoderConfig(beam_size=7, word_reward=0.0)
trace = decode_stream(src, cfg, commit="every_frame")

for c in trace.commits:
    print(f"{c.frame_index:3d}  {' '.join(src.vocab.decode(c.displayed))}")

# Every line that is not an extension of the previous one is a visible revision.

report = evaluate(trace)
print("NE", round(report.ne, 3), "erased", report.erased_total, "of", report.final_length)
print("revisions per commit", report.revision_histogram)

# A single-hypothesis beam never revises: there is nothing to re-rank.

greedy = decode_stream(src, DecoderConfig(beam_size=1, word_reward=0.0), commit="every_frame")
print("b=1 NE", evaluate(greedy).ne)
