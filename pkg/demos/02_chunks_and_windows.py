# # Chunk commits and revision windows
#
# Two levers reduce flicker. Committing only at chunk boundaries (every `u`
# frames) shows fewer intermediate states without touching the search.
# A revision window `rw` goes further: at each commit it drops beam entries
# that disagree with the best one outside its last `rw` tokens.

from revdec import DecoderConfig, SyntheticSourceSpec, decode_stream
from revdec.metrics import evaluate

src = SyntheticSourceSpec(seed=21, vocab_size=12, frame_count=48, instability=0.6).build()
base = DecoderConfig(beam_size=7, chunk_size=4, word_reward=0.0)

runs = {
    "every frame": decode_stream(src, base, commit="every_frame"),
    "chunk u=4": decode_stream(src, base, commit="chunk"),
}
for rw in (3, 1, 0):
    runs[f"chunk + rw={rw}"] = decode_stream(src, DecoderConfig(**{**base.to_dict(), "revision_window": rw}))

# Chunk commits leave the final hypothesis alone; windows trade score for stability.

print(f"{'setting':16s} {'NE':>6s} {'AL(ms)':>8s} {'max erase':>9s} {'score':>9s}")
for name, trace in runs.items():
    r = evaluate(trace)
    print(f"{name:16s} {r.ne:6.3f} {r.al_ms:8.1f} {r.max_erasure:9d} {trace.final.log_score:9.3f}")

assert runs["every frame"].final == runs["chunk u=4"].final
