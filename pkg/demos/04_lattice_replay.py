# # Exporting a source to a lattice file and replaying it
#
# A lattice file stores one probability row per (frame, context) plus a
# default row. Tabulating a synthetic source gives a file that another
# decoder, or this one, can replay without the generator.

import tempfile
from pathlib import Path

from revdec import DecoderConfig, SyntheticSourceSpec, decode_stream, load_lattice, save_lattice, to_lattice

src = SyntheticSourceSpec(seed=3, vocab_size=5, frame_count=6, context_order=1, instability=0.5).build()
lattice = to_lattice(src)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "demo.lat"
    save_lattice(lattice, path)
    text = path.read_text()
    replayed = load_lattice(path)

print("\n".join(text.splitlines()[:6]))
print(f"... {len(text.splitlines())} lines")

cfg = DecoderConfig(beam_size=4, chunk_size=2, word_reward=0.0)
a = decode_stream(src, cfg)
b = decode_stream(replayed, cfg)
print("same commits:", a.commits == b.commits)
print("score drift:", abs(a.final.log_score - b.final.log_score))
