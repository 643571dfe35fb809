# # A desk-scale sweep over the frozen scenario set
#
# One hundred synthetic scenarios (vocabulary 6-20, 8-64 frames, instability
# 0-1), each decoded five ways: a single-hypothesis beam, b=7 committing every
# frame, b=7 with chunk commits, and chunk commits with windows 0 and 3.
# Takes about ten seconds.

from revdec.harness import run_sweep, summarize, frozen_scenarios

cells = []
for sc in frozen_scenarios(100):
    cells += [
        sc.with_overrides(beam_size=1),
        sc.with_overrides(commit="every_frame"),
        sc,
        sc.with_overrides(revision_window=0),
        sc.with_overrides(revision_window=3),
    ]

summary = summarize(run_sweep(cells, jobs=4))
print(f"{'b':>2s} {'rw':>4s} {'commit':>12s} {'NE':>6s} {'AL(ms)':>8s} {'max erase':>9s}")
for g in summary["groups"]:
    rw = "-" if g["rw"] is None else str(g["rw"])
    print(f"{g['b']:2d} {rw:>4s} {g['commit_mode']:>12s} {g['mean_ne']:6.3f} {g['mean_al_ms']:8.1f} {g['max_erasure']:9d}")

# Windows drive erasure to zero (rw=0) or cap it (rw=3), and tokens settle sooner.
