import json

import pytest

from revdec import CommitEvent, DecodeTrace, DecoderConfig, Hypothesis, SyntheticSourceSpec, Vocabulary
from revdec.harness import (
    CSV_COLUMNS,
    Scenario,
    TraceFormatError,
    expand_manifest,
    format_csv,
    format_trace,
    frozen_scenarios,
    load_scenario,
    parse_trace,
    run_sweep,
    save_scenario,
    summarize,
)

SPEC = SyntheticSourceSpec(seed=4, vocab_size=7, frame_count=12, instability=0.5)


def test_scenario_round_trip(tmp_path):
    sc = Scenario("s", SPEC, DecoderConfig(beam_size=3, revision_window=1), "every_frame", reference=("w2", "w3"))
    save_scenario(sc, tmp_path / "s.json")
    back = load_scenario(tmp_path / "s.json")
    assert back.to_dict() == sc.to_dict()
    assert back.prune.value == "revision_window"


def test_with_overrides_tracks_prune_mode():
    sc = Scenario("s", SPEC)
    assert sc.prune.value == "none"
    assert sc.with_overrides(revision_window=0).prune.value == "revision_window"
    assert sc.with_overrides(revision_window=0).with_overrides(revision_window=None).prune.value == "none"
    assert sc.with_overrides(beam_size=2).config.beam_size == 2


def test_scenario_rejects_bad_source():
    with pytest.raises(ValueError):
        Scenario.from_dict({"id": "x", "source": {"type": "wav"}})
    with pytest.raises(ValueError):
        Scenario.from_dict({"source": {"type": "synthetic"}})


@pytest.mark.parametrize("commit", ["every_frame", "chunk"])
@pytest.mark.parametrize("rw", [None, 0, 2])
def test_trace_round_trip(commit, rw):
    sc = Scenario("s", SPEC, DecoderConfig(beam_size=4, revision_window=rw), commit, reference=("w2",))
    trace = sc.run()
    text = format_trace(trace)
    back = parse_trace(text)
    assert back == trace
    assert format_trace(back) == text


def test_trace_layout():
    lines = format_trace(Scenario("s", SPEC).run()).splitlines()
    header, final = json.loads(lines[0]), json.loads(lines[-1])
    assert {"config", "T", "vocab", "vocab_sha256"} <= set(header)
    assert all(set(json.loads(l)) == {"frame", "tokens"} for l in lines[1:-1])
    assert {"final", "emit_frames", "log_score"} <= set(final)


def _caption_trace_text():
    words = "American West central US has many there are big mountains in west".split()
    vocab = Vocabulary(("<blank>", "<s>", *words))
    shown = [
        ["American"],
        ["West", "central", "US"],
        ["West", "central", "US", "has", "many"],
        "there are many big mountains in west central US".split(),
    ]
    ids = [vocab.encode(s) for s in shown]
    trace = DecodeTrace(
        config=DecoderConfig(),
        commits=tuple(CommitEvent(4 * (i + 1), d) for i, d in enumerate(ids)),
        final=Hypothesis((1, *ids[-1]), -3.5, (0, *range(8, 17))),
        source_frames=16,
        vocab=vocab,
    )
    return format_trace(trace)


def test_invariant_violation_is_named():
    lines = _caption_trace_text().splitlines()
    lines[2], lines[3] = lines[3], lines[2]
    with pytest.raises(TraceFormatError, match="invariant violated: .*increase"):
        parse_trace("\n".join(lines) + "\n")


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda ls: ls[:1], "header and a final line"),
        (lambda ls: [ls[0], ls[-1]], "commit"),
        (lambda ls: ["not json"] + ls[1:], "line 1"),
        (lambda ls: ls[:-1], "final"),
        (lambda ls: [ls[0].replace('"T":16', '"T":3')] + ls[1:], "invariant violated"),
    ],
)
def test_malformed_traces(mutate, message):
    lines = mutate(_caption_trace_text().splitlines())
    with pytest.raises(TraceFormatError, match=message):
        parse_trace("\n".join(lines) + "\n")


def test_vocab_hash_checked():
    lines = _caption_trace_text().splitlines()
    header = json.loads(lines[0])
    header["vocab_sha256"] = "0" * 64
    with pytest.raises(TraceFormatError, match="sha256"):
        parse_trace("\n".join([json.dumps(header)] + lines[1:]) + "\n")


def test_manifest_expansion_order():
    data = {
        "scenarios": [Scenario("a", SPEC).to_dict(), Scenario("b", SPEC).to_dict()],
        "grid": {"rw": ["none", 0], "beam": [1, 4]},
    }
    cells = expand_manifest(data)
    got = [(c.id, c.config.beam_size, c.config.revision_window) for c in cells]
    assert got == [
        ("a", 1, None), ("a", 1, 0), ("a", 4, None), ("a", 4, 0),
        ("b", 1, None), ("b", 1, 0), ("b", 4, None), ("b", 4, 0),
    ]


def test_manifest_rejects_duplicates_and_unknown_keys():
    sc = Scenario("a", SPEC).to_dict()
    with pytest.raises(ValueError, match="duplicate"):
        expand_manifest({"scenarios": [sc, sc]})
    with pytest.raises(ValueError, match="unknown grid"):
        expand_manifest({"scenarios": [sc], "grid": {"temperature": [1]}})


def test_empty_sweep():
    rows = run_sweep(expand_manifest({"scenarios": []}))
    assert rows == []
    assert format_csv(rows) == ",".join(CSV_COLUMNS) + "\n"
    assert summarize(rows) == {"rows": 0, "failed": 0, "groups": []}


def test_sweep_rw_properties_and_parallel_order():
    base = frozen_scenarios(30)
    cells = [c for sc in base for c in (sc, sc.with_overrides(revision_window=0), sc.with_overrides(revision_window=3))]
    serial = run_sweep(cells)
    parallel = run_sweep(cells, jobs=4)
    assert format_csv(serial) == format_csv(parallel)
    for row in serial:
        assert not row.error
        if row.rw == 0:
            assert row.report.ne == 0.0
        if row.rw == 3:
            assert row.report.max_erasure <= 3


def test_failed_cell_is_isolated(tmp_path):
    good = Scenario("good", SPEC)
    bad = Scenario("bad", "missing.lat", base_dir=str(tmp_path))
    rows = run_sweep([good, bad, good.with_overrides(beam_size=1)])
    assert [not r.error for r in rows] == [True, False, True]
    assert "missing.lat" in rows[1].error
    assert format_csv(rows).splitlines()[2].startswith("bad,")
    assert summarize(rows)["failed"] == 1


def test_frozen_scenarios_cover_the_ranges():
    scs = frozen_scenarios()
    assert len(scs) == 100 and len({s.id for s in scs}) == 100
    vocab = {s.source.vocab_size for s in scs}
    frames = {s.source.frame_count for s in scs}
    inst = {s.source.instability for s in scs}
    assert min(vocab) == 6 and max(vocab) == 20
    assert min(frames) == 8 and max(frames) == 64
    assert min(inst) == 0.0 and max(inst) == 1.0
