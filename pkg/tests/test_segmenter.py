import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simulcascade.core import AudioTimeline
from simulcascade.segmenter import CutReason, Segmenter, SegmenterConfig, segment_timeline


def run(probs, frame_ms=50, **cfg):
    return segment_timeline(AudioTimeline.from_probs(probs, frame_ms=frame_ms), SegmenterConfig(**cfg))


def test_unvoiced_run_cut():
    segs = run([0.9, 0.9, 0.2, 0.2, 0.2], max_unvoiced_ms=100, voice_prob_threshold=0.5, max_segment_ms=500)
    assert (segs[0].end_ms, segs[0].cut_reason) == (250, CutReason.UNVOICED_RUN)
    assert len(segs) == 1


def test_run_of_exactly_mud_does_not_cut():
    segs = run([0.9, 0.2, 0.2, 0.9], max_unvoiced_ms=100)
    assert [s.cut_reason for s in segs] == [CutReason.END_OF_STREAM]


def test_probability_equal_to_threshold_is_voiced():
    segs = run([0.5] * 8, max_unvoiced_ms=100, voice_prob_threshold=0.5, max_segment_ms=1000)
    assert [s.cut_reason for s in segs] == [CutReason.END_OF_STREAM]


def test_max_duration_cut_is_inclusive():
    segs = run([0.9] * 12, max_segment_ms=500)
    assert [(s.start_ms, s.end_ms) for s in segs] == [(0, 500), (500, 600)]
    assert segs[0].cut_reason == CutReason.MAX_DURATION
    assert segs[1].cut_reason == CutReason.END_OF_STREAM


def test_precut_when_frame_would_overflow():
    seg = Segmenter(SegmenterConfig(max_segment_ms=100))
    assert seg.push_frame(60, 0.9) == []
    closed = seg.push_frame(60, 0.9)
    assert [(s.start_ms, s.end_ms, s.cut_reason) for s in closed] == [(0, 60, CutReason.MAX_DURATION)]


def test_frame_longer_than_msd_rejected():
    with pytest.raises(ValueError):
        Segmenter(SegmenterConfig(max_segment_ms=100)).push_frame(120, 0.9)


def test_flush_twice_and_empty():
    seg = Segmenter(SegmenterConfig())
    assert seg.flush() is None
    seg.push_frame(20, 0.9)
    assert seg.flush().cut_reason == CutReason.END_OF_STREAM
    assert seg.flush() is None


def test_bad_config():
    with pytest.raises(ValueError):
        SegmenterConfig(voice_prob_threshold=1.5)


@settings(max_examples=200, deadline=None)
@given(
    probs=st.lists(st.floats(0, 1), min_size=1, max_size=120),
    mud=st.sampled_from([20, 60, 100, 300]),
    msd=st.sampled_from([100, 500, 1000]),
)
def test_segments_tile_the_timeline(probs, mud, msd):
    segs = run(probs, frame_ms=20, max_unvoiced_ms=mud, max_segment_ms=msd)
    assert segs[0].start_ms == 0 and segs[-1].end_ms == 20 * len(probs)
    for a, b in zip(segs, segs[1:]):
        assert a.end_ms == b.start_ms
    assert all(0 < s.duration_ms <= msd for s in segs)
    assert [s.index for s in segs] == list(range(len(segs)))
    assert all(s.cut_reason != CutReason.END_OF_STREAM for s in segs[:-1])
