"""Trace parsing, serialization, and synthetic generation."""

import io

import numpy as np
import pytest

from mdi.trace import (
    LinkTrace,
    SyntheticTraceSpec,
    TraceParseError,
    gen_rapidly_changing,
    load_trace,
    save_trace,
)


def _load(text: str) -> LinkTrace:
    return load_trace(io.BytesIO(text.encode("utf-8")))


def test_load_small_trace():
    tr = _load("0\n1\n2\n")
    assert len(tr) == 3
    assert list(tr.opportunities) == [0, 1, 2]
    # 3 packets * 1500 B * 8 over 2 ms is 18 Mbps.
    assert tr.mean_rate_mbps() == pytest.approx(18.0)


def test_load_reports_line_of_decreasing_timestamp():
    with pytest.raises(TraceParseError, match="line 2"):
        _load("5\n3\n")


def test_load_rejects_garbage_with_line_number():
    with pytest.raises(TraceParseError, match="line 3"):
        _load("0\n1\nbanana\n")
    with pytest.raises(TraceParseError, match="line 1"):
        _load("-4\n")
    with pytest.raises(TraceParseError, match="line 2"):
        _load("7\n\n9\n")


def test_load_rejects_empty_file():
    with pytest.raises(TraceParseError):
        _load("")


def test_single_opportunity_and_repeats_are_valid():
    assert len(_load("0\n")) == 1
    tr = LinkTrace([0, 0, 7])
    assert len(tr) == 3
    assert tr.duration_ms == 7
    assert tr.count_in(0, 1) == 2
    assert tr.count_in(7, 8) == 1


def test_constructor_validation():
    with pytest.raises(ValueError):
        LinkTrace([])
    with pytest.raises(ValueError):
        LinkTrace([-1, 0])
    with pytest.raises(ValueError):
        LinkTrace([3, 2])
    with pytest.raises(ValueError):
        LinkTrace([0, 1], mtu_bytes=0)


def test_trace_is_immutable():
    tr = LinkTrace([0, 1, 2])
    with pytest.raises(AttributeError):
        tr.mtu_bytes = 9000
    with pytest.raises(ValueError):
        tr.opportunities[0] = 5


def test_save_load_round_trip():
    tr = LinkTrace([0, 3, 3, 10, 500], mtu_bytes=1500)
    buf = io.BytesIO()
    save_trace(tr, buf)
    buf.seek(0)
    assert load_trace(buf) == tr


def test_constant_rate_generation_is_even():
    # 12 Mbps at 1500 B MTU is exactly one packet per millisecond.
    spec = SyntheticTraceSpec(
        duration_s=10, segment_s=10, rate_min_mbps=12, rate_max_mbps=12, seed=0
    )
    tr = gen_rapidly_changing(spec)
    assert len(tr) == 10_000
    gaps = np.diff(tr.opportunities)
    assert gaps.min() == 1 and gaps.max() == 1
    assert tr.mean_rate_mbps() == pytest.approx(12.0, rel=1e-3)


def test_generated_segments_carry_their_rate():
    spec = SyntheticTraceSpec(
        duration_s=20, segment_s=2, rate_min_mbps=3, rate_max_mbps=50, seed=11
    )
    tr = gen_rapidly_changing(spec)
    rates = np.random.default_rng(11).uniform(3, 50, 10)
    for seg, rate in enumerate(rates):
        got = tr.count_in(seg * 2000, (seg + 1) * 2000)
        want = rate * 1e6 * 2.0 / (8.0 * 1500)
        # Integer packet placement can shift one packet across a boundary.
        assert abs(got - want) <= 1.0 + 1e-9


def test_generation_is_deterministic_and_seed_sensitive():
    spec = SyntheticTraceSpec(
        duration_s=5, segment_s=1, rate_min_mbps=2, rate_max_mbps=30, seed=9
    )
    assert gen_rapidly_changing(spec) == gen_rapidly_changing(spec)
    other = SyntheticTraceSpec(
        duration_s=5, segment_s=1, rate_min_mbps=2, rate_max_mbps=30, seed=10
    )
    assert gen_rapidly_changing(other) != gen_rapidly_changing(spec)


def test_distinct_seeds_give_distinct_traces():
    base = dict(duration_s=3, segment_s=1, rate_min_mbps=2, rate_max_mbps=40)
    traces = [
        gen_rapidly_changing(SyntheticTraceSpec(seed=s, **base)) for s in range(10)
    ]
    seen = {tuple(tr.opportunities.tolist()) for tr in traces}
    assert len(seen) == 10


def test_spec_validation():
    good = dict(
        duration_s=1, segment_s=1, rate_min_mbps=1, rate_max_mbps=2, seed=0
    )
    SyntheticTraceSpec(**good)
    for field, bad in [
        ("duration_s", 0),
        ("segment_s", -1),
        ("rate_min_mbps", 0),
        ("rate_max_mbps", 0.5),
        ("seed", -3),
    ]:
        with pytest.raises(ValueError):
            SyntheticTraceSpec(**{**good, field: bad})
