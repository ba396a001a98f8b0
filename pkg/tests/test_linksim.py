"""Bottleneck link emulator: oracles, conservation, serialization."""

import io
from types import SimpleNamespace

import numpy as np
import pytest

from mdi.controllers import Controller, Pinned
from mdi.linksim import (
    LinkParams,
    SimulationError,
    read_epoch_csv,
    read_packet_csv,
    run_simulation,
    write_epoch_csv,
    write_packet_csv,
)
from mdi.quantizer import StateIndex
from mdi.trace import LinkTrace, SyntheticTraceSpec, gen_rapidly_changing
from mdi.trainer import EpochRecord


def constant_trace(mbps: float, duration_s: float) -> LinkTrace:
    spec = SyntheticTraceSpec(
        duration_s=duration_s,
        segment_s=duration_s,
        rate_min_mbps=mbps,
        rate_max_mbps=mbps,
        seed=0,
    )
    return gen_rapidly_changing(spec)


def test_stop_and_wait_oracle():
    # Window pinned at 1 on an uncongested link: every packet sees the
    # bare round trip, and sends are spaced exactly one RTT apart.
    params = LinkParams(
        trace=constant_trace(12.0, 10.0), one_way_prop_ms=20, duration_ms=5000
    )
    res = run_simulation(params, Pinned(window_pkts=1.0, epoch_ms=20))
    rtts = res.rtt_ms[res.rtt_ms >= 0]
    assert rtts.size > 0
    assert np.all(rtts == 40)
    assert np.all(np.diff(res.sent_ms) == 40)
    assert abs(res.sent_pkts - 125) <= 1  # 5000 ms / 40 ms per round trip
    assert res.dropped_pkts == 0
    # Every delivered packet is acked exactly one return leg later.
    mask = (res.delivered_ms >= 0) & (res.acked_ms >= 0)
    assert np.all(res.acked_ms[mask] - res.delivered_ms[mask] == 40)


def test_full_buffer_delay_matches_queue_plus_propagation():
    # A huge pinned window against a bounded buffer keeps the queue
    # pinned at capacity, so delay sits at 2*prop + qcap service ticks.
    params = LinkParams(
        trace=constant_trace(12.0, 12.0),
        one_way_prop_ms=10,
        queue_capacity_pkts=50,
        duration_ms=10_000,
    )
    res = run_simulation(params, Pinned(window_pkts=200.0, epoch_ms=20))
    assert res.dropped_pkts > 0
    p50 = res.summary.delay_ms.p50
    assert abs(p50 - (2 * 10 + 50)) <= 1.5
    # The link itself is saturated: one packet per ms reaches the far end.
    assert res.summary.throughput_mbps.p50 == pytest.approx(12.0, rel=0.02)


def test_epoch_log_appears_once_acks_flow():
    params = LinkParams(
        trace=constant_trace(12.0, 10.0), one_way_prop_ms=20, duration_ms=2000
    )
    res = run_simulation(params, Pinned(window_pkts=1.0, epoch_ms=20))
    assert res.epochs[0].t_ms == 40  # first boundary after the first ack
    assert all(e.delay_ms == 40.0 for e in res.epochs)
    assert all(b.t_ms - a.t_ms == 20 for a, b in zip(res.epochs, res.epochs[1:]))
    assert all(e.state is None for e in res.epochs)


def test_conservation_and_capacity_randomized():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        mbps = float(rng.uniform(1.0, 40.0))
        prop = int(rng.integers(1, 40))
        qcap = int(rng.integers(2, 200)) if rng.random() < 0.7 else None
        window = float(rng.uniform(1.0, 400.0))
        duration = int(rng.integers(500, 4000))
        trace = constant_trace(mbps, 8.0)
        params = LinkParams(
            trace=trace,
            one_way_prop_ms=prop,
            queue_capacity_pkts=qcap,
            duration_ms=duration,
        )
        res = run_simulation(params, Pinned(window_pkts=window, epoch_ms=20))
        # Every sent packet is delivered, dropped, or still queued.
        assert res.sent_pkts == res.delivered_pkts + res.dropped_pkts + res.queued_end_pkts
        # Deliveries never exceed what the trace offered in any second.
        delivered = res.delivered_ms[res.delivered_ms >= 0]
        for sec in range(duration // 1000 + 1):
            got = int(np.count_nonzero((delivered >= sec * 1000) & (delivered < (sec + 1) * 1000)))
            assert got <= trace.count_in(sec * 1000, (sec + 1) * 1000)
        # FIFO: deliveries happen in send order.
        assert np.all(np.diff(delivered) >= 0)
        # The return leg is constant.
        mask = (res.delivered_ms >= 0) & (res.acked_ms >= 0)
        assert np.all(res.acked_ms[mask] - res.delivered_ms[mask] == max(2 * prop, 1))


def test_fractional_window_carries_remainder():
    # Window 2.5 with instant acks alternates integer send caps 2 and 3
    # between epochs, so the long-run average honors the fraction.
    params = LinkParams(
        trace=constant_trace(120.0, 4.0), one_way_prop_ms=0, duration_ms=1000
    )
    res = run_simulation(params, Pinned(window_pkts=2.5, epoch_ms=20))
    assert abs(res.sent_pkts - 2500) <= 60


def test_identical_runs_are_bit_identical():
    trace = constant_trace(8.0, 6.0)
    params = LinkParams(
        trace=trace, one_way_prop_ms=15, queue_capacity_pkts=60,
        loss_rate=0.05, seed=123, duration_ms=3000,
    )
    a = run_simulation(params, Pinned(window_pkts=30.0, epoch_ms=20))
    b = run_simulation(params, Pinned(window_pkts=30.0, epoch_ms=20))
    for field in ("sent_ms", "delivered_ms", "acked_ms", "rtt_ms", "dropped"):
        assert np.array_equal(getattr(a, field), getattr(b, field))

    other = LinkParams(
        trace=trace, one_way_prop_ms=15, queue_capacity_pkts=60,
        loss_rate=0.05, seed=124, duration_ms=3000,
    )
    c = run_simulation(other, Pinned(window_pkts=30.0, epoch_ms=20))
    assert not np.array_equal(a.dropped, c.dropped)


def test_random_loss_drops_at_service_time():
    params = LinkParams(
        trace=constant_trace(12.0, 6.0), one_way_prop_ms=5,
        loss_rate=0.2, seed=7, duration_ms=4000,
    )
    res = run_simulation(params, Pinned(window_pkts=40.0, epoch_ms=20))
    frac = res.dropped_pkts / res.sent_pkts
    assert 0.1 < frac < 0.3
    # Lost packets have no delivery or ack timestamps.
    assert np.all(res.delivered_ms[res.dropped] == -1)
    assert np.all(res.acked_ms[res.dropped] == -1)


class _Rogue(Controller):
    """Returns an out-of-contract decision to exercise the safety clamp."""

    name = "rogue"

    def on_epoch(self, feedback):
        return SimpleNamespace(window_pkts=0.0, epoch_len_ms=0)


def test_out_of_contract_decisions_are_clamped_and_counted():
    params = LinkParams(trace=constant_trace(12.0, 4.0), duration_ms=500)
    res = run_simulation(params, _Rogue())
    assert res.clamp_warnings > 0
    # The clamp floors the window at one packet, so traffic still flows.
    assert res.delivered_pkts > 0


def test_zero_delivery_run_is_flagged():
    # All capacity sits beyond the simulated horizon.
    params = LinkParams(trace=LinkTrace([5000]), duration_ms=100)
    res = run_simulation(params, Pinned(window_pkts=4.0, epoch_ms=20))
    assert res.zero_delivered
    assert res.epochs == []
    assert res.summary.throughput_mbps.p50 == 0.0


def test_unwrappable_trace_raises():
    params = LinkParams(trace=LinkTrace([0]), duration_ms=10)
    with pytest.raises(SimulationError):
        run_simulation(params, Pinned(window_pkts=1.0, epoch_ms=20))


def test_trace_wraps_past_its_end():
    # One opportunity per ms for 1 s, run for 3 s: wrapping keeps serving.
    trace = constant_trace(12.0, 1.0)
    params = LinkParams(trace=trace, one_way_prop_ms=5, duration_ms=3000)
    res = run_simulation(params, Pinned(window_pkts=20.0, epoch_ms=20))
    delivered = res.delivered_ms[res.delivered_ms >= 0]
    assert delivered.max() > 2000
    assert res.summary.throughput_mbps.p50 == pytest.approx(12.0, rel=0.05)


def test_summary_matches_manual_recompute():
    params = LinkParams(
        trace=constant_trace(9.0, 8.0), one_way_prop_ms=12,
        queue_capacity_pkts=80, duration_ms=6000,
    )
    res = run_simulation(params, Pinned(window_pkts=35.0, epoch_ms=20))
    delivered = res.delivered_ms[res.delivered_ms >= 0]
    counts = np.bincount(delivered // 1000, minlength=6)[:6]
    tput = counts * 1500 * 8.0 / 1e6
    assert res.summary.throughput_mbps.p50 == pytest.approx(np.median(tput))
    assert res.summary.throughput_mbps.mean == pytest.approx(tput.mean())
    rtts = res.rtt_ms[res.rtt_ms >= 0]
    assert res.summary.delay_ms.p50 == pytest.approx(np.median(rtts))
    assert res.summary.delay_ms.p25 == pytest.approx(np.percentile(rtts, 25))


def test_link_params_validation():
    trace = LinkTrace([0, 1, 2])
    with pytest.raises(ValueError):
        LinkParams(trace=trace, one_way_prop_ms=-1)
    with pytest.raises(ValueError):
        LinkParams(trace=trace, queue_capacity_pkts=0)
    with pytest.raises(ValueError):
        LinkParams(trace=trace, loss_rate=1.0)
    with pytest.raises(ValueError):
        LinkParams(trace=trace, seed=-1)
    with pytest.raises(ValueError):
        LinkParams(trace=trace, duration_ms=0)


def test_epoch_csv_round_trip():
    records = [
        EpochRecord(40, 12.5, 8.0),
        EpochRecord(
            60, 13.25, 9.5, d_hat=0.0625, w_hat=0.181, state=StateIndex(5, 11)
        ),
    ]
    buf = io.StringIO()
    write_epoch_csv(records, buf)
    buf.seek(0)
    back = read_epoch_csv(buf)
    assert back == records


def test_epoch_csv_rejects_foreign_header():
    with pytest.raises(ValueError):
        read_epoch_csv(io.StringIO("a,b,c\n1,2,3\n"))


def test_packet_csv_round_trip():
    params = LinkParams(
        trace=constant_trace(10.0, 4.0), one_way_prop_ms=8,
        queue_capacity_pkts=30, loss_rate=0.1, seed=3, duration_ms=2000,
    )
    res = run_simulation(params, Pinned(window_pkts=50.0, epoch_ms=20))
    buf = io.StringIO()
    write_packet_csv(res, buf)
    buf.seek(0)
    log = read_packet_csv(buf)
    assert np.array_equal(log.sent_ms, res.sent_ms)
    assert np.array_equal(log.delivered_ms, res.delivered_ms)
    assert np.array_equal(log.acked_ms, res.acked_ms)
    assert np.array_equal(log.rtt_ms, res.rtt_ms)
    assert np.array_equal(log.dropped, res.dropped)
