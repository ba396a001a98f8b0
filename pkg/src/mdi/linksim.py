"""Trace-driven bottleneck link emulation.

The link advances in 1 ms ticks. Each tick, in order: ACKs scheduled for
this tick arrive at the sender, an epoch boundary (if due) feeds the
controller and applies its decision, the sender transmits while in-flight
is below the current window, and finally every delivery opportunity the
trace grants this tick serves the head of the drop-tail queue. Unused
opportunities are wasted, which is what makes the trace a capacity
ceiling. When the trace runs out it wraps, shifted by its last timestamp.

Delivery timestamps therefore are bottleneck egress times: the count of
deliveries in any window can never exceed the trace's opportunities in
that window. ACKs return after the remaining propagation, so a packet's
RTT is queueing plus (at least) twice the one-way propagation delay,
floored at 1 ms.

Windows may be fractional; the integer send cap floors the running value
and carries the remainder into the next epoch. Random loss, when enabled,
strikes packets at service time and the sender notices immediately (no
retransmissions; lost packets simply leave the in-flight budget).
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, TextIO

import numpy as np

from .controllers import Controller, EpochFeedback
from .quantizer import StateIndex
from .trace import LinkTrace
from .trainer import EpochRecord


class SimulationError(RuntimeError):
    """The simulation cannot proceed (e.g. unwrappable trace)."""


@dataclass(frozen=True)
class LinkParams:
    """One simulation's link configuration."""

    trace: LinkTrace
    one_way_prop_ms: int = 10
    queue_capacity_pkts: Optional[int] = None
    loss_rate: float = 0.0
    seed: int = 0
    duration_ms: int = 60_000

    def __post_init__(self) -> None:
        if self.one_way_prop_ms < 0:
            raise ValueError(f"one_way_prop_ms must be >= 0, got {self.one_way_prop_ms}")
        if self.queue_capacity_pkts is not None and self.queue_capacity_pkts < 1:
            raise ValueError("queue_capacity_pkts must be >= 1 or None")
        if not 0.0 <= self.loss_rate < 1.0:
            raise ValueError(f"loss_rate must be in [0, 1), got {self.loss_rate!r}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.duration_ms < 1:
            raise ValueError(f"duration_ms must be >= 1, got {self.duration_ms}")


@dataclass(frozen=True)
class PacketEvent:
    """Lifecycle of one packet; missing stages are None."""

    seq: int
    sent_ms: int
    delivered_ms: Optional[int]
    acked_ms: Optional[int]
    rtt_ms: Optional[int]
    dropped: bool


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    p25: float
    p50: float
    p75: float


@dataclass(frozen=True)
class SimSummary:
    throughput_mbps: SummaryStats
    delay_ms: SummaryStats


def _stats(values: np.ndarray) -> SummaryStats:
    if values.size == 0:
        return SummaryStats(0.0, 0.0, 0.0, 0.0)
    p25, p50, p75 = np.percentile(values, [25.0, 50.0, 75.0])
    return SummaryStats(float(values.mean()), float(p25), float(p50), float(p75))


class SimResult:
    """Everything one run produced: epoch log, packet log, counters."""

    def __init__(
        self,
        epochs: list[EpochRecord],
        sent_ms: np.ndarray,
        delivered_ms: np.ndarray,
        acked_ms: np.ndarray,
        rtt_ms: np.ndarray,
        dropped: np.ndarray,
        queued_end_pkts: int,
        clamp_warnings: int,
        duration_ms: int,
        mtu_bytes: int,
    ) -> None:
        self.epochs = epochs
        self.sent_ms = sent_ms
        self.delivered_ms = delivered_ms
        self.acked_ms = acked_ms
        self.rtt_ms = rtt_ms
        self.dropped = dropped
        self.queued_end_pkts = int(queued_end_pkts)
        self.clamp_warnings = int(clamp_warnings)
        self.duration_ms = int(duration_ms)
        self.mtu_bytes = int(mtu_bytes)

    @property
    def sent_pkts(self) -> int:
        return int(self.sent_ms.size)

    @property
    def delivered_pkts(self) -> int:
        return int(np.count_nonzero(self.delivered_ms >= 0))

    @property
    def dropped_pkts(self) -> int:
        return int(np.count_nonzero(self.dropped))

    @property
    def acked_pkts(self) -> int:
        return int(np.count_nonzero(self.acked_ms >= 0))

    @property
    def zero_delivered(self) -> bool:
        """True when the run delivered nothing; the epoch log is then empty."""
        return self.delivered_pkts == 0

    @cached_property
    def packets(self) -> list[PacketEvent]:
        out = []
        for i in range(self.sent_pkts):
            d = int(self.delivered_ms[i])
            a = int(self.acked_ms[i])
            r = int(self.rtt_ms[i])
            out.append(
                PacketEvent(
                    seq=i,
                    sent_ms=int(self.sent_ms[i]),
                    delivered_ms=d if d >= 0 else None,
                    acked_ms=a if a >= 0 else None,
                    rtt_ms=r if r >= 0 else None,
                    dropped=bool(self.dropped[i]),
                )
            )
        return out

    @cached_property
    def summary(self) -> SimSummary:
        delivered = self.delivered_ms[self.delivered_ms >= 0]
        n_sec = self.duration_ms // 1000
        pkt_mbits = self.mtu_bytes * 8.0 / 1e6
        if n_sec >= 1:
            in_full = delivered[delivered < n_sec * 1000]
            counts = np.bincount(in_full // 1000, minlength=n_sec)[:n_sec]
            tput = counts.astype(np.float64) * pkt_mbits
        else:
            rate = delivered.size * pkt_mbits / (self.duration_ms / 1000.0)
            tput = np.array([rate])
        rtts = self.rtt_ms[self.rtt_ms >= 0].astype(np.float64)
        return SimSummary(throughput_mbps=_stats(tput), delay_ms=_stats(rtts))


def run_simulation(params: LinkParams, controller: Controller) -> SimResult:
    """Run one controller over one link configuration.

    Same params and controller state always produce the same result; the
    only randomness is the loss process, driven by params.seed.
    """
    opp = params.trace.opportunities
    n_opp = int(opp.size)
    wrap_span = int(opp[-1])
    ack_delay = max(2 * params.one_way_prop_ms, 1)
    qcap = params.queue_capacity_pkts
    loss = params.loss_rate
    rng = np.random.default_rng(params.seed) if loss > 0.0 else None

    sent: list[int] = []
    delivered: list[int] = []
    acked: list[int] = []
    rtts: list[int] = []
    dropped: list[bool] = []
    queue: deque[int] = deque()
    ack_at: dict[int, list[int]] = {}
    in_flight = 0
    clamps = 0

    window = 1.0
    epoch_len = 1
    send_cap = 0
    carry = 0.0

    def apply(decision) -> None:
        nonlocal window, epoch_len, send_cap, carry, clamps
        w = float(decision.window_pkts)
        el = int(decision.epoch_len_ms)
        if not math.isfinite(w) or w < 1.0:
            w = 1.0
            clamps += 1
        if el < 1:
            el = 1
            clamps += 1
        window = w
        epoch_len = el
        total = window + carry
        send_cap = int(total)
        carry = total - send_cap

    apply(controller.on_epoch(EpochFeedback(0, 0.0, 0.0, 0, 0)))

    epochs: list[EpochRecord] = []
    eidx = 1
    boundary = epoch_len
    ack_sum = 0
    ack_cnt = 0
    min_rtt = -1
    last_mean = 0.0
    any_ack = False
    opp_i = 0
    offset = 0

    for t in range(params.duration_ms):
        arrivals = ack_at.pop(t, None)
        if arrivals is not None:
            for s in arrivals:
                acked[s] = t
                r = t - sent[s]
                rtts[s] = r
                ack_sum += r
                ack_cnt += 1
                if min_rtt < 0 or r < min_rtt:
                    min_rtt = r
            in_flight -= len(arrivals)
            any_ack = True

        if t == boundary:
            if ack_cnt > 0:
                last_mean = ack_sum / ack_cnt
            if any_ack:
                epochs.append(
                    EpochRecord(t_ms=t, delay_ms=last_mean, window_pkts=window)
                )
            feedback = EpochFeedback(
                epoch_index=eidx,
                mean_delay_ms=last_mean if any_ack else 0.0,
                min_delay_ms=float(min_rtt) if min_rtt >= 0 else 0.0,
                acked_pkts=ack_cnt,
                now_ms=t,
            )
            apply(controller.on_epoch(feedback))
            ack_sum = 0
            ack_cnt = 0
            eidx += 1
            boundary = t + epoch_len

        while in_flight < send_cap:
            s = len(sent)
            sent.append(t)
            delivered.append(-1)
            acked.append(-1)
            rtts.append(-1)
            if qcap is not None and len(queue) >= qcap:
                # Tail drop; stop bursting into a full buffer this tick.
                dropped.append(True)
                break
            dropped.append(False)
            queue.append(s)
            in_flight += 1

        while True:
            if opp_i == n_opp:
                if wrap_span <= 0:
                    raise SimulationError(
                        "trace exhausted and cannot wrap (last timestamp is 0)"
                    )
                offset += wrap_span
                opp_i = 0
            if opp[opp_i] + offset > t:
                break
            opp_i += 1
            if queue:
                s = queue.popleft()
                if rng is not None and rng.random() < loss:
                    dropped[s] = True
                    in_flight -= 1
                else:
                    delivered[s] = t
                    ack_at.setdefault(t + ack_delay, []).append(s)

    return SimResult(
        epochs=epochs,
        sent_ms=np.array(sent, dtype=np.int64),
        delivered_ms=np.array(delivered, dtype=np.int64),
        acked_ms=np.array(acked, dtype=np.int64),
        rtt_ms=np.array(rtts, dtype=np.int64),
        dropped=np.array(dropped, dtype=bool),
        queued_end_pkts=len(queue),
        clamp_warnings=clamps,
        duration_ms=params.duration_ms,
        mtu_bytes=params.trace.mtu_bytes,
    )


EPOCH_CSV_HEADER = [
    "epoch_index",
    "t_ms",
    "delay_ms",
    "window_pkts",
    "d_hat",
    "w_hat",
    "d_idx",
    "w_idx",
]

PACKET_CSV_HEADER = ["seq", "sent_ms", "delivered_ms", "acked_ms", "rtt_ms", "dropped"]


def write_epoch_csv(records: Sequence[EpochRecord], sink: TextIO) -> None:
    """Epoch log as CSV; derived columns are blank when underived."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(EPOCH_CSV_HEADER)
    for i, rec in enumerate(records):
        if rec.state is not None:
            derived = [repr(rec.d_hat), repr(rec.w_hat), rec.state.d_idx, rec.state.w_idx]
        else:
            derived = ["", "", "", ""]
        writer.writerow([i, rec.t_ms, repr(rec.delay_ms), repr(rec.window_pkts), *derived])


def read_epoch_csv(source: TextIO) -> list[EpochRecord]:
    """Parse an epoch CSV back into records (derived columns optional)."""
    reader = csv.reader(source)
    header = next(reader, None)
    if header != EPOCH_CSV_HEADER:
        raise ValueError(f"unexpected epoch CSV header: {header!r}")
    out = []
    for row in reader:
        if len(row) != len(EPOCH_CSV_HEADER):
            raise ValueError(f"epoch CSV row has {len(row)} fields: {row!r}")
        _, t_ms, delay_ms, window_pkts, d_hat, w_hat, d_idx, w_idx = row
        if d_idx:
            out.append(
                EpochRecord(
                    int(t_ms),
                    float(delay_ms),
                    float(window_pkts),
                    d_hat=float(d_hat),
                    w_hat=float(w_hat),
                    state=StateIndex(int(d_idx), int(w_idx)),
                )
            )
        else:
            out.append(EpochRecord(int(t_ms), float(delay_ms), float(window_pkts)))
    return out


def write_packet_csv(result: SimResult, sink: TextIO) -> None:
    """Packet log as CSV; missing stages are blank, dropped is 0/1."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(PACKET_CSV_HEADER)
    n = result.sent_pkts
    sent = result.sent_ms
    delivered = result.delivered_ms
    acked = result.acked_ms
    rtt = result.rtt_ms
    dropped = result.dropped
    for i in range(n):
        writer.writerow(
            [
                i,
                int(sent[i]),
                int(delivered[i]) if delivered[i] >= 0 else "",
                int(acked[i]) if acked[i] >= 0 else "",
                int(rtt[i]) if rtt[i] >= 0 else "",
                int(dropped[i]),
            ]
        )


@dataclass(frozen=True)
class PacketLog:
    """Columnar packet log (read back from CSV); -1 marks missing stages."""

    sent_ms: np.ndarray
    delivered_ms: np.ndarray
    acked_ms: np.ndarray
    rtt_ms: np.ndarray
    dropped: np.ndarray


def read_packet_csv(source: TextIO) -> PacketLog:
    reader = csv.reader(source)
    header = next(reader, None)
    if header != PACKET_CSV_HEADER:
        raise ValueError(f"unexpected packet CSV header: {header!r}")
    sent, delivered, acked, rtt, dropped = [], [], [], [], []
    for row in reader:
        if len(row) != len(PACKET_CSV_HEADER):
            raise ValueError(f"packet CSV row has {len(row)} fields: {row!r}")
        sent.append(int(row[1]))
        delivered.append(int(row[2]) if row[2] else -1)
        acked.append(int(row[3]) if row[3] else -1)
        rtt.append(int(row[4]) if row[4] else -1)
        dropped.append(bool(int(row[5])))
    return PacketLog(
        sent_ms=np.array(sent, dtype=np.int64),
        delivered_ms=np.array(delivered, dtype=np.int64),
        acked_ms=np.array(acked, dtype=np.int64),
        rtt_ms=np.array(rtt, dtype=np.int64),
        dropped=np.array(dropped, dtype=bool),
    )
