"""Bottleneck-capacity traces.

A trace is a sequence of delivery opportunities: each entry is an integer
millisecond timestamp at which the link may forward exactly one MTU-sized
packet. Timestamps are non-decreasing; repeats mean several packets can
leave in the same millisecond. When a simulation outlives the trace, the
trace wraps by re-playing with all timestamps shifted by the last
timestamp.

The on-disk format is UTF-8 text, one integer per line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np


class TraceParseError(ValueError):
    """A trace file violated the one-integer-per-line format."""


class LinkTrace:
    """Immutable sequence of per-packet delivery opportunity times (ms)."""

    __slots__ = ("opportunities", "mtu_bytes")

    def __init__(self, opportunities, mtu_bytes: int = 1500) -> None:
        arr = np.asarray(opportunities, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("trace needs at least one delivery opportunity")
        if arr[0] < 0:
            raise ValueError(f"timestamps must be >= 0, got {arr[0]}")
        if np.any(np.diff(arr) < 0):
            raise ValueError("timestamps must be non-decreasing")
        if mtu_bytes <= 0:
            raise ValueError(f"mtu_bytes must be positive, got {mtu_bytes}")
        arr.setflags(write=False)
        object.__setattr__(self, "opportunities", arr)
        object.__setattr__(self, "mtu_bytes", int(mtu_bytes))

    def __setattr__(self, name, value):
        raise AttributeError("LinkTrace is immutable")

    def __len__(self) -> int:
        return int(self.opportunities.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinkTrace):
            return NotImplemented
        return self.mtu_bytes == other.mtu_bytes and np.array_equal(
            self.opportunities, other.opportunities
        )

    def __repr__(self) -> str:
        return (
            f"LinkTrace({len(self)} opportunities over "
            f"{self.duration_ms} ms, mtu={self.mtu_bytes})"
        )

    @property
    def duration_ms(self) -> int:
        """Timestamp of the last opportunity; also the wrap offset."""
        return int(self.opportunities[-1])

    def mean_rate_mbps(self) -> float:
        span_ms = max(self.duration_ms, 1)
        return len(self) * self.mtu_bytes * 8.0 / (span_ms * 1000.0)

    def count_in(self, start_ms: int, end_ms: int) -> int:
        """Opportunities with timestamp in [start_ms, end_ms)."""
        lo = np.searchsorted(self.opportunities, start_ms, side="left")
        hi = np.searchsorted(self.opportunities, end_ms, side="left")
        return int(hi - lo)


def load_trace(source: BinaryIO, mtu_bytes: int = 1500) -> LinkTrace:
    """Parse a trace from a binary stream; errors carry the line number."""
    text = source.read().decode("utf-8")
    stamps = []
    prev = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            raise TraceParseError(f"line {lineno}: blank line")
        try:
            ts = int(s)
        except ValueError:
            raise TraceParseError(f"line {lineno}: not an integer: {s!r}") from None
        if ts < 0:
            raise TraceParseError(f"line {lineno}: negative timestamp {ts}")
        if ts < prev:
            raise TraceParseError(
                f"line {lineno}: timestamp {ts} decreases below {prev}"
            )
        prev = ts
        stamps.append(ts)
    if not stamps:
        raise TraceParseError("empty trace file")
    return LinkTrace(stamps, mtu_bytes=mtu_bytes)


def save_trace(trace: LinkTrace, sink: BinaryIO) -> None:
    """Write the one-integer-per-line form; round-trips with load_trace."""
    body = "\n".join(str(int(t)) for t in trace.opportunities)
    sink.write((body + "\n").encode("utf-8"))


@dataclass(frozen=True)
class SyntheticTraceSpec:
    """Recipe for a rapidly-varying synthetic trace.

    The link rate is redrawn uniformly in [rate_min_mbps, rate_max_mbps]
    at the start of every segment.
    """

    duration_s: float
    segment_s: float
    rate_min_mbps: float
    rate_max_mbps: float
    seed: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ValueError(f"duration_s must be > 0, got {self.duration_s!r}")
        if not (math.isfinite(self.segment_s) and self.segment_s > 0):
            raise ValueError(f"segment_s must be > 0, got {self.segment_s!r}")
        if not (math.isfinite(self.rate_min_mbps) and self.rate_min_mbps > 0):
            raise ValueError(f"rate_min_mbps must be > 0, got {self.rate_min_mbps!r}")
        if self.rate_max_mbps < self.rate_min_mbps or not math.isfinite(
            self.rate_max_mbps
        ):
            raise ValueError("rate_max_mbps must be >= rate_min_mbps and finite")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")


def gen_rapidly_changing(spec: SyntheticTraceSpec, mtu_bytes: int = 1500) -> LinkTrace:
    """Generate a trace whose rate jumps at fixed segment boundaries.

    Opportunities are placed where the cumulative ideal packet count
    crosses an integer, so every window of the trace carries the segment
    rate exactly to within one packet. Same spec, same bytes.
    """
    duration_ms = int(round(spec.duration_s * 1000.0))
    segment_ms = max(int(round(spec.segment_s * 1000.0)), 1)
    n_segments = -(-duration_ms // segment_ms)
    rng = np.random.default_rng(spec.seed)
    rates = rng.uniform(spec.rate_min_mbps, spec.rate_max_mbps, n_segments)

    chunks = []
    cum = 0.0  # ideal packet count at the current ms boundary
    emitted = 0
    for seg in range(n_segments):
        seg_start = seg * segment_ms
        ms_count = min(segment_ms, duration_ms - seg_start)
        pkts_per_ms = rates[seg] * 1e6 / (8.0 * mtu_bytes * 1000.0)
        bounds = cum + pkts_per_ms * np.arange(1, ms_count + 1, dtype=np.float64)
        floors = np.floor(bounds).astype(np.int64)
        counts = np.diff(floors, prepend=np.int64(emitted))
        chunks.append(np.repeat(seg_start + np.arange(ms_count, dtype=np.int64), counts))
        cum = float(bounds[-1])
        emitted = int(floors[-1])
    stamps = np.concatenate(chunks)
    if stamps.size == 0:
        # Vanishingly low rate over a short span; keep a single terminal
        # opportunity so the trace stays loadable and wrappable.
        stamps = np.array([duration_ms - 1], dtype=np.int64)
    return LinkTrace(stamps, mtu_bytes=mtu_bytes)
