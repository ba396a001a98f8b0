"""Composite delay/window observations and their quantization grid.

A controller run is summarized once per epoch by two dimensionless
composites. Each blends the relative change of a quantity with the
log-magnitude of its current value, so "small change at a large value"
and "large change at a small value" land in different regions:

    d_hat = (d_curr / d_prev - 1) * log10(d_curr)      delays in ms
    w_hat = (w_curr / w_prev - 1) * log10(w_curr)      windows in packets

The composites are bucketed on a fixed grid fitted from data: edges span
the 1st..99th percentile of the observed population with uniform spacing
in between, so rare extremes do not stretch the grid. Buckets are
half-open [e_i, e_{i+1}) and out-of-range values clamp to the first or
last bucket. A (d_idx, w_idx) pair is one discrete state; flat index is
d_idx * n_w + w_idx.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class FitError(ValueError):
    """Bucket edges could not be fitted to the observation sample."""


def _positive_finite(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return value


def compute_d_hat(d_curr_ms: float, d_prev_ms: float) -> float:
    """Delay composite: relative change scaled by log10 of the current delay.

    Both delays are in milliseconds and must be strictly positive. Equal
    delays give exactly 0.0. Callers keep delays >= 1 ms so the log factor
    does not flip sign.
    """
    d_curr_ms = _positive_finite(d_curr_ms, "d_curr_ms")
    d_prev_ms = _positive_finite(d_prev_ms, "d_prev_ms")
    return (d_curr_ms / d_prev_ms - 1.0) * math.log10(d_curr_ms)


def compute_w_hat(w_curr_pkts: float, w_prev_pkts: float) -> float:
    """Window composite, same shape as the delay composite.

    Windows are in packets and must be strictly positive; the simulator
    keeps them >= 1.
    """
    w_curr_pkts = _positive_finite(w_curr_pkts, "w_curr_pkts")
    w_prev_pkts = _positive_finite(w_prev_pkts, "w_prev_pkts")
    return (w_curr_pkts / w_prev_pkts - 1.0) * math.log10(w_curr_pkts)


@dataclass(frozen=True)
class CompositeObservation:
    """One epoch's (d_hat, w_hat) pair."""

    d_hat: float
    w_hat: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.d_hat):
            raise ValueError(f"d_hat must be finite, got {self.d_hat!r}")
        if not math.isfinite(self.w_hat):
            raise ValueError(f"w_hat must be finite, got {self.w_hat!r}")


@dataclass(frozen=True)
class StateIndex:
    """Discrete (delay bucket, window bucket) pair."""

    d_idx: int
    w_idx: int

    def __post_init__(self) -> None:
        if self.d_idx < 0 or self.w_idx < 0:
            raise ValueError(f"state indices must be >= 0, got {self!r}")

    def flat(self, n_w: int) -> int:
        """Row-major flat index over an (n_d, n_w) grid."""
        return self.d_idx * n_w + self.w_idx

    @classmethod
    def from_flat(cls, flat: int, n_w: int) -> "StateIndex":
        return cls(flat // n_w, flat % n_w)


def _check_edges(edges: tuple[float, ...], count: int, name: str) -> None:
    if count < 2:
        raise ValueError(f"{name}: need at least 2 buckets, got {count}")
    if len(edges) != count + 1:
        raise ValueError(
            f"{name}: expected {count + 1} edges for {count} buckets, "
            f"got {len(edges)}"
        )
    for a, b in zip(edges, edges[1:]):
        if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
            raise ValueError(f"{name}: edges must be finite and strictly increasing")


@dataclass(frozen=True)
class QuantizerConfig:
    """Bucket edges for both composite dimensions.

    Edges are stored as tuples so configs compare and hash by value;
    len(edges) == bucket count + 1 on each axis.
    """

    d_hat_edges: tuple[float, ...]
    w_hat_edges: tuple[float, ...]
    n_d: int = 11
    n_w: int = 21

    def __post_init__(self) -> None:
        object.__setattr__(self, "d_hat_edges", tuple(float(e) for e in self.d_hat_edges))
        object.__setattr__(self, "w_hat_edges", tuple(float(e) for e in self.w_hat_edges))
        _check_edges(self.d_hat_edges, self.n_d, "d_hat_edges")
        _check_edges(self.w_hat_edges, self.n_w, "w_hat_edges")

    @classmethod
    def uniform(
        cls,
        d_lo: float,
        d_hi: float,
        w_lo: float,
        w_hi: float,
        n_d: int = 11,
        n_w: int = 21,
    ) -> "QuantizerConfig":
        """Evenly spaced edges over explicit ranges."""
        d_edges = np.linspace(d_lo, d_hi, n_d + 1)
        w_edges = np.linspace(w_lo, w_hi, n_w + 1)
        return cls(tuple(d_edges), tuple(w_edges), n_d=n_d, n_w=n_w)

    @property
    def n_states(self) -> int:
        return self.n_d * self.n_w

    def d_bucket(self, d_hat: float) -> int:
        """Bucket index for a delay composite; out-of-range values clamp."""
        return _bucket(d_hat, self.d_hat_edges, self.n_d)

    def w_bucket(self, w_hat: float) -> int:
        """Bucket index for a window composite; out-of-range values clamp."""
        return _bucket(w_hat, self.w_hat_edges, self.n_w)

    def d_in_range(self, d_hat: float) -> bool:
        """True when d_hat lies inside the trained delay-composite range."""
        return self.d_hat_edges[0] <= d_hat <= self.d_hat_edges[-1]

    def d_midpoint(self, d_idx: int) -> float:
        if not 0 <= d_idx < self.n_d:
            raise ValueError(f"d_idx out of range: {d_idx}")
        return 0.5 * (self.d_hat_edges[d_idx] + self.d_hat_edges[d_idx + 1])

    def w_midpoint(self, w_idx: int) -> float:
        if not 0 <= w_idx < self.n_w:
            raise ValueError(f"w_idx out of range: {w_idx}")
        return 0.5 * (self.w_hat_edges[w_idx] + self.w_hat_edges[w_idx + 1])


def _bucket(x: float, edges: tuple[float, ...], n: int) -> int:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot bucket non-finite value {x!r}")
    idx = bisect_right(edges, x) - 1
    if idx < 0:
        return 0
    if idx >= n:
        return n - 1
    return idx


def fit_config(
    observations: Iterable[CompositeObservation],
    n_d: int = 11,
    n_w: int = 21,
) -> QuantizerConfig:
    """Fit bucket edges to an observation sample.

    Outer edges sit at the 1st and 99th percentile of each composite so
    the grid resolves the bulk of the distribution; interior edges are
    evenly spaced. Needs at least 100 observations and a non-degenerate
    spread on both axes.
    """
    obs = list(observations)
    if len(obs) < 100:
        raise FitError(f"need at least 100 observations to fit, got {len(obs)}")
    d = np.array([o.d_hat for o in obs], dtype=np.float64)
    w = np.array([o.w_hat for o in obs], dtype=np.float64)
    d_lo, d_hi = np.percentile(d, [1.0, 99.0])
    w_lo, w_hi = np.percentile(w, [1.0, 99.0])
    if not d_lo < d_hi:
        raise FitError(f"degenerate d_hat sample: p1 == p99 == {d_lo!r}")
    if not w_lo < w_hi:
        raise FitError(f"degenerate w_hat sample: p1 == p99 == {w_lo!r}")
    return QuantizerConfig.uniform(d_lo, d_hi, w_lo, w_hi, n_d=n_d, n_w=n_w)


def quantize(obs: CompositeObservation, cfg: QuantizerConfig) -> StateIndex:
    """Map an observation to its grid cell, clamping at the borders."""
    return StateIndex(cfg.d_bucket(obs.d_hat), cfg.w_bucket(obs.w_hat))


def representative(idx: StateIndex, cfg: QuantizerConfig) -> CompositeObservation:
    """Bucket-midpoint observation for a state."""
    return CompositeObservation(cfg.d_midpoint(idx.d_idx), cfg.w_midpoint(idx.w_idx))
