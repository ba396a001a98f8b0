"""From epoch logs to a quadrant-structured transition model.

Training walks controller runs as sequences of per-epoch records, derives
the composite observations between consecutive epochs, quantizes them,
and counts state-to-state transitions. The counts live in a 4-D tensor
indexed (k, l, r, v): (current delay bucket, current window bucket, next
delay bucket, next window bucket). Two normalizations are read off it:

* quadrant rows p(v | k, l, r): within the quadrant selected by the pair
  of delay buckets (k, r), each window row l is normalized across the
  next-window cells v. This is what the runtime controller samples.
* full rows p(r, v | k, l): each (k, l) state's outgoing mass normalized
  across all (r, v), giving an ordinary row-stochastic chain for
  analysis.

Runs never blend: transition counting restarts at every run boundary.

Models serialize to a line-oriented text format ("MDIMODEL v1") holding
the grid edges plus the sparse nonzero counts, with a declared total so
truncated files fail loudly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Optional, Sequence

import numpy as np

from .quantizer import (
    CompositeObservation,
    QuantizerConfig,
    StateIndex,
    compute_d_hat,
    compute_w_hat,
    quantize,
)


class ModelFormatError(ValueError):
    """A serialized model violated the MDIMODEL format."""


@dataclass(frozen=True)
class EpochRecord:
    """One epoch of a controller run, optionally with derived state.

    delay_ms is the mean ACKed delay observed during the epoch and
    window_pkts is the window that was in effect while it elapsed. The
    derived fields are filled by derive_states; they are all present or
    all absent.
    """

    t_ms: int
    delay_ms: float
    window_pkts: float
    d_hat: Optional[float] = None
    w_hat: Optional[float] = None
    state: Optional[StateIndex] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.delay_ms) or self.delay_ms <= 0.0:
            raise ValueError(f"delay_ms must be > 0, got {self.delay_ms!r}")
        if not math.isfinite(self.window_pkts) or self.window_pkts < 1.0:
            raise ValueError(f"window_pkts must be >= 1, got {self.window_pkts!r}")
        derived = (self.d_hat, self.w_hat, self.state)
        if any(f is not None for f in derived) and any(f is None for f in derived):
            raise ValueError("d_hat, w_hat and state must be set together")


def derive_states(
    records: Sequence[EpochRecord], cfg: QuantizerConfig
) -> list[EpochRecord]:
    """Attach composites and quantized states to an epoch sequence.

    The first record has no predecessor, so it stays underived; every
    later record gets (d_hat, w_hat) computed against its predecessor and
    the quantized StateIndex. Input records are not mutated.
    """
    if len(records) < 2:
        raise ValueError(f"need at least 2 epoch records, got {len(records)}")
    out = [EpochRecord(records[0].t_ms, records[0].delay_ms, records[0].window_pkts)]
    for prev, curr in zip(records, records[1:]):
        d_hat = compute_d_hat(curr.delay_ms, prev.delay_ms)
        w_hat = compute_w_hat(curr.window_pkts, prev.window_pkts)
        state = quantize(CompositeObservation(d_hat, w_hat), cfg)
        out.append(
            EpochRecord(
                curr.t_ms,
                curr.delay_ms,
                curr.window_pkts,
                d_hat=d_hat,
                w_hat=w_hat,
                state=state,
            )
        )
    return out


class TransitionModel:
    """Transition counts over the composite state grid, plus normalizations."""

    def __init__(self, cfg: QuantizerConfig) -> None:
        self.cfg = cfg
        self.counts = np.zeros((cfg.n_d, cfg.n_w, cfg.n_d, cfg.n_w), dtype=np.uint64)
        self._quadrant_rows: Optional[np.ndarray] = None
        self._full_rows: Optional[np.ndarray] = None
        self._marginal_rows: Optional[np.ndarray] = None

    @property
    def total_transitions(self) -> int:
        return int(self.counts.sum())

    def _invalidate(self) -> None:
        self._quadrant_rows = None
        self._full_rows = None
        self._marginal_rows = None

    def add_transitions(self, states: Sequence[StateIndex]) -> int:
        """Count consecutive state pairs from one run; returns pairs added."""
        n_d, n_w = self.cfg.n_d, self.cfg.n_w
        for s in states:
            if s.d_idx >= n_d or s.w_idx >= n_w:
                raise ValueError(f"state {s} outside {n_d}x{n_w} grid")
        for a, b in zip(states, states[1:]):
            self.counts[a.d_idx, a.w_idx, b.d_idx, b.w_idx] += 1
        if len(states) >= 2:
            self._invalidate()
        return max(len(states) - 1, 0)

    def merge(self, other: "TransitionModel") -> "TransitionModel":
        """Pool counts from a model trained on the same grid."""
        if other.cfg != self.cfg:
            raise ValueError("cannot merge models with different quantizer configs")
        self.counts += other.counts
        self._invalidate()
        return self

    def normalize(self) -> "TransitionModel":
        """Materialize both row normalizations from the current counts."""
        counts = self.counts.astype(np.float64)
        n_d, n_w = self.cfg.n_d, self.cfg.n_w

        quad_sums = counts.sum(axis=3, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            quad = np.where(quad_sums > 0, counts / quad_sums, 0.0)
        self._quadrant_rows = quad

        flat = counts.reshape(n_d, n_w, n_d * n_w)
        full_sums = flat.sum(axis=2, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            full = np.where(full_sums > 0, flat / full_sums, 0.0)
        self._full_rows = full

        marg = counts.sum(axis=1)
        marg_sums = marg.sum(axis=2, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            self._marginal_rows = np.where(marg_sums > 0, marg / marg_sums, 0.0)
        return self

    @property
    def quadrant_rows(self) -> np.ndarray:
        """p(v | k, l, r), shape (n_d, n_w, n_d, n_w); empty rows all-zero."""
        if self._quadrant_rows is None:
            self.normalize()
        return self._quadrant_rows

    @property
    def full_rows(self) -> np.ndarray:
        """p(r, v | k, l), shape (n_d, n_w, n_d * n_w); empty rows all-zero."""
        if self._full_rows is None:
            self.normalize()
        return self._full_rows

    def quadrant_row(self, k: int, l: int, r: int) -> Optional[np.ndarray]:
        """Sampling row for (k, l) given next delay bucket r; None if unseen."""
        row = self.quadrant_rows[k, l, r]
        if not row.any():
            return None
        return row

    @property
    def quadrant_marginal_rows(self) -> np.ndarray:
        """p(v | k, r) with the window bucket marginalized out,
        shape (n_d, n_d, n_w)."""
        if self._marginal_rows is None:
            self.normalize()
        return self._marginal_rows

    def quadrant_marginal_row(self, k: int, r: int) -> Optional[np.ndarray]:
        """Quadrant (k, r)'s pooled sampling row; None if the quadrant is unseen."""
        row = self.quadrant_marginal_rows[k, r]
        if not row.any():
            return None
        return row

    def full_row(self, k: int, l: int) -> Optional[np.ndarray]:
        """Outgoing distribution of state (k, l) over flat states; None if unseen."""
        row = self.full_rows[k, l]
        if not row.any():
            return None
        return row

    def source_state_count(self) -> int:
        """Number of (k, l) states with at least one outgoing transition."""
        return int(np.count_nonzero(self.counts.sum(axis=(2, 3))))

    def empty_quadrant_row_fraction(self) -> float:
        """Fraction of (k, l, r) rows that were never observed."""
        row_sums = self.counts.sum(axis=3)
        return float(np.count_nonzero(row_sums == 0) / row_sums.size)


def count_transitions(
    derived: Sequence[EpochRecord], model: TransitionModel
) -> TransitionModel:
    """Accumulate one derived run into a model; run boundaries never chain."""
    states = [r.state for r in derived if r.state is not None]
    model.add_transitions(states)
    return model


_MAGIC = "MDIMODEL v1"


def _format_edge(e: float) -> str:
    return repr(float(e))


def save_model(model: TransitionModel, sink: BinaryIO) -> None:
    """Serialize edges and sparse counts; byte-identical for equal models."""
    cfg = model.cfg
    lines = [
        _MAGIC,
        f"{cfg.n_d} {cfg.n_w} {model.total_transitions}",
        " ".join(_format_edge(e) for e in cfg.d_hat_edges),
        " ".join(_format_edge(e) for e in cfg.w_hat_edges),
    ]
    nz = np.argwhere(model.counts)
    for k, l, r, v in nz:
        c = int(model.counts[k, l, r, v])
        lines.append(f"{k} {l} {r} {v} {c}")
    sink.write(("\n".join(lines) + "\n").encode("utf-8"))


def load_model(source: BinaryIO) -> TransitionModel:
    """Parse a serialized model, validating structure and count totals."""
    text = source.read().decode("utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ModelFormatError(f"bad magic line, expected {_MAGIC!r}")
    if len(lines) < 4:
        raise ModelFormatError("file truncated before edge lines")

    header = lines[1].split()
    if len(header) != 3:
        raise ModelFormatError(f"header needs 'n_d n_w total', got {lines[1]!r}")
    try:
        n_d, n_w, declared_total = (int(x) for x in header)
    except ValueError:
        raise ModelFormatError(f"non-integer header field in {lines[1]!r}") from None
    if declared_total < 0:
        raise ModelFormatError(f"negative transition total {declared_total}")

    def parse_edges(line: str, expect: int, name: str) -> tuple[float, ...]:
        parts = line.split()
        if len(parts) != expect:
            raise ModelFormatError(f"{name}: expected {expect} edges, got {len(parts)}")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ModelFormatError(f"{name}: non-numeric edge") from None

    d_edges = parse_edges(lines[2], n_d + 1, "d_hat_edges")
    w_edges = parse_edges(lines[3], n_w + 1, "w_hat_edges")
    try:
        cfg = QuantizerConfig(d_edges, w_edges, n_d=n_d, n_w=n_w)
    except ValueError as exc:
        raise ModelFormatError(f"invalid quantizer config: {exc}") from None

    model = TransitionModel(cfg)
    for lineno, line in enumerate(lines[4:], start=5):
        if not line.strip():
            raise ModelFormatError(f"line {lineno}: blank line")
        parts = line.split()
        if len(parts) != 5:
            raise ModelFormatError(f"line {lineno}: expected 'k l r v count'")
        try:
            k, l, r, v, c = (int(p) for p in parts)
        except ValueError:
            raise ModelFormatError(f"line {lineno}: non-integer field") from None
        if not (0 <= k < n_d and 0 <= r < n_d and 0 <= l < n_w and 0 <= v < n_w):
            raise ModelFormatError(f"line {lineno}: index out of range")
        if c <= 0:
            raise ModelFormatError(f"line {lineno}: count must be > 0, got {c}")
        model.counts[k, l, r, v] += np.uint64(c)
    if model.total_transitions != declared_total:
        raise ModelFormatError(
            f"count total mismatch: header says {declared_total}, "
            f"entries sum to {model.total_transitions}"
        )
    return model
