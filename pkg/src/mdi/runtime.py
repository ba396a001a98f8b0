"""Running a trained transition model as a congestion controller.

Each epoch the controller forms the delay composite from the new mean
delay, then either:

* applies a fixed multiplicative correction when the composite falls
  outside the trained grid (c1 > 1 below the range: delay collapsed,
  grow; c2 < 1 above: delay blew up, back off), or
* looks up the quadrant selected by (previous delay bucket k, new delay
  bucket r), takes the row for its previous window bucket l, samples the
  next window bucket v by inverse CDF from one uniform draw, and moves
  the window to realize that bucket's midpoint composite.

Realizing a window composite means inverting
f(w) = (w / w_prev - 1) * log10(w) for w at fixed w_prev. f is not
monotone: it is zero at w = 1 and w = w_prev and dips negative between
them, so a negative target selects the branch rising back toward w_prev
(the root nearest the current window), found by bisection. Targets below
the dip's minimum clamp to the minimizer; positive targets are bisected
on [w_prev, 1000 * w_prev].

An unseen (k, l, r) row first backs off to the quadrant's row with the
window bucket marginalized out, i.e. p(v | k, r); only when the whole
quadrant is unseen does the controller hold the window and count a
fallback. Without the marginal tier a model-driven run can wedge: holding
keeps w_hat at exactly 0, and if training never visited that window
bucket the exact lookup keeps missing forever. Epochs with no ACKs hold
the window: silence carries no delay sample, and at a small window it is
the expected ACK cadence rather than a congestion signal.
"""

from __future__ import annotations

import math

import numpy as np

from .controllers import Controller, ControllerDecision, EpochFeedback
from .quantizer import compute_w_hat
from .trainer import TransitionModel

_BISECT_STEPS = 80
_POS_SPAN = 1000.0


def _w_hat_fixed_prev(w: float, w_prev: float) -> float:
    return (w / w_prev - 1.0) * math.log10(w)


def _dip_minimizer(w_prev: float) -> float:
    """Locate the minimum of the window composite on (1, w_prev).

    The derivative's sign is carried by (ln w + 1) / w_prev - 1 / w,
    which increases in w, so a plain bisection on its sign converges to
    the unique stationary point.
    """
    lo, hi = 1.0, w_prev
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if (math.log(mid) + 1.0) / w_prev - 1.0 / mid < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _bisect_increasing(target: float, lo: float, hi: float, w_prev: float) -> float:
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if _w_hat_fixed_prev(mid, w_prev) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def invert_w_hat(w_hat_target: float, w_prev: float) -> float:
    """Window w >= 1 whose composite against w_prev equals the target.

    Exact where the target is reachable; out-of-range targets clamp to
    the nearest achievable window (the dip minimizer below, a 1000x
    window above).
    """
    if not math.isfinite(w_hat_target):
        raise ValueError(f"w_hat_target must be finite, got {w_hat_target!r}")
    if not math.isfinite(w_prev) or w_prev < 1.0:
        raise ValueError(f"w_prev must be >= 1, got {w_prev!r}")
    if w_hat_target == 0.0:
        return w_prev
    if w_hat_target > 0.0:
        lo = max(w_prev, 1.0)
        hi = max(w_prev, 1.0) * _POS_SPAN
        if _w_hat_fixed_prev(hi, w_prev) <= w_hat_target:
            return hi
        return _bisect_increasing(w_hat_target, lo, hi, w_prev)
    if w_prev <= 1.0:
        return 1.0
    m = _dip_minimizer(w_prev)
    if w_hat_target <= _w_hat_fixed_prev(m, w_prev):
        return m
    return _bisect_increasing(w_hat_target, m, w_prev, w_prev)


class MdiController(Controller):
    """Guided random walk over a trained transition model."""

    name = "mdi"

    def __init__(
        self,
        model: TransitionModel,
        c1: float = 1.25,
        c2: float = 0.8,
        epoch_ms: int = 20,
        seed: int = 0,
        w_init: float = 2.0,
    ) -> None:
        if c1 <= 1.0:
            raise ValueError(f"c1 must be > 1, got {c1}")
        if not 0.0 < c2 < 1.0:
            raise ValueError(f"c2 must be in (0, 1), got {c2}")
        if epoch_ms < 1:
            raise ValueError(f"epoch_ms must be >= 1, got {epoch_ms}")
        if w_init < 1.0:
            raise ValueError(f"w_init must be >= 1, got {w_init}")
        self.model = model
        self.c1 = float(c1)
        self.c2 = float(c2)
        self.epoch_ms = int(epoch_ms)
        self.w_init = float(w_init)
        self.rng = np.random.default_rng(seed)
        self.window = float(w_init)
        self.d_prev_ms: float | None = None
        self.d_idx_prev: int | None = None
        self.w_idx_prev: int | None = None
        self.fallback_count = 0
        self.marginal_count = 0
        self.boundary_count = 0
        self.epoch_count = 0

    def _apply_multiplier(self, mult: float) -> None:
        cfg = self.model.cfg
        w_old = self.window
        self.window = max(1.0, w_old * mult)
        self.w_idx_prev = cfg.w_bucket(compute_w_hat(self.window, w_old))
        self.boundary_count += 1

    def on_epoch(self, feedback: EpochFeedback) -> ControllerDecision:
        self.epoch_count += 1
        cfg = self.model.cfg

        if feedback.acked_pkts == 0:
            # A silent epoch carries no delay sample. At small windows
            # silence is simply the ACK cadence (fewer than one packet
            # per epoch in flight), so treating it as congestion would
            # pin the walk against the w >= 1 clamp. Hold and wait for
            # the next measurable epoch.
            return ControllerDecision(self.window, self.epoch_ms)

        d_new = feedback.mean_delay_ms
        if self.d_prev_ms is None:
            self.d_prev_ms = d_new
            return ControllerDecision(self.window, self.epoch_ms)

        d_hat = (d_new / self.d_prev_ms - 1.0) * math.log10(d_new)
        if d_hat < cfg.d_hat_edges[0]:
            self._apply_multiplier(self.c1)
            self.d_idx_prev = cfg.d_bucket(d_hat)
        elif d_hat > cfg.d_hat_edges[-1]:
            self._apply_multiplier(self.c2)
            self.d_idx_prev = cfg.d_bucket(d_hat)
        else:
            r = cfg.d_bucket(d_hat)
            k = self.d_idx_prev if self.d_idx_prev is not None else r
            l = self.w_idx_prev if self.w_idx_prev is not None else cfg.w_bucket(0.0)
            row = self.model.quadrant_row(k, l, r)
            if row is None:
                row = self.model.quadrant_marginal_row(k, r)
                if row is not None:
                    self.marginal_count += 1
            if row is None:
                self.fallback_count += 1
                self.w_idx_prev = l
            else:
                cdf = np.cumsum(row)
                v = int(np.searchsorted(cdf, self.rng.random(), side="right"))
                v = min(v, cfg.n_w - 1)
                target = cfg.w_midpoint(v)
                self.window = max(1.0, invert_w_hat(target, self.window))
                self.w_idx_prev = v
            self.d_idx_prev = r
        self.d_prev_ms = d_new
        return ControllerDecision(self.window, self.epoch_ms)
