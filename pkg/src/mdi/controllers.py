"""Epoch-driven congestion controllers.

A controller is called once per epoch with aggregate delay feedback and
returns the congestion window to use for the next epoch plus the length
of that epoch. The simulator owns packet-level mechanics; controllers
only see per-epoch summaries, which is also the granularity the model
trainer consumes.

The built-in baselines are deliberately small. They keep the qualitative
shapes that matter for modeling: the verus-like rule decreases decisively
when delay rises or sits high and explores additively otherwise; the
copa-like rule steps toward a delay-derived target window, so it repeats
its last direction until it overshoots.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass


@dataclass(frozen=True)
class EpochFeedback:
    """Aggregate link feedback for one elapsed epoch."""

    epoch_index: int
    mean_delay_ms: float
    min_delay_ms: float
    acked_pkts: int
    now_ms: int

    def __post_init__(self) -> None:
        if self.epoch_index < 0:
            raise ValueError(f"epoch_index must be >= 0, got {self.epoch_index}")
        if self.acked_pkts < 0:
            raise ValueError(f"acked_pkts must be >= 0, got {self.acked_pkts}")
        if not math.isfinite(self.mean_delay_ms) or self.mean_delay_ms < 0:
            raise ValueError(f"mean_delay_ms out of range: {self.mean_delay_ms!r}")
        if not math.isfinite(self.min_delay_ms) or self.min_delay_ms < 0:
            raise ValueError(f"min_delay_ms out of range: {self.min_delay_ms!r}")
        if self.acked_pkts > 0 and self.mean_delay_ms < self.min_delay_ms:
            raise ValueError("mean_delay_ms cannot undercut min_delay_ms")


@dataclass(frozen=True)
class ControllerDecision:
    """Window for the next epoch and how long that epoch lasts."""

    window_pkts: float
    epoch_len_ms: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.window_pkts) or self.window_pkts < 1.0:
            raise ValueError(f"window_pkts must be >= 1, got {self.window_pkts!r}")
        if self.epoch_len_ms < 1:
            raise ValueError(f"epoch_len_ms must be >= 1, got {self.epoch_len_ms}")


class Controller(abc.ABC):
    """Decides the congestion window once per epoch."""

    name: str = "controller"

    @abc.abstractmethod
    def on_epoch(self, feedback: EpochFeedback) -> ControllerDecision:
        """Consume one epoch of feedback, return the next decision."""


class Pinned(Controller):
    """Constant window; the null controller for plumbing and tests."""

    name = "pinned"

    def __init__(self, window_pkts: float = 10.0, epoch_ms: int = 20) -> None:
        self.decision = ControllerDecision(float(window_pkts), int(epoch_ms))

    def on_epoch(self, feedback: EpochFeedback) -> ControllerDecision:
        return self.decision


class VerusLike(Controller):
    """Additive explore, multiplicative back-off on rising or high delay.

    Per epoch: decrease (w *= dec_mult) when the epoch's mean delay sits
    noticeably above its own smoothed history, or when it exceeds
    lam * min_delay; otherwise increase (w += inc + inc_frac * w). The
    smoothed reference (an EWMA of recent epoch means) lags a sustained
    climb, so slow queue growth that never jumps much in one epoch still
    trips the back-off, while one-epoch noise from millisecond RTT
    quantization stays inside the threshold band. The optional inc_frac
    term scales exploration with the operating point, so recovery after a
    back-off takes a similar number of epochs on a 10 packet window as on
    a 200 packet one; the default (0) keeps the increase purely additive.
    Epochs with no ACKs hold the window.
    """

    name = "verus-like"

    def __init__(
        self,
        lam: float = 1.5,
        inc: float = 1.0,
        dec_mult: float = 0.7,
        rise_thresh: float = 1.03,
        rise_floor_ms: float = 1.5,
        ewma_alpha: float = 0.25,
        inc_frac: float = 0.0,
        epoch_ms: int = 20,
        w_init: float = 2.0,
    ) -> None:
        if lam < 1.0:
            raise ValueError(f"lam must be >= 1, got {lam}")
        if inc <= 0.0:
            raise ValueError(f"inc must be > 0, got {inc}")
        if not 0.0 < dec_mult < 1.0:
            raise ValueError(f"dec_mult must be in (0, 1), got {dec_mult}")
        if rise_thresh < 1.0:
            raise ValueError(f"rise_thresh must be >= 1, got {rise_thresh}")
        if rise_floor_ms < 0.0:
            raise ValueError(f"rise_floor_ms must be >= 0, got {rise_floor_ms}")
        if not 0.0 < ewma_alpha <= 1.0:
            raise ValueError(f"ewma_alpha must be in (0, 1], got {ewma_alpha}")
        if inc_frac < 0.0:
            raise ValueError(f"inc_frac must be >= 0, got {inc_frac}")
        if w_init < 1.0:
            raise ValueError(f"w_init must be >= 1, got {w_init}")
        self.lam = float(lam)
        self.inc = float(inc)
        self.dec_mult = float(dec_mult)
        self.rise_thresh = float(rise_thresh)
        self.rise_floor_ms = float(rise_floor_ms)
        self.ewma_alpha = float(ewma_alpha)
        self.inc_frac = float(inc_frac)
        self.epoch_ms = int(epoch_ms)
        self.window = float(w_init)
        self._ewma_ms: float | None = None

    def on_epoch(self, feedback: EpochFeedback) -> ControllerDecision:
        if feedback.acked_pkts > 0:
            mean = feedback.mean_delay_ms
            rising = self._ewma_ms is not None and mean > max(
                self._ewma_ms * self.rise_thresh,
                self._ewma_ms + self.rise_floor_ms,
            )
            high = mean > self.lam * feedback.min_delay_ms
            if rising or high:
                self.window = max(1.0, self.window * self.dec_mult)
            else:
                self.window = self.window + self.inc + self.inc_frac * self.window
            if self._ewma_ms is None:
                self._ewma_ms = mean
            else:
                self._ewma_ms += self.ewma_alpha * (mean - self._ewma_ms)
        return ControllerDecision(self.window, self.epoch_ms)


class CopaLike(Controller):
    """Step toward a target window derived from measured queueing delay.

    The target follows target_w = mean_delay / (delta * dq) with
    dq = max(mean_delay - min_delay, 0.1) ms, i.e. lower queueing delay
    justifies a larger window. Each epoch moves the window by
    acked_pkts * velocity / (delta * w) toward the target, so steps
    self-scale and the controller overshoots then reverses rather than
    settling. Zero-ACK epochs hold.
    """

    name = "copa-like"

    def __init__(
        self,
        delta: float = 0.5,
        velocity: float = 1.0,
        epoch_ms: int = 10,
        w_init: float = 2.0,
    ) -> None:
        if delta <= 0.0:
            raise ValueError(f"delta must be > 0, got {delta}")
        if velocity <= 0.0:
            raise ValueError(f"velocity must be > 0, got {velocity}")
        if w_init < 1.0:
            raise ValueError(f"w_init must be >= 1, got {w_init}")
        self.delta = float(delta)
        self.velocity = float(velocity)
        self.epoch_ms = int(epoch_ms)
        self.window = float(w_init)

    def on_epoch(self, feedback: EpochFeedback) -> ControllerDecision:
        if feedback.acked_pkts > 0:
            dq_ms = max(feedback.mean_delay_ms - feedback.min_delay_ms, 0.1)
            target_w = feedback.mean_delay_ms / (self.delta * dq_ms)
            step = feedback.acked_pkts * self.velocity / (self.delta * self.window)
            if self.window < target_w:
                self.window += step
            else:
                self.window -= step
            self.window = max(1.0, self.window)
        return ControllerDecision(self.window, self.epoch_ms)


BASELINES = {
    Pinned.name: Pinned,
    VerusLike.name: VerusLike,
    CopaLike.name: CopaLike,
}


def make_controller(name: str, **params) -> Controller:
    """Instantiate a baseline controller by its registry name."""
    try:
        cls = BASELINES[name]
    except KeyError:
        known = ", ".join(sorted(BASELINES))
        raise ValueError(f"unknown controller {name!r} (known: {known})") from None
    return cls(**params)
