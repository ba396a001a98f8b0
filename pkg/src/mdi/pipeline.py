"""Batch training: many controller runs pooled into one transition model.

The pipeline runs a fresh controller over every trace, pools the
composite observations from all runs to fit one quantizer grid, then
derives and counts each run separately so transitions never straddle a
run boundary. Per-run seeds are derived from the master seed plus the
trace name and run index, so results do not depend on incidental
ordering tricks and re-running with the same inputs is byte-stable.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Optional, Sequence

from .controllers import Controller
from .linksim import LinkParams, SimResult, run_simulation
from .quantizer import CompositeObservation, compute_d_hat, compute_w_hat, fit_config
from .trace import LinkTrace
from .trainer import EpochRecord, TransitionModel, count_transitions, derive_states


def derive_run_seed(master_seed: int, tag: str, index: int) -> int:
    """Stable 63-bit seed for one run, from the master seed and run identity."""
    digest = hashlib.sha256(f"{master_seed}:{tag}:{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def train_on_traces(
    traces: Sequence[tuple[str, LinkTrace]],
    make_controller: Callable[[], Controller],
    *,
    n_d: int = 11,
    n_w: int = 21,
    duration_ms: int = 60_000,
    one_way_prop_ms: int = 10,
    queue_capacity_pkts: Optional[int] = None,
    loss_rate: float = 0.0,
    master_seed: int = 1,
    runs_per_trace: int = 1,
) -> tuple[TransitionModel, dict]:
    """Train a transition model from controller runs over named traces.

    Returns the normalized model and a summary dict (run/epoch/transition
    counts plus sparsity diagnostics).
    """
    if not traces:
        raise ValueError("need at least one trace to train on")
    if runs_per_trace < 1:
        raise ValueError(f"runs_per_trace must be >= 1, got {runs_per_trace}")

    run_logs: list[list[EpochRecord]] = []
    for name, trace in traces:
        for run_index in range(runs_per_trace):
            params = LinkParams(
                trace=trace,
                one_way_prop_ms=one_way_prop_ms,
                queue_capacity_pkts=queue_capacity_pkts,
                loss_rate=loss_rate,
                seed=derive_run_seed(master_seed, name, run_index),
                duration_ms=duration_ms,
            )
            result = run_simulation(params, make_controller())
            run_logs.append(result.epochs)

    pool: list[CompositeObservation] = []
    for log in run_logs:
        for prev, curr in zip(log, log[1:]):
            pool.append(
                CompositeObservation(
                    compute_d_hat(curr.delay_ms, prev.delay_ms),
                    compute_w_hat(curr.window_pkts, prev.window_pkts),
                )
            )
    cfg = fit_config(pool, n_d=n_d, n_w=n_w)

    model = TransitionModel(cfg)
    total_epochs = 0
    for log in run_logs:
        total_epochs += len(log)
        if len(log) >= 2:
            count_transitions(derive_states(log, cfg), model)
    model.normalize()

    summary = {
        "runs": len(run_logs),
        "epochs": total_epochs,
        "transitions": model.total_transitions,
        "source_states": model.source_state_count(),
        "empty_quadrant_row_fraction": model.empty_quadrant_row_fraction(),
        "n_d": n_d,
        "n_w": n_w,
    }
    return model, summary


def run_and_derive(
    trace: LinkTrace,
    controller: Controller,
    cfg,
    *,
    one_way_prop_ms: int = 10,
    queue_capacity_pkts: Optional[int] = None,
    loss_rate: float = 0.0,
    seed: int = 0,
    duration_ms: int = 60_000,
) -> tuple[SimResult, list[EpochRecord]]:
    """Run one controller and return the result plus derived epoch log."""
    params = LinkParams(
        trace=trace,
        one_way_prop_ms=one_way_prop_ms,
        queue_capacity_pkts=queue_capacity_pkts,
        loss_rate=loss_rate,
        seed=seed,
        duration_ms=duration_ms,
    )
    result = run_simulation(params, controller)
    derived = derive_states(result.epochs, cfg) if len(result.epochs) >= 2 else []
    return result, derived
