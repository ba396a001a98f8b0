#!/usr/bin/env python3
"""Convergence analysis of a trained behavior chain.

Trains a small model, turns it into a row-stochastic matrix, and then
asks the classic questions: where does the chain settle (stationary
distribution), how fast does it get there (mixing time at several
thresholds), and do model-driven runs actually visit states with the
predicted frequencies (KL divergence)?
"""

import time

import numpy as np

from mdi import markov
from mdi.controllers import VerusLike
from mdi.pipeline import derive_run_seed, run_and_derive, train_on_traces
from mdi.runtime import MdiController
from mdi.trace import SyntheticTraceSpec, gen_rapidly_changing

MASTER_SEED = 7
DURATION_MS = 30_000
N_TRAIN = 16
N_HELD = 3


def make_controller():
    return VerusLike(lam=1.2, inc=1.0, dec_mult=0.9, rise_floor_ms=1.0,
                     inc_frac=0.06, epoch_ms=20)


def make_trace(seed):
    spec = SyntheticTraceSpec(
        duration_s=DURATION_MS / 1000.0, segment_s=2.0,
        rate_min_mbps=3.0, rate_max_mbps=50.0, seed=seed,
    )
    return gen_rapidly_changing(spec)


def main():
    t0 = time.perf_counter()
    traces = [(f"t{i:02d}", make_trace(1000 + i)) for i in range(N_TRAIN)]
    model, summary = train_on_traces(
        traces, make_controller,
        duration_ms=DURATION_MS, one_way_prop_ms=30,
        queue_capacity_pkts=2000, master_seed=MASTER_SEED,
    )
    print(f"trained on {summary['transitions']} transitions "
          f"({time.perf_counter() - t0:.1f}s)")

    print()
    print("=" * 64)
    print("1. Stationary distribution")
    print("=" * 64)
    P = markov.to_stochastic(model, empty_rows="uniform")
    pi = markov.stationary(P)
    residual = float(np.abs(pi @ P - pi).max())
    print(f"  states: {P.shape[0]}, irreducible: {markov.is_irreducible(P)}")
    print(f"  fixed-point residual |pi P - pi|_max = {residual:.2e}")
    top = np.argsort(pi)[::-1][:5]
    n_w = model.cfg.n_w
    print("  heaviest states (delay bucket, window bucket):")
    for flat in top:
        print(f"    ({flat // n_w:>2d}, {flat % n_w:>2d})  pi = {pi[flat]:.4f}")

    print()
    print("=" * 64)
    print("2. Mixing time at tightening thresholds")
    print("=" * 64)
    reports = markov.mixing_times(P, [1e-3, 1e-5, 1e-7])
    for eps, rep in sorted(reports.items(), reverse=True):
        print(f"  eps = {eps:>7.0e}: t_mix = {rep.t_mix:>4d} steps")
    burn_in = reports[1e-3].t_mix

    print()
    print("=" * 64)
    print("3. Do driven runs match the prediction?")
    print("=" * 64)
    print(f"  (burn-in: first {burn_in} derived states discarded per run)")
    empiricals = []
    for j in range(N_HELD):
        held = make_trace(5000 + j)
        driver = MdiController(model, epoch_ms=20,
                               seed=derive_run_seed(MASTER_SEED, f"h{j}", 1))
        _, records = run_and_derive(
            held, driver, model.cfg,
            one_way_prop_ms=30, queue_capacity_pkts=2000,
            seed=derive_run_seed(MASTER_SEED, f"h{j}", 0),
            duration_ms=DURATION_MS,
        )
        empiricals.append(
            markov.empirical_distribution(records, model.cfg, discard=burn_in)
        )
    emp = np.mean(empiricals, axis=0)
    emp /= emp.sum()
    kl = markov.kl_divergence(emp, pi)
    gap = markov.max_abs_diff(emp, pi)
    print(f"  KL(observed || stationary) = {kl:.4f} nats")
    print(f"  max per-state probability gap = {gap:.4f}")
    print()
    print("  Small-scale caveat: with %d short runs the empirical tail is"
          % N_HELD)
    print("  noisy; the full-scale recipe uses 50 training and 5 held runs")
    print("  of 60 s each and lands noticeably tighter.")


if __name__ == "__main__":
    main()
