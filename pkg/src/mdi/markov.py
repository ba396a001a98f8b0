"""Convergence analysis of trained models as Markov chains.

The full-row normalization of a transition model is an ordinary
row-stochastic matrix over the flat composite states. This module
computes its stationary distribution by power iteration, mixing times
from worst-case one-hot starts, and divergence metrics between the
predicted stationary distribution and empirically observed state
frequencies.

Desk-scale training leaves some states with inflow but no observed
outflow. Replacing their empty rows with self-loops (the conservative
default) makes them absorbing, which can drain the stationary mass into
states that were barely visited; the "uniform" policy instead lets such
states diffuse and keeps the chain irreducible whenever anything was
observed. Analysis pipelines should prefer "uniform" and record the
choice alongside their results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .quantizer import QuantizerConfig
from .trainer import EpochRecord, TransitionModel


class AnalysisError(ValueError):
    """Analysis input did not satisfy its contract."""


class ConvergenceError(RuntimeError):
    """An iterative computation hit its cap before converging."""


def check_stochastic(P: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Validate a row-stochastic matrix; returns it as float64."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise AnalysisError(f"expected a square matrix, got shape {P.shape}")
    if not np.all(np.isfinite(P)) or np.any(P < 0.0):
        raise AnalysisError("matrix entries must be finite and >= 0")
    row_err = np.abs(P.sum(axis=1) - 1.0).max()
    if row_err > tol:
        raise AnalysisError(f"rows must sum to 1 within {tol}, worst error {row_err}")
    return P


def check_distribution(p: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Validate a probability vector; returns it as float64."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise AnalysisError(f"expected a vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0):
        raise AnalysisError("probabilities must be finite and >= 0")
    if abs(float(p.sum()) - 1.0) > tol:
        raise AnalysisError(f"probabilities must sum to 1 within {tol}")
    return p


def to_stochastic(
    model: TransitionModel,
    smoothing: float = 0.0,
    empty_rows: str = "self-loop",
) -> np.ndarray:
    """Full-row chain over flat states with a policy for unseen rows.

    empty_rows is "self-loop" (unseen states hold) or "uniform" (unseen
    states diffuse). Optional smoothing mixes every row with the uniform
    distribution: P <- (1 - smoothing) * P + smoothing / n.
    """
    if not 0.0 <= smoothing < 1.0:
        raise ValueError(f"smoothing must be in [0, 1), got {smoothing!r}")
    n = model.cfg.n_states
    P = model.full_rows.reshape(n, n).copy()
    empty = P.sum(axis=1) == 0.0
    if empty_rows == "self-loop":
        idx = np.flatnonzero(empty)
        P[idx, idx] = 1.0
    elif empty_rows == "uniform":
        P[empty] = 1.0 / n
    else:
        raise ValueError(f"empty_rows must be 'self-loop' or 'uniform', got {empty_rows!r}")
    if smoothing > 0.0:
        P = (1.0 - smoothing) * P + smoothing / n
    return check_stochastic(P)


def lazy(P: np.ndarray) -> np.ndarray:
    """Half-self-loop transform (P + I) / 2; same stationary distribution,
    kills periodicity."""
    P = check_stochastic(P)
    return 0.5 * (P + np.eye(P.shape[0]))


def is_irreducible(P: np.ndarray) -> bool:
    """True when every state reaches every other along positive entries."""
    P = check_stochastic(P)
    adj = P > 0.0
    return _reaches_all(adj, 0) and _reaches_all(adj.T, 0)


def _reaches_all(adj: np.ndarray, start: int) -> bool:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    frontier = np.array([start])
    while frontier.size:
        nxt = adj[frontier].any(axis=0) & ~seen
        seen |= nxt
        frontier = np.flatnonzero(nxt)
    return bool(seen.all())


def stationary(
    P: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
    residual_tol: float = 1e-8,
) -> np.ndarray:
    """Stationary distribution by power iteration from uniform.

    Iterates until successive distributions agree within tol in max norm,
    then verifies the fixed-point residual. Periodic chains may never
    converge; wrap them with lazy() first.
    """
    P = check_stochastic(P)
    n = P.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ P
        delta = float(np.abs(nxt - pi).max())
        pi = nxt
        if delta < tol:
            pi = pi / pi.sum()
            residual = float(np.abs(pi @ P - pi).max())
            if residual > residual_tol:
                raise ConvergenceError(
                    f"fixed-point residual {residual} exceeds {residual_tol}"
                )
            return pi
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps; "
        "the chain may be periodic, try lazy()"
    )


@dataclass(frozen=True)
class MixingReport:
    """Mixing time at one threshold, with the per-start profile."""

    epsilon: float
    t_mix: int
    per_start: np.ndarray


def mixing_times(
    P: np.ndarray,
    epsilons: Iterable[float],
    max_iter: int = 100_000,
) -> dict[float, MixingReport]:
    """Per-start mixing times at several thresholds in one sweep.

    For each one-hot start the mixing time is the smallest t where the
    distribution at t and at t+1 agree within epsilon in max norm; the
    chain's mixing time is the worst start. Rows are dropped from the
    iteration once they have resolved at the tightest threshold.
    """
    P = check_stochastic(P)
    eps = sorted({float(e) for e in epsilons}, reverse=True)
    if not eps:
        raise ValueError("need at least one epsilon")
    if eps[-1] <= 0.0:
        raise ValueError(f"epsilons must be > 0, got {eps[-1]}")
    n = P.shape[0]
    M = np.eye(n)
    hits = {e: np.full(n, -1, dtype=np.int64) for e in eps}
    tightest = hits[eps[-1]]
    active = np.arange(n)
    t = 0
    while active.size:
        if t > max_iter:
            raise ConvergenceError(
                f"mixing did not resolve at epsilon={eps[-1]} within {max_iter} steps"
            )
        stepped = M[active] @ P
        diff = np.abs(M[active] - stepped).max(axis=1)
        for e in eps:
            h = hits[e]
            fresh = (h[active] < 0) & (diff < e)
            h[active[fresh]] = t
        M[active] = stepped
        active = active[tightest[active] < 0]
        t += 1
    return {
        e: MixingReport(epsilon=e, t_mix=int(h.max()), per_start=h.copy())
        for e, h in hits.items()
    }


def mixing_time(P: np.ndarray, epsilon: float, max_iter: int = 100_000) -> MixingReport:
    """Mixing time at a single threshold (worst one-hot start)."""
    return mixing_times(P, [epsilon], max_iter=max_iter)[float(epsilon)]


def kl_divergence(p: np.ndarray, q: np.ndarray, floor: float = 1e-9) -> float:
    """D(p || q) in nats, flooring q's zeros so the result stays finite.

    q is clipped below at floor and renormalized; terms with p == 0
    contribute nothing.
    """
    p = check_distribution(p)
    q = check_distribution(q)
    if p.shape != q.shape:
        raise AnalysisError(f"shape mismatch: {p.shape} vs {q.shape}")
    if floor <= 0.0:
        raise ValueError(f"floor must be > 0, got {floor!r}")
    qf = np.maximum(q, floor)
    qf = qf / qf.sum()
    mask = p > 0.0
    return float(np.sum(p[mask] * np.log(p[mask] / qf[mask])))


def max_abs_diff(p: np.ndarray, q: np.ndarray) -> float:
    """Largest per-state probability gap between two distributions."""
    p = check_distribution(p)
    q = check_distribution(q)
    if p.shape != q.shape:
        raise AnalysisError(f"shape mismatch: {p.shape} vs {q.shape}")
    return float(np.abs(p - q).max())


def empirical_distribution(
    epochs: Sequence[EpochRecord],
    cfg: QuantizerConfig,
    discard: int = 0,
) -> np.ndarray:
    """State-visit frequencies of a derived epoch log.

    Records without derived state (the head of each run) are skipped;
    the first `discard` stateful records are dropped as burn-in.
    """
    if discard < 0:
        raise ValueError(f"discard must be >= 0, got {discard}")
    states = [r.state for r in epochs if r.state is not None]
    kept = states[discard:]
    if not kept:
        raise AnalysisError(
            f"no epochs left after discarding {discard} of {len(states)}"
        )
    flats = np.array([s.flat(cfg.n_w) for s in kept], dtype=np.int64)
    if flats.max() >= cfg.n_states:
        raise AnalysisError("epoch states fall outside the quantizer grid")
    hist = np.bincount(flats, minlength=cfg.n_states).astype(np.float64)
    return hist / hist.sum()
