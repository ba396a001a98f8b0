"""Command-line surface: gen-trace, train, run, analyze, compare, fingerprint.

Every command validates its inputs and computes its full output before
opening the destination file, so failed invocations do not leave partial
artifacts behind.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import markov
from .controllers import BASELINES, make_controller
from .heatmap import heatmap_export
from .linksim import (
    LinkParams,
    PacketLog,
    read_epoch_csv,
    read_packet_csv,
    run_simulation,
    write_epoch_csv,
    write_packet_csv,
)
from .pipeline import derive_run_seed, train_on_traces
from .runtime import MdiController
from .trace import (
    LinkTrace,
    SyntheticTraceSpec,
    gen_rapidly_changing,
    load_trace,
    save_trace,
)
from .trainer import EpochRecord, derive_states, load_model, save_model


class CliError(ValueError):
    """A command's inputs were unusable."""


def _load_trace_path(path: Path, mtu: int) -> LinkTrace:
    with open(path, "rb") as fh:
        return load_trace(fh, mtu_bytes=mtu)


def _queue_arg(value: int) -> int | None:
    return None if value == 0 else value


def _packets_path(out: Path) -> Path:
    return out.with_suffix(".packets.csv")


def _json_dump(obj, path: Path | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def cmd_gen_trace(args) -> int:
    spec = SyntheticTraceSpec(
        duration_s=args.duration,
        segment_s=args.segment,
        rate_min_mbps=args.rate_min,
        rate_max_mbps=args.rate_max,
        seed=args.seed,
    )
    trace = gen_rapidly_changing(spec, mtu_bytes=args.mtu)
    with open(args.out, "wb") as fh:
        save_trace(trace, fh)
    print(
        f"wrote {args.out}: {len(trace)} opportunities over {trace.duration_ms} ms, "
        f"mean {trace.mean_rate_mbps():.3f} Mbps"
    )
    return 0


def cmd_train(args) -> int:
    trace_dir = Path(args.traces)
    if not trace_dir.is_dir():
        raise CliError(f"not a directory: {trace_dir}")
    files = sorted(trace_dir.glob("*.trace"))
    if not files:
        raise CliError(f"no *.trace files in {trace_dir}")
    if args.controller not in BASELINES:
        known = ", ".join(sorted(BASELINES))
        raise CliError(
            f"can only train on a baseline controller ({known}), "
            f"got {args.controller!r}"
        )
    traces = [(f.name, _load_trace_path(f, args.mtu)) for f in files]
    ctrl_kwargs = {}
    if args.epoch_ms is not None:
        ctrl_kwargs["epoch_ms"] = args.epoch_ms

    model, summary = train_on_traces(
        traces,
        lambda: make_controller(args.controller, **ctrl_kwargs),
        n_d=args.n_d,
        n_w=args.n_w,
        duration_ms=int(round(args.duration * 1000)),
        one_way_prop_ms=args.prop_ms,
        queue_capacity_pkts=_queue_arg(args.queue),
        loss_rate=args.loss,
        master_seed=args.seed,
        runs_per_trace=args.runs,
    )
    with open(args.out, "wb") as fh:
        save_model(model, fh)
    print(
        f"wrote {args.out}: {summary['transitions']} transitions from "
        f"{summary['runs']} runs ({summary['epochs']} epochs), "
        f"{summary['source_states']}/{model.cfg.n_states} source states, "
        f"{summary['empty_quadrant_row_fraction']:.3f} empty quadrant rows"
    )
    return 0


def cmd_run(args) -> int:
    trace_path = Path(args.trace)
    trace = _load_trace_path(trace_path, args.mtu)
    model = None
    if args.model is not None:
        with open(args.model, "rb") as fh:
            model = load_model(fh)

    if args.controller == "mdi":
        if model is None:
            raise CliError("--controller mdi requires --model")
        controller = MdiController(
            model,
            c1=args.c1,
            c2=args.c2,
            epoch_ms=args.epoch_ms if args.epoch_ms is not None else 20,
            seed=derive_run_seed(args.seed, trace_path.name, 1),
            w_init=args.w_init,
        )
    else:
        kwargs = {"w_init": args.w_init} if args.controller != "pinned" else {}
        if args.epoch_ms is not None:
            kwargs["epoch_ms"] = args.epoch_ms
        controller = make_controller(args.controller, **kwargs)

    params = LinkParams(
        trace=trace,
        one_way_prop_ms=args.prop_ms,
        queue_capacity_pkts=_queue_arg(args.queue),
        loss_rate=args.loss,
        seed=derive_run_seed(args.seed, trace_path.name, 0),
        duration_ms=int(round(args.duration * 1000)),
    )
    result = run_simulation(params, controller)

    records = result.epochs
    if model is not None and len(records) >= 2:
        records = derive_states(records, model.cfg)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        write_epoch_csv(records, fh)
    with open(_packets_path(out), "w", encoding="utf-8") as fh:
        write_packet_csv(result, fh)

    s = result.summary
    line = (
        f"{args.controller}: throughput Mbps median {s.throughput_mbps.p50:.3f} "
        f"(p25 {s.throughput_mbps.p25:.3f}, p75 {s.throughput_mbps.p75:.3f}), "
        f"delay ms median {s.delay_ms.p50:.3f} "
        f"(p25 {s.delay_ms.p25:.3f}, p75 {s.delay_ms.p75:.3f}), "
        f"sent {result.sent_pkts}, delivered {result.delivered_pkts}, "
        f"dropped {result.dropped_pkts}"
    )
    if isinstance(controller, MdiController) and controller.epoch_count:
        line += (
            f", fallback {controller.fallback_count}/{controller.epoch_count} epochs"
            f", marginal {controller.marginal_count}"
            f", range-exit {controller.boundary_count}"
        )
    if result.zero_delivered:
        line += " [WARNING: nothing delivered]"
    print(line)
    return 0


def _parse_epsilons(text: str) -> list[float]:
    try:
        eps = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise CliError(f"bad epsilon list: {text!r}") from None
    if not eps:
        raise CliError("need at least one epsilon")
    return eps


def _chain_from_model(model, args) -> np.ndarray:
    P = markov.to_stochastic(model, smoothing=args.smoothing, empty_rows=args.empty_rows)
    if args.lazy:
        P = markov.lazy(P)
    return P


def cmd_analyze(args) -> int:
    with open(args.model, "rb") as fh:
        model = load_model(fh)
    if model.total_transitions == 0:
        raise CliError("model has no transitions; nothing to analyze")
    P = _chain_from_model(model, args)
    try:
        pi = markov.stationary(P)
    except markov.ConvergenceError as exc:
        raise CliError(f"{exc} (hint: pass --lazy)") from None
    reports = markov.mixing_times(P, _parse_epsilons(args.epsilons))

    report = {
        "n_states": model.cfg.n_states,
        "n_d": model.cfg.n_d,
        "n_w": model.cfg.n_w,
        "transitions": model.total_transitions,
        "empty_rows_policy": args.empty_rows,
        "smoothing": args.smoothing,
        "lazy": bool(args.lazy),
        "irreducible": markov.is_irreducible(P),
        "stationary_residual": float(np.abs(pi @ P - pi).max()),
        "mixing": {
            repr(e): {
                "t_mix": rep.t_mix,
                "per_start": rep.per_start.tolist(),
            }
            for e, rep in sorted(reports.items())
        },
        "stationary": pi.tolist(),
    }
    _json_dump(report, Path(args.out) if args.out else None)
    mix_line = ", ".join(
        f"eps={e:g}: t_mix={rep.t_mix}" for e, rep in sorted(reports.items())
    )
    print(f"stationary over {model.cfg.n_states} states; {mix_line}", file=sys.stderr)
    return 0


def _packet_summary(log: PacketLog) -> dict:
    delivered = log.delivered_ms[log.delivered_ms >= 0]
    rtts = log.rtt_ms[log.rtt_ms >= 0].astype(np.float64)
    duration_ms = int(log.sent_ms.max()) + 1 if log.sent_ms.size else 1
    n_sec = max(duration_ms // 1000, 1)
    counts = np.bincount(
        np.minimum(delivered // 1000, n_sec - 1), minlength=n_sec
    ).astype(np.float64)
    tput = counts * 1500 * 8.0 / 1e6
    out = {
        "sent": int(log.sent_ms.size),
        "delivered": int(delivered.size),
        "dropped": int(np.count_nonzero(log.dropped)),
    }
    for name, arr in (("throughput_mbps", tput), ("delay_ms", rtts)):
        if arr.size:
            p25, p50, p75 = (float(x) for x in np.percentile(arr, [25, 50, 75]))
        else:
            p25 = p50 = p75 = 0.0
        out[name] = {"p25": p25, "p50": p50, "p75": p75}
    return out


def _pdf(values: np.ndarray, edges: np.ndarray) -> list[float]:
    hist, _ = np.histogram(values, bins=edges)
    total = hist.sum()
    if total == 0:
        return [0.0] * len(hist)
    return (hist / total).tolist()


def _compare_results(args) -> int:
    path_a, path_b = Path(args.a), Path(args.b)
    logs = {}
    for key, path in (("a", path_a), ("b", path_b)):
        pk = _packets_path(path)
        if not pk.exists():
            raise CliError(f"missing packet log {pk} (written alongside run output)")
        with open(pk, "r", encoding="utf-8") as fh:
            logs[key] = read_packet_csv(fh)

    stats = {key: _packet_summary(log) for key, log in logs.items()}
    rtt_a = logs["a"].rtt_ms[logs["a"].rtt_ms >= 0]
    rtt_b = logs["b"].rtt_ms[logs["b"].rtt_ms >= 0]
    if rtt_a.size and rtt_b.size:
        lo = float(min(rtt_a.min(), rtt_b.min()))
        hi = float(max(rtt_a.max(), rtt_b.max())) + 1.0
        edges = np.linspace(lo, hi, 51)
        delay_pdf = {
            "edges": edges.tolist(),
            "a": _pdf(rtt_a, edges),
            "b": _pdf(rtt_b, edges),
        }
    else:
        delay_pdf = {"edges": [], "a": [], "b": []}

    def rel(metric: str) -> float:
        va = stats["a"][metric]["p50"]
        vb = stats["b"][metric]["p50"]
        return abs(va - vb) / max(abs(vb), 1e-9)

    report = {
        "a": {"path": str(path_a), **stats["a"]},
        "b": {"path": str(path_b), **stats["b"]},
        "rel_diff_vs_b": {
            "throughput_median": rel("throughput_mbps"),
            "delay_median": rel("delay_ms"),
        },
        "delay_pdf": delay_pdf,
    }
    _json_dump(report, Path(args.out) if args.out else None)
    print(
        "medians a vs b: "
        f"throughput {stats['a']['throughput_mbps']['p50']:.3f} / "
        f"{stats['b']['throughput_mbps']['p50']:.3f} Mbps "
        f"(rel {report['rel_diff_vs_b']['throughput_median']:.3f}), "
        f"delay {stats['a']['delay_ms']['p50']:.3f} / "
        f"{stats['b']['delay_ms']['p50']:.3f} ms "
        f"(rel {report['rel_diff_vs_b']['delay_median']:.3f})",
        file=sys.stderr,
    )
    return 0


def _compare_distribution(args) -> int:
    with open(args.model, "rb") as fh:
        model = load_model(fh)
    if model.total_transitions == 0:
        raise CliError("model has no transitions; nothing to compare against")
    with open(args.result, "r", encoding="utf-8") as fh:
        parsed = read_epoch_csv(fh)
    raw = [EpochRecord(r.t_ms, r.delay_ms, r.window_pkts) for r in parsed]
    if len(raw) < 2:
        raise CliError(f"epoch log {args.result} has fewer than 2 records")
    derived = derive_states(raw, model.cfg)
    empirical = markov.empirical_distribution(derived, model.cfg, discard=args.discard)

    P = _chain_from_model(model, args)
    try:
        pi = markov.stationary(P)
    except markov.ConvergenceError as exc:
        raise CliError(f"{exc} (hint: pass --lazy)") from None

    report = {
        "model": str(args.model),
        "result": str(args.result),
        "discard": args.discard,
        "empty_rows_policy": args.empty_rows,
        "smoothing": args.smoothing,
        "lazy": bool(args.lazy),
        "epochs_used": len(derived) - 1 - args.discard,
        "kl_empirical_vs_stationary": markov.kl_divergence(empirical, pi),
        "max_abs_diff": markov.max_abs_diff(empirical, pi),
    }
    _json_dump(report, Path(args.out) if args.out else None)
    print(
        f"KL(empirical || stationary) = {report['kl_empirical_vs_stationary']:.4f}, "
        f"max state gap = {report['max_abs_diff']:.4f}",
        file=sys.stderr,
    )
    return 0


def cmd_compare(args) -> int:
    if args.a is not None and args.b is not None:
        return _compare_results(args)
    if args.model is not None and args.result is not None:
        return _compare_distribution(args)
    raise CliError("compare needs either --a and --b, or --model and --result")


def cmd_fingerprint(args) -> int:
    with open(args.model, "rb") as fh:
        model = load_model(fh)
    if model.total_transitions == 0:
        print(
            "warning: model has no transitions; rendering an empty fingerprint",
            file=sys.stderr,
        )
    cfg = model.cfg
    n = cfg.n_states
    quad = model.quadrant_rows.reshape(n, n)
    out = Path(args.out)
    csv_path = out.with_suffix(".csv")
    csv_buf, svg_buf = io.StringIO(), io.StringIO()
    heatmap_export(quad, cfg, csv_buf, svg_buf, title=args.title)
    out.write_text(svg_buf.getvalue(), encoding="utf-8")
    csv_path.write_text(csv_buf.getvalue(), encoding="utf-8")
    print(f"wrote {out} and {csv_path}")
    return 0


def _add_link_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--duration", type=float, default=60.0, help="run length, seconds")
    p.add_argument("--prop-ms", type=int, default=10, help="one-way propagation, ms")
    p.add_argument(
        "--queue", type=int, default=0, help="queue capacity in packets, 0 = unbounded"
    )
    p.add_argument("--loss", type=float, default=0.0, help="random loss rate in [0, 1)")
    p.add_argument("--mtu", type=int, default=1500, help="packet size, bytes")
    p.add_argument("--seed", type=int, default=1, help="master seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdi",
        description=(
            "Train Markov transition models from congestion-controller runs, "
            "execute them as controllers, and analyze their convergence."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-trace", help="generate a synthetic capacity trace")
    p.add_argument("--duration", type=float, default=60.0, help="trace length, seconds")
    p.add_argument(
        "--segment", type=float, default=5.0, help="seconds between rate redraws"
    )
    p.add_argument("--rate-min", type=float, default=4.0, help="Mbps lower bound")
    p.add_argument("--rate-max", type=float, default=25.0, help="Mbps upper bound")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--mtu", type=int, default=1500, help="packet size, bytes")
    p.add_argument("--out", required=True, help="output trace path")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("train", help="train a transition model from controller runs")
    p.add_argument("--traces", required=True, help="directory of *.trace files")
    p.add_argument(
        "--controller",
        default="verus-like",
        choices=sorted(BASELINES),
        help="baseline controller to run",
    )
    p.add_argument("--runs", type=int, default=1, help="runs per trace")
    p.add_argument("--epoch-ms", type=int, default=None, help="override epoch length")
    p.add_argument("--n-d", type=int, default=11, help="delay buckets")
    p.add_argument("--n-w", type=int, default=21, help="window buckets")
    _add_link_args(p)
    p.add_argument("--out", required=True, help="output model path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="run a controller over one trace")
    p.add_argument("--trace", required=True, help="trace file")
    p.add_argument(
        "--controller",
        default="mdi",
        choices=sorted(BASELINES) + ["mdi"],
    )
    p.add_argument("--model", default=None, help="trained model (required for mdi)")
    p.add_argument("--epoch-ms", type=int, default=None, help="override epoch length")
    p.add_argument("--c1", type=float, default=1.25, help="below-range window gain")
    p.add_argument("--c2", type=float, default=0.8, help="above-range window cut")
    p.add_argument("--w-init", type=float, default=2.0, help="initial window, packets")
    _add_link_args(p)
    p.add_argument("--out", required=True, help="epoch CSV path (packet CSV sits beside)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="stationary distribution and mixing times")
    p.add_argument("--model", required=True)
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument(
        "--empty-rows",
        choices=["self-loop", "uniform"],
        default="uniform",
        help="policy for states with no observed outgoing transitions",
    )
    p.add_argument("--lazy", action="store_true", help="analyze (P + I) / 2 instead")
    p.add_argument(
        "--epsilons", default="1e-3,1e-5,1e-7", help="comma-separated thresholds"
    )
    p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser(
        "compare",
        help="compare two run CSVs, or a model's stationary vs an observed run",
    )
    p.add_argument("--a", default=None, help="epoch CSV of run A")
    p.add_argument("--b", default=None, help="epoch CSV of run B (reference)")
    p.add_argument("--model", default=None, help="model for distribution mode")
    p.add_argument("--result", default=None, help="epoch CSV for distribution mode")
    p.add_argument("--discard", type=int, default=0, help="burn-in epochs to drop")
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument(
        "--empty-rows", choices=["self-loop", "uniform"], default="uniform"
    )
    p.add_argument("--lazy", action="store_true")
    p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fingerprint", help="export quadrant heatmap (SVG + CSV)")
    p.add_argument("--model", required=True)
    p.add_argument("--title", default="", help="SVG title text")
    p.add_argument("--out", required=True, help="SVG path; CSV written alongside")
    p.set_defaults(func=cmd_fingerprint)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
