"""Command-line interface: ``attackproc <command> [options] INPUT``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 when
the input data cannot be analysed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import CONFIG_ENV, AnalysisConfig, ConfigError, load_config
from .errors import AnalysisError
from .forecast import FAMILIES
from .ingest import FlowRecord, write_flow_log
from .process import RESOLUTION_KINDS, build_rate_series, default_span, resolutions_for
from .report import (
    analyze_forecast,
    analyze_hurst,
    analyze_poisson,
    analyze_tails,
    build_report,
    dumps,
    load_source,
    read_flows,
    write_plot_data,
)
from .gof import qq_exponential
from .synth import KINDS, GeneratorSpec, generate, make_rng

log = logging.getLogger("attackproc")

DEFAULT_FORMAT = {
    "flows": "ndjson", "rates": "csv", "hurst": "json", "poisson": "json",
    "tails": "json", "predict": "json", "report": "json", "simulate": "csv",
}
FORMATS = {
    "flows": ("ndjson", "json"), "rates": ("csv", "json"), "hurst": ("json", "csv"),
    "poisson": ("json", "csv"), "tails": ("json",), "predict": ("json", "csv"),
    "report": ("json",), "simulate": ("csv", "ndjson"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    p.add_argument("--seed", type=int, help="seed for every randomized step")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for per-series analysis")
    p.add_argument("--format", choices=("json", "csv", "ndjson"), help="output format")
    p.add_argument("-o", "--output", help="write to this file instead of stdout")


def _input(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="pcap capture, NDJSON flow log, or series CSV")
    p.add_argument("--bucket", type=float, help="bucket width in seconds")
    p.add_argument("--resolutions", help=f"comma list of {','.join(RESOLUTION_KINDS)}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="attackproc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("flows", help="assemble flows from a capture or normalize a flow log")
    _common(p)
    p.add_argument("input")
    p.add_argument("--timeout", type=float, help="flow idle timeout (s)")
    p.add_argument("--lifetime", type=float, help="maximum flow lifetime (s)")
    p.add_argument("--ports", help="comma list of production ports to keep")
    p.add_argument("--nets", help="comma list of honeypot networks (CIDR)")

    p = sub.add_parser("rates", help="attack-rate series per resolution")
    _common(p)
    _input(p)

    p = sub.add_parser("hurst", help="six Hurst estimates and LRD verdict")
    _common(p)
    _input(p)

    p = sub.add_parser("poisson", help="exponential goodness of fit of inter-arrival times")
    _common(p)
    _input(p)
    p.add_argument("--qq", help="also write QQ plot data (CSV) here")

    p = sub.add_parser("tails", help="GPD tail fit and heavy-tail classification")
    _common(p)
    _input(p)
    p.add_argument("--quantile", type=float, help="threshold quantile")

    p = sub.add_parser("predict", help="rolling FARIMA/ARMA forecast evaluation")
    _common(p)
    _input(p)
    p.add_argument("--family", choices=FAMILIES + ("both",), default=None)
    p.add_argument("--horizon", "-H", dest="h", type=int, help="steps ahead")
    p.add_argument("--start-fraction", "-p", dest="p", type=float, help="first training fraction")
    p.add_argument("--last-k", type=int, help="score only targets in the last K buckets")
    p.add_argument("--steps", help="also write per-step CSV here")

    p = sub.add_parser("report", help="every analysis for every resolution")
    _common(p)
    _input(p)
    p.add_argument("--plot-data", help="directory for tidy CSV plot data")
    p.add_argument("--figures", help="directory for PNG figures (needs matplotlib)")
    p.add_argument("--timing", action="store_true", help="add wall-clock timings (output no longer reproducible)")

    p = sub.add_parser("simulate", help="synthetic series (CSV) or attack flows (NDJSON)")
    _common(p)
    p.add_argument("--spec", help="GeneratorSpec JSON file; flags below are ignored when given")
    p.add_argument("--kind", choices=KINDS, default="FGN")
    p.add_argument("--n", type=int, default=1024)
    for name in ("H", "d", "phi", "lam", "xi", "beta", "shift-sigmas", "location-fraction", "slope"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--base-kind", choices=KINDS, help="base process for LEVEL_SHIFT and TREND")
    p.add_argument("--level", type=float, default=50.0, help="mean flows per bucket (NDJSON)")
    p.add_argument("--scale", type=float, default=10.0, help="flows per unit of the series (NDJSON)")
    p.add_argument("--victims", type=int, default=2)
    p.add_argument("--ports", default="445,22")
    p.add_argument("--start", type=float, default=0.0, help="timestamp of the first bucket")
    p.add_argument("--sim-bucket", type=float, default=3600.0, help="bucket width of the synthetic rates")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _config(args) -> AnalysisConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    if path and not os.path.exists(path):
        raise UsageError(f"config file {path} not found")
    cfg = load_config(path)
    changes = {"seed": args.seed}
    if getattr(args, "bucket", None) is not None:
        changes["bucket"] = args.bucket
    if getattr(args, "resolutions", None):
        changes["resolutions"] = [r.strip().upper() for r in args.resolutions.split(",") if r.strip()]
    return cfg.override(**changes)


def _format(args) -> str:
    fmt = args.format or DEFAULT_FORMAT[args.command]
    if fmt not in FORMATS[args.command]:
        raise UsageError(f"{args.command} does not support --format {fmt}")
    return fmt


def _emit(args, text: str) -> None:
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _r(v) -> str:
    return repr(float(v))


def _check_input(path: str) -> None:
    if not os.path.exists(path):
        raise UsageError(f"input {path} not found")


def _per_series(source, fn) -> tuple[dict, int]:
    out, failed = {}, 0
    for item in source.series:
        try:
            out[item.id] = fn(item)
        except (AnalysisError, ValueError) as exc:
            out[item.id] = {"error": f"{type(exc).__name__}: {exc}"}
        if "error" in out[item.id]:
            failed += 1
            log.error("%s: %s", item.id, out[item.id]["error"])
    return out, failed


def _status(failed: int, total: int) -> int:
    return 2 if total and failed == total else 0


# ---------------------------------------------------------------------------
# commands


def cmd_flows(args) -> int:
    _check_input(args.input)
    cfg = _config(args)
    a = {}
    if args.timeout is not None:
        a["assembly.flow_timeout"] = args.timeout
    if args.lifetime is not None:
        a["assembly.flow_lifetime"] = args.lifetime
    if args.ports:
        a["assembly.production_ports"] = [int(p) for p in args.ports.split(",")]
    if args.nets:
        a["assembly.honeypot_nets"] = [n.strip() for n in args.nets.split(",")]
    cfg = cfg.override(**a)
    flows, _, _ = read_flows(args.input, cfg)
    flows = sorted(flows, key=lambda f: (f.start, f.key, f.end))
    if _format(args) == "json":
        _emit(args, json.dumps([json.loads(f.to_json()) for f in flows], indent=2) + "\n")
    else:
        _emit(args, write_flow_log(flows))
    return 0


def cmd_rates(args) -> int:
    _check_input(args.input)
    cfg = _config(args)
    fmt = _format(args)
    flows, _, _ = read_flows(args.input, cfg)
    span = default_span(flows, cfg.bucket)
    series = [build_rate_series(flows, r, cfg.bucket, span) for r in resolutions_for(flows, cfg.resolutions)]
    if fmt == "json":
        _emit(args, dumps([s.to_dict() for s in series]))
        return 0
    rows = []
    for s in series:
        for i, (ts, c) in enumerate(zip(s.timestamps(), s.counts)):
            rows.append([s.resolution.id, i, _r(ts), int(c)])
    _emit(args, _csv(["resolution", "bucket_index", "timestamp", "count"], rows))
    return 0


def cmd_hurst(args) -> int:
    _check_input(args.input)
    cfg = _config(args)
    fmt = _format(args)
    source = load_source(args.input, cfg)
    out, failed = _per_series(source, lambda it: analyze_hurst(it, cfg))
    if fmt == "csv":
        rows = []
        for sid in sorted(out):
            for m, est in sorted(out[sid].get("methods", {}).items()):
                rows.extend([sid, m, _r(x), _r(y)] for x, y in est.get("regression_points", []))
        _emit(args, _csv(["resolution", "method", "log_x", "log_y"], rows))
    else:
        _emit(args, dumps(out))
    return _status(failed, len(out))


def cmd_poisson(args) -> int:
    _check_input(args.input)
    cfg = _config(args)
    fmt = _format(args)
    source = load_source(args.input, cfg)
    out, failed = _per_series(source, lambda it: analyze_poisson(it, cfg))
    qq_rows = []
    for item in source.series:
        if item.gaps is not None and item.gaps.size >= 2:
            qq = qq_exponential(item.gaps)
            qq_rows.extend([item.id, _r(a), _r(b)] for a, b in zip(qq.theoretical, qq.empirical))
    qq_text = _csv(["resolution", "theoretical", "empirical"], qq_rows)
    if args.qq:
        with open(args.qq, "w", newline="") as fh:
            fh.write(qq_text)
    _emit(args, qq_text if fmt == "csv" else dumps(out))
    return _status(failed, len(out))


def cmd_tails(args) -> int:
    _check_input(args.input)
    cfg = _config(args)
    if args.quantile is not None:
        cfg = cfg.override(**{"tails.quantile": args.quantile})
    _format(args)
    source = load_source(args.input, cfg)
    out, failed = _per_series(source, lambda it: analyze_tails(it, cfg))
    _emit(args, dumps(out))
    return _status(failed, len(out))


def cmd_predict(args) -> int:
    _check_input(args.input)
    cfg = _config(args)
    changes = {"forecast.h": args.h, "forecast.p": args.p, "forecast.last_k": args.last_k}
    if args.family:
        changes["forecast.families"] = list(FAMILIES) if args.family == "both" else [args.family]
    cfg = cfg.override(**changes)
    fmt = _format(args)
    source = load_source(args.input, cfg)
    out, rows, failed, total = {}, [], 0, 0
    for item in source.series:
        out[item.id] = {}
        for fam in cfg.forecast.families:
            total += 1
            try:
                run = analyze_forecast(item, cfg, fam)
            except (AnalysisError, ValueError) as exc:
                failed += 1
                out[item.id][fam] = {"error": f"{type(exc).__name__}: {exc}"}
                log.error("%s %s: %s", item.id, fam, exc)
                continue
            out[item.id][fam] = run.to_dict()
            rows.extend([item.id, fam, s["t"], s["p"], s["q"], _r(s["d"]), _r(s["Y"]), _r(s["X"]), _r(s["e"])]
                        for s in run.step_rows())
    steps = _csv(["resolution", "family", "t", "p", "q", "d", "Y", "X", "e"], rows)
    if args.steps:
        with open(args.steps, "w", newline="") as fh:
            fh.write(steps)
    _emit(args, steps if fmt == "csv" else dumps(out))
    return _status(failed, total)


def cmd_report(args) -> int:
    _check_input(args.input)
    cfg = _config(args)
    _format(args)
    t0 = time.perf_counter()
    source = load_source(args.input, cfg)
    doc, plot = build_report(source, cfg, max(1, args.jobs))
    if args.timing:
        doc["timing"] = {"seconds": time.perf_counter() - t0}
    _emit(args, dumps(doc))
    if args.plot_data:
        write_plot_data(plot, args.plot_data)
    if args.figures:
        from .plotting import render_figures

        render_figures(plot, args.figures)
    return 0


def _simulate_spec(args) -> GeneratorSpec:
    if args.spec:
        with open(args.spec) as fh:
            data = json.load(fh)
        if args.seed is not None:
            data["seed"] = args.seed
        return GeneratorSpec.from_dict(data)
    params = {}
    for name in ("H", "d", "phi", "lam", "xi", "beta", "shift_sigmas", "location_fraction", "slope"):
        v = getattr(args, name)
        if v is not None:
            params[name] = v
    seed = args.seed if args.seed is not None else 0
    base = None
    if args.kind in ("LEVEL_SHIFT", "TREND"):
        if not args.base_kind:
            raise UsageError(f"--kind {args.kind} needs --base-kind")
        base_params = {k: v for k, v in params.items() if k in ("H", "d", "phi")}
        base = GeneratorSpec(args.base_kind, args.n, seed, **base_params)
        params = {k: v for k, v in params.items() if k in ("shift_sigmas", "location_fraction", "slope")}
    return GeneratorSpec(args.kind, args.n, seed, base=base, **params)


def synthesize_flows(spec: GeneratorSpec, values: np.ndarray, level: float, scale: float,
                     victims: int, ports: Sequence[int], start: float, bucket: float) -> list[FlowRecord]:
    """Attack flows whose per-bucket counts follow ``level + scale * values``.

    POISSON_PROCESS values are arrival times and are used directly.  Victims
    and ports are assigned round-robin in arrival order; attackers and their
    source ports are drawn from a seeded generator.
    """
    rng = make_rng(spec.seed + 1)
    if spec.kind == "POISSON_PROCESS":
        times = start + np.asarray(values, dtype=float)
    else:
        counts = np.maximum(0, np.rint(level + scale * np.asarray(values, dtype=float))).astype(np.int64)
        idx = np.repeat(np.arange(counts.size), counts)
        times = start + bucket * (idx + rng.random(idx.size))
        times.sort()
    attackers = rng.integers(0, 1 << 16, times.size)
    sports = rng.integers(1024, 65536, times.size)
    out = []
    for i, ts in enumerate(times):
        a = int(attackers[i])
        out.append(FlowRecord(f"198.18.{a >> 8}.{a & 255}", int(sports[i]), f"10.0.0.{1 + i % victims}",
                              int(ports[i % len(ports)]), "TCP", float(ts), float(ts), 1, "FIN"))
    return out


def cmd_simulate(args) -> int:
    fmt = _format(args)
    try:
        spec = _simulate_spec(args)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    values = generate(spec)
    if fmt == "csv":
        _emit(args, _csv(["index", "value"], [[i, _r(v)] for i, v in enumerate(values)]))
        return 0
    if args.victims < 1:
        raise UsageError("--victims must be >= 1")
    ports = [int(p) for p in args.ports.split(",") if p.strip()]
    flows = synthesize_flows(spec, values, args.level, args.scale, args.victims, ports, args.start, args.sim_bucket)
    _emit(args, write_flow_log(flows))
    return 0


COMMANDS = {
    "flows": cmd_flows, "rates": cmd_rates, "hurst": cmd_hurst, "poisson": cmd_poisson,
    "tails": cmd_tails, "predict": cmd_predict, "report": cmd_report, "simulate": cmd_simulate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return int(exc.code or 0)
    if getattr(args, "jobs", 1) < 1:
        print("attackproc: error: --jobs must be >= 1", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"attackproc: error: {exc}", file=sys.stderr)
        return 1
    except (AnalysisError, ValueError, UnicodeDecodeError) as exc:
        print(f"attackproc: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # the reader went away (e.g. ``| head``); silence the flush at interpreter exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
