"""Input loading, per-series analysis and the combined report document."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .config import AnalysisConfig
from .errors import AnalysisError, EmptyInput, EmptySelection
from .forecast import rolling_evaluate
from .gof import poisson_test, qq_exponential
from .ingest import PCAP_MAGIC, FlowList, assemble_flows, parse_flow_log, parse_pcap
from .lrd import hurst_all
from .process import Resolution, build_rate_series, default_span, inter_arrivals, resolutions_for
from .stats import dispersion_hint, summarize
from .tails import classify_tail, fit_gpd

SCHEMA_VERSION = 1
log = logging.getLogger(__name__)


@dataclass
class SeriesInput:
    """One attack process to analyse: counts (or values) plus, when known, its arrivals."""

    id: str
    values: np.ndarray
    resolution: Optional[Resolution] = None
    bucket: Optional[float] = None
    origin: Optional[float] = None
    gaps: Optional[np.ndarray] = None
    gap_error: Optional[str] = None


@dataclass
class Source:
    kind: str  # "pcap", "flows" or "series"
    flows: Optional[FlowList] = None
    series: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# loading


def _is_pcap(head: bytes) -> bool:
    if len(head) < 4:
        return False
    return int.from_bytes(head[:4], "little") == PCAP_MAGIC or int.from_bytes(head[:4], "big") == PCAP_MAGIC


def read_flows(path: str, cfg: AnalysisConfig) -> tuple[FlowList, str, dict]:
    """Flows from a pcap capture (assembled per ``cfg``) or an NDJSON flow log."""
    with open(path, "rb") as fh:
        data = fh.read()
    if _is_pcap(data[:4]):
        packets = parse_pcap(data)
        flows = assemble_flows(packets, cfg.assembly.build())
        meta = {"packets": len(packets), "packets_skipped": packets.skipped,
                "records_truncated": packets.truncated, "packets_unassigned": flows.skipped}
        return flows, "pcap", meta
    flows = parse_flow_log(data.decode("utf-8").splitlines())
    for line in flows.diagnostics:
        log.warning("flow log %s", line)
    return flows, "flows", {"lines_skipped": flows.skipped}


def series_from_flows(flows: FlowList, cfg: AnalysisConfig) -> list[SeriesInput]:
    """Rate series and inter-arrival gaps for every configured resolution present."""
    if not flows:
        raise EmptySelection("no flows in input")
    span = default_span(flows, cfg.bucket)
    out = []
    for res in resolutions_for(flows, cfg.resolutions):
        rs = build_rate_series(flows, res, cfg.bucket, span)
        item = SeriesInput(res.id, rs.counts.astype(float), res, rs.bucket, rs.origin)
        try:
            item.gaps = inter_arrivals(flows, res).gaps
        except AnalysisError as exc:
            item.gap_error = _err(exc)
        out.append(item)
    return out


def parse_series_csv(text: str) -> list[SeriesInput]:
    """Series from CSV: long form with a ``resolution`` column, or a single
    ``count``/``value`` column."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise EmptyInput("series CSV has no rows")
    cols = rows[0].keys()
    col = "count" if "count" in cols else "value" if "value" in cols else None
    if col is None:
        raise ValueError("series CSV needs a 'count' or 'value' column")
    groups: dict = {}
    for r in rows:
        groups.setdefault(r.get("resolution") or "series", []).append(r)
    out = []
    for sid in sorted(groups):
        rs = groups[sid]
        values = np.array([float(r[col]) for r in rs])
        res = Resolution.parse(sid) if sid != "series" else None
        origin = bucket = None
        if "timestamp" in cols:
            ts = [float(r["timestamp"]) for r in rs]
            origin = ts[0]
            bucket = ts[1] - ts[0] if len(ts) > 1 else None
        out.append(SeriesInput(sid, values, res, bucket, origin))
    return out


def load_source(path: str, cfg: AnalysisConfig) -> Source:
    with open(path, "rb") as fh:
        head = fh.read(4)
    if _is_pcap(head) or not path.lower().endswith((".csv", ".txt")):
        try:
            flows, kind, meta = read_flows(path, cfg)
        except UnicodeDecodeError as exc:
            raise ValueError(f"{path}: neither a pcap capture nor a text flow log") from exc
        meta["flows"] = len(flows)
        return Source(kind, flows, series_from_flows(flows, cfg), meta)
    with open(path) as fh:
        series = parse_series_csv(fh.read())
    return Source("series", None, series, {"series": len(series)})


# ---------------------------------------------------------------------------
# analysis


def _err(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def analyze_hurst(item: SeriesInput, cfg: AnalysisConfig) -> dict:
    return hurst_all(item.values, band=tuple(cfg.lrd.band)).to_dict()


def warn_small_ks(n: int, cfg: AnalysisConfig, sid: str) -> None:
    if cfg.gof.critical.get("ks") == 0.01 and n < 1000:
        log.warning("%s: KS critical value 0.01 with only %d gaps; the KS decision is "
                    "not meaningful at this sample size", sid, n)


def analyze_poisson(item: SeriesInput, cfg: AnalysisConfig) -> dict:
    if item.gaps is None:
        if item.gap_error:
            return {"error": item.gap_error}
        return {"error": "EmptyInput: arrival times unavailable for series input"}
    warn_small_ks(item.gaps.size, cfg, item.id)
    return poisson_test(item.gaps, cfg.gof.critical).to_dict()


def analyze_tails(item: SeriesInput, cfg: AnalysisConfig) -> dict:
    t = cfg.tails
    fit = fit_gpd(item.values, t.quantile, t.min_exceed, seed=cfg.seed)
    return {"fit": fit.to_dict(), "classification": classify_tail(fit, t.z).to_dict()}


def analyze_forecast(item: SeriesInput, cfg: AnalysisConfig, family: str):
    f = cfg.forecast
    return rolling_evaluate(item.values, family, f.h, f.p, f.grid, f.last_k, f.min_train, cfg.seed)


def analyze_series(item: SeriesInput, cfg: AnalysisConfig) -> dict:
    """Every configured analysis of one series; failures become error entries."""
    out: dict = {"id": item.id, "n": int(item.values.size),
                 "resolution": item.resolution.to_dict() if item.resolution else None}
    runs = {}
    wanted = cfg.analyses
    if "summary" in wanted:
        out["summary"] = _guard(lambda: summarize(item.values).to_dict())
        out["dispersion"] = _guard(lambda: dict(zip(("ratio", "overdispersed"), dispersion_hint(item.values))))
    if "hurst" in wanted:
        out["hurst"] = _guard(lambda: analyze_hurst(item, cfg))
    if "poisson" in wanted:
        out["poisson"] = _guard(lambda: analyze_poisson(item, cfg))
    if "tails" in wanted:
        out["tails"] = _guard(lambda: analyze_tails(item, cfg))
    if "forecast" in wanted:
        out["forecast"] = {}
        for fam in cfg.forecast.families:
            try:
                run = analyze_forecast(item, cfg, fam)
                runs[fam] = run.step_rows()
                out["forecast"][fam] = run.to_dict()
            except (AnalysisError, ValueError) as exc:
                out["forecast"][fam] = {"error": _err(exc)}
    out["_forecast_steps"] = runs
    return out


def _guard(fn):
    try:
        return fn()
    except (AnalysisError, ValueError) as exc:
        return {"error": _err(exc)}


def _analyze_job(args):
    item, cfg = args
    return analyze_series(item, cfg)


def analyze_all(items: list[SeriesInput], cfg: AnalysisConfig, jobs: int = 1) -> list[dict]:
    """Analyse series, in a bounded process pool when ``jobs > 1``; output order is by id."""
    items = sorted(items, key=lambda s: s.id)
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_analyze_job, [(it, cfg) for it in items]))
    return [analyze_series(it, cfg) for it in items]


# ---------------------------------------------------------------------------
# document


def build_report(source: Source, cfg: AnalysisConfig, jobs: int = 1) -> tuple[dict, dict]:
    """The report document and, separately, per-series plot data."""
    results = analyze_all(source.series, cfg, jobs)
    plot = {}
    for item, res in zip(sorted(source.series, key=lambda s: s.id), results):
        plot[item.id] = {"item": item, "result": res, "steps": res.pop("_forecast_steps")}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "attackproc", "version": __version__},
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "input": {"kind": source.kind, **source.meta},
        "series": results,
    }
    return doc, plot


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite(obj.item())
    return obj


def dumps(doc) -> str:
    """Canonical JSON: sorted keys, non-finite floats as strings, trailing newline."""
    return json.dumps(_finite(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def safe_name(sid: str) -> str:
    return "".join(c if c.isalnum() or c in "-." else "_" for c in sid)


def write_plot_data(plot: dict, directory: str) -> list[str]:
    """Tidy CSV files behind every figure: rates, regression points, QQ and forecast steps."""
    os.makedirs(directory, exist_ok=True)
    written = []

    def put(name, header, rows):
        path = os.path.join(directory, name)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        written.append(path)

    for sid in sorted(plot):
        entry = plot[sid]
        item, res = entry["item"], entry["result"]
        base = safe_name(sid)
        put(f"{base}_rates.csv", ["index", "value"], [[i, repr(float(v))] for i, v in enumerate(item.values)])
        hurst = res.get("hurst", {})
        if "methods" in hurst:
            rows = []
            for m, est in sorted(hurst["methods"].items()):
                for lx, ly in est.get("regression_points", []):
                    rows.append([m, repr(lx), repr(ly)])
            put(f"{base}_hurst.csv", ["method", "log_x", "log_y"], rows)
        if item.gaps is not None and item.gaps.size >= 2:
            qq = qq_exponential(item.gaps)
            put(f"{base}_qq.csv", ["theoretical", "empirical"],
                [[repr(float(a)), repr(float(b))] for a, b in zip(qq.theoretical, qq.empirical)])
        for fam, steps in sorted(entry["steps"].items()):
            put(f"{base}_forecast_{fam}.csv", ["t", "p", "q", "d", "Y", "X", "e"],
                [[s["t"], s["p"], s["q"], repr(s["d"]), repr(s["Y"]), repr(s["X"]), repr(s["e"])] for s in steps])
    return written
