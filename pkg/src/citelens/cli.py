"""Command-line entry point: ``citelens {ingest,stats,cascade,bias,simulate}``.

Every run writes into a fresh output directory together with a
``manifest.json``. Outputs are staged in a temporary sibling directory and
renamed into place, so a failed run leaves nothing behind.

Exit codes: 0 success, 1 usage error, 2 data or analysis error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import shlex
import shutil
import sys
import tempfile
import warnings
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, bias, temporal
from .cascade import CascadeTable, CascadeWindows, compute_all
from .corpus import POLICIES, CitationGraph, cohort, format_month, ingest_files, parse_month, write_citations, write_documents
from .errors import CitelensError
from .synth import GeneratorConfig, generate_with_halo

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
CASCADE_HEADER = ("doc_id", "t1", "R", "IC", "E_C", "D_total", "D_mean", "I")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- formatting -------------------------------------------------------------


def fmt_number(v) -> str:
    """Shortest round-trip text for a number; NaN/None become an empty field."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if math.isnan(f):
        return ""
    if f.is_integer() and abs(f) < 1e16:
        return str(int(f))
    return repr(f)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return None if not math.isfinite(f) else f
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt_number(v) for v in row])
    return buf.getvalue()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _slug(label: str) -> str:
    keep = "".join(c if c.isalnum() or c in "-_." else "_" for c in label)
    return keep.strip("_") or "all"


class Output:
    """Files staged for one run, written atomically by :func:`_commit`."""

    def __init__(self, fmt: str):
        self.fmt = fmt
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        if name in self.files:
            raise ValueError(f"duplicate output file {name}")
        self.files[name] = text

    def table(self, stem: str, header: Sequence[str], rows: list) -> None:
        if self.fmt == "json":
            records = [
                {h: (v if isinstance(v, str) else _jsonable(v)) for h, v in zip(header, row)} for row in rows
            ]
            self.add(stem + ".json", dump_json(records))
        else:
            self.add(stem + ".csv", csv_text(header, rows))

    def series(self, stem: str, s: temporal.BinnedSeries, extra: dict | None = None) -> None:
        rows = list(zip(s.bin_lo, s.bin_hi, s.values))
        self.table(stem, ("bin_lo", "bin_hi", "value"), rows)
        side = {"normalization": s.normalization, "meta": s.meta, "n_bins": len(s)}
        if extra:
            side.update(extra)
        self.add(stem + ".meta.json", dump_json(side))


# -- shared options -----------------------------------------------------------


def _month_arg(text: str) -> int:
    try:
        return parse_month(text, allow_index=True)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _output_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", required=True, type=Path, help="output directory (must not exist unless --force)")
    p.add_argument("--force", action="store_true", help="replace an existing output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    return p


def _input_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--input", type=Path, help="directory holding documents.csv and citations.csv")
    p.add_argument("--documents", type=Path)
    p.add_argument("--citations", type=Path)
    p.add_argument("--on-anomaly", choices=POLICIES, default="drop")
    p.add_argument(
        "--horizon", type=_month_arg, help="exclusive end of observation (YYYY-MM or month index)"
    )
    return p


def _window_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--latency-months", type=_positive_int, default=24)
    p.add_argument("--exposure-months", type=_positive_int, default=12)
    p.add_argument("--infection-months", type=_positive_int, default=24)
    p.add_argument("--distinct-exposures", action="store_true", help="count distinct exposing documents")
    p.add_argument("--cohort-kind")
    p.add_argument("--cohort-start", type=_month_arg)
    p.add_argument("--cohort-stop", type=_month_arg, help="exclusive")
    return p


def _input_paths(args) -> tuple[Path, Path]:
    docs = args.documents or (args.input / "documents.csv" if args.input else None)
    cits = args.citations or (args.input / "citations.csv" if args.input else None)
    if docs is None or cits is None:
        raise UsageError("need --input DIR or both --documents and --citations")
    return docs, cits


def _load(args) -> CitationGraph:
    docs, cits = _input_paths(args)
    return ingest_files(docs, cits, policy=args.on_anomaly, horizon=args.horizon)


def _windows(args) -> CascadeWindows:
    try:
        return CascadeWindows(args.latency_months, args.exposure_months, args.infection_months)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _cohort(args):
    if args.cohort_kind is None and args.cohort_start is None and args.cohort_stop is None:
        return None
    return cohort(args.cohort_kind, args.cohort_start, args.cohort_stop)


# -- subcommands --------------------------------------------------------------


def cmd_ingest(args, out: Output) -> dict:
    g = _load(args)
    d, c = io.StringIO(), io.StringIO()
    write_documents(g, d)
    write_citations(g, c)
    out.add("documents.csv", d.getvalue())
    out.add("citations.csv", c.getvalue())
    report = g.report.to_dict() if g.report is not None else {}
    report.update(
        n_documents=g.n_documents,
        n_edges=g.n_edges,
        anomaly_count=g.anomaly_count,
        horizon=format_month(g.horizon),
        policy=args.on_anomaly,
    )
    out.add("ingest_report.json", dump_json(report))
    return {}


def cmd_stats(args, out: Output) -> dict:
    g = _load(args)
    flt = _cohort(args)
    nodes, edges = temporal.activity_series(g, args.bin_months)
    out.series("activity_documents", nodes)
    out.series("activity_citations", edges)

    counts = temporal.citation_count_distribution(g, flt, args.normalization)
    out.series("citation_counts", counts)
    logged = temporal.rebin_log2(counts, density=True)
    fit = None
    try:
        tf = temporal.fit_tail(logged, tuple(args.fit_range) if args.fit_range else None)
        fit = {"exponent": tf.exponent, "intercept": tf.intercept, "fit_range": tf.fit_range,
               "r_squared": tf.r_squared, "n_points": tf.n_points}
    except CitelensError as exc:
        fit = {"error": str(exc)}
    out.series("citation_counts_log2", logged, {"fit": fit})

    out.series("citations_vs_references", temporal.citations_vs_references(g))
    out.series("time_to_first_citation", temporal.time_to_first_citation(g, flt, args.normalization))
    age, since = temporal.last_citation_stats(g, args.end_month)
    out.series("age_at_last_citation", age)
    out.series("time_since_last_citation", since)
    for month in args.cohort_month or []:
        curve = temporal.citation_age_curve(g, month, normalize=args.normalize_age, max_age=args.max_age)
        out.series(f"citation_age_{format_month(month)}", curve)
    return {}


def _cascade_rows(table: CascadeTable) -> list:
    return [
        (r.doc, format_month(r.t1), r.R, r.IC, r.E_C, r.D_total, r.D_mean, r.I) for r in table.rows()
    ]


def cmd_cascade(args, out: Output) -> dict:
    g = _load(args)
    table = compute_all(
        g, _windows(args), _cohort(args), distinct_exposures=args.distinct_exposures, threads=args.threads
    )
    out.table("cascade", CASCADE_HEADER, _cascade_rows(table))
    out.add(
        "cascade.meta.json",
        dump_json({"rows": len(table), "censored": table.censored, "horizon": format_month(table.meta["horizon"])}),
    )
    return {}


def _class_spec(text: str | None, default):
    """Parse ``VAR:b1,b2,...`` into a ClassSpec."""
    if text is None:
        return default
    var, _, bounds = text.partition(":")
    try:
        return bias.ClassSpec(var.strip(), tuple(_float_list(bounds)))
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(f"bad class spec {text!r}: {exc}") from None


def _curve_rows(c: bias.ResponseCurve) -> list:
    return list(zip(c.x_bins, c.x_lo, c.x_hi, c.mean_y, c.n_per_bin, c.sem_y))


def _write_curves(out: Output, prefix: str, curves: list[bias.ResponseCurve]) -> list[dict]:
    index = []
    for c in curves:
        stem = f"{prefix}_{_slug(c.class_label or 'all')}"
        header = ("x_bin", f"{c.x_variable}_lo", f"{c.x_variable}_hi", f"mean_{c.y_variable}", "n", "sem")
        out.table(stem, header, _curve_rows(c))
        index.append({"file": stem, "class": c.class_label, "x": c.x_variable, "y": c.y_variable,
                      "x_scheme": c.x_scheme})
    return index


def cmd_bias(args, out: Output) -> dict:
    g = _load(args)
    flt = _cohort(args)
    stats: dict = {"analysis": args.analysis, "units": "nats", "binning": args.scheme}
    if args.analysis == "novelty":
        rows = bias.novelty_curve(
            g, args.latencies, args.exposure_months, args.infection_months, flt, threads=args.threads
        )
        out.table("novelty", ("latency_months", "median_infection_rate", "n"), rows)
        stats["latencies"] = args.latencies
    else:
        table = compute_all(g, _windows(args), flt, distinct_exposures=args.distinct_exposures, threads=args.threads)
        stats.update(rows=len(table), censored=table.censored)
        if args.analysis == "visibility":
            stats["visibility"] = bias.visibility_stats(table).to_dict()
            curves = bias.exposure_response(table, "E_C", _class_spec(args.classes, None))
            stats["curves"] = _write_curves(out, "exposure_response", curves)
        elif args.analysis == "popularity":
            res = bias.popularity_analysis(
                table, _class_spec(args.classes, bias.DEFAULT_IC_CLASSES), args.scheme, args.miller_madow
            )
            stats.update(mi=res.mi_row, excluded_ic0=res.excluded)
            stats["curves"] = _write_curves(out, "popularity", res.curves)
        elif args.analysis == "halo":
            res = bias.halo_analysis(
                table, _class_spec(args.classes, None), args.min_n, args.z, x_scheme=args.x_scheme
            )
            stats.update(trends=res.trends, top_class=res.top_class, excluded_ic0=res.excluded,
                         class_boundaries=res.class_spec.boundaries)
            stats["curves"] = _write_curves(out, "halo", res.curves)
        elif args.analysis == "divided":
            res = bias.divided_attention_analysis(
                table,
                _class_spec(args.classes, bias.DEFAULT_DISTRACTION_CLASSES),
                _class_spec(args.quality_classes, bias.DEFAULT_QUALITY_CLASSES),
                args.scheme,
                args.miller_madow,
            )
            stats.update(mi=res.mi_row, excluded_ic0=res.excluded)
            stats["curves"] = _write_curves(out, "distraction", res.curves_by_distraction)
            stats["curves"] += _write_curves(out, "quality", res.curves_by_quality)
    out.add("stats.json", dump_json(stats))
    return {}


def read_config(path: Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment, quotes are stripped."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{path}:{n}: expected key = value")
            values[key.strip()] = value.strip().strip("\"'")
    return values


def _sim_config(args) -> GeneratorConfig:
    values = read_config(args.config) if args.config else {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        values[key.strip()] = value.strip()
    if args.seed is not None:
        values["seed"] = str(args.seed)
    try:
        return GeneratorConfig.from_mapping(values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad generator config: {exc}") from None


def cmd_simulate(args, out: Output) -> dict:
    config = _sim_config(args)
    if args.halo_weight < 0:
        raise UsageError("--halo-weight must be nonnegative")
    g = generate_with_halo(config, args.halo_weight, threads=args.threads)
    d, c = io.StringIO(), io.StringIO()
    write_documents(g, d)
    write_citations(g, c)
    out.add("documents.csv", d.getvalue())
    out.add("citations.csv", c.getvalue())
    out.add("config.json", dump_json(dict(config.to_dict(), halo_weight=args.halo_weight)))
    return {"seed": config.seed, "config": dict(config.to_dict(), halo_weight=args.halo_weight)}


# -- parser and driver --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="citelens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"citelens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    outp, inp, win = _output_parent(), _input_parent(), _window_parent()

    p = sub.add_parser("ingest", parents=[inp, outp], help="validate and export the canonical CSV pair")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", parents=[inp, outp], help="descriptive temporal statistics")
    p.add_argument("--bin-months", type=_positive_int, default=1)
    p.add_argument("--normalization", choices=("raw_count", "probability"), default="raw_count")
    p.add_argument("--fit-range", type=_float_list, help="lo,hi citation counts for the tail fit")
    p.add_argument("--cohort-month", type=_month_arg, action="append", help="repeatable")
    p.add_argument("--normalize-age", action="store_true")
    p.add_argument("--max-age", type=int)
    p.add_argument("--end-month", type=_month_arg, help="reference month for time since last citation")
    p.add_argument("--cohort-kind")
    p.add_argument("--cohort-start", type=_month_arg)
    p.add_argument("--cohort-stop", type=_month_arg)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("cascade", parents=[inp, win, outp], help="per-document cascade counts")
    p.set_defaults(func=cmd_cascade)

    p = sub.add_parser("bias", parents=[inp, win, outp], help="bias analyses over cascade counts")
    p.add_argument(
        "--analysis", required=True, choices=("visibility", "novelty", "popularity", "halo", "divided")
    )
    p.add_argument("--latencies", type=_int_list, default=[12, 24, 36, 48, 60])
    p.add_argument("--classes", help="class spec VAR:b1,b2,... (e.g. IC:1,3,11)")
    p.add_argument("--quality-classes", help="quality class spec for --analysis divided")
    p.add_argument("--scheme", choices=("log2_bins", "identity"), default="log2_bins")
    p.add_argument("--x-scheme", choices=("log2_bins", "identity"), default="log2_bins",
                   help="binning of the IC axis for --analysis halo")
    p.add_argument("--miller-madow", action="store_true")
    p.add_argument("--min-n", type=_positive_int, default=20)
    p.add_argument("--z", type=float, default=3.0)
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("simulate", parents=[outp], help="generate a synthetic citation graph")
    p.add_argument("--config", type=Path, help="flat key = value generator config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config value")
    p.add_argument("--seed", type=int)
    p.add_argument("--halo-weight", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)
    return parser


def _config_hash(args) -> str:
    skip = {"out", "force", "threads", "func"}
    items = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}
    return hashlib.sha256(dump_json(items).encode()).hexdigest()


def _commit(files: dict[str, str], manifest: dict, dest: Path, force: bool) -> None:
    dest = dest.resolve()
    dest.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{dest.name}.", dir=dest.parent))
    try:
        for name, text in sorted(files.items()):
            with open(tmp / name, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        manifest["finished"] = datetime.now(timezone.utc).isoformat()
        manifest["outputs"] = sorted(files)
        with open(tmp / "manifest.json", "w", encoding="utf-8") as fh:
            fh.write(dump_json(manifest))
        if dest.exists():
            if not force:
                raise UsageError(f"{dest} exists; use --force to replace it")
            old = Path(tempfile.mkdtemp(prefix=f".{dest.name}.old.", dir=dest.parent))
            os.replace(dest, old / "x")
            os.replace(tmp, dest)
            shutil.rmtree(old, ignore_errors=True)
        else:
            os.replace(tmp, dest)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.out.exists() and not args.force:
            raise UsageError(f"{args.out} exists; use --force to replace it")
        started = datetime.now(timezone.utc).isoformat()
        out = Output(args.format)
        inputs = {}
        if hasattr(args, "on_anomaly"):
            for path in _input_paths(args):
                inputs[str(path)] = _sha256(path)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            extra = args.func(args, out)
        notes = [str(w.message) for w in caught]
        for note in notes:
            print(f"citelens: warning: {note}", file=sys.stderr)
        manifest = {
            "command": shlex.join(["citelens", *argv]),
            "config_hash": _config_hash(args),
            "inputs": inputs,
            "version": __version__,
            "seed": extra.get("seed"),
            "started": started,
            "warnings": notes,
        }
        if "config" in extra:
            manifest["generator"] = extra["config"]
        _commit(out.files, manifest, args.out, args.force)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (CitelensError, OSError) as exc:
        print(f"citelens: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"citelens: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="citelens: %(levelname)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
