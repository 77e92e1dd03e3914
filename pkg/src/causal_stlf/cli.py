"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import dump_config, load_config
from .errors import DataError, NumericalError
from .evaluation import EvalReport, detect_ood_windows, evaluate_ood, run_regime_comparison
from .evaluation.ood import NO_WINDOWS, windows_to_csv
from .evaluation.regimes import weather_columns
from .mifilter import select_noncausal
from .panel import (add_calendar, ingest_load_csv, ingest_weather_csv, join_align,
                    parse_timestamp, read_holidays, read_panel, write_panel)
from .pcmci import autoregressive_lags, causal_feature_set, run_pcmci
from .scm import FIXTURES, ScmSpec, fixture_spec, simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dump(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _overrides(args) -> dict:
    out = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v
    for flag, key in (("seed", "run.seed"), ("target", "run.target"), ("workers", "run.workers")):
        v = getattr(args, flag, None)
        if v is not None:
            out[key] = str(v)
    for flag, key in (("models", "run.models"), ("regimes", "run.regimes")):
        v = getattr(args, flag, None)
        if v:
            out[key] = v
    return out


def _config(args):
    return load_config(getattr(args, "config", None), _overrides(args))


def _weather_header(path) -> list:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise DataError(f"{path}: empty file")
    return [h.strip() for h in header if h.strip() != "timestamp"]


def cmd_ingest(args) -> int:
    load = ingest_load_csv(args.load, args.region, consumer_type=args.consumer_type)
    panel = load
    if args.weather:
        variables = args.variables.split(",") if args.variables else _weather_header(args.weather)
        panel = join_align(load, ingest_weather_csv(args.weather, args.region, variables))
    holidays = read_holidays(args.holidays) if args.holidays else ()
    if not args.no_calendar:
        panel = add_calendar(panel, holidays)
    out, meta = write_panel(panel, Path(args.out))
    print(f"wrote {out} ({len(panel)} rows, {len(panel.columns)} columns) and {meta}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if bool(args.fixture) == bool(args.spec):
        raise UsageError("give exactly one of --fixture or --spec")
    spec = fixture_spec(args.fixture) if args.fixture else ScmSpec.load(args.spec)
    region = args.fixture or Path(args.spec).stem
    panel = simulate(spec, args.T, args.seed, region=region)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_panel(panel, out)
    spec_path = out.with_name(out.stem + ".spec.json")
    spec.dump(spec_path)
    print(f"wrote {out} ({len(panel)} rows) and {spec_path}")
    return EXIT_OK


def cmd_select(args) -> int:
    cfg = _config(args)
    panel = read_panel(args.panel)
    target = cfg.run.target
    if target not in panel.columns:
        raise DataError(f"target {target!r} not in panel columns {list(panel.columns)}")
    candidates = (args.candidates.split(",") if args.candidates
                  else list(cfg.run.weather) if cfg.run.weather
                  else weather_columns(panel, target))
    out = Path(args.out)
    if args.method == "mi":
        sel = select_noncausal(panel, target, candidates, cfg.mifilter)
        _dump(out, sel.to_json())
        kept = list(sel.kept)
    else:
        graph = run_pcmci(panel, cfg.pcmci, variables=[target] + candidates)
        kept = sorted(causal_feature_set(graph, target))
        graph_path = out.with_name(out.stem + ".graph.json")
        _dump(graph_path, graph.to_json())
        _dump(out, _json({
            "method": "pcmci",
            "target": target,
            "kept": kept,
            "autoregressive_lags": autoregressive_lags(graph, target),
            "config": cfg.to_dict()["pcmci"],
            "graph": graph_path.name,
        }))
    print(f"{args.method}: kept {kept}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    panels = [read_panel(p) for p in args.panel]
    report = run_regime_comparison(panels, cfg.run.models, cfg.run.regimes, cfg.eval_config())
    out = Path(args.out)
    _dump(out / "report.json", report.to_json())
    _dump(out / "report.csv", report.to_csv())
    print(format_report(report))
    return EXIT_OK


def _train_end(panel, args) -> int:
    if args.train_end:
        ts = parse_timestamp(args.train_end)
        row = int(np.searchsorted(panel.timestamps, ts))
    else:
        row = int(round(args.train_frac * len(panel)))
    if not 0 < row < len(panel):
        raise DataError("training range must leave both training and held-out rows")
    return row


def cmd_ood(args) -> int:
    cfg = _config(args)
    panel = read_panel(args.panel)
    end = _train_end(panel, args)
    windows = detect_ood_windows(panel, end, cfg.ood)
    out = Path(args.out)
    _dump(out / "ood_windows.csv", windows_to_csv(windows))
    if args.evaluate:
        section = evaluate_ood(panel, windows, end, cfg.run.models, cfg.run.regimes, cfg.eval_config())
    else:
        section = {"status": "ok" if windows else NO_WINDOWS,
                   "windows": [{"start": str(w.start) + "Z", "end": str(w.end) + "Z",
                                "trigger": w.trigger, "exceed_fraction": w.exceed_fraction}
                               for w in windows]}
    section["train_end"] = str(panel.timestamps[end]) + "Z"
    section["region"] = panel.region
    _dump(out / "ood_report.json", json.dumps(section, indent=2, sort_keys=True) + "\n")
    print(NO_WINDOWS if not windows else f"{len(windows)} OOD window(s)")
    return EXIT_OK


def format_report(report: EvalReport) -> str:
    """Table with one row per (model, regime): per-city MAE/MAPE then top counts."""
    means = {(r["city"], r["model"], r["regime"]): r for r in report.city_means}
    counts = report.top_counts
    head = ["model", "regime"] + [f"{c}:{m}" for c in report.cities for m in ("MAE", "MAPE")]
    head += ["top_MAE", "top_MAPE"]
    rows = [head]
    for m in report.models:
        for r in report.regimes:
            row = [m, r]
            for c in report.cities:
                cell = means.get((c, m, r), {})
                row += [_fmt(cell.get("mae")), _fmt(cell.get("mape"))]
            row += [str(counts[m][r]["mae"]), str(counts[m][r]["mape"])]
            rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in rows)


def _fmt(v):
    return "-" if v is None else f"{v:.3f}"


def cmd_report(args) -> int:
    reports = [EvalReport.from_dict(json.loads(Path(p).read_text())) for p in args.reports]
    merged = reports[0]
    for other in reports[1:]:
        if other.models != merged.models or other.regimes != merged.regimes:
            raise DataError("reports disagree on models or regimes")
        dup = set(merged.cities) & set(other.cities)
        if dup:
            raise DataError(f"cities present in more than one report: {sorted(dup)}")
        merged = EvalReport(merged.config, merged.models, merged.regimes,
                            sorted(merged.cities + other.cities),
                            sorted(merged.cells + other.cells,
                                   key=lambda c: (c["city"], c["model"], c["regime"], c["fold"])),
                            merged.selections + other.selections,
                            {**merged.folds, **other.folds})
    if args.out:
        _dump(Path(args.out), merged.to_json())
    print(format_report(merged))
    return EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(dump_config(_config(args)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="causal-stlf", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", help="INI config file (default: $CAUSAL_STLF_CONFIG)")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--target")

    sp = sub.add_parser("ingest", help="build a panel from load and weather CSVs")
    sp.add_argument("--load", required=True)
    sp.add_argument("--weather")
    sp.add_argument("--region", required=True)
    sp.add_argument("--variables", help="comma-separated weather columns (default: all)")
    sp.add_argument("--holidays", help="file with one ISO date per line")
    sp.add_argument("--consumer-type")
    sp.add_argument("--no-calendar", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("synth", help="simulate a synthetic panel from a causal model")
    sp.add_argument("--fixture", choices=sorted(FIXTURES))
    sp.add_argument("--spec", help="model JSON")
    sp.add_argument("--T", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("select", help="causal (PCMCI) or MI-filter feature selection")
    sp.add_argument("--panel", required=True)
    sp.add_argument("--method", choices=("causal", "mi"), required=True)
    sp.add_argument("--candidates", help="comma-separated candidate columns")
    sp.add_argument("--out", required=True)
    with_config(sp)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("evaluate", help="rolling-origin regime comparison")
    sp.add_argument("--panel", required=True, nargs="+")
    sp.add_argument("--models", help="comma-separated: seasonal_naive,ridge,gru")
    sp.add_argument("--regimes", help="comma-separated subset of F0,F1,F2,F3")
    sp.add_argument("--workers", type=int, help="parallel fold jobs (default: processors)")
    sp.add_argument("--out", required=True, help="output directory")
    with_config(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("ood", help="detect extreme-weather windows (and optionally evaluate)")
    sp.add_argument("--panel", required=True)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--train-end", help="first held-out timestamp")
    g.add_argument("--train-frac", type=float, default=0.8)
    sp.add_argument("--evaluate", action="store_true", help="train models and score the windows")
    sp.add_argument("--models")
    sp.add_argument("--regimes")
    sp.add_argument("--out", required=True, help="output directory")
    with_config(sp)
    sp.set_defaults(func=cmd_ood)

    sp = sub.add_parser("report", help="merge and pretty-print report JSON files")
    sp.add_argument("reports", nargs="+")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("config", help="print the effective configuration")
    with_config(sp)
    sp.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"causal-stlf: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, KeyError) as exc:
        print(f"causal-stlf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"causal-stlf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"causal-stlf: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
