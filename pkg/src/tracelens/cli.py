"""Command-line pipeline: ingest -> analyze -> report, plus generate.

Standard output carries only result paths; diagnostics go to standard
error as `LEVEL message` lines. Exit codes: 0 success, 2 usage/validation,
3 I/O, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import cluster, distfit, ingest, kernels, synth
from .errors import ContractError, DegenerateDataError, FitError, SpecError
from .trace_model import RUNTIME_EVENTS

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

# Unit for the small-arrival annotation below; the threshold itself is a
# dimensionless report note, not an invariant.
_THRESHOLD_UNIT = "unspecified (threshold compared against arrival time in seconds)"


def _log(level: str, message: str) -> None:
    print(f"{level} {message}", file=sys.stderr)


def _fatal(code: int, message: str) -> int:
    _log("ERROR", json.dumps({"exit": code, "message": message}))
    return code


def _resolve_threads(value) -> int:
    if value is None:
        value = os.environ.get("TRACELENS_THREADS", "")
    try:
        threads = int(value)
    except (TypeError, ValueError):
        threads = os.cpu_count() or 1
    threads = max(1, threads)
    if kernels.NUMBA_ENABLED:
        import numba

        try:
            numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
        except ValueError:
            pass
    return threads


def load_report_schema() -> dict:
    text = resources.files("tracelens").joinpath("report_schema.json").read_text()
    return json.loads(text)


def validate_report(report: dict) -> None:
    import jsonschema

    schema = load_report_schema()
    try:
        jsonschema.validate(report, schema)
    except jsonschema.ValidationError as exc:
        raise ContractError(f"report failed schema validation: {exc.message}") from exc


# --- ingest ------------------------------------------------------------------


def cmd_ingest(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    colmap = ingest.parse_colmap(args.colmap) if args.colmap else None
    start = args.window_start if args.window_start is not None else 0
    end = args.window_end

    readers = {table: ingest.open_table(args.trace_root, table, colmap) for table in ingest.Table}
    job_stream = ingest.filter_window(iter(readers[ingest.Table.JOB_EVENTS]), start, end)
    usage_stream = ingest.filter_window(iter(readers[ingest.Table.TASK_USAGE]), start, end)

    build_stats = ingest.BuildStats()
    records = ingest.build_job_table(job_stream, usage_stream, stats=build_stats)

    # drain the remaining tables so their stats are reported too
    for table in (ingest.Table.TASK_EVENTS, ingest.Table.MACHINE_EVENTS):
        for _ in readers[table]:
            pass

    jobs_path = out_dir / "jobs.csv"
    ingest.write_job_table(records, jobs_path)
    stats = {
        "tables": {t.value: readers[t].stats.to_dict() for t in ingest.Table},
        "jobs": build_stats.to_dict(),
        "window": {"start": start, "end": end},
    }
    stats_path = out_dir / "ingest_stats.json"
    stats_path.write_text(json.dumps(stats, indent=2) + "\n")
    _log("INFO", f"ingested {build_stats.jobs_emitted} jobs")
    print(jobs_path)
    print(stats_path)
    return EXIT_OK


# --- analyze -----------------------------------------------------------------


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "wt", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _quantile_curve(samples: np.ndarray, points: int = 512) -> np.ndarray:
    probs = (np.arange(points) + 0.5) / points
    return np.column_stack([np.quantile(samples, probs), probs])


def _fit_section(fn, values, feature: str, insufficient: list, min_n: int):
    values = np.asarray(values, dtype=np.float64)
    if values.size < min_n:
        insufficient.append(f"fits.{feature}")
        return None, None
    try:
        fitted = fn(values)
        return fitted.to_dict(), fitted
    except (FitError, ValueError) as exc:
        _log("WARN", f"{feature} fit failed: {exc}")
        return {"error": str(exc)}, None


def cmd_analyze(args) -> int:
    records = ingest.read_job_table(args.jobs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    _resolve_threads(args.threads)

    insufficient: list[str] = []
    notes: list[str] = []
    report: dict = {"schema_version": SCHEMA_VERSION, "seed": args.seed}

    stats_path = Path(args.jobs).parent / "ingest_stats.json"
    report["ingest_stats"] = (
        json.loads(stats_path.read_text()) if stats_path.is_file() else None
    )

    # --- job classification (k = 3) and k sweep over the same features
    report["job_classes"] = None
    report["k_sweep"] = None
    try:
        classification = cluster.classify_jobs(records, rng, restarts=args.restarts)
        model = classification.model
        report["job_classes"] = {
            "k": model.k,
            "wcss": model.wcss,
            "silhouette_mean": model.silhouette_mean,
            "silhouette_subsampled": model.silhouette_subsampled,
            "classes": [
                {
                    "label": name,
                    "count": classification.counts[i],
                    "share": classification.shares[i],
                    "center": {
                        "cpu": float(classification.centers[i][0]),
                        "memory": float(classification.centers[i][1]),
                    },
                }
                for i, name in enumerate(("MINOR", "MEDIOCRE", "MAJOR"))
            ],
        }
        _write_csv(
            out_dir / "assignments.csv",
            ["job_id", "cluster_index", "label"],
            [
                (r.job_id, int(model.assignment[i]), classification.labels[i].name)
                for i, r in enumerate(records)
            ],
        )
    except (DegenerateDataError, ValueError) as exc:
        _log("WARN", f"job classification skipped: {exc}")
        insufficient.append("job_classes")

    try:
        pts = cluster.as_points([[r.mean_cpu, r.mean_memory] for r in records])
        mins = pts.min(axis=0)
        ranges = pts.max(axis=0) - mins
        normed = (pts - mins) / np.where(ranges > 0, ranges, 1.0)
        sweep = cluster.sweep_k(normed, (args.k_min, args.k_max), rng, restarts=args.restarts)
        report["k_sweep"] = [
            {"k": k, "wcss": m.wcss, "silhouette_mean": m.silhouette_mean} for k, m in sweep
        ]
    except ValueError as exc:
        _log("WARN", f"k sweep skipped: {exc}")
        insufficient.append("k_sweep")

    report["arrival_clusters"] = None
    try:
        arrivals = cluster.cluster_arrivals(records, args.arrival_k, rng, restarts=args.restarts)
        report["arrival_clusters"] = {
            "k": arrivals.model.k,
            "wcss": arrivals.model.wcss,
            "silhouette_mean": arrivals.model.silhouette_mean,
            "silhouette_subsampled": arrivals.model.silhouette_subsampled,
            "extents_seconds": list(arrivals.extents_seconds),
        }
    except ValueError as exc:
        _log("WARN", f"arrival clustering skipped: {exc}")
        insufficient.append("arrival_clusters")

    # --- distribution fits
    fits: dict = {}
    inter_seconds = None
    if len(records) >= 2:
        inter_seconds = ingest.interarrival_times(records) / 1e6
    if inter_seconds is None or inter_seconds.size < 10:
        insufficient.append("fits.interarrival")
        fits["interarrival"] = None
    else:
        fits["interarrival"], inter_fit = _fit_section(
            distfit.fit_weibull, inter_seconds, "interarrival", insufficient, 10
        )
        if inter_fit is not None:
            curve = _quantile_curve(inter_seconds)
            _write_csv(out_dir / "ecdf_interarrival.csv", ["x", "cdf"], curve.tolist())
            probs = (np.arange(512) + 0.5) / 512
            xs = distfit.weibull_quantile(
                probs, inter_fit.params["shape"], inter_fit.params["scale"]
            )
            _write_csv(
                out_dir / "cdf_weibull_interarrival.csv",
                ["x", "cdf"],
                np.column_stack([xs, probs]).tolist(),
            )

    for feature in ("mean_cpu", "mean_memory"):
        values = np.array([getattr(r, feature) for r in records], dtype=np.float64)
        positive = values[values > 0]
        dropped = values.size - positive.size
        if dropped:
            notes.append(f"{feature}: {dropped} zero values excluded from the rank fit")
        if positive.size < 10:
            insufficient.append(f"fits.{feature}")
            fits[feature] = None
            continue
        fits[feature], _ = _fit_section(
            distfit.fit_zipf, positive, feature, insufficient, 10
        )
        ranked = np.sort(positive)[::-1]
        _write_csv(
            out_dir / f"rank_{feature}.csv",
            ["rank", "value"],
            list(zip(range(1, ranked.size + 1), ranked.tolist())),
        )

    runtimes = np.array(
        [r.runtime for r in records if r.runtime is not None], dtype=np.float64
    )
    runtime_seconds = runtimes / 1e6
    if runtime_seconds.size < 50:
        insufficient.append("fits.runtime")
        fits["runtime"] = None
    else:
        fit_dict, runtime_fit = _fit_section(
            distfit.fit_pareto_tail, runtime_seconds, "runtime", insufficient, 50
        )
        if fit_dict is not None and "error" not in fit_dict:
            fit_dict["summary"] = distfit.tail_skewness_report(runtime_seconds).to_dict()
        fits["runtime"] = fit_dict
        xs = np.sort(runtime_seconds)
        survival = 1.0 - np.arange(1, xs.size + 1) / xs.size
        _write_csv(out_dir / "tail_runtime.csv", ["x", "survival"], np.column_stack([xs, survival]).tolist())
        if runtime_fit is not None:
            alpha = runtime_fit.params["alpha"]
            xmin = runtime_fit.params["xmin"]
            tail_share = float(np.count_nonzero(runtime_seconds > xmin)) / runtime_seconds.size
            grid = np.geomspace(xmin, max(xs.max(), xmin * 10), 512)
            _write_csv(
                out_dir / "tail_runtime_fit.csv",
                ["x", "survival"],
                np.column_stack([grid, tail_share * (grid / xmin) ** -alpha]).tolist(),
            )
    report["fits"] = fits

    share = None
    if records:
        arrivals_s = np.array([r.arrival_time / 1e6 for r in records])
        share = float(np.count_nonzero(arrivals_s <= args.arrival_threshold)) / len(records)
    report["annotations"] = {
        "arrival_threshold": {
            "value": args.arrival_threshold,
            "unit": _THRESHOLD_UNIT,
            "share_at_or_below": share,
        },
        "insufficient_data": insufficient,
        "notes": notes,
    }

    validate_report(report)
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    _log("INFO", f"analysis complete; {len(insufficient)} section(s) skipped")
    print(report_path)
    return EXIT_OK


# --- generate ----------------------------------------------------------------


def cmd_generate(args) -> int:
    spec = synth.parse_spec_file(args.spec)
    result = synth.gen_job_stream(spec)
    manifest = synth.emit_trace(result, spec, args.out_dir)
    _log("INFO", f"generated {manifest.jobs} jobs in {args.out_dir}")
    print(manifest.path)
    return EXIT_OK


# --- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracelens",
        description="Cluster-trace workload characterization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="aggregate raw trace tables into a job table")
    p_ingest.add_argument("--trace-root", required=True, help="directory holding the trace tables")
    p_ingest.add_argument("--out", required=True, help="output directory for jobs.csv and stats")
    p_ingest.add_argument("--window-start", type=int, default=None, help="window start (microseconds)")
    p_ingest.add_argument("--window-end", type=int, default=None, help="window end, exclusive (microseconds)")
    p_ingest.add_argument("--colmap", default=None, help="column remap file (table.field = index)")
    p_ingest.add_argument("--threads", type=int, default=None)
    p_ingest.set_defaults(func=cmd_ingest)

    p_analyze = sub.add_parser("analyze", help="cluster jobs and fit distribution models")
    p_analyze.add_argument("--jobs", required=True, help="jobs.csv from the ingest step")
    p_analyze.add_argument("--out-dir", required=True)
    p_analyze.add_argument("--k-min", type=int, default=2)
    p_analyze.add_argument("--k-max", type=int, default=6)
    p_analyze.add_argument("--restarts", type=int, default=10)
    p_analyze.add_argument("--seed", type=int, default=0)
    p_analyze.add_argument("--arrival-k", type=int, default=3, help="k for arrival-time clustering")
    p_analyze.add_argument(
        "--arrival-threshold",
        type=float,
        default=5.0,
        help="small-arrival annotation threshold (unit intentionally unspecified)",
    )
    p_analyze.add_argument("--threads", type=int, default=None)
    p_analyze.set_defaults(func=cmd_analyze)

    p_generate = sub.add_parser("generate", help="emit a synthetic trace from a spec file")
    p_generate.add_argument("--spec", required=True, help="synthesis spec (key = value lines)")
    p_generate.add_argument("--out-dir", required=True)
    p_generate.add_argument("--threads", type=int, default=None)
    p_generate.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except SpecError as exc:
        return _fatal(EXIT_USAGE, f"invalid spec key {exc.key}: {exc}")
    except (DegenerateDataError, ValueError) as exc:
        return _fatal(EXIT_USAGE, str(exc))
    except OSError as exc:
        return _fatal(EXIT_IO, str(exc))
    except ContractError as exc:
        return _fatal(EXIT_INTERNAL, str(exc))


if __name__ == "__main__":
    sys.exit(main())
