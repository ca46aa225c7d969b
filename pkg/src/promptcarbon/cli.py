"""Command-line workflow: ingest -> train -> evaluate -> estimate, plus serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Machine-readable JSON goes to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone

from . import __version__, regressors
from .api import LatencyConflict, RequestError, dumps, estimate_payload
from .bundle import DEFAULT_SELECTION, BundleError, fit_bundle, load_bundle, save_bundle
from .carbon import IntensityTable, IntensityTableError
from .evaluation import EvaluationError, evaluate_all, format_table, report_document, write_report
from .features import FeatureError
from .ingest import (
    ColumnMapping,
    IngestError,
    clean_records,
    dedupe_quality,
    default_mapping,
    load_dataset,
    merge_benchmarks,
    parse_perf_table,
    parse_quality_table,
    save_dataset,
    unmatched_keys,
)
from .metrics import MetricError
from .regressors import RegressorError, RegressorKind

log = logging.getLogger("promptcarbon")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(doc) -> None:
    sys.stdout.write(dumps(doc) + "\n")
    sys.stdout.flush()


def _require_file(path, what):
    if not os.path.isfile(path):
        raise DataError(f"{what} file not found: {path}")


# -- ingest ------------------------------------------------------------------


def cmd_ingest(args) -> int:
    _require_file(args.perf, "--perf")
    _require_file(args.quality, "--quality")
    perf_map = ColumnMapping.load(args.perf_map) if args.perf_map else default_mapping("perf")
    quality_map = ColumnMapping.load(args.quality_map) if args.quality_map else default_mapping("quality")

    perf, perf_rej = parse_perf_table(args.perf, perf_map)
    quality, qual_rej = parse_quality_table(args.quality, quality_map)
    for name, rej in (("perf", perf_rej), ("quality", qual_rej)):
        for r in rej[:20]:
            print(f"rejected {name} row {r.row_index}: {r.reason}", file=sys.stderr)
        if len(rej) > 20:
            print(f"... {len(rej) - 20} more rejected {name} rows", file=sys.stderr)
    quality, n_exact_dupes = dedupe_quality(quality)
    merged = merge_benchmarks(perf, quality)
    cleaned, report = clean_records(merged)
    save_dataset(cleaned, args.out, report)
    missing = unmatched_keys(perf, quality)
    print(
        f"perf {len(perf)} rows ({len(perf_rej)} rejected), quality {len(quality)} rows "
        f"({len(qual_rej)} rejected, {n_exact_dupes} exact duplicates dropped); merged {len(merged)}; "
        f"cleaned {report.rows_out} (missing {report.rows_dropped_missing}, "
        f"duplicate {report.rows_dropped_duplicate}); {len(missing)} unmatched perf keys",
        file=sys.stderr,
    )
    _emit({
        "dataset": str(args.out),
        "perf_rows": len(perf),
        "perf_rejected": [{"row": r.row_index, "reason": r.reason} for r in perf_rej],
        "quality_rows": len(quality),
        "quality_rejected": [{"row": r.row_index, "reason": r.reason} for r in qual_rej],
        "quality_exact_duplicates": n_exact_dupes,
        "merged_rows": len(merged),
        "clean_report": report.__dict__,
        "unmatched_perf_keys": [[k.canonical_name, k.canonical_precision] for k in missing],
    })
    return EXIT_OK


# -- training / evaluation ---------------------------------------------------


def _add_model_args(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=10, help="cross-validation folds")
    p.add_argument("--size-quantile", type=float, default=0.8,
                   help="extrapolation hold-out: sizes strictly above this quantile")
    p.add_argument("--kinds", default=None,
                   help="comma list of regressor kinds to sweep (default: all)")
    p.add_argument("--gbdt-n-trees", type=int, default=300)
    p.add_argument("--gbdt-learning-rate", type=float, default=0.1)
    p.add_argument("--gbdt-max-depth", type=int, default=6)
    p.add_argument("--gbdt-min-samples-leaf", type=int, default=5)
    p.add_argument("--gbdt-l2", type=float, default=1.0)
    p.add_argument("--ridge-alpha", type=float, default=None, help="fixed alpha (skips the grid search)")
    p.add_argument("--ridge-alpha-grid", default=None, help="comma list, default 0.01,0.1,1,10,100")
    p.add_argument("--knn-k", type=int, default=5)


def _model_params(args) -> dict:
    grid = regressors.ALPHA_GRID
    if args.ridge_alpha_grid:
        try:
            grid = tuple(float(v) for v in args.ridge_alpha_grid.split(","))
        except ValueError:
            raise UsageError(f"--ridge-alpha-grid: not a comma list of numbers: {args.ridge_alpha_grid!r}")
    try:
        return {
            RegressorKind.GRADIENT_BOOSTED_TREES: regressors.GbdtParams(
                n_trees=args.gbdt_n_trees, learning_rate=args.gbdt_learning_rate,
                max_depth=args.gbdt_max_depth, min_samples_leaf=args.gbdt_min_samples_leaf,
                l2_leaf_penalty=args.gbdt_l2, seed=args.seed,
            ),
            RegressorKind.RIDGE: regressors.RidgeParams(alpha=args.ridge_alpha, alpha_grid=grid, seed=args.seed),
            RegressorKind.ORDINARY_LEAST_SQUARES: regressors.OlsParams(),
            RegressorKind.K_NEAREST_NEIGHBORS: regressors.KnnParams(k=args.knn_k),
        }
    except RegressorError as exc:
        raise UsageError(str(exc)) from None


def _kinds(args):
    if not args.kinds:
        return regressors.REGISTRY_ORDER
    try:
        return tuple(regressors.resolve(k.strip()) for k in args.kinds.split(","))
    except RegressorError as exc:
        raise UsageError(str(exc)) from None


def _load_records(path, k):
    _require_file(path, "--dataset")
    records = load_dataset(path)
    if len(records) < k:
        raise DataError(f"dataset has {len(records)} records; {k}-fold cross-validation needs at least {k}")
    return records


def _created_at(args):
    if args.created_at:
        return args.created_at
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return None


def cmd_train(args) -> int:
    params = _model_params(args)
    kinds = _kinds(args)
    records = _load_records(args.dataset, args.k)
    selection = DEFAULT_SELECTION if args.no_select else None
    bundle, reports = fit_bundle(
        records, seed=args.seed, params=params, k=args.k, size_quantile=args.size_quantile,
        kinds=kinds, selection=selection, created_at=_created_at(args),
    )
    save_bundle(bundle, args.out)
    if reports:
        print(format_table(reports), file=sys.stderr)
    _emit({
        "bundle": str(args.out),
        "threshold_b": bundle.threshold_b,
        "selection": bundle.metadata["selection"],
        "dataset_hash": bundle.metadata["dataset_hash"],
    })
    return EXIT_OK


def cmd_evaluate(args) -> int:
    params = _model_params(args)
    kinds = _kinds(args)
    records = _load_records(args.dataset, args.k)
    reports = evaluate_all(records, kinds, params, k=args.k, seed=args.seed, size_quantile=args.size_quantile)
    doc = report_document(reports, records, seed=args.seed, k=args.k,
                          size_quantile=args.size_quantile, params=params)
    if args.report:
        write_report(doc, args.report)
    print(format_table(reports), file=sys.stderr)
    _emit(doc)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation import external_validation

    _require_file(args.bundle, "--bundle")
    _require_file(args.dataset, "--dataset")
    doc = external_validation(load_bundle(args.bundle), load_dataset(args.dataset))
    for r in doc["rows"]:
        flag = "within" if r["within_band"] else "OUTSIDE"
        print(f"{r['llm']:<12} measured {r['measured_j']:9.2f} J  estimated {r['estimated_j']:9.2f} J  "
              f"error {r['error_pct']:6.2f}%  ({flag} +/-50% of reference)", file=sys.stderr)
    _emit(doc)
    return EXIT_OK


# -- estimate / serve --------------------------------------------------------


def estimate_request(args) -> dict:
    direct = args.lat_prefill_s is not None or args.lat_decode_s is not None
    derived = args.ttft_s is not None or args.total_latency_s is not None
    if direct and derived:
        raise UsageError("give either --lat-prefill-s/--lat-decode-s or --ttft-s/--total-latency-s, not both")
    if args.region and not args.intensities:
        raise UsageError("--region requires --intensities")
    body = {
        "model_size_b": args.model_size_b,
        "input_tokens": args.input_tokens,
        "output_tokens": args.output_tokens,
        "gpu": args.gpu,
        "bbh": args.bbh,
        "mmlu_pro": args.mmlu_pro,
    }
    if derived:
        body["ttft_s"] = args.ttft_s
        body["total_latency_s"] = args.total_latency_s
    else:
        body["prefill_latency_s_per_input_token"] = args.lat_prefill_s
        body["decode_latency_s_per_output_token"] = args.lat_decode_s
    if args.region:
        body["region"] = args.region
    return body


def cmd_estimate(args) -> int:
    body = estimate_request(args)
    _require_file(args.bundle, "--bundle")
    bundle = load_bundle(args.bundle)
    table = None
    if args.intensities:
        _require_file(args.intensities, "--intensities")
        table = IntensityTable.load(args.intensities)
    try:
        doc = estimate_payload(bundle, body, table)
    except LatencyConflict as exc:
        raise UsageError(str(exc)) from None
    except RequestError as exc:
        if exc.field == "region":
            raise DataError(str(exc)) from None
        raise UsageError(str(exc)) from None
    _emit(doc)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import make_server

    _require_file(args.bundle, "--bundle")
    bundle = load_bundle(args.bundle)
    table = IntensityTable.load(args.intensities) if args.intensities else None
    try:
        server = make_server(bundle, args.host, args.port, table)
    except OSError as exc:
        print(f"cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="promptcarbon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse, merge and clean two leaderboard snapshots")
    p.add_argument("--perf", required=True)
    p.add_argument("--quality", required=True)
    p.add_argument("--perf-map", default=None, help="column mapping file (default: shipped perf.map)")
    p.add_argument("--quality-map", default=None, help="column mapping file (default: shipped quality.map)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="select and fit the four phase x regime models")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-select", action="store_true",
                   help="skip the sweep: trees for interpolation, ridge for extrapolation")
    p.add_argument("--created-at", default=None, help="timestamp recorded in the bundle metadata")
    _add_model_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="cross-validate every regressor per phase and regime")
    p.add_argument("--dataset", required=True)
    p.add_argument("--report", default=None)
    _add_model_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("validate", help="external validation against published Llama-2 measurements")
    p.add_argument("--bundle", required=True)
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("estimate", help="per-prompt energy (and carbon) estimate")
    p.add_argument("--bundle", required=True)
    p.add_argument("--model-size-b", type=float, required=True)
    p.add_argument("--input-tokens", type=int, required=True)
    p.add_argument("--output-tokens", type=int, required=True)
    p.add_argument("--lat-prefill-s", type=float, default=None, help="prefill seconds per input token")
    p.add_argument("--lat-decode-s", type=float, default=None, help="decode seconds per output token")
    p.add_argument("--ttft-s", type=float, default=None, help="time to first token")
    p.add_argument("--total-latency-s", type=float, default=None, help="end-to-end request latency")
    p.add_argument("--gpu", required=True)
    p.add_argument("--bbh", type=float, required=True)
    p.add_argument("--mmlu-pro", type=float, required=True)
    p.add_argument("--region", default=None)
    p.add_argument("--intensities", default=None, help="region,gco2e_per_kwh table")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("serve", help="HTTP estimation service")
    p.add_argument("--bundle", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--intensities", default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version, usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, IngestError, FeatureError, EvaluationError, MetricError, BundleError,
            IntensityTableError, RequestError, RegressorError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
