"""Command-line front end: ingest or synthesize traffic, analyze
predictability, evaluate predictors, and assemble the summary report.

Every output is a headed CSV (or JSON sidecar) with a stable column
order, written in sorted-user order so a fixed seed and fixed inputs
produce byte-identical files. Distribution figures are emitted as
histogram data files, not rendered images.

Exit codes: 0 success, 2 usage error, 3 missing input, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from trafficpred.entropy import ESTIMATOR_LZ, entropy_report
from trafficpred.ingest import (
    DailyAggregator,
    FieldLayout,
    IngestDiagnostics,
    MissingCache,
    ObservationWindow,
    iter_cdr_records,
    read_series_cache,
    write_series_cache,
)
from trafficpred.predictability import predictability_report
from trafficpred.predictors import PredictorSpec, evaluate_online
from trafficpred.quantizer import (
    QuantizationConfig,
    StateSequence,
    quantize_values,
    write_state_rows,
)
from trafficpred.stationarity import ConstantSeries, SeriesTooShort, adf_test
from trafficpred.synth import (
    DEPENDENT_PROFILE,
    PopulationProfile,
    generate_traffic_population,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_INPUT = 3
EXIT_INTERNAL = 4

PROBABILITY_BIN_WIDTH = 0.05
ENTROPY_BIN_WIDTH = 0.1

DEFAULT_T_LIST = (120, 300, 600)
DEFAULT_ORDERS = (1, 5, 25)


class ExitNoInput(FileNotFoundError):
    """No usable input files were found."""


@dataclass(frozen=True)
class RunConfig:
    """Validated knobs shared by the analysis and prediction commands."""

    t_list: tuple[int, ...]
    predictors: tuple[PredictorSpec, ...]
    warmup: int = 1
    seed: int = 0
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.t_list:
            raise ValueError("need at least one quantization interval")
        if any(t < 1 for t in self.t_list):
            raise ValueError(f"quantization intervals must be >= 1: {self.t_list}")
        if self.warmup < 1:
            raise ValueError(f"warmup must be >= 1, got {self.warmup}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _bin_index(value: float, width: float) -> int:
    # nudge against x/width landing just below an integer for exact multiples
    return int(math.floor(value / width + 1e-9))


def multi_histogram_rows(
    columns: dict[str, list[float]], width: float
) -> tuple[list[str], list[list[str]]]:
    """Shared fixed-width binning of several value lists.

    Bins run from 0 to the largest observed value; each column's counts
    sum to its number of values.
    """
    top = max((max(vals) for vals in columns.values() if vals), default=0.0)
    n_bins = _bin_index(top, width) + 1
    counts = {name: [0] * n_bins for name in columns}
    for name, vals in columns.items():
        for v in vals:
            counts[name][min(_bin_index(v, width), n_bins - 1)] += 1
    header = ["bin_start", "bin_end"] + list(columns)
    rows = []
    for i in range(n_bins):
        row = [_fmt(i * width), _fmt((i + 1) * width)]
        row += [str(counts[name][i]) for name in columns]
        rows.append(row)
    return header, rows


def _parse_int_list(raw: object) -> tuple[int, ...]:
    if isinstance(raw, (list, tuple)):
        return tuple(int(v) for v in raw)
    return tuple(int(part) for part in str(raw).split(",") if part.strip())


# ---------------------------------------------------------------------------
# ingest


def _collect_input_files(inputs: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for raw in inputs:
        path = Path(raw)
        if path.is_dir():
            files.extend(sorted(p for p in path.iterdir() if p.is_file()))
        elif path.is_file():
            files.append(path)
    return files


def cmd_ingest(args: argparse.Namespace) -> int:
    files = _collect_input_files(args.input)
    if not files:
        raise ExitNoInput(f"no input files under {', '.join(args.input)}")
    window = ObservationWindow(
        first_day=date.fromisoformat(args.window_start),
        last_day=date.fromisoformat(args.window_end),
    )
    layout = FieldLayout(delimiter=args.delimiter)
    diagnostics = IngestDiagnostics()
    aggregator = DailyAggregator(window)
    for path in files:
        with open(path) as fh:
            for record in iter_cdr_records(fh, layout, diagnostics):
                aggregator.add(record)
    diagnostics.out_of_window = aggregator.out_of_window
    series = aggregator.series()

    out_dir = Path(args.out)
    write_series_cache(series, out_dir)
    _write_json(out_dir / "diagnostics.json", diagnostics.as_dict())
    print(
        f"ingested {diagnostics.records_read} records from {len(files)} file(s): "
        f"{diagnostics.parsed} parsed, {diagnostics.skipped} skipped, "
        f"{diagnostics.out_of_window} out of window, {len(series)} users"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args: argparse.Namespace) -> int:
    base = DEPENDENT_PROFILE if args.profile == "dependent" else PopulationProfile()
    overrides = {
        field: value
        for field, value in (
            ("p90_seconds", args.p90),
            ("sigma", args.sigma),
            ("autocorr", args.autocorr),
            ("weekly_amplitude", args.weekly_amplitude),
            ("zero_day_fraction", args.zero_day_fraction),
            ("user_scale_sigma", args.user_scale_sigma),
            ("max_seconds", args.max_seconds),
        )
        if value is not None
    }
    profile = dataclasses.replace(base, **overrides)
    population = generate_traffic_population(
        profile,
        n_users=args.users,
        n_days=args.days,
        seed=args.seed,
        first_day=date.fromisoformat(args.first_day),
    )
    write_series_cache(
        population,
        Path(args.out),
        extra_meta={
            "generator": {
                "seed": args.seed,
                "profile": args.profile,
                **dataclasses.asdict(profile),
            }
        },
    )
    print(f"wrote {len(population)} synthetic series of {args.days} days to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def _analyze_user(task: tuple[str, list[int], tuple[int, ...]]) -> dict:
    user, values, t_list = task
    series = np.asarray(values, dtype=np.int64)
    per_t = {}
    for t in t_list:
        seq = quantize_values(series, QuantizationConfig(interval_t=t))
        report = entropy_report(seq, estimator=ESTIMATOR_LZ)
        bounds = predictability_report(report)
        per_t[t] = (report, bounds, seq.states.tolist())
    adf_row = None
    adf_skip = None
    try:
        result = adf_test(series.astype(float))
        adf_row = (
            result.t_statistic,
            result.p_value,
            result.lags_used,
            result.stationary_at.get(0.05, result.p_value < 0.05),
            result.stationary_at.get(0.01, result.p_value < 0.01),
        )
    except ConstantSeries:
        adf_skip = "constant"
    except SeriesTooShort:
        adf_skip = "too_short"
    return {"user": user, "per_t": per_t, "adf": adf_row, "adf_skip": adf_skip}


def _map_users(tasks: list, worker, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    chunk = max(1, len(tasks) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks, chunksize=chunk))


def cmd_analyze(args: argparse.Namespace) -> int:
    config = RunConfig(
        t_list=_parse_int_list(args.t_list),
        predictors=(),
        jobs=args.jobs,
    )
    cache = read_series_cache(args.cache)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    users = sorted(cache)

    tasks = [(user, cache[user].values.tolist(), config.t_list) for user in users]
    results = _map_users(tasks, _analyze_user, config.jobs)

    adf_rows = []
    adf_skips = {"constant": 0, "too_short": 0}
    clamped = 0
    for t in config.t_list:
        entropy_rows = []
        pred_rows = []
        hist_entropy: dict[str, list[float]] = {"s_rand": [], "s_unc": [], "s_real": []}
        hist_pi: dict[str, list[float]] = {"pi_rand": [], "pi_unc": [], "pi_max": []}
        state_seqs = {}
        for res in results:
            report, bounds, states = res["per_t"][t]
            entropy_rows.append(
                [
                    res["user"],
                    str(report.seq_length),
                    str(report.n_states),
                    _fmt(report.s_rand),
                    _fmt(report.s_unc),
                    _fmt(report.s_real),
                    report.estimator,
                ]
            )
            pred_rows.append(
                [
                    res["user"],
                    _fmt(bounds.pi_rand),
                    _fmt(bounds.pi_unc),
                    _fmt(bounds.pi_max),
                ]
            )
            hist_entropy["s_rand"].append(report.s_rand)
            hist_entropy["s_unc"].append(report.s_unc)
            hist_entropy["s_real"].append(report.s_real)
            hist_pi["pi_rand"].append(bounds.pi_rand)
            hist_pi["pi_unc"].append(bounds.pi_unc)
            hist_pi["pi_max"].append(bounds.pi_max)
            if bounds.clamped:
                clamped += 1
            if args.dump_states:
                state_seqs[res["user"]] = StateSequence.from_states(states)
        _write_csv(
            out_dir / f"entropy_T{t}.csv",
            ["user_id", "n", "N", "s_rand", "s_unc", "s_real", "estimator"],
            entropy_rows,
        )
        _write_csv(
            out_dir / f"predictability_T{t}.csv",
            ["user_id", "pi_rand", "pi_unc", "pi_max"],
            pred_rows,
        )
        header, rows = multi_histogram_rows(hist_entropy, ENTROPY_BIN_WIDTH)
        _write_csv(out_dir / f"entropy_hist_T{t}.csv", header, rows)
        header, rows = multi_histogram_rows(hist_pi, PROBABILITY_BIN_WIDTH)
        _write_csv(out_dir / f"predictability_hist_T{t}.csv", header, rows)
        if args.dump_states:
            write_state_rows(state_seqs, out_dir / f"states_T{t}.csv")

    for res in results:
        if res["adf"] is not None:
            t_stat, p_value, lags, s05, s01 = res["adf"]
            adf_rows.append(
                [
                    res["user"],
                    _fmt(t_stat),
                    _fmt(p_value),
                    str(lags),
                    str(int(s05)),
                    str(int(s01)),
                ]
            )
        elif res["adf_skip"]:
            adf_skips[res["adf_skip"]] += 1
    _write_csv(
        out_dir / "adf.csv",
        ["user_id", "t_stat", "p_value", "lags", "stationary_05", "stationary_01"],
        adf_rows,
    )
    _write_json(
        out_dir / "analyze_meta.json",
        {
            "users": len(users),
            "t_list": list(config.t_list),
            "estimator": ESTIMATOR_LZ,
            "adf_tested": len(adf_rows),
            "adf_skipped": adf_skips,
            "clamped_reports": clamped,
        },
    )
    print(f"analyzed {len(users)} users at T={list(config.t_list)} into {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict


def _predict_user(
    task: tuple[str, list[int], tuple[int, ...], tuple[str, ...], int]
) -> dict:
    user, values, t_list, predictor_names, warmup = task
    series = np.asarray(values, dtype=np.int64)
    specs = [PredictorSpec.parse(name) for name in predictor_names]
    per_t = {}
    for t in t_list:
        seq = quantize_values(series, QuantizationConfig(interval_t=t))
        outcomes = {}
        for spec in specs:
            outcome = evaluate_online(seq, spec, warmup=warmup)
            outcomes[spec.label] = (
                spec.kind,
                spec.param,
                outcome.total,
                outcome.correct,
            )
        bounds = predictability_report(entropy_report(seq, estimator=ESTIMATOR_LZ))
        per_t[t] = (outcomes, bounds.pi_max)
    return {"user": user, "per_t": per_t}


def cmd_predict(args: argparse.Namespace) -> int:
    orders = _parse_int_list(args.orders)
    predictors = tuple(
        [PredictorSpec(kind="markov", order=k) for k in orders]
        + [PredictorSpec(kind="mf"), PredictorSpec(kind="diffusion", beta=args.beta)]
    )
    config = RunConfig(
        t_list=_parse_int_list(args.t_list),
        predictors=predictors,
        warmup=args.warmup,
        jobs=args.jobs,
    )
    cache = read_series_cache(args.cache)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    users = sorted(cache)
    usable = [u for u in users if cache[u].window.day_count > config.warmup]
    skipped = len(users) - len(usable)

    predictor_names = tuple(spec.label for spec in config.predictors)
    tasks = [
        (user, cache[user].values.tolist(), config.t_list, predictor_names, config.warmup)
        for user in usable
    ]
    results = _map_users(tasks, _predict_user, config.jobs)

    summary_rows = []
    for t in config.t_list:
        accuracy_rows = []
        hist: dict[str, list[float]] = {label: [] for label in predictor_names}
        mean_acc: dict[str, float] = {label: 0.0 for label in predictor_names}
        mean_pi = 0.0
        for res in results:
            outcomes, pi_max = res["per_t"][t]
            mean_pi += pi_max
            for label in predictor_names:
                kind, param, total, correct = outcomes[label]
                accuracy = correct / total
                accuracy_rows.append(
                    [
                        res["user"],
                        kind,
                        param,
                        str(total),
                        str(correct),
                        _fmt(accuracy),
                    ]
                )
                hist[label].append(accuracy)
                mean_acc[label] += accuracy
        _write_csv(
            out_dir / f"accuracy_T{t}.csv",
            ["user_id", "predictor", "param", "n_total", "n_correct", "accuracy"],
            accuracy_rows,
        )
        header, rows = multi_histogram_rows(hist, PROBABILITY_BIN_WIDTH)
        _write_csv(out_dir / f"accuracy_hist_T{t}.csv", header, rows)
        if results:
            mean_pi /= len(results)
            for label in predictor_names:
                summary_rows.append(
                    [
                        str(t),
                        label,
                        _fmt(mean_acc[label] / len(results)),
                        _fmt(mean_pi),
                    ]
                )
    _write_csv(
        out_dir / "summary.csv",
        ["T", "model", "mean_accuracy", "mean_pi_max"],
        summary_rows,
    )
    _write_json(
        out_dir / "predict_meta.json",
        {
            "users": len(usable),
            "skipped_short": skipped,
            "t_list": list(config.t_list),
            "predictors": list(predictor_names),
            "warmup": config.warmup,
        },
    )
    print(
        f"evaluated {len(predictor_names)} predictors x {len(usable)} users "
        f"at T={list(config.t_list)} into {out_dir}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def _read_csv_rows(path: Path) -> list[dict[str, str]]:
    if not path.is_file():
        raise MissingCache(f"missing expected file {path}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args: argparse.Namespace) -> int:
    analysis_dir = Path(args.analysis)
    prediction_dir = Path(args.prediction)
    accuracy_files = sorted(
        prediction_dir.glob("accuracy_T*.csv"),
        key=lambda p: int(p.stem.split("T")[-1]),
    )
    if not accuracy_files:
        raise MissingCache(f"no accuracy files under {prediction_dir}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = ["T", "model", "mean_accuracy", "mean_pi_max", "error_seconds"]
    if args.erlang_divisor is not None:
        header.append("error_erlang")
    table_rows = []
    for acc_path in accuracy_files:
        t = int(acc_path.stem.split("T")[-1])
        pi_rows = _read_csv_rows(analysis_dir / f"predictability_T{t}.csv")
        if not pi_rows:
            raise MissingCache(f"empty predictability rows for T={t}")
        mean_pi = sum(float(r["pi_max"]) for r in pi_rows) / len(pi_rows)

        by_model: dict[str, list[float]] = {}
        for row in _read_csv_rows(acc_path):
            label = PredictorSpec(
                kind=row["predictor"],
                order=int(row["param"]) if row["predictor"] == "markov" else None,
                beta=float(row["param"]) if row["predictor"] == "diffusion" else None,
            ).label
            by_model.setdefault(label, []).append(float(row["accuracy"]))
        for label in sorted(by_model):
            accs = by_model[label]
            row = [
                str(t),
                label,
                _fmt(sum(accs) / len(accs)),
                _fmt(mean_pi),
                _fmt(t / 2.0),
            ]
            if args.erlang_divisor is not None:
                row.append(_fmt((t / 2.0) / args.erlang_divisor))
            table_rows.append(row)
    _write_csv(out_dir / "table_i.csv", header, table_rows)
    print(f"wrote {len(table_rows)} summary rows to {out_dir / 'table_i.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser(config_defaults: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trafficpred",
        description="Daily voice-traffic predictability analysis and prediction.",
    )
    parser.add_argument(
        "--config",
        default=None,
        help="JSON file of flag defaults (long option names with underscores)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse CDR files into a series cache")
    p_ingest.add_argument("--input", nargs="+", required=True, help="CDR files or directories")
    p_ingest.add_argument("--window-start", required=True, help="first day, YYYY-MM-DD")
    p_ingest.add_argument("--window-end", required=True, help="last day, YYYY-MM-DD")
    p_ingest.add_argument("--delimiter", default=",")
    p_ingest.add_argument("--out", required=True, help="cache directory to write")
    p_ingest.set_defaults(func=cmd_ingest)

    p_synth = sub.add_parser("synth", help="generate a synthetic series cache")
    p_synth.add_argument("--users", type=int, default=500)
    p_synth.add_argument("--days", type=int, default=184)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument(
        "--profile", choices=("default", "dependent"), default="default",
        help="preset: independent days, or strong day-to-day dependence",
    )
    p_synth.add_argument("--p90", type=float, default=None, help="target 90th percentile seconds")
    p_synth.add_argument("--sigma", type=float, default=None, help="log-normal shape")
    p_synth.add_argument("--autocorr", type=float, default=None, help="latent AR(1) coefficient")
    p_synth.add_argument("--weekly-amplitude", type=float, default=None)
    p_synth.add_argument("--zero-day-fraction", type=float, default=None)
    p_synth.add_argument("--user-scale-sigma", type=float, default=None)
    p_synth.add_argument("--max-seconds", type=int, default=None)
    p_synth.add_argument("--first-day", default="2014-07-01")
    p_synth.add_argument("--out", required=True, help="cache directory to write")
    p_synth.set_defaults(func=cmd_synth)

    t_list_default = ",".join(str(t) for t in DEFAULT_T_LIST)
    p_analyze = sub.add_parser("analyze", help="entropy, predictability and ADF reports")
    p_analyze.add_argument("--cache", required=True, help="series cache directory")
    p_analyze.add_argument("--t-list", default=t_list_default)
    p_analyze.add_argument("--jobs", type=int, default=1)
    p_analyze.add_argument("--dump-states", action="store_true")
    p_analyze.add_argument("--out", required=True)
    p_analyze.set_defaults(func=cmd_analyze)

    p_predict = sub.add_parser("predict", help="online next-state prediction accuracy")
    p_predict.add_argument("--cache", required=True, help="series cache directory")
    p_predict.add_argument("--t-list", default=t_list_default)
    p_predict.add_argument(
        "--orders",
        default=",".join(str(k) for k in DEFAULT_ORDERS),
        help="markov orders to evaluate",
    )
    p_predict.add_argument("--beta", type=float, default=1.0, help="diffusion strength")
    p_predict.add_argument("--warmup", type=int, default=1)
    p_predict.add_argument("--jobs", type=int, default=1)
    p_predict.add_argument("--out", required=True)
    p_predict.set_defaults(func=cmd_predict)

    p_report = sub.add_parser("report", help="combine analysis and prediction outputs")
    p_report.add_argument("--analysis", required=True, help="analyze output directory")
    p_report.add_argument("--prediction", required=True, help="predict output directory")
    p_report.add_argument(
        "--erlang-divisor", type=float, default=None,
        help="seconds per erlang; adds an error_erlang column when set",
    )
    p_report.add_argument("--out", required=True)
    p_report.set_defaults(func=cmd_report)

    if config_defaults:
        for sp in (p_ingest, p_synth, p_analyze, p_predict, p_report):
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in config_defaults.items() if k in known})
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    config_defaults = None
    if "--config" in argv:
        config_path = Path(argv[argv.index("--config") + 1])
        if not config_path.is_file():
            print(f"error: config file not found: {config_path}", file=sys.stderr)
            return EXIT_NO_INPUT
        config_defaults = json.loads(config_path.read_text())
    parser = build_parser(config_defaults)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (MissingCache, ExitNoInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_INPUT
    except BrokenPipeError:
        raise
    except Exception as exc:  # pragma: no cover - safety net for the CLI
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
