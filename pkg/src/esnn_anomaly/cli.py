"""Command-line interface.

Subcommands: detect (stream one series, emit one record per value), grid
(per-file grid search), bench (grid-search a whole corpus tree), version.
Machine output goes to the output stream only; progress and warnings go to
stderr. Exit codes: 0 success, 2 configuration or usage errors, 3 input or
parse errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from .detector import ConfigError, DetectionRecord, Detector, DetectorConfig
from .harness import (
    DatasetError,
    DatasetSpec,
    GridSpec,
    grid_search,
    load_series,
    record_to_json,
    run_bench,
    write_category_summary,
    write_reports,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

CORPUS_ROOT_ENV = "ESNN_ANOMALY_CORPUS_ROOT"

log = logging.getLogger("esnn_anomaly")


@dataclass
class CliInvocation:
    """One parsed invocation: subcommand, raw options, resolved config."""

    command: str
    options: argparse.Namespace
    config: Optional[DetectorConfig] = None


def _add_base_config_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("detector configuration")
    g.add_argument("--ni-size", type=int, default=10, metavar="N",
                   help="input neurons (receptive fields), integer >= 3 (default 10)")
    g.add_argument("--no-size", type=int, default=50, metavar="N",
                   help="output repository capacity, integer >= 1 (default 50)")
    g.add_argument("--ts", type=float, default=1000.0, metavar="X",
                   help="firing-time scale, > 0 (default 1000)")
    g.add_argument("--mod", type=float, default=0.6, metavar="X",
                   help="per-rank weight decay, in (0, 1) (default 0.6)")
    g.add_argument("--c", type=float, default=0.6, metavar="X",
                   help="firing threshold as a fraction of the maximal potential, in (0, 1] (default 0.6)")
    g.add_argument("--sim", type=float, default=0.17, metavar="X",
                   help="merge distance threshold, in (0, 1] (default 0.17)")
    g.add_argument("--xi", type=float, default=0.9, metavar="X",
                   help="value correction step, in (0, 1] (default 0.9)")
    g.add_argument("--deviation", choices=("std", "variance"), default="std",
                   help="deviation statistic for flagging and prediction draws (default std)")
    g.add_argument("--strict-threshold", action="store_true",
                   help="flag only when the error excess strictly exceeds the threshold")
    g.add_argument("--correction-target", choices=("candidate", "fired"), default="candidate",
                   help="which neuron's output value the correction adjusts (default candidate)")


def _add_cell_config_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("per-run configuration")
    g.add_argument("--window-size", type=int, default=100, metavar="N",
                   help="sliding window length, integer >= 1 (default 100)")
    g.add_argument("--epsilon", type=float, default=3.0, metavar="X",
                   help="error deviation multiplier, >= 2 (default 3)")
    g.add_argument("--seed", type=int, default=0, metavar="N",
                   help="master seed, 64-bit unsigned (default 0)")


def _int_list(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {raw!r}")


def _float_list(raw: str) -> list[float]:
    try:
        return [float(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esnn-anomaly",
        description="Online unsupervised anomaly detection for univariate streams.",
    )
    parser.add_argument("--verbose", action="store_true", help="progress logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    detect = sub.add_parser(
        "detect",
        help="stream one series and emit one detection record per value",
        description="Reads numbers (one per line, or a CSV value column), writes "
        "one record per value. Warm-up records appear in one batch once the "
        "window fills; pass values through a pipe for live use.",
    )
    detect.add_argument("--input", default="-", metavar="PATH",
                        help="input file, or - for stdin (default -)")
    detect.add_argument("--output", default="-", metavar="PATH",
                        help="output file, or - for stdout (default -)")
    detect.add_argument("--input-format", choices=("auto", "lines", "csv"), default="auto",
                        help="auto treats *.csv files as CSV, everything else as one value per line")
    detect.add_argument("--value-column", default=None, metavar="NAME",
                        help="CSV column holding the values (default: common names)")
    detect.add_argument("--format", choices=("jsonl", "csv"), default="jsonl",
                        help="output format (default jsonl)")
    detect.add_argument("--buffered", action="store_true",
                        help="buffer output instead of flushing after every record")
    _add_cell_config_flags(detect)
    _add_base_config_flags(detect)

    grid = sub.add_parser(
        "grid",
        help="grid-search window size and epsilon on one or more files",
    )
    grid.add_argument("--data", required=True, nargs="+", metavar="PATH",
                      help="series CSV file(s)")
    _add_dataset_flags(grid)
    _add_grid_flags(grid)
    _add_base_config_flags(grid)

    bench = sub.add_parser(
        "bench",
        help="grid-search every CSV under a corpus root and summarize by category",
    )
    bench.add_argument("--root", default=None, metavar="DIR",
                       help=f"corpus root (default: ${CORPUS_ROOT_ENV})")
    _add_dataset_flags(bench)
    _add_grid_flags(bench)
    _add_base_config_flags(bench)

    sub.add_parser("version", help="print the package version")
    return parser


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("dataset")
    g.add_argument("--format", choices=("nab", "yahoo"), required=True,
                   help="corpus layout: shared windows JSON (nab) or per-row labels (yahoo)")
    g.add_argument("--labels", default=None, metavar="PATH",
                   help="combined anomaly windows JSON (nab format)")
    g.add_argument("--unlabeled", action="store_true",
                   help="score against an empty label set instead of requiring labels")
    g.add_argument("--fill-missing", action="store_true",
                   help="carry the last value over gaps instead of failing")
    g.add_argument("--timestamp-column", default=None, metavar="NAME")
    g.add_argument("--value-column", default=None, metavar="NAME")
    g.add_argument("--label-column", default=None, metavar="NAME")


def _add_grid_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("grid")
    g.add_argument("--grid-preset", choices=("nab", "yahoo"), default=None,
                   help="named grid (default: matches --format)")
    g.add_argument("--window-sizes", type=_int_list, default=None, metavar="N,N,...",
                   help="explicit window sizes, ascending")
    g.add_argument("--epsilons", type=_float_list, default=None, metavar="X,X,...",
                   help="explicit epsilons, ascending")
    g.add_argument("--out", default=".", metavar="DIR", help="report directory (default .)")
    g.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="worker processes for grid cells (default 1)")
    g.add_argument("--seed", type=int, default=0, metavar="N",
                   help="master seed; each (file, cell) derives its own (default 0)")
    g.add_argument("--exclude-warmup", action="store_true",
                   help="drop warm-up records from scoring")


def _config_from(options: argparse.Namespace) -> DetectorConfig:
    config = DetectorConfig(
        window_size=getattr(options, "window_size", 100),
        ni_size=options.ni_size,
        no_size=options.no_size,
        ts=options.ts,
        mod=options.mod,
        c=options.c,
        sim=options.sim,
        xi=options.xi,
        epsilon=getattr(options, "epsilon", 3.0),
        seed=getattr(options, "seed", 0),
        deviation=options.deviation,
        strict_threshold=options.strict_threshold,
        correction_target=options.correction_target,
    )
    config.validate()
    return config


def _grid_from(options: argparse.Namespace, base: DetectorConfig) -> GridSpec:
    if options.window_sizes or options.epsilons:
        if not (options.window_sizes and options.epsilons):
            raise ConfigError("--window-sizes and --epsilons must be given together")
        return GridSpec(options.window_sizes, options.epsilons, base)
    preset = options.grid_preset or options.format
    return GridSpec.preset(preset, base)


def _column_map(options: argparse.Namespace) -> Optional[dict]:
    cmap = {}
    if options.timestamp_column:
        cmap["timestamp"] = options.timestamp_column
    if getattr(options, "value_column", None):
        cmap["value"] = options.value_column
    if getattr(options, "label_column", None):
        cmap["label"] = options.label_column
    return cmap or None


class _RecordWriter:
    """Serializes records to one open stream, flushing per record by default."""

    def __init__(self, handle, fmt: str, buffered: bool):
        self.handle = handle
        self.fmt = fmt
        self.buffered = buffered
        self._csv = csv.writer(handle, lineterminator="\n") if fmt == "csv" else None

    def header(self, config: DetectorConfig) -> None:
        self.handle.write("# config " + json.dumps(asdict(config), sort_keys=True) + "\n")
        if self._csv is not None:
            self._csv.writerow(["t", "x", "y", "e", "u"])
        self._flush()

    def write(self, record: DetectionRecord) -> None:
        if self._csv is not None:
            y = "NaN" if record.y is None else repr(record.y)
            e = "inf" if math.isinf(record.e) else repr(record.e)
            self._csv.writerow([record.t, repr(record.x), y, e, str(record.u).lower()])
        else:
            self.handle.write(record_to_json(record) + "\n")
        self._flush()

    def _flush(self) -> None:
        if not self.buffered:
            self.handle.flush()


def _iter_line_values(handle):
    for line_num, line in enumerate(handle, start=1):
        raw = line.strip()
        if not raw:
            continue
        try:
            yield line_num, float(raw)
        except ValueError:
            raise DatasetError(f"line {line_num}: not a number: {raw!r}") from None


def _iter_csv_values(handle, value_column: Optional[str]):
    reader = csv.DictReader(handle)
    if reader.fieldnames is None:
        raise DatasetError("empty CSV input")
    candidates = (value_column,) if value_column else ("value", "values", "v")
    col = next((c for c in candidates if c in reader.fieldnames), None)
    if col is None:
        raise DatasetError(f"no value column in CSV header {reader.fieldnames}")
    for row in reader:
        raw = (row.get(col) or "").strip()
        try:
            yield reader.line_num, float(raw)
        except ValueError:
            raise DatasetError(
                f"line {reader.line_num}: not a number: {raw!r}"
            ) from None


def cmd_detect(inv: CliInvocation) -> int:
    options = inv.options
    detector = Detector(inv.config)

    in_path = options.input
    fmt = options.input_format
    if fmt == "auto":
        fmt = "csv" if in_path != "-" and in_path.endswith(".csv") else "lines"
    try:
        in_handle = sys.stdin if in_path == "-" else open(in_path, encoding="utf-8", newline="")
    except OSError as err:
        log.error("cannot open input: %s", err)
        return EXIT_DATA
    out_handle = None
    try:
        out_handle = sys.stdout if options.output == "-" else open(options.output, "w", encoding="utf-8", newline="")
        writer = _RecordWriter(out_handle, options.format, options.buffered)
        writer.header(inv.config)
        values = (
            _iter_line_values(in_handle)
            if fmt == "lines"
            else _iter_csv_values(in_handle, options.value_column)
        )
        for line_num, value in values:
            try:
                records = detector.step(value)
            except ValueError as err:
                raise DatasetError(f"line {line_num}: {err}") from None
            for record in records:
                writer.write(record)
        for record in detector.flush():
            writer.write(record)
        if options.buffered:
            out_handle.flush()
    except DatasetError as err:
        log.error("%s", err)
        return EXIT_DATA
    except OSError as err:
        log.error("i/o error: %s", err)
        return EXIT_DATA
    except BrokenPipeError:
        return EXIT_OK
    finally:
        if in_handle is not sys.stdin:
            in_handle.close()
        if out_handle not in (None, sys.stdout):
            out_handle.close()
    return EXIT_OK


def cmd_grid(inv: CliInvocation) -> int:
    options = inv.options
    grid = _grid_from(options, inv.config)
    results = []
    for raw_path in options.data:
        spec = DatasetSpec(
            data_path=Path(raw_path),
            format=options.format,
            labels_path=Path(options.labels) if options.labels else None,
            unlabeled=options.unlabeled,
            column_map=_column_map(options),
            fill_missing=options.fill_missing,
        )
        series = load_series(spec)
        result = grid_search(
            series,
            grid,
            seed=options.seed,
            jobs=options.jobs,
            exclude_warmup=options.exclude_warmup,
        )
        write_reports(result, options.out)
        results.append(result)
        best = result.best
        if best is not None:
            log.info(
                "%s: best F=%.4f at window_size=%d epsilon=%g",
                result.file_key, best.metrics.f_measure, best.window_size, best.epsilon,
            )
    write_category_summary(results, Path(options.out) / "categories.csv")
    return EXIT_OK


def cmd_bench(inv: CliInvocation) -> int:
    options = inv.options
    root = options.root or os.environ.get(CORPUS_ROOT_ENV)
    if not root:
        raise ConfigError(f"--root not given and ${CORPUS_ROOT_ENV} is unset")
    grid = _grid_from(options, inv.config)
    bench = run_bench(
        root,
        options.format,
        grid,
        options.out,
        labels_path=Path(options.labels) if options.labels else None,
        unlabeled=options.unlabeled,
        fill_missing=options.fill_missing,
        seed=options.seed,
        jobs=options.jobs,
        exclude_warmup=options.exclude_warmup,
    )
    log.info(
        "bench complete: %d scored, %d failed, reports in %s",
        len(bench.results), len(bench.failures), bench.out_dir,
    )
    if bench.failures:
        for failure in bench.failures:
            log.error("failed %s: %s", failure["file"], failure["error"])
        return EXIT_DATA
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    options = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if options.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    if options.command == "version":
        print(f"esnn-anomaly {__version__}")
        return EXIT_OK
    try:
        config = _config_from(options)
        inv = CliInvocation(command=options.command, options=options, config=config)
        if options.command == "detect":
            return cmd_detect(inv)
        if options.command == "grid":
            return cmd_grid(inv)
        return cmd_bench(inv)
    except ConfigError as err:
        log.error("configuration: %s", err)
        return EXIT_CONFIG
    except DatasetError as err:
        log.error("%s", err)
        return EXIT_DATA
    except OSError as err:
        log.error("i/o error: %s", err)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
