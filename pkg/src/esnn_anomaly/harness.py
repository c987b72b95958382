"""Corpus loading, per-file grid search, and report writing.

Two corpus layouts are understood. "nab" files are CSVs with timestamp and
value columns plus one shared JSON document mapping each file's relative
path to its anomaly windows. "yahoo" files carry a per-row anomaly label
column instead. Series are scored per file over a (window_size, epsilon)
grid; the best cell maximizes F-measure with ties going to the smaller
window, then the smaller epsilon. Category summaries are unweighted means of
per-file best F-measures, one category per parent directory.

Every (file, cell) evaluation derives its own detector seed from the master
seed, the file's key, and the cell coordinates, so results never depend on
scheduling or worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .detector import DetectionRecord, Detector, DetectorConfig
from .evaluation import LabelSet, MetricsReport, expand_labels, score

__all__ = [
    "SCHEMA_VERSION",
    "BenchResult",
    "CellResult",
    "DatasetError",
    "DatasetSpec",
    "FileResult",
    "GridSpec",
    "LoadedSeries",
    "derive_cell_seed",
    "evaluate_cell",
    "grid_search",
    "load_series",
    "run_bench",
    "write_category_summary",
    "write_reports",
]

SCHEMA_VERSION = 1

log = logging.getLogger(__name__)


class DatasetError(ValueError):
    """Raised for unreadable, malformed, or mislabeled dataset files."""


@dataclass
class DatasetSpec:
    """Where and how to read one series.

    column_map may rename the logical columns "timestamp", "value", and
    "label"; when absent, common header spellings are recognized. NAB-style
    data needs labels_path (the combined windows JSON) unless unlabeled is
    set explicitly.
    """

    data_path: Path
    format: str
    labels_path: Optional[Path] = None
    unlabeled: bool = False
    column_map: Optional[Mapping[str, str]] = None
    label_key: Optional[str] = None
    fill_missing: bool = False

    def __post_init__(self):
        self.data_path = Path(self.data_path)
        if self.labels_path is not None:
            self.labels_path = Path(self.labels_path)
        if self.format not in ("nab", "yahoo"):
            raise DatasetError(f'format must be "nab" or "yahoo", got {self.format!r}')
        if self.format == "nab" and self.labels_path is None and not self.unlabeled:
            raise DatasetError("nab format needs labels_path, or set unlabeled=True")


@dataclass
class LoadedSeries:
    """One parsed series plus its ground truth."""

    file_key: str
    category: str
    timestamps: list
    values: np.ndarray
    labels: LabelSet


def _parse_key(raw: str):
    """Timestamp parser: int, float, ISO datetime, else opaque string."""
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(raw)
    except ValueError:
        return raw


def file_key_for(path: Path) -> str:
    """Stable identity of a corpus file: parent directory slash filename."""
    path = Path(path)
    return f"{path.parent.name}/{path.name}" if path.parent.name else path.name


_TIMESTAMP_NAMES = ("timestamp", "timestamps", "time", "t")
_VALUE_NAMES = ("value", "values", "v")
_LABEL_NAMES = ("is_anomaly", "anomaly", "label", "is_outlier", "outlier")


def _resolve_column(header: Sequence[str], logical: str, candidates, column_map) -> str:
    if column_map and logical in column_map:
        name = column_map[logical]
        if name not in header:
            raise DatasetError(f"column {name!r} (for {logical}) not in header {list(header)}")
        return name
    for name in candidates:
        if name in header:
            return name
    raise DatasetError(f"no {logical} column found in header {list(header)}")


def _parse_value(raw: str, line_num: int, path: Path, last, fill_missing: bool) -> float:
    missing = raw is None or raw.strip() == ""
    if not missing:
        try:
            v = float(raw)
        except ValueError:
            raise DatasetError(f"{path}, line {line_num}: not a number: {raw!r}") from None
        if math.isfinite(v):
            return v
        missing = True
    if not fill_missing:
        raise DatasetError(
            f"{path}, line {line_num}: missing value (pass fill_missing to carry the last one)"
        )
    if last is None:
        raise DatasetError(f"{path}, line {line_num}: missing value with nothing to carry")
    return last


def load_series(spec: DatasetSpec) -> LoadedSeries:
    """Read one series and its labels; all parse errors name file and line."""
    path = spec.data_path
    timestamps: list = []
    values: list[float] = []
    label_flags: list[int] = []
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as err:
        raise DatasetError(f"cannot open {path}: {err}") from None
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise DatasetError(f"{path}: empty file")
        ts_col = _resolve_column(reader.fieldnames, "timestamp", _TIMESTAMP_NAMES, spec.column_map)
        val_col = _resolve_column(reader.fieldnames, "value", _VALUE_NAMES, spec.column_map)
        label_col = None
        if spec.format == "yahoo":
            label_col = _resolve_column(reader.fieldnames, "label", _LABEL_NAMES, spec.column_map)
        last: Optional[float] = None
        for row in reader:
            line_num = reader.line_num
            raw_ts = row.get(ts_col)
            if raw_ts is None:
                raise DatasetError(f"{path}, line {line_num}: short row")
            ts = _parse_key(raw_ts)
            if timestamps and not timestamps[-1] < ts:
                raise DatasetError(f"{path}, line {line_num}: timestamps not strictly increasing")
            v = _parse_value(row.get(val_col), line_num, path, last, spec.fill_missing)
            last = v
            timestamps.append(ts)
            values.append(v)
            if label_col is not None:
                raw_label = (row.get(label_col) or "").strip()
                if raw_label not in ("0", "1"):
                    raise DatasetError(
                        f"{path}, line {line_num}: label must be 0 or 1, got {raw_label!r}"
                    )
                label_flags.append(int(raw_label))
    if not values:
        raise DatasetError(f"{path}: no data rows")

    key = spec.label_key or file_key_for(path)
    if spec.format == "yahoo":
        labels = LabelSet.from_points(
            t for t, flag in zip(timestamps, label_flags) if flag
        )
    elif spec.unlabeled:
        labels = LabelSet.empty()
    else:
        labels = _load_nab_windows(spec.labels_path, key, path)
    return LoadedSeries(
        file_key=key,
        category=Path(key).parent.name or path.parent.name,
        timestamps=timestamps,
        values=np.asarray(values, dtype=np.float64),
        labels=labels,
    )


def _load_nab_windows(labels_path: Path, key: str, data_path: Path) -> LabelSet:
    try:
        with open(labels_path, encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as err:
        raise DatasetError(f"cannot open {labels_path}: {err}") from None
    except json.JSONDecodeError as err:
        raise DatasetError(f"{labels_path}: invalid JSON: {err}") from None
    candidates = [key, Path(key).name]
    for cand in candidates:
        if cand in doc:
            pairs = [(_parse_key(a), _parse_key(b)) for a, b in doc[cand]]
            return LabelSet.from_windows(pairs)
    raise DatasetError(
        f"{labels_path}: no label entry for {data_path.name} (tried keys {candidates})"
    )


@dataclass
class GridSpec:
    """The (window_size, epsilon) search grid plus the fixed base config."""

    window_sizes: tuple
    epsilons: tuple
    base: DetectorConfig

    def __init__(self, window_sizes, epsilons, base: Optional[DetectorConfig] = None):
        self.window_sizes = tuple(int(w) for w in window_sizes)
        self.epsilons = tuple(float(e) for e in epsilons)
        self.base = base if base is not None else DetectorConfig()
        if not self.window_sizes or not self.epsilons:
            raise ValueError("grid must have at least one window size and one epsilon")
        if list(self.window_sizes) != sorted(set(self.window_sizes)):
            raise ValueError("window_sizes must be strictly ascending")
        if list(self.epsilons) != sorted(set(self.epsilons)):
            raise ValueError("epsilons must be strictly ascending")

    @classmethod
    def preset(cls, name: str, base: Optional[DetectorConfig] = None) -> "GridSpec":
        """Named grids: "nab" is 100..600 x 2..7, "yahoo" is 20..500 x 2..17."""
        if name == "nab":
            return cls(range(100, 700, 100), range(2, 8), base)
        if name == "yahoo":
            return cls(range(20, 520, 20), range(2, 18), base)
        raise ValueError(f'unknown grid preset {name!r} (use "nab" or "yahoo")')

    def cells(self):
        for w in self.window_sizes:
            for eps in self.epsilons:
                yield w, eps


def derive_cell_seed(master_seed: int, file_key: str, window_size: int, epsilon: float) -> int:
    """Deterministic 64-bit seed for one (file, cell) evaluation."""
    material = f"{master_seed}|{file_key}|{window_size}|{epsilon!r}".encode()
    return int.from_bytes(hashlib.blake2b(material, digest_size=8).digest(), "big")


@dataclass
class CellResult:
    window_size: int
    epsilon: float
    seed: int
    metrics: Optional[MetricsReport] = None
    skipped: bool = False
    reason: Optional[str] = None


@dataclass
class FileResult:
    file_key: str
    category: str
    n_values: int
    exclude_warmup: bool
    cells: list
    best: Optional[CellResult]
    best_records: Optional[list] = None
    best_truth: Optional[np.ndarray] = None


def evaluate_cell(
    values,
    truth,
    base: DetectorConfig,
    window_size: int,
    epsilon: float,
    seed: int,
    exclude_warmup: bool,
) -> MetricsReport:
    """Run one detector configuration over the series and score it."""
    config = replace(
        base, window_size=int(window_size), epsilon=float(epsilon), seed=int(seed)
    )
    detector = Detector(config)
    records = detector.run(values)
    flags = np.fromiter((r.u for r in records), dtype=bool, count=len(records))
    truth = np.asarray(truth, dtype=bool)
    cut = min(config.window_size, len(flags)) if exclude_warmup else 0
    return score(flags[cut:], truth[cut:])


_worker_series: dict = {}


def _init_worker(values, truth):
    _worker_series["values"] = values
    _worker_series["truth"] = truth


def _cell_task(args):
    base, window_size, epsilon, seed, exclude_warmup = args
    metrics = evaluate_cell(
        _worker_series["values"],
        _worker_series["truth"],
        base,
        window_size,
        epsilon,
        seed,
        exclude_warmup,
    )
    return window_size, epsilon, metrics


def grid_search(
    series: LoadedSeries,
    grid: GridSpec,
    *,
    seed: int = 0,
    jobs: int = 1,
    exclude_warmup: bool = False,
) -> FileResult:
    """Evaluate the whole grid on one series and pick the best cell.

    Cells whose window would swallow the entire series are skipped and
    recorded as such. With jobs > 1 the cells run in a bounded process pool;
    results are merged by cell key, so worker count never changes output.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    truth = expand_labels(series.labels, series.timestamps)
    n = len(series.values)
    values = series.values.tolist()

    runnable = []
    cells: dict[tuple, CellResult] = {}
    for w, eps in grid.cells():
        cell_seed = derive_cell_seed(seed, series.file_key, w, eps)
        if w >= n:
            cells[(w, eps)] = CellResult(
                w, eps, cell_seed, skipped=True,
                reason=f"window_size {w} >= series length {n}",
            )
        else:
            runnable.append((w, eps, cell_seed))

    if jobs == 1 or len(runnable) <= 1:
        for w, eps, cell_seed in runnable:
            metrics = evaluate_cell(values, truth, grid.base, w, eps, cell_seed, exclude_warmup)
            cells[(w, eps)] = CellResult(w, eps, cell_seed, metrics=metrics)
    else:
        tasks = [
            (grid.base, w, eps, cell_seed, exclude_warmup)
            for w, eps, cell_seed in runnable
        ]
        with ProcessPoolExecutor(
            max_workers=min(jobs, len(tasks)),
            initializer=_init_worker,
            initargs=(values, truth),
        ) as pool:
            for (w, eps, cell_seed), (_, _, metrics) in zip(
                runnable, pool.map(_cell_task, tasks)
            ):
                cells[(w, eps)] = CellResult(w, eps, cell_seed, metrics=metrics)

    ordered = [cells[(w, eps)] for w, eps in grid.cells()]
    best: Optional[CellResult] = None
    for cell in ordered:
        if cell.skipped:
            continue
        if best is None or cell.metrics.f_measure > best.metrics.f_measure:
            best = cell

    best_records = None
    best_truth = None
    if best is not None:
        config = replace(
            grid.base,
            window_size=best.window_size,
            epsilon=best.epsilon,
            seed=best.seed,
        )
        best_records = Detector(config).run(values)
        best_truth = truth
    return FileResult(
        file_key=series.file_key,
        category=series.category,
        n_values=n,
        exclude_warmup=exclude_warmup,
        cells=ordered,
        best=best,
        best_records=best_records,
        best_truth=best_truth,
    )


def _cell_dict(cell: CellResult) -> dict:
    out = {
        "window_size": cell.window_size,
        "epsilon": cell.epsilon,
        "seed": cell.seed,
        "skipped": cell.skipped,
    }
    if cell.skipped:
        out["reason"] = cell.reason
        return out
    m = cell.metrics
    out.update(
        precision=m.precision,
        recall=m.recall,
        f_measure=m.f_measure,
        tp=m.counts.tp,
        fp=m.counts.fp,
        fn=m.counts.fn,
        tn=m.counts.tn,
    )
    return out


def record_to_json(record: DetectionRecord, label: Optional[bool] = None) -> str:
    """One record as a JSON line; undefined prediction and error become null."""
    obj = {
        "t": record.t,
        "x": record.x,
        "y": record.y,
        "e": record.e if math.isfinite(record.e) else None,
        "u": record.u,
    }
    if label is not None:
        obj["label"] = label
    return json.dumps(obj)


def _safe_stem(file_key: str) -> str:
    return file_key.replace("/", "__").rsplit(".", 1)[0]


def write_reports(result: FileResult, out_dir) -> dict:
    """Write the per-file grid JSON and best-run JSONL; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = _safe_stem(result.file_key)

    grid_path = out_dir / f"{stem}.grid.json"
    doc = {
        "schema_version": SCHEMA_VERSION,
        "file": result.file_key,
        "category": result.category,
        "n_values": result.n_values,
        "warmup_excluded": result.exclude_warmup,
        "best": _cell_dict(result.best) if result.best else None,
        "cells": [_cell_dict(c) for c in result.cells],
    }
    grid_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    paths = {"grid": grid_path}
    if result.best_records is not None:
        points_path = out_dir / f"{stem}.best.jsonl"
        header = json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "file": result.file_key,
                "window_size": result.best.window_size,
                "epsilon": result.best.epsilon,
                "seed": result.best.seed,
            }
        )
        lines = [header]
        truth = result.best_truth
        for i, record in enumerate(result.best_records):
            label = bool(truth[i]) if truth is not None else None
            lines.append(record_to_json(record, label))
        points_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths["points"] = points_path
    return paths


def write_category_summary(results, out_path) -> Path:
    """Unweighted per-category means of the per-file best metrics, as CSV."""
    out_path = Path(out_path)
    groups: dict[str, list[FileResult]] = {}
    for result in results:
        groups.setdefault(result.category, []).append(result)
    rows = []
    for category in sorted(groups):
        scored = [r for r in groups[category] if r.best is not None]
        if not scored:
            log.warning("category %s has no scored files; omitted from summary", category)
            continue
        rows.append(
            (
                category,
                len(scored),
                sum(r.best.metrics.precision for r in scored) / len(scored),
                sum(r.best.metrics.recall for r in scored) / len(scored),
                sum(r.best.metrics.f_measure for r in scored) / len(scored),
            )
        )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# schema_version={SCHEMA_VERSION}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["category", "files", "mean_precision", "mean_recall", "mean_f_measure"])
        for row in rows:
            writer.writerow(row)
    return out_path


@dataclass
class BenchResult:
    results: list
    failures: list
    out_dir: Path
    summary_path: Optional[Path]
    manifest_path: Path


def run_bench(
    root,
    format: str,
    grid: GridSpec,
    out_dir,
    *,
    labels_path=None,
    unlabeled: bool = False,
    fill_missing: bool = False,
    seed: int = 0,
    jobs: int = 1,
    exclude_warmup: bool = False,
) -> BenchResult:
    """Grid-search every CSV under root and write all reports.

    Files failing to load or evaluate are collected, reported in the
    manifest, and do not stop the rest of the corpus.
    """
    root = Path(root)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_files = sorted(p for p in root.rglob("*.csv") if p.is_file())
    if labels_path is not None:
        data_files = [p for p in data_files if Path(labels_path) != p]
    results: list[FileResult] = []
    failures: list[dict] = []
    for path in data_files:
        key = file_key_for(path)
        try:
            series = load_series(
                DatasetSpec(
                    data_path=path,
                    format=format,
                    labels_path=labels_path,
                    unlabeled=unlabeled,
                    fill_missing=fill_missing,
                )
            )
            result = grid_search(
                series, grid, seed=seed, jobs=jobs, exclude_warmup=exclude_warmup
            )
            write_reports(result, out_dir)
            result.best_records = None  # written out; no need to keep them around
            result.best_truth = None
            results.append(result)
            log.info("scored %s (%d values)", key, result.n_values)
        except (DatasetError, ValueError) as err:
            log.warning("skipping %s: %s", key, err)
            failures.append({"file": key, "error": str(err)})

    summary_path = None
    if results:
        summary_path = write_category_summary(results, out_dir / "categories.csv")
    manifest_path = out_dir / "bench.json"
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "root": str(root),
        "format": format,
        "files_scored": [r.file_key for r in results],
        "files_failed": failures,
        "categories_csv": summary_path.name if summary_path else None,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return BenchResult(results, failures, out_dir, summary_path, manifest_path)
