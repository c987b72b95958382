"""Streaming anomaly detector over a single numeric series.

Every incoming value is encoded against the current window, predicted by the
first output neuron pushed over the firing threshold, and flagged when its
prediction error stands out from the recent error history. A fresh candidate
neuron is built from every value, corrected toward the input when the value
looked normal, and folded into the bounded repository. One pass, no labels.

The first window_size values are the warm-up: no neurons are created and
nothing is flagged. Their predictions are drawn from a normal distribution
over the initial window, which is only known once the window has filled, so
warm-up records are emitted in one batch (still ordered by t) at that point;
flush() emits them early for streams shorter than the window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

import numpy as np
from numba import njit

from .encoding import GrfEncoder, SlidingWindow, _encode_from_window, _window_mean_var
from .repository import NeuronParams, NeuronRepository, _fires_first, _integrate
from .rng import CANDIDATE_STREAM, WARMUP_STREAM, SplitStream

__all__ = [
    "ConfigError",
    "DetectionRecord",
    "Detector",
    "DetectorConfig",
    "ErrorHistory",
    "classify_anomaly",
]

_MAX_SEED = (1 << 64) - 1


class ConfigError(ValueError):
    """Raised when a DetectorConfig carries out-of-range fields."""


@dataclass
class DetectorConfig:
    """Detector parameters.

    Attributes:
        window_size: values in the sliding window (and warm-up length), >= 1.
        ni_size: input neurons (receptive fields), >= 3.
        no_size: output repository capacity, >= 1.
        ts: time scale of the firing-time mapping, > 0.
        mod: per-rank weight decay, in (0, 1).
        c: fraction of the maximal potential used as firing threshold, in (0, 1].
        sim: weight-distance threshold for merging candidates, in (0, 1].
        xi: correction step toward the input for unflagged values, in (0, 1].
        epsilon: error deviation multiplier for flagging, >= 2.
        seed: master seed for all random draws, 64-bit unsigned.
        deviation: "std" scores errors against the standard deviation of the
            recent error history and draws predictions with the window's
            standard deviation as scale; "variance" uses the variance in both
            places instead.
        strict_threshold: flag only when the error excess strictly exceeds
            epsilon times the deviation; by default equality already flags,
            which makes zero-deviation histories flag every matching value.
        correction_target: "candidate" corrects the fresh candidate's output
            value; "fired" corrects the stored neuron that produced the
            prediction instead.
    """

    window_size: int = 100
    ni_size: int = 10
    no_size: int = 50
    ts: float = 1000.0
    mod: float = 0.6
    c: float = 0.6
    sim: float = 0.17
    xi: float = 0.9
    epsilon: float = 3.0
    seed: int = 0
    deviation: str = "std"
    strict_threshold: bool = False
    correction_target: str = "candidate"

    def validate(self) -> None:
        """Raise ConfigError naming every out-of-range field."""
        problems = []
        if not isinstance(self.window_size, int) or self.window_size < 1:
            problems.append("window_size: must be an integer >= 1")
        if not isinstance(self.ni_size, int) or self.ni_size < 3:
            problems.append("ni_size: must be an integer >= 3")
        if not isinstance(self.no_size, int) or self.no_size < 1:
            problems.append("no_size: must be an integer >= 1")
        if not self.ts > 0:
            problems.append("ts: must be positive")
        if not 0.0 < self.mod < 1.0:
            problems.append("mod: must lie in (0, 1)")
        if not 0.0 < self.c <= 1.0:
            problems.append("c: must lie in (0, 1]")
        if not 0.0 < self.sim <= 1.0:
            problems.append("sim: must lie in (0, 1]")
        if not 0.0 < self.xi <= 1.0:
            problems.append("xi: must lie in (0, 1]")
        if not self.epsilon >= 2.0:
            problems.append("epsilon: must be at least 2")
        if not isinstance(self.seed, int) or not 0 <= self.seed <= _MAX_SEED:
            problems.append("seed: must be a 64-bit unsigned integer")
        if self.deviation not in ("std", "variance"):
            problems.append('deviation: must be "std" or "variance"')
        if self.correction_target not in ("candidate", "fired"):
            problems.append('correction_target: must be "candidate" or "fired"')
        if problems:
            raise ConfigError("; ".join(problems))


class DetectionRecord(NamedTuple):
    """Outcome for one stream value.

    y is None and e is infinite when no output neuron fired. u is the
    anomaly flag; it is always False during warm-up.
    """

    t: int
    x: float
    y: Optional[float]
    e: float
    u: bool


@njit(cache=True)
def _classify(ehist, uhist, head, count, e_t, epsilon, use_std, strict):
    """Flag e_t against the unflagged part of the error history ring."""
    cap = ehist.shape[0]
    n = 0
    s = 0.0
    for i in range(count):
        idx = (head + i) % cap
        if uhist[idx] == 0:
            n += 1
            s += ehist[idx]
    if n == 0:
        return False
    mean = s / n
    ss = 0.0
    for i in range(count):
        idx = (head + i) % cap
        if uhist[idx] == 0:
            d = ehist[idx] - mean
            ss += d * d
    var = ss / n
    dev = math.sqrt(var) if use_std else var
    diff = e_t - mean
    if strict:
        return diff > epsilon * dev
    return diff >= epsilon * dev


def classify_anomaly(
    errors,
    flags,
    e_t: float,
    *,
    epsilon: float,
    deviation: str = "std",
    strict: bool = False,
) -> bool:
    """Decide whether error e_t is anomalous against its history.

    Only history entries whose flag is False participate; with no such
    entries the answer is False. The error excess over the history mean is
    compared against epsilon times the population standard deviation
    (deviation="std") or variance (deviation="variance") of those entries.
    """
    errors = np.ascontiguousarray(errors, dtype=np.float64)
    flag_arr = np.asarray([1 if f else 0 for f in flags], dtype=np.uint8)
    if errors.shape[0] != flag_arr.shape[0]:
        raise ValueError("errors and flags must have equal length")
    if deviation not in ("std", "variance"):
        raise ValueError('deviation: must be "std" or "variance"')
    if errors.shape[0] == 0:
        return False
    return bool(
        _classify(
            errors,
            flag_arr,
            0,
            errors.shape[0],
            float(e_t),
            float(epsilon),
            deviation == "std",
            bool(strict),
        )
    )


class ErrorHistory:
    """Ring of the (error, flag) pairs preceding the current step.

    Capacity is window_size - 1: exactly the steps the classifier may look
    back over. A capacity of zero (window_size 1) degenerates to an always
    empty history.
    """

    __slots__ = ("errors", "flags", "head", "count")

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.errors = np.zeros(capacity, dtype=np.float64)
        self.flags = np.zeros(capacity, dtype=np.uint8)
        self.head = 0
        self.count = 0

    @property
    def capacity(self) -> int:
        return self.errors.shape[0]

    def __len__(self) -> int:
        return self.count

    def append(self, error: float, flag: bool) -> None:
        cap = self.errors.shape[0]
        if cap == 0:
            return
        if self.count == cap:
            self.errors[self.head] = error
            self.flags[self.head] = 1 if flag else 0
            self.head = (self.head + 1) % cap
        else:
            idx = (self.head + self.count) % cap
            self.errors[idx] = error
            self.flags[idx] = 1 if flag else 0
            self.count += 1


class Detector:
    """Online detector for one univariate stream.

    step() consumes one value and returns the records it can emit so far:
    nothing while the warm-up window is filling, the whole warm-up batch when
    it fills, and exactly one record per value afterwards. flush() emits the
    warm-up batch for streams that end before the window fills. run() folds
    step() over a whole stream and flushes.

    Identical configs (seed included) replay identical records, bit for bit.
    Warm-up draws and candidate draws use separate substreams of the seed, so
    neither shifts the other.
    """

    def __init__(self, config: DetectorConfig):
        config.validate()
        self.config = config
        self.window = SlidingWindow(config.window_size)
        self.encoder = GrfEncoder(config.ni_size, config.ts)
        self.repository = NeuronRepository(
            NeuronParams(
                ni_size=config.ni_size,
                no_size=config.no_size,
                mod=config.mod,
                c=config.c,
                sim=config.sim,
            )
        )
        self.history = ErrorHistory(config.window_size - 1)
        self._warmup_stream = SplitStream(config.seed, WARMUP_STREAM)
        self._candidate_stream = SplitStream(config.seed, CANDIDATE_STREAM)
        self._pending: list[float] = []
        self._warm = False
        self._t = 0
        self._use_std = config.deviation == "std"
        self._correct_candidate = config.correction_target == "candidate"
        self._cand_weights = np.zeros(config.ni_size, dtype=np.float64)

    @property
    def steps_seen(self) -> int:
        return self._t

    def step(self, x: float) -> list[DetectionRecord]:
        """Consume one value; returns zero or more records (see class docs)."""
        xf = float(x)
        if not math.isfinite(xf):
            raise ValueError(f"non-finite input value: {x!r}")
        t = self._t
        self._t = t + 1
        self.window.push(xf)
        if not self._warm:
            self._pending.append(xf)
            if len(self._pending) == self.config.window_size:
                return self._emit_warmup()
            return []
        return [self._advance(xf, t)]

    def flush(self) -> list[DetectionRecord]:
        """Emit pending warm-up records for a stream that ended early."""
        if self._warm or not self._pending:
            return []
        return self._emit_warmup()

    def run(self, values: Iterable[float]) -> list[DetectionRecord]:
        """Detect over a whole stream; one record per value, in order."""
        records: list[DetectionRecord] = []
        index = -1
        try:
            for index, x in enumerate(values):
                records.extend(self.step(x))
        except ValueError as err:
            raise ValueError(f"value at index {index}: {err}") from None
        records.extend(self.flush())
        return records

    def _window_stats(self) -> tuple[float, float]:
        mean, var = _window_mean_var(self.window.values, self.window.count)
        return float(mean), (math.sqrt(var) if self._use_std else float(var))

    def _emit_warmup(self) -> list[DetectionRecord]:
        mean, scale = self._window_stats()
        base = self._t - len(self._pending)
        records = []
        for i, xv in enumerate(self._pending):
            y = self._warmup_stream.normal(mean, scale)
            e = abs(xv - y)
            self.history.append(e, False)
            records.append(DetectionRecord(base + i, xv, y, e, False))
        self._pending.clear()
        self._warm = True
        return records

    def _advance(self, x: float, t: int) -> DetectionRecord:
        cfg = self.config
        win = self.window
        enc = self.encoder
        repo = self.repository
        hist = self.history

        enc.width = float(
            _encode_from_window(
                win.values,
                win.count,
                x,
                enc.ts,
                enc.centers,
                enc.excitations,
                enc.firing_times,
                enc.orders,
                enc.firing_order,
            )
        )
        fired, _ranks = _fires_first(
            repo._weights,
            repo._size_box[0],
            enc.firing_order,
            repo.modpow,
            repo.gamma,
            repo._psp,
        )
        if fired < 0:
            y: Optional[float] = None
            e = math.inf
            u = True
        else:
            y = float(repo._values[fired])
            e = abs(x - y)
            u = bool(
                _classify(
                    hist.errors,
                    hist.flags,
                    hist.head,
                    hist.count,
                    e,
                    cfg.epsilon,
                    self._use_std,
                    cfg.strict_threshold,
                )
            )
        hist.append(e, u)

        mean, scale = self._window_stats()
        cand_value = self._candidate_stream.normal(mean, scale)
        np.take(repo.modpow, enc.orders, out=self._cand_weights)
        if not u:
            if self._correct_candidate:
                cand_value = cand_value + (x - cand_value) * cfg.xi
            else:
                # u is False only when a neuron fired
                repo._values[fired] += (x - repo._values[fired]) * cfg.xi
        _integrate(
            repo._weights,
            repo._values,
            repo._taus,
            repo._merges,
            repo._size_box,
            self._cand_weights,
            cand_value,
            float(t),
            cfg.sim,
            cfg.no_size,
        )
        return DetectionRecord(t, x, y, e, u)
