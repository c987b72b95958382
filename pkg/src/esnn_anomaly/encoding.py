"""Input encoding: sliding stream window and Gaussian receptive fields.

A fixed-capacity window over the most recent values pins the current input
range. A small bank of Gaussian receptive fields spreads each value over the
input neurons: every field gets an excitation in (0, 1], a firing time that
falls as excitation rises, and a firing rank. Ranks are what the rest of the
detector consumes; ties go to the lower field index.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

__all__ = ["GrfEncoder", "SlidingWindow"]


@njit(cache=True)
def _window_minmax(values, count):
    lo = values[0]
    hi = values[0]
    for i in range(count):
        v = values[i]
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    return lo, hi


@njit(cache=True)
def _window_mean_var(values, count):
    # two-pass population variance; cheap at these sizes and never negative
    s = 0.0
    for i in range(count):
        s += values[i]
    mean = s / count
    ss = 0.0
    for i in range(count):
        d = values[i] - mean
        ss += d * d
    return mean, ss / count


@njit(cache=True)
def _fit_fields(imin, imax, centers):
    """Place field centers across [imin, imax]; returns the field width."""
    ni = centers.shape[0]
    spacing = (imax - imin) / (ni - 2)
    for j in range(ni):
        centers[j] = imin + (2 * j - 3) * 0.5 * spacing
    width = spacing
    if width <= 0.0:
        # constant window: centers collapse, so floor the width to keep
        # the excitation well-defined
        width = 1e-9 * max(1.0, abs(imax))
    return width


@njit(cache=True)
def _encode_value(x, centers, width, ts, exc, times, orders, firing_order):
    ni = centers.shape[0]
    for j in range(ni):
        z = (x - centers[j]) / width
        exc[j] = math.exp(-0.5 * z * z)
        times[j] = ts * (1.0 - exc[j])
    for j in range(ni):
        firing_order[j] = j
    # insertion sort on firing time; stable, so equal times keep index order
    for j in range(1, ni):
        key = firing_order[j]
        kt = times[key]
        i = j - 1
        while i >= 0 and times[firing_order[i]] > kt:
            firing_order[i + 1] = firing_order[i]
            i -= 1
        firing_order[i + 1] = key
    for pos in range(ni):
        orders[firing_order[pos]] = pos


@njit(cache=True)
def _encode_from_window(values, count, x, ts, centers, exc, times, orders, firing_order):
    """Fit fields to the window range and encode x in one compiled call."""
    lo, hi = _window_minmax(values, count)
    width = _fit_fields(lo, hi, centers)
    _encode_value(x, centers, width, ts, exc, times, orders, firing_order)
    return width


class SlidingWindow:
    """Fixed-capacity FIFO over the most recent stream values.

    Backed by a preallocated ring, so pushes never allocate. Statistics are
    recomputed on demand with compiled scans and agree with brute-force
    recomputation over the live values; variance is the population variance.
    """

    __slots__ = ("values", "head", "count")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("window capacity must be at least 1")
        self.values = np.zeros(capacity, dtype=np.float64)
        self.head = 0  # next slot to write
        self.count = 0

    def __len__(self) -> int:
        return self.count

    @property
    def capacity(self) -> int:
        return self.values.shape[0]

    def push(self, x: float) -> None:
        """Append x, evicting the oldest value once the window is full."""
        xf = float(x)
        if not math.isfinite(xf):
            raise ValueError(f"non-finite value: {x!r}")
        self.values[self.head] = xf
        self.head = (self.head + 1) % self.values.shape[0]
        if self.count < self.values.shape[0]:
            self.count += 1

    def to_array(self) -> np.ndarray:
        """Live values, oldest first."""
        if self.count < self.values.shape[0]:
            return self.values[: self.count].copy()
        return np.concatenate((self.values[self.head :], self.values[: self.head]))

    def _require_values(self):
        if self.count == 0:
            raise ValueError("empty window")

    def minimum(self) -> float:
        self._require_values()
        return float(_window_minmax(self.values, self.count)[0])

    def maximum(self) -> float:
        self._require_values()
        return float(_window_minmax(self.values, self.count)[1])

    def mean(self) -> float:
        self._require_values()
        return float(_window_mean_var(self.values, self.count)[0])

    def variance(self) -> float:
        self._require_values()
        return float(_window_mean_var(self.values, self.count)[1])

    def std(self) -> float:
        return math.sqrt(self.variance())


class GrfEncoder:
    """Bank of Gaussian receptive fields over the current window range.

    fit() pins the field centers and shared width to a window's [min, max];
    encode() then turns one value into per-field excitations, firing times,
    and firing ranks. All arrays are preallocated and overwritten in place
    on every call.

    Attributes:
        centers: field center per input neuron.
        width: shared field width (floored when the window is constant).
        excitations: last encoded excitation per field, in (0, 1].
        firing_times: ts * (1 - excitation) per field.
        orders: firing rank per field, 0 = fires first.
        firing_order: field indices sorted by rank (inverse of orders).
    """

    def __init__(self, ni_size: int, ts: float):
        if ni_size < 3:
            raise ValueError("ni_size must be at least 3")
        if not ts > 0:
            raise ValueError("ts must be positive")
        self.ni_size = int(ni_size)
        self.ts = float(ts)
        self.centers = np.zeros(self.ni_size, dtype=np.float64)
        self.width = 0.0
        self.excitations = np.zeros(self.ni_size, dtype=np.float64)
        self.firing_times = np.zeros(self.ni_size, dtype=np.float64)
        self.orders = np.zeros(self.ni_size, dtype=np.int64)
        self.firing_order = np.zeros(self.ni_size, dtype=np.int64)
        self._fitted = False

    def fit(self, window: SlidingWindow) -> None:
        """Fit the fields to the window's current [min, max] range."""
        self.fit_range(window.minimum(), window.maximum())

    def fit_range(self, imin: float, imax: float) -> None:
        if imax < imin:
            raise ValueError("imax must not be below imin")
        self.width = float(_fit_fields(imin, imax, self.centers))
        self._fitted = True

    def encode(self, x: float) -> np.ndarray:
        """Encode one value; returns the per-field firing ranks."""
        if not self._fitted:
            raise ValueError("encoder not fitted to a window yet")
        _encode_value(
            float(x),
            self.centers,
            self.width,
            self.ts,
            self.excitations,
            self.firing_times,
            self.orders,
            self.firing_order,
        )
        return self.orders
