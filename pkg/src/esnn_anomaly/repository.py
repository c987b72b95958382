"""Bounded evolving repository of output neurons.

An output neuron holds one weight per input field, a real output value used
as the prediction, the (averaged) time it was created or last updated, and a
merge count. Candidates are born from the firing ranks of the current value;
the repository either merges a candidate into its nearest neighbour, appends
it while there is room, or lets it replace the oldest neuron.

The firing threshold is a single global constant: every candidate is born
with the same multiset of weights, so the maximal post-synaptic potential,
and with it the threshold, is identical for every neuron ever stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "NeuronParams",
    "NeuronRepository",
    "OutputNeuron",
    "firing_threshold",
    "max_psp",
    "value_correction",
    "weight_sum_limit",
]


def weight_sum_limit(mod: float, ni_size: int) -> float:
    """Sum of a fresh candidate's weights: (1 - mod**ni_size) / (1 - mod).

    Merging preserves this sum, so it holds for every stored neuron too.
    """
    return (1.0 - mod**ni_size) / (1.0 - mod)


def max_psp(mod: float, ni_size: int) -> float:
    """Largest reachable post-synaptic potential: sum of mod**(2k)."""
    return (1.0 - mod ** (2 * ni_size)) / (1.0 - mod * mod)


def firing_threshold(mod: float, c: float, ni_size: int) -> float:
    """Global firing threshold: c times the maximal post-synaptic potential."""
    return c * max_psp(mod, ni_size)


@dataclass
class NeuronParams:
    """Structural parameters shared by the whole repository."""

    ni_size: int
    no_size: int
    mod: float
    c: float
    sim: float

    def validate(self) -> None:
        problems = []
        if self.ni_size < 3:
            problems.append("ni_size: must be at least 3")
        if self.no_size < 1:
            problems.append("no_size: must be at least 1")
        if not 0.0 < self.mod < 1.0:
            problems.append("mod: must lie in (0, 1)")
        if not 0.0 < self.c <= 1.0:
            problems.append("c: must lie in (0, 1]")
        if not 0.0 < self.sim <= 1.0:
            problems.append("sim: must lie in (0, 1]")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class OutputNeuron:
    """One output neuron; also the shape of a fresh candidate (merges == 1)."""

    weights: np.ndarray
    value: float
    tau: float
    merges: int = 1


def value_correction(neuron: OutputNeuron, x: float, xi: float) -> None:
    """Pull the neuron's output value toward x by the correction factor xi."""
    neuron.value = neuron.value + (x - neuron.value) * xi


@njit(cache=True)
def _fires_first(weights, size, firing_order, modpow, gamma, psp):
    """Accumulate potentials rank by rank; stop after the first rank at which
    any neuron exceeds gamma and pick the strongest (lowest index on ties).

    Returns (neuron index or -1, number of ranks consumed).
    """
    ni = firing_order.shape[0]
    for i in range(size):
        psp[i] = 0.0
    for rank in range(ni):
        j = firing_order[rank]
        m = modpow[rank]
        best = -1
        best_psp = 0.0
        for i in range(size):
            psp[i] += weights[i, j] * m
            if psp[i] > gamma and (best == -1 or psp[i] > best_psp):
                best = i
                best_psp = psp[i]
        if best >= 0:
            return best, rank + 1
    return -1, ni


@njit(cache=True)
def _nearest(weights, size, cand):
    best = 0
    best_d2 = 0.0
    for j in range(cand.shape[0]):
        d = cand[j] - weights[0, j]
        best_d2 += d * d
    for i in range(1, size):
        d2 = 0.0
        for j in range(cand.shape[0]):
            d = cand[j] - weights[i, j]
            d2 += d * d
        if d2 < best_d2:
            best = i
            best_d2 = d2
    return best, best_d2


@njit(cache=True)
def _merge(weights, values, taus, merges, i, cw, cv, ctau):
    m = merges[i]
    for j in range(cw.shape[0]):
        weights[i, j] = (cw[j] + m * weights[i, j]) / (m + 1)
    values[i] = (cv + m * values[i]) / (m + 1)
    taus[i] = (ctau + m * taus[i]) / (m + 1)
    merges[i] = m + 1


@njit(cache=True)
def _store(weights, values, taus, merges, i, cw, cv, ctau):
    for j in range(cw.shape[0]):
        weights[i, j] = cw[j]
    values[i] = cv
    taus[i] = ctau
    merges[i] = 1


@njit(cache=True)
def _integrate(weights, values, taus, merges, size_box, cw, cv, ctau, sim, no_size):
    """Merge, append, or replace-oldest; returns (action code, index).

    Action codes: 0 merged, 1 appended, 2 replaced.
    """
    size = size_box[0]
    if size > 0:
        i, d2 = _nearest(weights, size, cw)
        if math.sqrt(d2) <= sim:
            _merge(weights, values, taus, merges, i, cw, cv, ctau)
            return 0, i
    if size < no_size:
        _store(weights, values, taus, merges, size, cw, cv, ctau)
        size_box[0] = size + 1
        return 1, size
    oldest = 0
    for i in range(1, size):
        if taus[i] < taus[oldest]:
            oldest = i
    _store(weights, values, taus, merges, oldest, cw, cv, ctau)
    return 2, oldest


_ACTIONS = ("merged", "appended", "replaced")


class NeuronRepository:
    """The detector's evolving output layer.

    State lives in flat preallocated arrays sized for no_size neurons; rows
    beyond the current size are dead storage. All mutation goes through the
    compiled helpers above.
    """

    def __init__(self, params: NeuronParams):
        params.validate()
        self.params = params
        self.modpow = params.mod ** np.arange(params.ni_size, dtype=np.float64)
        self.max_psp = max_psp(params.mod, params.ni_size)
        self.gamma = firing_threshold(params.mod, params.c, params.ni_size)
        self._weights = np.zeros((params.no_size, params.ni_size), dtype=np.float64)
        self._values = np.zeros(params.no_size, dtype=np.float64)
        self._taus = np.zeros(params.no_size, dtype=np.float64)
        self._merges = np.zeros(params.no_size, dtype=np.int64)
        self._size_box = np.zeros(1, dtype=np.int64)
        self._psp = np.zeros(params.no_size, dtype=np.float64)

    @property
    def size(self) -> int:
        return int(self._size_box[0])

    def __len__(self) -> int:
        return self.size

    def neuron(self, index: int) -> OutputNeuron:
        """Copy of the stored neuron; mutating it does not touch the repository."""
        if not 0 <= index < self.size:
            raise IndexError(f"no neuron at index {index}")
        return OutputNeuron(
            weights=self._weights[index].copy(),
            value=float(self._values[index]),
            tau=float(self._taus[index]),
            merges=int(self._merges[index]),
        )

    def init_candidate(self, orders, value: float, tau: float) -> OutputNeuron:
        """Fresh candidate from firing ranks: weight j is mod**orders[j]."""
        orders = np.asarray(orders, dtype=np.int64)
        if orders.shape[0] != self.params.ni_size:
            raise ValueError("orders length must equal ni_size")
        return OutputNeuron(
            weights=self.modpow[orders],
            value=float(value),
            tau=float(tau),
            merges=1,
        )

    def fires_first(self, firing_order) -> tuple[int | None, int]:
        """First neuron pushed over the firing threshold, if any.

        firing_order lists field indices by rank (earliest first). Returns
        (neuron index or None, number of ranks consumed before stopping).
        """
        firing_order = np.asarray(firing_order, dtype=np.int64)
        idx, ranks = _fires_first(
            self._weights, self.size, firing_order, self.modpow, self.gamma, self._psp
        )
        return (None if idx < 0 else int(idx)), int(ranks)

    def find_most_similar(self, weights) -> tuple[int, float]:
        """Index of and Euclidean weight distance to the nearest stored neuron."""
        if self.size == 0:
            raise ValueError("empty repository")
        weights = np.asarray(weights, dtype=np.float64)
        idx, d2 = _nearest(self._weights, self.size, weights)
        return int(idx), math.sqrt(d2)

    def merge_into(self, index: int, candidate: OutputNeuron) -> None:
        """Average the candidate into the stored neuron, weighted by merge count."""
        if not 0 <= index < self.size:
            raise IndexError(f"no neuron at index {index}")
        if candidate.merges != 1:
            raise ValueError("candidate was already merged")
        _merge(
            self._weights,
            self._values,
            self._taus,
            self._merges,
            index,
            np.asarray(candidate.weights, dtype=np.float64),
            candidate.value,
            candidate.tau,
        )

    def insert_or_replace(self, candidate: OutputNeuron) -> tuple[str, int]:
        """Integrate a fresh candidate; returns (action, index).

        Actions: "merged" into the nearest neuron when its weight distance is
        within sim, "appended" while the repository has room, otherwise
        "replaced" the neuron with the smallest tau (lowest index on ties).
        """
        if candidate.merges != 1:
            raise ValueError("candidate was already merged")
        code, idx = _integrate(
            self._weights,
            self._values,
            self._taus,
            self._merges,
            self._size_box,
            np.asarray(candidate.weights, dtype=np.float64),
            candidate.value,
            candidate.tau,
            self.params.sim,
            self.params.no_size,
        )
        return _ACTIONS[code], int(idx)
