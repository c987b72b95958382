"""Online unsupervised anomaly detection for univariate streams.

An evolving spiking network reads one value at a time, predicts it from a
small repository of learned neurons, and flags values whose prediction error
stands out against recent history. No labels, no separate training phase:
the model adapts continuously as the stream drifts.
"""

from .detector import (
    ConfigError,
    DetectionRecord,
    Detector,
    DetectorConfig,
    classify_anomaly,
)
from .encoding import GrfEncoder, SlidingWindow
from .evaluation import (
    ConfusionCounts,
    LabelSet,
    MetricsReport,
    expand_labels,
    score,
)
from .harness import (
    DatasetError,
    DatasetSpec,
    GridSpec,
    LoadedSeries,
    derive_cell_seed,
    grid_search,
    load_series,
    run_bench,
    write_reports,
)
from .repository import (
    NeuronParams,
    NeuronRepository,
    OutputNeuron,
    firing_threshold,
    max_psp,
    value_correction,
    weight_sum_limit,
)
from .rng import SplitStream

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConfusionCounts",
    "DatasetError",
    "DatasetSpec",
    "DetectionRecord",
    "Detector",
    "DetectorConfig",
    "GridSpec",
    "GrfEncoder",
    "LabelSet",
    "LoadedSeries",
    "MetricsReport",
    "NeuronParams",
    "NeuronRepository",
    "OutputNeuron",
    "SlidingWindow",
    "SplitStream",
    "classify_anomaly",
    "derive_cell_seed",
    "expand_labels",
    "firing_threshold",
    "grid_search",
    "load_series",
    "max_psp",
    "run_bench",
    "score",
    "value_correction",
    "weight_sum_limit",
    "write_reports",
]
