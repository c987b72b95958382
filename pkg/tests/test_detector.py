"""Stream detector: config validation, warm-up, classification, determinism.

Warm-up predictions are replayed against an independent stream built from
the same seed, and the classifier is compared with a brute-force
reimplementation over random histories.
"""

import math

import numpy as np
import pytest

from esnn_anomaly import ConfigError, Detector, DetectorConfig, classify_anomaly
from esnn_anomaly.detector import ErrorHistory
from esnn_anomaly.rng import WARMUP_STREAM, SplitStream


def config(**overrides):
    return DetectorConfig(**{"window_size": 10, "seed": 7, **overrides})


def two_pass_stats(values):
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, var


class TestConfigValidation:
    def test_defaults_are_valid(self):
        DetectorConfig().validate()

    @pytest.mark.parametrize(
        "field,value",
        [
            ("window_size", 0),
            ("window_size", 2.5),
            ("ni_size", 2),
            ("no_size", 0),
            ("ts", 0.0),
            ("mod", 0.0),
            ("mod", 1.0),
            ("c", 0.0),
            ("c", 1.5),
            ("sim", 0.0),
            ("xi", 0.0),
            ("xi", 1.1),
            ("epsilon", 1.99),
            ("seed", -1),
            ("seed", 1 << 64),
            ("deviation", "stdev"),
            ("correction_target", "both"),
        ],
    )
    def test_each_field_is_checked(self, field, value):
        bad = DetectorConfig(**{field: value})
        with pytest.raises(ConfigError, match=field):
            bad.validate()

    def test_all_problems_reported_together(self):
        bad = DetectorConfig(window_size=0, epsilon=0.0, deviation="no")
        with pytest.raises(ConfigError) as err:
            bad.validate()
        message = str(err.value)
        assert "window_size" in message
        assert "epsilon" in message
        assert "deviation" in message

    def test_detector_rejects_bad_config(self):
        with pytest.raises(ConfigError):
            Detector(DetectorConfig(window_size=0))


class TestWarmup:
    def test_batch_emitted_when_window_fills(self):
        det = Detector(config(window_size=5))
        xs = [1.0, 4.0, 2.0, 8.0, 5.0]
        for x in xs[:-1]:
            assert det.step(x) == []
        batch = det.step(xs[-1])
        assert [r.t for r in batch] == [0, 1, 2, 3, 4]
        assert [r.x for r in batch] == xs
        assert all(r.u is False for r in batch)
        assert all(r.y is not None and math.isfinite(r.y) for r in batch)
        assert all(r.e == abs(r.x - r.y) for r in batch)

    def test_predictions_drawn_from_full_window_stats(self):
        xs = [3.1, -0.4, 2.2, 0.9, 5.5, 1.0]
        det = Detector(config(window_size=6, seed=123))
        batch = det.run(xs)
        mean, var = two_pass_stats(xs)
        stream = SplitStream(123, WARMUP_STREAM)
        want = [stream.normal(mean, math.sqrt(var)) for _ in xs]
        assert [r.y for r in batch] == want

    def test_variance_deviation_changes_draw_scale(self):
        xs = [3.1, -0.4, 2.2, 0.9, 5.5, 1.0]
        det = Detector(config(window_size=6, seed=123, deviation="variance"))
        batch = det.run(xs)
        mean, var = two_pass_stats(xs)
        stream = SplitStream(123, WARMUP_STREAM)
        want = [stream.normal(mean, var) for _ in xs]
        assert [r.y for r in batch] == want

    def test_flush_emits_partial_window(self):
        xs = [2.0, 4.0, 6.0]
        det = Detector(config(window_size=10, seed=9))
        for x in xs:
            assert det.step(x) == []
        batch = det.flush()
        assert [r.t for r in batch] == [0, 1, 2]
        mean, var = two_pass_stats(xs)
        stream = SplitStream(9, WARMUP_STREAM)
        assert [r.y for r in batch] == [stream.normal(mean, math.sqrt(var)) for _ in xs]
        assert det.flush() == []

    def test_flush_after_warm_is_empty(self):
        det = Detector(config(window_size=3))
        det.run([1.0, 2.0, 3.0, 4.0])
        assert det.flush() == []

    def test_single_value_window(self):
        det = Detector(config(window_size=1))
        first = det.step(5.0)
        assert len(first) == 1
        assert first[0].t == 0
        assert first[0].u is False
        second = det.step(5.0)
        assert len(second) == 1
        # nothing stored yet, so the first live step cannot fire
        assert second[0].y is None


class TestStreaming:
    def test_first_live_record_has_no_prediction(self):
        det = Detector(config(window_size=4))
        records = det.run([1.0, 2.0, 3.0, 4.0, 5.0])
        live = records[4]
        assert live.t == 4
        assert live.y is None
        assert live.e == math.inf
        assert live.u is True

    def test_run_equals_manual_stepping(self):
        rng = np.random.default_rng(55)
        xs = rng.normal(0.0, 1.0, 60).tolist()
        auto = Detector(config()).run(xs)
        manual_det = Detector(config())
        manual = []
        for x in xs:
            manual.extend(manual_det.step(x))
        manual.extend(manual_det.flush())
        assert auto == manual

    def test_identical_configs_replay_identically(self):
        rng = np.random.default_rng(101)
        xs = rng.normal(5.0, 2.0, 120).tolist()
        a = Detector(config(seed=42)).run(xs)
        b = Detector(config(seed=42)).run(xs)
        assert a == b

    def test_seed_changes_predictions(self):
        rng = np.random.default_rng(101)
        xs = rng.normal(5.0, 2.0, 40).tolist()
        a = Detector(config(seed=1)).run(xs)
        b = Detector(config(seed=2)).run(xs)
        assert a != b

    def test_record_invariants(self):
        rng = np.random.default_rng(8)
        xs = np.concatenate(
            [rng.normal(0, 1, 80), [25.0], rng.normal(0, 1, 40)]
        ).tolist()
        records = Detector(config()).run(xs)
        assert len(records) == len(xs)
        assert [r.t for r in records] == list(range(len(xs)))
        for r in records:
            assert (r.y is None) == math.isinf(r.e)
            if r.y is None:
                assert r.u is True
            else:
                assert r.e == abs(r.x - r.y)

    def test_obvious_spike_is_flagged(self):
        rng = np.random.default_rng(3)
        xs = np.sin(np.arange(400) * 0.07) + rng.normal(0, 0.03, 400)
        xs[300] += 8.0
        records = Detector(config(window_size=50, seed=11)).run(xs.tolist())
        assert records[300].u is True

    def test_steps_seen_counts_accepted_values(self):
        det = Detector(config(window_size=3))
        assert det.steps_seen == 0
        det.step(1.0)
        det.step(2.0)
        assert det.steps_seen == 2

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), float("-inf")])
    def test_non_finite_input_rejected_without_state_change(self, bad):
        det = Detector(config(window_size=3))
        det.step(1.0)
        with pytest.raises(ValueError, match="non-finite"):
            det.step(bad)
        assert det.steps_seen == 1
        # the stream continues as if the bad value never arrived
        det.step(2.0)
        batch = det.step(3.0)
        assert [r.x for r in batch] == [1.0, 2.0, 3.0]

    def test_run_names_failing_index(self):
        det = Detector(config(window_size=3))
        with pytest.raises(ValueError, match="value at index 2"):
            det.run([1.0, 2.0, float("nan")])

    def test_correction_target_changes_behavior(self):
        rng = np.random.default_rng(21)
        xs = rng.normal(0.0, 1.0, 200).tolist()
        cand = Detector(config(seed=5, correction_target="candidate")).run(xs)
        fired = Detector(config(seed=5, correction_target="fired")).run(xs)
        assert cand != fired
        default = Detector(config(seed=5)).run(xs)
        assert default == cand


class TestConstantStream:
    def test_default_threshold_flags_constant_tail(self):
        xs = [5.0] * 40
        records = Detector(config(window_size=10)).run(xs)
        warm, live = records[:10], records[10:]
        assert all(r.u is False for r in warm)
        assert all(r.e == 0.0 for r in warm)
        # zero deviation and zero excess meet a non-strict threshold, so the
        # flags self-perpetuate; the only quiet steps are those whose whole
        # look-back history is already flagged (nothing left to score against),
        # which recurs every window length
        quiet = {19, 29, 39}
        for r in live:
            assert r.u is (r.t not in quiet)

    def test_strict_threshold_stays_quiet(self):
        xs = [5.0] * 40
        records = Detector(config(window_size=10, strict_threshold=True)).run(xs)
        live = records[10:]
        # only the first live value lacks a neuron to predict it
        assert live[0].u is True
        assert all(r.u is False for r in live[1:])
        assert all(r.y == 5.0 and r.e == 0.0 for r in live[1:])


class TestClassifier:
    def brute_force(self, errors, flags, e_t, epsilon, deviation, strict):
        kept = [e for e, f in zip(errors, flags) if not f]
        if not kept:
            return False
        mean = sum(kept) / len(kept)
        var = sum((e - mean) ** 2 for e in kept) / len(kept)
        dev = math.sqrt(var) if deviation == "std" else var
        diff = e_t - mean
        return diff > epsilon * dev if strict else diff >= epsilon * dev

    @pytest.mark.parametrize("deviation", ["std", "variance"])
    @pytest.mark.parametrize("strict", [False, True])
    def test_matches_brute_force(self, deviation, strict):
        rng = np.random.default_rng(1000)
        for _ in range(200):
            n = int(rng.integers(1, 40))
            errors = rng.exponential(1.0, n).tolist()
            flags = (rng.random(n) < 0.3).tolist()
            e_t = float(rng.exponential(2.0))
            want = self.brute_force(errors, flags, e_t, 2.5, deviation, strict)
            got = classify_anomaly(
                errors, flags, e_t, epsilon=2.5, deviation=deviation, strict=strict
            )
            assert got == want

    def test_empty_history_is_never_anomalous(self):
        assert classify_anomaly([], [], 100.0, epsilon=2.0) is False

    def test_fully_flagged_history_is_never_anomalous(self):
        assert classify_anomaly([1.0, 2.0], [True, True], 100.0, epsilon=2.0) is False

    def test_zero_deviation_boundary(self):
        errors, flags = [1.0, 1.0, 1.0], [False, False, False]
        assert classify_anomaly(errors, flags, 1.0, epsilon=3.0) is True
        assert classify_anomaly(errors, flags, 1.0, epsilon=3.0, strict=True) is False
        assert classify_anomaly(errors, flags, 0.9, epsilon=3.0) is False

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="equal length"):
            classify_anomaly([1.0], [], 0.0, epsilon=2.0)

    def test_unknown_deviation_rejected(self):
        with pytest.raises(ValueError, match="deviation"):
            classify_anomaly([1.0], [False], 0.0, epsilon=2.0, deviation="mad")


class TestErrorHistory:
    def test_ring_evicts_oldest(self):
        hist = ErrorHistory(3)
        for i in range(5):
            hist.append(float(i), False)
        assert len(hist) == 3
        kept = sorted(
            hist.errors[(hist.head + i) % hist.capacity] for i in range(hist.count)
        )
        assert kept == [2.0, 3.0, 4.0]

    def test_zero_capacity_ignores_appends(self):
        hist = ErrorHistory(0)
        hist.append(1.0, False)
        assert len(hist) == 0
        assert hist.capacity == 0

    def test_negative_capacity_rejected(self):
        with pytest.raises(ValueError):
            ErrorHistory(-1)

    def test_detector_history_spans_window_minus_one(self):
        det = Detector(config(window_size=8))
        assert det.history.capacity == 7
