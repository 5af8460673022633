"""Tests for manifest I/O, holdout splitting, rehearsal mixing, and the
early-stopping monitor."""

import json
import math

import pytest

from boffin.corpus import (
    CSV_HEADER,
    EarlyStopState,
    ManifestError,
    MixPlan,
    early_stop_update,
    mix,
    read_manifest,
    split_holdout,
    validate_manifest,
    write_manifest,
)


def make_entries(n, speaker="spk_a", prefix="utt"):
    return [
        {
            "utterance_id": f"{prefix}_{i:04d}",
            "speaker_id": speaker,
            "audio_path": f"audio/{prefix}_{i:04d}.wav",
            "text": f"sentence number {i}",
            "duration_s": 1.0 + 0.1 * i,
        }
        for i in range(n)
    ]


def ids(entries):
    return [e["utterance_id"] for e in entries]


class TestManifestIO:
    def test_jsonl_round_trip(self, tmp_path):
        entries = make_entries(7)
        path = tmp_path / "manifest.jsonl"
        write_manifest(entries, path)
        assert read_manifest(path) == entries

    def test_csv_round_trip(self, tmp_path):
        entries = make_entries(5)
        path = tmp_path / "manifest.csv"
        write_manifest(entries, path)
        loaded = read_manifest(path)
        assert loaded == entries
        assert path.read_text().splitlines()[0] == CSV_HEADER

    def test_csv_round_trip_keeps_origin_column(self, tmp_path):
        entries = [{**e, "origin": "target"} for e in make_entries(3)]
        path = tmp_path / "mixed.csv"
        write_manifest(entries, path)
        assert read_manifest(path) == entries

    def test_malformed_jsonl_line_reports_line_number(self, tmp_path):
        lines = [json.dumps(e) for e in make_entries(20)]
        lines[16] = "{not json"
        path = tmp_path / "broken.jsonl"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ManifestError, match="line 17"):
            read_manifest(path)

    def test_missing_field_reports_line_number(self, tmp_path):
        entries = make_entries(4)
        del entries[2]["text"]
        path = tmp_path / "short.jsonl"
        path.write_text("\n".join(json.dumps(e) for e in entries) + "\n")
        with pytest.raises(ManifestError, match="line 3"):
            read_manifest(path)

    def test_csv_missing_header_field_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("utterance_id,speaker_id,audio_path,text\nu0,s,a.wav,hi\n")
        with pytest.raises(ManifestError, match="duration_s"):
            read_manifest(path)

    def test_nonpositive_duration_rejected(self, tmp_path):
        entries = make_entries(3)
        entries[1]["duration_s"] = 0.0
        path = tmp_path / "zero.jsonl"
        write_manifest(entries, path)
        with pytest.raises(ManifestError, match="duration_s"):
            read_manifest(path)

    def test_validate_rejects_duplicate_ids(self):
        entries = make_entries(3) + make_entries(1)
        with pytest.raises(ManifestError, match="duplicate"):
            validate_manifest(entries)
        validate_manifest(entries, allow_duplicate_ids=True)


class TestSplitHoldout:
    def test_hundred_utterances_fraction_point_two(self):
        entries = make_entries(100)
        train, validation = split_holdout(entries, fraction=0.2, seed=0)
        assert len(train) == 80
        assert len(validation) == 20

    def test_three_utterances_fraction_half_rounds_up(self):
        train, validation = split_holdout(make_entries(3), fraction=0.5, seed=0)
        assert len(validation) == 2
        assert len(train) == 1

    def test_same_seed_identical_split(self):
        entries = make_entries(50)
        first = split_holdout(entries, fraction=0.3, seed=7)
        second = split_holdout(entries, fraction=0.3, seed=7)
        assert first == second

    def test_partition_no_loss_no_duplication(self):
        entries = make_entries(40)
        for seed in range(20):
            train, validation = split_holdout(entries, fraction=0.25, seed=seed)
            assert sorted(ids(train) + ids(validation)) == sorted(ids(entries))
            assert not set(ids(train)) & set(ids(validation))

    def test_original_order_preserved_in_both_parts(self):
        entries = make_entries(30)
        order = {uid: i for i, uid in enumerate(ids(entries))}
        train, validation = split_holdout(entries, fraction=0.4, seed=3)
        for part in (train, validation):
            positions = [order[uid] for uid in ids(part)]
            assert positions == sorted(positions)

    def test_empty_manifest_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            split_holdout([], fraction=0.2, seed=0)

    def test_fraction_out_of_range_rejected(self):
        entries = make_entries(10)
        for fraction in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError, match="fraction"):
                split_holdout(entries, fraction=fraction, seed=0)


class TestMix:
    def test_ratio_zero_returns_target_exactly(self):
        target = make_entries(12)
        base = make_entries(30, speaker="spk_base", prefix="base")
        out = mix(MixPlan(target=target, base=base, ratio=0.0, seed=0))
        assert out == target

    def test_half_ratio_doubles_the_corpus(self):
        target = make_entries(80)
        base = make_entries(200, speaker="spk_base", prefix="base")
        out = mix(MixPlan(target=target, base=base, ratio=0.5, seed=0))
        assert len(out) == 160
        assert sum(e["origin"] == "base" for e in out) == 80
        assert sum(e["origin"] == "target" for e in out) == 80

    def test_target_entries_all_present_in_order(self):
        target = make_entries(15)
        base = make_entries(60, speaker="spk_base", prefix="base")
        out = mix(MixPlan(target=target, base=base, ratio=0.4, seed=5))
        kept = [e for e in out if e["origin"] == "target"]
        assert [e["utterance_id"] for e in kept] == ids(target)

    def test_same_seed_identical_mix(self):
        target = make_entries(20)
        base = make_entries(100, speaker="spk_base", prefix="base")
        plan = MixPlan(target=target, base=base, ratio=0.3, seed=11)
        assert mix(plan) == mix(plan)

    def test_base_fraction_within_one_utterance(self):
        # Property sweep from the composition formula: the realised base
        # fraction never misses the request by more than one utterance.
        base = make_entries(5000, speaker="spk_base", prefix="base")
        for ratio in [0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9]:
            for n_target in [1, 2, 3, 7, 50, 137, 500]:
                target = make_entries(n_target)
                out = mix(MixPlan(target=target, base=base, ratio=ratio, seed=1))
                b = len(out) - n_target
                ideal = ratio * n_target / (1.0 - ratio)
                assert abs(b - ideal) <= 0.5 + 1e-9
                realised = b / len(out)
                assert abs(realised - ratio) <= 1.0 / len(out) + 1e-9

    def test_small_base_pool_warns_and_draws_with_replacement(self):
        target = make_entries(10)
        base = make_entries(5, speaker="spk_base", prefix="base")
        plan = MixPlan(target=target, base=base, ratio=0.9, seed=2)
        with pytest.warns(UserWarning, match="replacement"):
            out = mix(plan)
        assert len(out) == 100
        drawn = [e for e in out if e["origin"] == "base"]
        assert len(drawn) == 90
        assert {e["utterance_id"] for e in drawn} <= set(ids(base))

    def test_large_base_pool_draws_without_replacement(self):
        target = make_entries(40)
        base = make_entries(500, speaker="spk_base", prefix="base")
        out = mix(MixPlan(target=target, base=base, ratio=0.5, seed=9))
        drawn = ids([e for e in out if e["origin"] == "base"])
        assert len(drawn) == len(set(drawn))

    def test_ratio_one_rejected(self):
        plan_kwargs = dict(target=make_entries(5), base=make_entries(5, prefix="b"))
        with pytest.raises(ValueError, match="ratio 1"):
            mix(MixPlan(ratio=1.0, seed=0, **plan_kwargs))

    def test_ratio_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="ratio"):
            MixPlan(target=make_entries(2), base=(), ratio=1.2, seed=0)

    def test_empty_target_rejected(self):
        with pytest.raises(ValueError, match="target"):
            mix(MixPlan(target=(), base=make_entries(5), ratio=0.5, seed=0))

    def test_empty_base_with_positive_draw_rejected(self):
        with pytest.raises(ValueError, match="base"):
            mix(MixPlan(target=make_entries(10), base=(), ratio=0.5, seed=0))


class TestEarlyStop:
    def run_stream(self, losses, patience, min_delta=0.0):
        state = EarlyStopState(patience=patience, min_delta=min_delta)
        flags = []
        for step, loss in enumerate(losses):
            state, should_stop = early_stop_update(state, step, loss)
            flags.append(should_stop)
        return state, flags

    def test_hand_traced_stream_stops_after_fifth_value(self):
        losses = [1.0, 0.9, 0.95, 0.96, 0.97]
        state, flags = self.run_stream(losses, patience=2)
        assert flags == [False, False, False, False, True]
        assert state.best_loss == 0.9
        assert state.best_step == 1

    def test_strictly_decreasing_never_stops(self):
        losses = [1.0 / (k + 1) for k in range(50)]
        _, flags = self.run_stream(losses, patience=0)
        assert not any(flags)

    def test_patience_zero_stops_on_first_non_improvement(self):
        _, flags = self.run_stream([1.0, 1.0], patience=0)
        assert flags == [False, True]

    def test_min_delta_requires_material_improvement(self):
        # 0.95 improves on 1.0 in raw terms but not by more than 0.1.
        _, flags = self.run_stream([1.0, 0.95, 0.94], patience=1, min_delta=0.1)
        assert flags == [False, False, True]

    def test_counter_resets_on_improvement(self):
        losses = [1.0, 1.1, 0.5, 0.6, 0.7, 0.8]
        _, flags = self.run_stream(losses, patience=2)
        assert flags == [False, False, False, False, False, True]

    def test_stops_exactly_once_and_tracks_stream_minimum(self):
        import numpy as np

        rng = np.random.default_rng(0)
        for trial in range(30):
            losses = rng.uniform(0.0, 2.0, size=40).tolist()
            patience = int(rng.integers(0, 5))
            state = EarlyStopState(patience=patience)
            stops = 0
            for step, loss in enumerate(losses):
                state, should_stop = early_stop_update(state, step, loss)
                if should_stop:
                    stops += 1
                    break
                assert state.steps_since_improvement <= state.patience
            seen = losses[: state.last_step + 1]
            assert state.best_loss == min(seen)
            assert stops in (0, 1)

    def test_non_monotone_step_rejected(self):
        state = EarlyStopState(patience=3)
        state, _ = early_stop_update(state, step=5, validation_loss=1.0)
        with pytest.raises(ValueError, match="step"):
            early_stop_update(state, step=5, validation_loss=0.9)

    def test_non_finite_loss_rejected(self):
        state = EarlyStopState(patience=3)
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(ValueError, match="finite"):
                early_stop_update(state, step=0, validation_loss=bad)

    def test_default_patience_is_five(self):
        assert EarlyStopState().patience == 5
        assert EarlyStopState().min_delta == 0.0
