"""Tests for search-space encoding, decoding, sampling, and the preset."""

import json

import numpy as np
import pytest
from scipy import stats

from boffin.space import ParameterSpec, SearchSpace, boffin_preset


def _mixed_space() -> SearchSpace:
    return SearchSpace(
        params=(
            ParameterSpec("lr", "continuous", 1e-5, 1e-1, scale="log"),
            ParameterSpec("width", "integer", 1, 9),
            ParameterSpec("ratio", "continuous", 0.0, 1.0),
            ParameterSpec("cell", "categorical", choices=("lstm", "gru", "rnn")),
        )
    )


class TestParameterSpec:
    def test_rejects_invalid_specs(self):
        """Constraint violations raise at construction time."""
        with pytest.raises(ValueError):
            ParameterSpec("x", "continuous", 1.0, 1.0)
        with pytest.raises(ValueError):
            ParameterSpec("x", "integer", 5, 2)
        with pytest.raises(ValueError):
            ParameterSpec("x", "continuous", -1.0, 1.0, scale="log")
        with pytest.raises(ValueError):
            ParameterSpec("x", "categorical", choices=("a", "a"))
        with pytest.raises(ValueError):
            ParameterSpec("x", "categorical", choices=())
        with pytest.raises(ValueError):
            ParameterSpec("x", "unknown", 0.0, 1.0)
        with pytest.raises(ValueError):
            ParameterSpec("x", "integer", 0.5, 2.0)

    def test_integer_degenerate_interval_allowed(self):
        """low == high is legal for integers and decodes to the single value."""
        p = ParameterSpec("epoch", "integer", 3, 3)
        assert p.decode_coord(0.0) == 3
        assert p.decode_coord(1.0) == 3
        assert p.encode_value(3) == 0.5


class TestEncode:
    def test_continuous_lower_bound_maps_to_zero(self):
        p = ParameterSpec("x", "continuous", 0.0, 10.0)
        assert p.encode_value(0.0) == 0.0

    def test_log_midpoint_in_decades(self):
        """1e-3 sits two decades above 1e-5 in a four-decade span."""
        p = ParameterSpec("lr", "continuous", 1e-5, 1e-1, scale="log")
        assert p.encode_value(1e-3) == pytest.approx(0.5, rel=1e-12)

    def test_categorical_bucket_centre(self):
        p = ParameterSpec("c", "categorical", choices=("a", "b"))
        assert p.encode_value("b") == 0.75

    def test_out_of_bounds_value_rejected(self):
        space = _mixed_space()
        bad = {"lr": 1.0, "width": 5, "ratio": 0.5, "cell": "gru"}
        with pytest.raises(ValueError, match="lr"):
            space.encode(bad)

    def test_unknown_and_missing_names_rejected(self):
        space = _mixed_space()
        with pytest.raises(ValueError, match="mismatch"):
            space.encode({"lr": 1e-3, "width": 5, "ratio": 0.5, "cell": "gru", "extra": 1})
        with pytest.raises(ValueError, match="mismatch"):
            space.encode({"lr": 1e-3})


class TestDecode:
    def test_integer_midpoint_rounds_to_five(self):
        p = ParameterSpec("w", "integer", 1, 9)
        assert p.decode_coord(0.5) == 5

    def test_categorical_top_coordinate_clamps_to_last_bucket(self):
        p = ParameterSpec("c", "categorical", choices=("a", "b", "c"))
        assert p.decode_coord(0.999) == "c"
        assert p.decode_coord(1.0) == "c"

    def test_dimension_mismatch_rejected(self):
        space = _mixed_space()
        with pytest.raises(ValueError):
            space.decode(np.array([0.5, 0.5]))

    def test_coordinates_outside_unit_cube_rejected(self):
        space = _mixed_space()
        with pytest.raises(ValueError):
            space.decode(np.array([0.5, 0.5, 1.5, 0.5]))

    def test_boundary_coordinates_decode_to_valid_configurations(self):
        """Every u in [0,1]^d decodes validly, including the corners."""
        space = _mixed_space()
        for corner in (np.zeros(4), np.ones(4)):
            config = space.decode(corner)
            space.validate(config)

    def test_round_trip_is_identity(self):
        """decode(encode(c)) returns c exactly for discrete values and to
        float precision for continuous ones."""
        space = _mixed_space()
        rng = np.random.default_rng(7)
        for _ in range(200):
            config = space.decode(rng.random(space.dimension))
            back = space.decode(space.encode(config))
            assert back["width"] == config["width"]
            assert back["cell"] == config["cell"]
            assert back["lr"] == pytest.approx(config["lr"], rel=1e-12)
            assert back["ratio"] == pytest.approx(config["ratio"], rel=1e-12)


class TestSample:
    def test_zero_draws_give_empty_list(self):
        assert _mixed_space().sample(0, 0) == []

    def test_same_seed_gives_identical_lists(self):
        space = _mixed_space()
        assert space.sample(123, 8) == space.sample(123, 8)

    def test_uniform_mean_on_unit_interval(self):
        """Sampling is uniform in encoded space."""
        space = SearchSpace(params=(ParameterSpec("x", "continuous", 0.0, 1.0),))
        xs = [c["x"] for c in space.sample(99, 10_000)]
        assert abs(np.mean(xs) - 0.5) < 0.02

    def test_continuous_coordinates_pass_kolmogorov_smirnov(self):
        space = SearchSpace(
            params=(
                ParameterSpec("a", "continuous", 0.0, 1.0),
                ParameterSpec("b", "continuous", 2.0, 5.0),
                ParameterSpec("c", "continuous", 1e-3, 1e3, scale="log"),
            )
        )
        encoded = space.transform(space.sample(31, 2_000))
        for j in range(space.dimension):
            result = stats.kstest(encoded[:, j], "uniform")
            assert result.pvalue > 0.01, f"dimension {j} not uniform: {result}"


class TestSnap:
    def test_snap_matches_encode_of_decode(self):
        """Vectorised snap agrees with the per-row encode(decode(u)) path."""
        space = _mixed_space()
        rng = np.random.default_rng(11)
        U = rng.random((300, space.dimension))
        snapped = space.snap(U)
        for row, srow in zip(U, snapped):
            expected = space.encode(space.decode(row))
            np.testing.assert_allclose(srow, expected, rtol=1e-12, atol=1e-15)

    def test_snap_is_idempotent(self):
        space = _mixed_space()
        rng = np.random.default_rng(12)
        U = rng.random((200, space.dimension))
        once = space.snap(U)
        np.testing.assert_array_equal(space.snap(once), once)

    def test_snapped_rows_decode_to_the_same_configuration(self):
        space = _mixed_space()
        rng = np.random.default_rng(13)
        for _ in range(100):
            u = rng.random(space.dimension)
            assert space.decode(space.snap(u)) == space.decode(u)


class TestSearchSpace:
    def test_duplicate_names_rejected(self):
        p = ParameterSpec("x", "continuous", 0.0, 1.0)
        with pytest.raises(ValueError, match="duplicate"):
            SearchSpace(params=(p, p))

    def test_json_round_trip(self):
        space = _mixed_space()
        again = SearchSpace.from_json(space.to_json())
        assert again == space

    def test_json_document_shape(self):
        doc = json.loads(_mixed_space().to_json())
        assert list(doc) == ["params"]
        first = doc["params"][0]
        assert list(first) == ["name", "kind", "low", "high", "choices", "scale"]

    def test_transform_inverse_transform(self):
        space = _mixed_space()
        configs = space.sample(5, 6)
        U = space.transform(configs)
        assert U.shape == (6, space.dimension)
        back = space.inverse_transform(U)
        assert [c["cell"] for c in back] == [c["cell"] for c in configs]
        assert [c["width"] for c in back] == [c["width"] for c in configs]


class TestBoffinPreset:
    def test_dimension_is_nine(self):
        assert boffin_preset().dimension == 9

    def test_mixing_ratio_bounds(self):
        p = boffin_preset()["mixing_ratio"]
        assert (p.low, p.high) == (0.0, 1.0)

    def test_integer_kinds(self):
        space = boffin_preset(max_epoch=50)
        assert space["batch_size"].kind == "integer"
        assert space["base_epoch"].kind == "integer"
        assert space["base_epoch"].high == 50

    def test_every_sampled_configuration_round_trips(self):
        space = boffin_preset()
        for config in space.sample(21, 50):
            back = space.decode(space.encode(config))
            assert back["batch_size"] == config["batch_size"]
            assert back["base_epoch"] == config["base_epoch"]
            for name in ("learning_rate", "decay_factor", "grad_clip_threshold",
                         "dropout", "zoneout_cell", "zoneout_output", "mixing_ratio"):
                assert back[name] == pytest.approx(config[name], rel=1e-12)
