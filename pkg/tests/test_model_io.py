"""Model and dataset serialization round-trips and diagnostics."""

import json

import numpy as np
import pytest

from fpcert import model_io, mondeq
from fpcert.errors import ParseError, ShapeMismatch

from helpers import two_neuron_model


class TestModelRoundTrip:
    def test_demo_model_reproduces_recurrence(self, demo_model_file):
        model = model_io.load_model(demo_model_file)
        weights = mondeq.build_weights(model)
        assert np.allclose(weights.W, [[-4.0, -1.0], [1.0, -4.0]])

    def test_value_identity_for_random_models(self, tmp_path):
        for i in range(100):
            model = mondeq.random_monotone_model(
                int(1 + i % 5), int(1 + i % 3), int(1 + i % 2), 4.0 + i, seed=i
            )
            path = tmp_path / f"m{i}.json"
            model_io.save_model(model, path)
            loaded = model_io.load_model(path)
            for name in ("P", "Q", "U", "bias", "V", "v"):
                assert np.array_equal(getattr(model, name), getattr(loaded, name))
            assert loaded.m == model.m

    def test_byte_stable_after_normalization(self, tmp_path):
        model = mondeq.random_monotone_model(3, 2, 2, 4.0, seed=0)
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        model_io.save_model(model, p1)
        model_io.save_model(model_io.load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestModelDiagnostics:
    def test_truncated_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"format_version": "1", "p": 2')
        with pytest.raises(ParseError):
            model_io.load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            model_io.load_model(tmp_path / "absent.json")

    def test_missing_field(self):
        raw = model_io.model_to_dict(two_neuron_model())
        del raw["bias"]
        with pytest.raises(ParseError, match="bias"):
            model_io.model_from_dict(raw)

    def test_wrong_format_version(self):
        raw = model_io.model_to_dict(two_neuron_model())
        raw["format_version"] = "2"
        with pytest.raises(ParseError, match="format_version"):
            model_io.model_from_dict(raw)

    def test_shape_mismatch(self):
        raw = model_io.model_to_dict(two_neuron_model())
        raw["U"] = raw["U"][:-1]
        with pytest.raises(ShapeMismatch, match="U"):
            model_io.model_from_dict(raw)

    def test_non_positive_m(self):
        raw = model_io.model_to_dict(two_neuron_model())
        raw["m"] = -1.0
        with pytest.raises(ParseError, match="m"):
            model_io.model_from_dict(raw)


class TestDataset:
    def test_single_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0.2,0.5,1\n")
        rows = model_io.load_dataset(path, q=2)
        assert len(rows) == 1
        x, label = rows[0]
        assert np.array_equal(x, [0.2, 0.5]) and label == 1

    def test_header_skipped_order_preserved(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("f1,f2,label\n0.1,0.2,0\n0.3,0.4,1\n")
        rows = model_io.load_dataset(path)
        assert [label for _, label in rows] == [0, 1]
        assert np.array_equal(rows[1][0], [0.3, 0.4])

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        assert model_io.load_dataset(path) == []

    def test_wrong_arity_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0.1,0.2,0\n0.3,1\n")
        with pytest.raises(ParseError, match="row 1"):
            model_io.load_dataset(path)

    def test_wrong_expected_width(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0.1,0.2,0\n")
        with pytest.raises(ParseError):
            model_io.load_dataset(path, q=3)
