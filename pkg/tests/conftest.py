"""Shared fixtures built on the worked two-neuron example."""

import pytest

from helpers import two_neuron_model


@pytest.fixture
def demo_model():
    return two_neuron_model()


@pytest.fixture
def demo_model_file(tmp_path):
    from fpcert import model_io

    path = tmp_path / "demo_model.json"
    model_io.save_model(two_neuron_model(), path)
    return str(path)
