import pytest

from mondeq_export.train import TrainConfig, train_and_export


@pytest.fixture(scope="session")
def trained(tmp_path_factory):
    """Train once per session; returns (config, model_path, parity_path)."""
    cfg = TrainConfig()
    model_path, parity_path = train_and_export(cfg, tmp_path_factory.mktemp("export"))
    return cfg, model_path, parity_path
