import pytest

from powlab.features import FeatureConfig
from powlab.training import TrainingConfig, train_indicator

# Small feature geometry so history fills in tens of blocks, not thousands.
TINY_FEATURES = FeatureConfig(stride=5, count=3, window=20)


@pytest.fixture(scope="session")
def tiny_model():
    """Cheap trained indicator for wiring tests (not statistics-grade)."""
    cfg = TrainingConfig(
        target_block_time=13.0,
        samples_per_class=40,
        eval_samples_per_class=0,
        epochs=300,
        seed=7,
    )
    model, _ = train_indicator(cfg, TINY_FEATURES)
    return model


@pytest.fixture(scope="session")
def tiny_model_file(tiny_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "tiny_model.json"
    tiny_model.save(path)
    return path
